#pragma once

#include <string>
#include <vector>

#include "blindrestore/codec.hpp"
#include "blindrestore/grad.hpp"
#include "blindrestore/rng.hpp"
#include "blindrestore/tensor.hpp"

namespace blindrestore {

enum class GtKind { ConvKernel, DctQuantize, Downsample, GrayProject };

// Fixed degradations used to synthesize measurements. Convolutions use the
// project-wide reflect padding; dct-quantize is blockwise 8x8, idempotent by
// construction (no pixel rounding anywhere inside).
struct GroundTruthOperator {
    GtKind kind = GtKind::ConvKernel;
    Tensor kernel;              // conv only: nonnegative, sums to 1
    double quant_factor = 1.0;  // dct-quantize only
    int factor = 2;             // downsample only

    static GroundTruthOperator conv(Tensor kernel);
    static GroundTruthOperator dct_quantize(double quant_factor);
    static GroundTruthOperator downsample(int factor);
    static GroundTruthOperator gray_project();

    Shape output_shape(const Shape& in) const;
    std::string kind_name() const;
};

Image apply_gt(const GroundTruthOperator& op, const Image& x);

struct Measurement {
    Image y;
    double noise_std = 0.0;
    std::string provenance;  // operator kind + seed
};

// y = A(x) + sigma * eps with a seeded standard normal draw
Measurement make_measurement(const GroundTruthOperator& op, const Image& x, double sigma,
                             uint64_t seed);

// centered k x k Gaussian kernel, normalized to sum 1
Tensor gaussian_kernel(int size, double std);
// centered Dirac kernel
Tensor dirac_kernel(int size);

enum class SurrogateFamily { Kernel, Neural };

// Learnable stand-in for the degradation. The kernel family is a single
// unconstrained k x k convolution shared across channels; the neural family
// is a small three-level encoder-decoder with two 3x3 conv blocks per level
// and ReLU activations (no input-to-output skip, so zero weights give a zero
// image). Parameters live in one flat vector addressed by the manifest, so
// initialization is reproducible from a seed alone.
class SurrogateOperator {
public:
    struct ParamBlock {
        std::string name;
        Shape shape;
        int64_t offset;
    };

    static SurrogateOperator kernel(int kernel_size);
    static SurrogateOperator neural(int channels, std::vector<int> widths);  // widths: 3 levels

    SurrogateFamily family() const { return family_; }
    int kernel_size() const { return kernel_size_; }
    int64_t param_count() const { return param_count_; }
    const std::vector<ParamBlock>& manifest() const { return manifest_; }

    Tensor init_random(uint64_t seed) const;  // kernel: |N(0,1)| simplex; neural: He weights
    Tensor init_dirac() const;                // kernel family only
    Tensor init_gaussian(double std) const;   // kernel family only

    // differentiable forward pass on an existing tape
    grad::Var build(grad::Tape& tape, grad::Var params, grad::Var x) const;
    // plain forward
    Image apply(const Tensor& params, const Image& x) const;

    void check_params(const Tensor& params) const;

private:
    SurrogateOperator() = default;
    SurrogateFamily family_ = SurrogateFamily::Kernel;
    int kernel_size_ = 0;
    int channels_ = 1;
    std::vector<int> widths_;
    std::vector<ParamBlock> manifest_;
    int64_t param_count_ = 0;
};

// ||y - A(D(z0))||^2 + lambda_phi * ||phi||_1
double operator_loss(const SurrogateOperator& surrogate, const Tensor& phi, const Latent& z0,
                     const Codec& codec, const Image& y, double lambda_phi);

// kernel-family projection: clamp negatives, renormalize to sum 1; all
// entries <= 0 falls back to the centered Dirac
Tensor project_kernel(const Tensor& phi);

}  // namespace blindrestore
