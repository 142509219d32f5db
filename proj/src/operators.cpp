#include "blindrestore/operators.hpp"

#include <cmath>
#include <stdexcept>

#include "blindrestore/convolve.hpp"

namespace blindrestore {

namespace {

// Annex-K style luminance table; steps scale linearly with quant_factor.
constexpr double kBaseQuant[8][8] = {
    {16, 11, 10, 16, 24, 40, 51, 61},
    {12, 12, 14, 19, 26, 58, 60, 55},
    {14, 13, 16, 24, 40, 57, 69, 56},
    {14, 17, 22, 29, 51, 87, 80, 62},
    {18, 22, 37, 56, 68, 109, 103, 77},
    {24, 35, 55, 64, 81, 104, 113, 92},
    {49, 64, 78, 87, 103, 121, 120, 101},
    {72, 92, 95, 98, 112, 100, 103, 99},
};

struct Dct8 {
    double c[8][8];  // orthonormal DCT-II basis, c[u][x]
    Dct8() {
        const double pi = 3.14159265358979323846;
        for (int u = 0; u < 8; ++u) {
            double a = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            for (int x = 0; x < 8; ++x) c[u][x] = a * std::cos((2 * x + 1) * u * pi / 16.0);
        }
    }
};

const Dct8& dct8() {
    static Dct8 d;
    return d;
}

// in-place on one 8x8 block, values in the shifted 255-domain
void dct_quantize_block(double* b, int64_t stride, double qf) {
    const Dct8& d = dct8();
    double tmp[8][8], coef[8][8];
    // coef = C * block * C^T
    for (int u = 0; u < 8; ++u)
        for (int x = 0; x < 8; ++x) {
            double s = 0.0;
            for (int y = 0; y < 8; ++y) s += d.c[u][y] * b[y * stride + x];
            tmp[u][x] = s;
        }
    for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) {
            double s = 0.0;
            for (int x = 0; x < 8; ++x) s += tmp[u][x] * d.c[v][x];
            double step = kBaseQuant[u][v] * qf;
            coef[u][v] = std::round(s / step) * step;
        }
    // block = C^T * coef * C
    for (int y = 0; y < 8; ++y)
        for (int v = 0; v < 8; ++v) {
            double s = 0.0;
            for (int u = 0; u < 8; ++u) s += d.c[u][y] * coef[u][v];
            tmp[y][v] = s;
        }
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            double s = 0.0;
            for (int v = 0; v < 8; ++v) s += tmp[y][v] * d.c[v][x];
            b[y * stride + x] = s;
        }
}

}  // namespace

GroundTruthOperator GroundTruthOperator::conv(Tensor kernel) {
    if (kernel.rank() != 2) throw std::invalid_argument("conv operator kernel must be rank 2");
    double s = 0.0;
    for (int64_t i = 0; i < kernel.numel(); ++i) {
        if (kernel[i] < 0.0) throw std::invalid_argument("conv operator kernel must be nonnegative");
        s += kernel[i];
    }
    if (std::abs(s - 1.0) > 1e-9)
        throw std::invalid_argument("conv operator kernel must sum to 1");
    GroundTruthOperator op;
    op.kind = GtKind::ConvKernel;
    op.kernel = std::move(kernel);
    return op;
}

GroundTruthOperator GroundTruthOperator::dct_quantize(double quant_factor) {
    if (!(quant_factor > 0.0)) throw std::invalid_argument("quant_factor must be positive");
    GroundTruthOperator op;
    op.kind = GtKind::DctQuantize;
    op.quant_factor = quant_factor;
    return op;
}

GroundTruthOperator GroundTruthOperator::downsample(int factor) {
    if (factor < 1) throw std::invalid_argument("downsample factor must be >= 1");
    GroundTruthOperator op;
    op.kind = GtKind::Downsample;
    op.factor = factor;
    return op;
}

GroundTruthOperator GroundTruthOperator::gray_project() {
    GroundTruthOperator op;
    op.kind = GtKind::GrayProject;
    return op;
}

Shape GroundTruthOperator::output_shape(const Shape& in) const {
    switch (kind) {
        case GtKind::ConvKernel:
        case GtKind::DctQuantize:
            return in;
        case GtKind::Downsample: {
            Shape out = in;
            out[out.size() - 2] /= factor;
            out[out.size() - 1] /= factor;
            return out;
        }
        case GtKind::GrayProject: {
            Shape out = in;
            if (out.size() == 3) out[0] = 1;
            return out;
        }
    }
    return in;
}

std::string GroundTruthOperator::kind_name() const {
    switch (kind) {
        case GtKind::ConvKernel: return "conv-kernel";
        case GtKind::DctQuantize: return "dct-quantize";
        case GtKind::Downsample: return "downsample";
        case GtKind::GrayProject: return "gray-project";
    }
    return "?";
}

Image apply_gt(const GroundTruthOperator& op, const Image& x) {
    if (x.rank() != 2 && x.rank() != 3)
        throw std::invalid_argument("apply_gt expects [H,W] or [C,H,W]");
    switch (op.kind) {
        case GtKind::ConvKernel:
            return conv2d_reflect(x, op.kernel);
        case GtKind::DctQuantize: {
            int64_t H = x.dim(-2), W = x.dim(-1);
            if (H % 8 || W % 8)
                throw std::invalid_argument("dct-quantize needs H and W divisible by 8");
            Tensor out(x.shape());
            int64_t planes = x.numel() / (H * W);
            for (int64_t p = 0; p < planes; ++p) {
                const double* xp = x.data() + p * H * W;
                double* op_ = out.data() + p * H * W;
                for (int64_t i = 0; i < H * W; ++i) op_[i] = xp[i] * 255.0 - 128.0;
                for (int64_t bi = 0; bi < H; bi += 8)
                    for (int64_t bj = 0; bj < W; bj += 8)
                        dct_quantize_block(op_ + bi * W + bj, W, op.quant_factor);
                for (int64_t i = 0; i < H * W; ++i) op_[i] = (op_[i] + 128.0) / 255.0;
            }
            return out;
        }
        case GtKind::Downsample: {
            int64_t H = x.dim(-2), W = x.dim(-1);
            int f = op.factor;
            if (H % f || W % f)
                throw std::invalid_argument("downsample needs H and W divisible by the factor");
            Shape oshape = op.output_shape(x.shape());
            Tensor out(oshape);
            int64_t oh = H / f, ow = W / f;
            int64_t planes = x.numel() / (H * W);
            for (int64_t p = 0; p < planes; ++p) {
                const double* xp = x.data() + p * H * W;
                double* o = out.data() + p * oh * ow;
                for (int64_t i = 0; i < oh; ++i)
                    for (int64_t j = 0; j < ow; ++j) {
                        double s = 0.0;
                        for (int u = 0; u < f; ++u)
                            for (int v = 0; v < f; ++v) s += xp[(i * f + u) * W + j * f + v];
                        o[i * ow + j] = s / (double)(f * f);
                    }
            }
            return out;
        }
        case GtKind::GrayProject: {
            if (x.rank() == 2) return x;
            int64_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
            Tensor out({1, H, W});
            for (int64_t i = 0; i < H * W; ++i) {
                double s = 0.0;
                for (int64_t c = 0; c < C; ++c) s += x[c * H * W + i];
                out[i] = s / (double)C;
            }
            return out;
        }
    }
    throw std::logic_error("unreachable");
}

Measurement make_measurement(const GroundTruthOperator& op, const Image& x, double sigma,
                             uint64_t seed) {
    if (sigma < 0.0) throw std::invalid_argument("make_measurement: sigma must be >= 0");
    Measurement m;
    m.y = apply_gt(op, x);
    m.noise_std = sigma;
    m.provenance = op.kind_name() + ":seed=" + std::to_string(seed);
    if (sigma > 0.0) {
        Rng rng(seed);
        for (int64_t i = 0; i < m.y.numel(); ++i) m.y[i] += sigma * rng.normal();
    }
    return m;
}

Tensor gaussian_kernel(int size, double std) {
    if (size < 1 || !(std > 0.0)) throw std::invalid_argument("gaussian_kernel: bad arguments");
    Tensor k({size, size});
    int c = size / 2;
    double s = 0.0;
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
            double d2 = (double)((i - c) * (i - c) + (j - c) * (j - c));
            k[i * size + j] = std::exp(-d2 / (2.0 * std * std));
            s += k[i * size + j];
        }
    for (int64_t i = 0; i < k.numel(); ++i) k[i] /= s;
    return k;
}

Tensor dirac_kernel(int size) {
    Tensor k({size, size});
    k[(size / 2) * size + size / 2] = 1.0;
    return k;
}

SurrogateOperator SurrogateOperator::kernel(int kernel_size) {
    if (kernel_size < 1) throw std::invalid_argument("kernel surrogate: size must be >= 1");
    SurrogateOperator s;
    s.family_ = SurrogateFamily::Kernel;
    s.kernel_size_ = kernel_size;
    s.manifest_ = {{"kernel", {kernel_size, kernel_size}, 0}};
    s.param_count_ = (int64_t)kernel_size * kernel_size;
    return s;
}

SurrogateOperator SurrogateOperator::neural(int channels, std::vector<int> widths) {
    if (widths.size() != 3) throw std::invalid_argument("neural surrogate: need 3 level widths");
    for (int w : widths)
        if (w < 1) throw std::invalid_argument("neural surrogate: widths must be >= 1");
    SurrogateOperator s;
    s.family_ = SurrogateFamily::Neural;
    s.kernel_size_ = 3;
    s.channels_ = channels;
    s.widths_ = std::move(widths);

    int a = s.widths_[0], b = s.widths_[1], c = s.widths_[2];
    int64_t off = 0;
    auto block = [&](const std::string& name, int oc, int ic) {
        s.manifest_.push_back({name + ".w", {oc, ic, 3, 3}, off});
        off += (int64_t)oc * ic * 9;
        s.manifest_.push_back({name + ".b", {oc}, off});
        off += oc;
    };
    block("enc1a", a, channels);
    block("enc1b", a, a);
    block("enc2a", b, a);
    block("enc2b", b, b);
    block("bota", c, b);
    block("botb", c, c);
    block("dec2a", b, c + b);
    block("dec2b", b, b);
    block("dec1a", a, b + a);
    block("dec1b", a, a);
    block("out", channels, a);
    s.param_count_ = off;
    return s;
}

void SurrogateOperator::check_params(const Tensor& params) const {
    if (params.numel() != param_count_)
        throw std::invalid_argument("surrogate params size " + std::to_string(params.numel()) +
                                    " does not match manifest size " + std::to_string(param_count_));
}

Tensor SurrogateOperator::init_random(uint64_t seed) const {
    Rng rng(seed);
    Tensor p({param_count_});
    if (family_ == SurrogateFamily::Kernel) {
        double s = 0.0;
        for (int64_t i = 0; i < p.numel(); ++i) {
            p[i] = std::abs(rng.normal());
            s += p[i];
        }
        for (int64_t i = 0; i < p.numel(); ++i) p[i] /= s;
        return p;
    }
    for (const ParamBlock& blk : manifest_) {
        bool is_weight = blk.shape.size() == 4;
        if (!is_weight) continue;  // biases start at zero
        double fan_in = (double)(blk.shape[1] * blk.shape[2] * blk.shape[3]);
        double scale = std::sqrt(2.0 / fan_in);
        for (int64_t i = 0; i < shape_numel(blk.shape); ++i)
            p[blk.offset + i] = scale * rng.normal();
    }
    return p;
}

Tensor SurrogateOperator::init_dirac() const {
    if (family_ != SurrogateFamily::Kernel)
        throw std::logic_error("init_dirac: kernel family only");
    Tensor k = dirac_kernel(kernel_size_);
    return Tensor({param_count_}, std::move(k.vec()));
}

Tensor SurrogateOperator::init_gaussian(double std) const {
    if (family_ != SurrogateFamily::Kernel)
        throw std::logic_error("init_gaussian: kernel family only");
    Tensor k = gaussian_kernel(kernel_size_, std);
    return Tensor({param_count_}, std::move(k.vec()));
}

grad::Var SurrogateOperator::build(grad::Tape& tape, grad::Var params, grad::Var x) const {
    check_params(tape.val(params));
    if (family_ == SurrogateFamily::Kernel) {
        grad::Var k = tape.slice(params, 0, {kernel_size_, kernel_size_});
        return tape.conv2d(x, k);
    }

    // neural family runs on [C,H,W]; rank-2 inputs pass through as one channel
    bool lifted = tape.val(x).rank() == 2;
    Shape flat_shape;
    if (lifted) {
        flat_shape = tape.val(x).shape();
        x = tape.reshape(x, {1, flat_shape[0], flat_shape[1]});
    }
    auto blk = [&](const char* name) -> const ParamBlock& {
        for (const ParamBlock& b : manifest_)
            if (b.name == name) return b;
        throw std::logic_error("missing manifest block");
    };
    auto conv = [&](grad::Var in, const char* base, bool act) {
        const ParamBlock& wb = blk((std::string(base) + ".w").c_str());
        const ParamBlock& bb = blk((std::string(base) + ".b").c_str());
        grad::Var w = tape.slice(params, wb.offset, wb.shape);
        grad::Var b = tape.slice(params, bb.offset, bb.shape);
        grad::Var out = tape.conv_block(in, w, b);
        return act ? tape.relu(out) : out;
    };

    grad::Var e1 = conv(conv(x, "enc1a", true), "enc1b", true);
    grad::Var e2 = conv(conv(tape.avg_pool2(e1), "enc2a", true), "enc2b", true);
    grad::Var bt = conv(conv(tape.avg_pool2(e2), "bota", true), "botb", true);
    grad::Var d2 = conv(conv(tape.concat_channels(tape.upsample_nearest2(bt), e2), "dec2a", true),
                        "dec2b", true);
    grad::Var d1 = conv(conv(tape.concat_channels(tape.upsample_nearest2(d2), e1), "dec1a", true),
                        "dec1b", true);
    grad::Var out = conv(d1, "out", false);
    if (lifted) out = tape.reshape(out, flat_shape);
    return out;
}

Image SurrogateOperator::apply(const Tensor& params, const Image& x) const {
    grad::Tape tape;
    grad::Var p = tape.leaf(params);
    grad::Var xv = tape.leaf(x);
    grad::Var out = build(tape, p, xv);
    return tape.val(out);
}

double operator_loss(const SurrogateOperator& surrogate, const Tensor& phi, const Latent& z0,
                     const Codec& codec, const Image& y, double lambda_phi) {
    Image decoded = codec.decode(z0);
    Image pred = surrogate.apply(phi, decoded);
    pred.check_same(y);
    double data = 0.0;
    for (int64_t i = 0; i < y.numel(); ++i) {
        double d = y[i] - pred[i];
        data += d * d;
    }
    return data + lambda_phi * sum_abs(phi);
}

Tensor project_kernel(const Tensor& phi) {
    Tensor out = phi;
    double s = 0.0;
    for (int64_t i = 0; i < out.numel(); ++i) {
        if (out[i] < 0.0) out[i] = 0.0;
        s += out[i];
    }
    if (s <= 0.0) {
        // all mass clamped away: centered Dirac fallback
        for (int64_t i = 0; i < out.numel(); ++i) out[i] = 0.0;
        out[out.numel() / 2] = 1.0;
        return out;
    }
    for (int64_t i = 0; i < out.numel(); ++i) out[i] /= s;
    return out;
}

}  // namespace blindrestore
