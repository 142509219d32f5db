#include "blindrestore/convolve.hpp"

#include <stdexcept>
#include <vector>

namespace blindrestore {

namespace {

void check_conv_args(const Tensor& x, const Shape& kshape) {
    if (x.rank() < 2) throw std::invalid_argument("conv2d: input rank must be >= 2");
    if (kshape.size() != 2) throw std::invalid_argument("conv2d: kernel rank must be 2");
    int64_t H = x.dim(-2), W = x.dim(-1);
    if (kshape[0] > H || kshape[1] > W)
        throw std::invalid_argument("conv2d: kernel " + shape_str(kshape) +
                                    " larger than image plane [" + std::to_string(H) + "," +
                                    std::to_string(W) + "]");
}

}  // namespace

namespace convdetail {

// copy one plane into a reflect-padded buffer (cu rows / cv cols of margin)
void pad_plane(const double* x, double* pad, int64_t H, int64_t W, int64_t cu, int64_t cv) {
    int64_t Wp = W + 2 * cv;
    for (int64_t i = -cu; i < H + cu; ++i) {
        int64_t ri = reflect_index(i, H);
        double* dst = pad + (i + cu) * Wp;
        const double* src = x + ri * W;
        for (int64_t j = -cv; j < 0; ++j) dst[j + cv] = src[reflect_index(j, W)];
        for (int64_t j = 0; j < W; ++j) dst[j + cv] = src[j];
        for (int64_t j = W; j < W + cv; ++j) dst[j + cv] = src[reflect_index(j, W)];
    }
}

// adjoint of pad_plane: fold the padded buffer back into the plane
void fold_plane(const double* pad, double* x, int64_t H, int64_t W, int64_t cu, int64_t cv) {
    int64_t Wp = W + 2 * cv;
    for (int64_t i = -cu; i < H + cu; ++i) {
        int64_t ri = reflect_index(i, H);
        const double* src = pad + (i + cu) * Wp;
        double* dst = x + ri * W;
        for (int64_t j = -cv; j < W + cv; ++j) dst[reflect_index(j, W)] += src[j + cv];
    }
}

}  // namespace convdetail

Tensor conv2d_reflect(const Tensor& x, const Tensor& k) {
    check_conv_args(x, k.shape());
    int64_t H = x.dim(-2), W = x.dim(-1);
    int64_t kh = k.dim(0), kw = k.dim(1);
    int64_t cu = kh / 2, cv = kw / 2;
    int64_t planes = x.numel() / (H * W);
    int64_t Wp = W + 2 * cv;
    std::vector<double> pad((H + 2 * cu) * Wp);
    Tensor out(x.shape());
    for (int64_t p = 0; p < planes; ++p) {
        convdetail::pad_plane(x.data() + p * H * W, pad.data(), H, W, cu, cv);
        double* o = out.data() + p * H * W;
        for (int64_t u = 0; u < kh; ++u)
            for (int64_t v = 0; v < kw; ++v) {
                double kv = k[u * kw + v];
                if (kv == 0.0) continue;
                for (int64_t i = 0; i < H; ++i) {
                    const double* row = pad.data() + (i + u) * Wp + v;
                    double* orow = o + i * W;
                    for (int64_t j = 0; j < W; ++j) orow[j] += kv * row[j];
                }
            }
    }
    return out;
}

Tensor conv2d_reflect_adjoint_input(const Tensor& gout, const Tensor& k) {
    check_conv_args(gout, k.shape());
    int64_t H = gout.dim(-2), W = gout.dim(-1);
    int64_t kh = k.dim(0), kw = k.dim(1);
    int64_t cu = kh / 2, cv = kw / 2;
    int64_t planes = gout.numel() / (H * W);
    int64_t Wp = W + 2 * cv;
    std::vector<double> pad((H + 2 * cu) * Wp);
    Tensor gx(gout.shape());
    for (int64_t p = 0; p < planes; ++p) {
        std::fill(pad.begin(), pad.end(), 0.0);
        const double* g = gout.data() + p * H * W;
        for (int64_t u = 0; u < kh; ++u)
            for (int64_t v = 0; v < kw; ++v) {
                double kv = k[u * kw + v];
                if (kv == 0.0) continue;
                for (int64_t i = 0; i < H; ++i) {
                    double* row = pad.data() + (i + u) * Wp + v;
                    const double* grow = g + i * W;
                    for (int64_t j = 0; j < W; ++j) row[j] += kv * grow[j];
                }
            }
        convdetail::fold_plane(pad.data(), gx.data() + p * H * W, H, W, cu, cv);
    }
    return gx;
}

Tensor conv2d_reflect_grad_kernel(const Tensor& x, const Tensor& gout, const Shape& kshape) {
    check_conv_args(x, kshape);
    x.check_same(gout);
    int64_t H = x.dim(-2), W = x.dim(-1);
    int64_t kh = kshape[0], kw = kshape[1];
    int64_t cu = kh / 2, cv = kw / 2;
    int64_t planes = x.numel() / (H * W);
    int64_t Wp = W + 2 * cv;
    std::vector<double> pad((H + 2 * cu) * Wp);
    Tensor gk(kshape);
    for (int64_t p = 0; p < planes; ++p) {
        convdetail::pad_plane(x.data() + p * H * W, pad.data(), H, W, cu, cv);
        const double* g = gout.data() + p * H * W;
        for (int64_t u = 0; u < kh; ++u)
            for (int64_t v = 0; v < kw; ++v) {
                double acc = 0.0;
                for (int64_t i = 0; i < H; ++i) {
                    const double* row = pad.data() + (i + u) * Wp + v;
                    const double* grow = g + i * W;
                    for (int64_t j = 0; j < W; ++j) acc += row[j] * grow[j];
                }
                gk[u * kw + v] += acc;
            }
    }
    return gk;
}

}  // namespace blindrestore
