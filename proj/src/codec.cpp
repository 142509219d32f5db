#include "blindrestore/codec.hpp"

#include <stdexcept>

namespace blindrestore {

namespace {

void check_image_rank(const Shape& s) {
    if (s.size() != 2 && s.size() != 3)
        throw std::invalid_argument("codec expects [H,W] or [C,H,W], got " + shape_str(s));
}

// forward: x -> (LL | LH ; HL | HH) quadrants, orthonormal
void haar_plane(const double* x, double* z, int64_t H, int64_t W, bool inverse) {
    int64_t h2 = H / 2, w2 = W / 2;
    for (int64_t i = 0; i < h2; ++i) {
        for (int64_t j = 0; j < w2; ++j) {
            if (!inverse) {
                double a = x[(2 * i) * W + 2 * j];
                double b = x[(2 * i) * W + 2 * j + 1];
                double c = x[(2 * i + 1) * W + 2 * j];
                double d = x[(2 * i + 1) * W + 2 * j + 1];
                z[i * W + j] = (a + b + c + d) / 2.0;                    // LL
                z[i * W + j + w2] = (a - b + c - d) / 2.0;               // LH
                z[(i + h2) * W + j] = (a + b - c - d) / 2.0;             // HL
                z[(i + h2) * W + j + w2] = (a - b - c + d) / 2.0;        // HH
            } else {
                double ll = x[i * W + j];
                double lh = x[i * W + j + w2];
                double hl = x[(i + h2) * W + j];
                double hh = x[(i + h2) * W + j + w2];
                z[(2 * i) * W + 2 * j] = (ll + lh + hl + hh) / 2.0;
                z[(2 * i) * W + 2 * j + 1] = (ll - lh + hl - hh) / 2.0;
                z[(2 * i + 1) * W + 2 * j] = (ll + lh - hl - hh) / 2.0;
                z[(2 * i + 1) * W + 2 * j + 1] = (ll - lh - hl + hh) / 2.0;
            }
        }
    }
}

Tensor haar_apply(const Tensor& x, bool inverse) {
    const Shape& s = x.shape();
    int64_t H = s[s.size() - 2], W = s[s.size() - 1];
    int64_t planes = x.numel() / (H * W);
    Tensor out(s);
    for (int64_t p = 0; p < planes; ++p)
        haar_plane(x.data() + p * H * W, out.data() + p * H * W, H, W, inverse);
    return out;
}

}  // namespace

Codec Codec::identity(Shape image_shape) {
    check_image_rank(image_shape);
    return Codec(CodecKind::Identity, std::move(image_shape));
}

Codec Codec::haar(Shape image_shape) {
    check_image_rank(image_shape);
    int64_t H = image_shape[image_shape.size() - 2];
    int64_t W = image_shape[image_shape.size() - 1];
    if (H % 2 != 0 || W % 2 != 0)
        throw std::invalid_argument("haar codec needs even H and W, got " + shape_str(image_shape));
    return Codec(CodecKind::Haar, std::move(image_shape));
}

Latent Codec::encode(const Image& x) const {
    if (x.shape() != shape_)
        throw std::invalid_argument("encode: image shape " + shape_str(x.shape()) +
                                    " does not match codec shape " + shape_str(shape_));
    if (kind_ == CodecKind::Identity) return x;
    return haar_apply(x, false);
}

Image Codec::decode(const Latent& z) const {
    if (z.shape() != shape_)
        throw std::invalid_argument("decode: latent shape " + shape_str(z.shape()) +
                                    " does not match codec shape " + shape_str(shape_));
    if (kind_ == CodecKind::Identity) return z;
    return haar_apply(z, true);
}

Latent Codec::decode_adjoint(const Image& g) const {
    // decode is orthonormal for both kinds, so the transpose is encode
    return encode(g);
}

}  // namespace blindrestore
