#pragma once

#include "blindrestore/tensor.hpp"

namespace blindrestore {

enum class CodecKind { Identity, Haar };

// Linear, perfectly invertible map between the pixel and latent domains.
// The Haar kind is one level of the orthonormal 2-D Haar transform applied
// per channel, so decode's transpose equals encode.
class Codec {
public:
    static Codec identity(Shape image_shape);
    static Codec haar(Shape image_shape);  // last two dims must be even

    Latent encode(const Image& x) const;
    Image decode(const Latent& z) const;
    // transpose of the decode map, used for gradient pullback
    Latent decode_adjoint(const Image& g) const;

    CodecKind kind() const { return kind_; }
    const Shape& image_shape() const { return shape_; }
    const Shape& latent_shape() const { return shape_; }  // same layout for both kinds

private:
    Codec(CodecKind kind, Shape shape) : kind_(kind), shape_(std::move(shape)) {}
    CodecKind kind_;
    Shape shape_;
};

}  // namespace blindrestore
