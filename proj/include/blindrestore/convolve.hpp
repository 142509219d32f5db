#pragma once

#include "blindrestore/tensor.hpp"

namespace blindrestore {

// Shared padding convention for every convolution in the project: reflect
// (edge-mirroring with duplication), i.e. index -1 maps to 0, index n to n-1.
inline int64_t reflect_index(int64_t i, int64_t n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

// 2-D correlation of the last two dims with a rank-2 kernel, shared across
// leading dims. Output shape equals input shape.
Tensor conv2d_reflect(const Tensor& x, const Tensor& k);

// exact adjoint of conv2d_reflect in its first argument
Tensor conv2d_reflect_adjoint_input(const Tensor& gout, const Tensor& k);

// gradient of sum(gout * conv2d_reflect(x, k)) with respect to k
Tensor conv2d_reflect_grad_kernel(const Tensor& x, const Tensor& gout, const Shape& kshape);

namespace convdetail {
// reflect-padded plane copy and its exact adjoint
void pad_plane(const double* x, double* pad, int64_t H, int64_t W, int64_t cu, int64_t cv);
void fold_plane(const double* pad, double* x, int64_t H, int64_t W, int64_t cu, int64_t cv);
}  // namespace convdetail

}  // namespace blindrestore
