#pragma once

#include <string>

#include "blindrestore/tensor.hpp"

namespace blindrestore {

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// 8-bit binary PGM (P5, one channel -> [H,W]) and PPM (P6, three channels ->
// [3,H,W]); maxval must be 255; values map to [0,1] by /255. Writing clamps
// to [0,1] then rounds to the 8-bit grid.
Image read_image(const std::string& path);
void write_image(const std::string& path, const Image& img);

// binary tensor container: magic "BRT1", u32 rank, u32 dims, f64 payload,
// all little-endian, row-major; rank 0 holds a single scalar
Tensor read_tensor(const std::string& path);
void write_tensor(const std::string& path, const Tensor& t);

// plain-text rank-2 matrix: first line "rows cols", then row-major entries
Tensor read_kernel_text(const std::string& path);
void write_kernel_text(const std::string& path, const Tensor& k);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace blindrestore
