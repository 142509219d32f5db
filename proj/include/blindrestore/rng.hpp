#pragma once

#include <cstdint>
#include <random>

#include "blindrestore/tensor.hpp"

namespace blindrestore {

// Seeded random source. Gaussians come from Box-Muller over the raw mt19937_64
// stream (exactly two engine words per normal), so a given seed yields the
// same draw sequence on every standard library. Draw order is part of the
// contract: callers that document "one draw" consume normals in tensor
// row-major order.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    // child stream derived from a master seed; independent per stream index
    static Rng child(uint64_t master, uint64_t stream) {
        return Rng(splitmix64(master + 0x9E3779B97F4A7C15ULL * (stream + 1)));
    }

    double uniform() {
        ++draws_;
        // 53-bit mantissa in [0,1)
        return (double)(gen_() >> 11) * 0x1.0p-53;
    }

    double normal() {
        double u1 = 1.0 - uniform();  // (0,1], keeps log finite
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    Tensor normal_tensor(const Shape& shape) {
        Tensor t(shape);
        for (int64_t i = 0; i < t.numel(); ++i) t[i] = normal();
        return t;
    }

    uint64_t next_u64() {
        ++draws_;
        return gen_();
    }

    uint64_t draws_consumed() const { return draws_; }

    static uint64_t splitmix64(uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

private:
    std::mt19937_64 gen_;
    uint64_t draws_ = 0;
};

}  // namespace blindrestore
