#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace blindrestore {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// Dense row-major double tensor. Rank 0 is a scalar, rank 2 a single-channel
// image [H,W], rank 3 a multi-channel image [C,H,W]. Value semantics
// throughout.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}
    Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if ((int64_t)data_.size() != shape_numel(shape_))
            throw std::invalid_argument("tensor data size does not match shape " + shape_str(shape_));
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor full(Shape shape, double v) {
        Tensor t(std::move(shape));
        for (double& x : t.data_) x = v;
        return t;
    }
    static Tensor scalar(double v) { return Tensor({}, {v}); }

    const Shape& shape() const { return shape_; }
    int64_t rank() const { return (int64_t)shape_.size(); }
    int64_t numel() const { return (int64_t)data_.size(); }
    int64_t dim(int i) const { return shape_.at(i >= 0 ? i : shape_.size() + i); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](int64_t i) { return data_[i]; }
    double operator[](int64_t i) const { return data_[i]; }

    // rank-2 access
    double& at(int64_t i, int64_t j) { return data_[i * shape_[1] + j]; }
    double at(int64_t i, int64_t j) const { return data_[i * shape_[1] + j]; }

    double item() const {
        if (numel() != 1) throw std::logic_error("item() on tensor with numel != 1");
        return data_[0];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    Tensor& operator+=(const Tensor& o) {
        check_same(o);
        for (int64_t i = 0; i < numel(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Tensor& operator-=(const Tensor& o) {
        check_same(o);
        for (int64_t i = 0; i < numel(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Tensor& operator*=(double c) {
        for (double& x : data_) x *= c;
        return *this;
    }

    void check_same(const Tensor& o) const {
        if (!same_shape(o))
            throw std::invalid_argument("shape mismatch: " + shape_str(shape_) + " vs " + shape_str(o.shape_));
    }

private:
    Shape shape_;
    std::vector<double> data_;
};

// Role aliases; the latent and pixel domains share one tensor type.
using Image = Tensor;
using Latent = Tensor;
using NoisePrediction = Tensor;

inline Tensor operator+(Tensor a, const Tensor& b) { a += b; return a; }
inline Tensor operator-(Tensor a, const Tensor& b) { a -= b; return a; }
inline Tensor operator*(Tensor a, double c) { a *= c; return a; }
inline Tensor operator*(double c, Tensor a) { a *= c; return a; }

inline Tensor mul(const Tensor& a, const Tensor& b) {
    a.check_same(b);
    Tensor out(a.shape());
    for (int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] * b[i];
    return out;
}

inline double dot(const Tensor& a, const Tensor& b) {
    a.check_same(b);
    double s = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
    return s;
}

inline double sum_squares(const Tensor& a) {
    double s = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) s += a[i] * a[i];
    return s;
}

inline double sum_abs(const Tensor& a) {
    double s = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) s += a[i] < 0 ? -a[i] : a[i];
    return s;
}

inline double l2_norm(const Tensor& a) {
    double s = sum_squares(a);
    return s > 0 ? std::sqrt(s) : 0.0;
}

inline double mean_sq_diff(const Tensor& a, const Tensor& b) {
    a.check_same(b);
    double s = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s / (double)a.numel();
}

inline bool all_finite(const Tensor& a) {
    for (int64_t i = 0; i < a.numel(); ++i)
        if (!std::isfinite(a[i])) return false;
    return true;
}

}  // namespace blindrestore
