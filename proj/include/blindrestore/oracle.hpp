#pragma once

#include <functional>
#include <vector>

#include "blindrestore/operators.hpp"
#include "blindrestore/tensor.hpp"

namespace blindrestore::oracle {

// Small dense column-backed matrix; enough for the desk-scale linear algebra.
struct Mat {
    int64_t rows = 0, cols = 0;
    std::vector<double> a;  // row-major

    Mat() = default;
    Mat(int64_t r, int64_t c) : rows(r), cols(c), a(r * c, 0.0) {}
    static Mat eye(int64_t n);
    double& at(int64_t i, int64_t j) { return a[i * cols + j]; }
    double at(int64_t i, int64_t j) const { return a[i * cols + j]; }
};

Mat matmul(const Mat& x, const Mat& y);
Mat transpose(const Mat& x);
std::vector<double> matvec(const Mat& x, const std::vector<double>& v);

// in-place Cholesky solve of a symmetric positive definite system;
// throws on a non-positive pivot
std::vector<double> cholesky_solve(Mat a, std::vector<double> b);
Mat cholesky_solve_multi(Mat a, Mat b);

// dense matrix of a linear map probed on basis vectors
Mat operator_matrix(const std::function<std::vector<double>(const std::vector<double>&)>& apply,
                    int64_t in_dim, int64_t out_dim);
Mat conv_matrix(const GroundTruthOperator& op, const Shape& image_shape);

struct GaussianPosterior {
    std::vector<double> mean;
    Mat cov;
};

// exact linear-Gaussian conditioning:
//   mean = mu + S A^T (A S A^T + sigma^2 I)^-1 (y - A mu)
//   cov  = S - S A^T (A S A^T + sigma^2 I)^-1 A S
GaussianPosterior gaussian_posterior(const std::vector<double>& mu, const Mat& Sigma, const Mat& A,
                                     double sigma, const std::vector<double>& y);

// finite joint candidate grid for exhaustive MAP checks
struct DiscreteBlindGrid {
    std::vector<Image> xs;
    std::vector<GroundTruthOperator> ops;
    std::vector<double> log_prior_x;   // empty for uniform
    std::vector<double> log_prior_op;  // empty for uniform
    int64_t budget = 1000000;
};

struct BlindMapResult {
    int x_index = 0;
    int op_index = 0;
    double log_joint = 0.0;
};

// exhaustive argmax of log p(y | x, op) + log p(x) + log p(op); ties break to
// the lowest (x_index, op_index) in scan order (x outer, op inner)
BlindMapResult enumerate_blind_map(const DiscreteBlindGrid& grid, const Image& y, double sigma);

// 10 log10(peak^2 / mse), capped at 99.0 (identical images hit the cap)
double psnr(const Image& a, const Image& b, double peak = 1.0);

}  // namespace blindrestore::oracle
