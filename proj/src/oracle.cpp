#include "blindrestore/oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace blindrestore::oracle {

Mat Mat::eye(int64_t n) {
    Mat m(n, n);
    for (int64_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

Mat matmul(const Mat& x, const Mat& y) {
    if (x.cols != y.rows) throw std::invalid_argument("matmul: dimension mismatch");
    Mat out(x.rows, y.cols);
    for (int64_t i = 0; i < x.rows; ++i)
        for (int64_t k = 0; k < x.cols; ++k) {
            double xv = x.at(i, k);
            if (xv == 0.0) continue;
            for (int64_t j = 0; j < y.cols; ++j) out.at(i, j) += xv * y.at(k, j);
        }
    return out;
}

Mat transpose(const Mat& x) {
    Mat out(x.cols, x.rows);
    for (int64_t i = 0; i < x.rows; ++i)
        for (int64_t j = 0; j < x.cols; ++j) out.at(j, i) = x.at(i, j);
    return out;
}

std::vector<double> matvec(const Mat& x, const std::vector<double>& v) {
    if ((int64_t)v.size() != x.cols) throw std::invalid_argument("matvec: dimension mismatch");
    std::vector<double> out(x.rows, 0.0);
    for (int64_t i = 0; i < x.rows; ++i) {
        double s = 0.0;
        for (int64_t j = 0; j < x.cols; ++j) s += x.at(i, j) * v[j];
        out[i] = s;
    }
    return out;
}

namespace {

// lower-triangular factor in place
void cholesky_factor(Mat& a) {
    if (a.rows != a.cols) throw std::invalid_argument("cholesky: square matrix required");
    int64_t n = a.rows;
    for (int64_t j = 0; j < n; ++j) {
        double d = a.at(j, j);
        for (int64_t k = 0; k < j; ++k) d -= a.at(j, k) * a.at(j, k);
        if (!(d > 0.0)) throw std::runtime_error("cholesky: matrix not positive definite");
        d = std::sqrt(d);
        a.at(j, j) = d;
        for (int64_t i = j + 1; i < n; ++i) {
            double s = a.at(i, j);
            for (int64_t k = 0; k < j; ++k) s -= a.at(i, k) * a.at(j, k);
            a.at(i, j) = s / d;
        }
    }
}

void chol_solve_inplace(const Mat& L, std::vector<double>& b) {
    int64_t n = L.rows;
    for (int64_t i = 0; i < n; ++i) {
        double s = b[i];
        for (int64_t k = 0; k < i; ++k) s -= L.at(i, k) * b[k];
        b[i] = s / L.at(i, i);
    }
    for (int64_t i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int64_t k = i + 1; k < n; ++k) s -= L.at(k, i) * b[k];
        b[i] = s / L.at(i, i);
    }
}

}  // namespace

std::vector<double> cholesky_solve(Mat a, std::vector<double> b) {
    if ((int64_t)b.size() != a.rows) throw std::invalid_argument("cholesky_solve: size mismatch");
    cholesky_factor(a);
    chol_solve_inplace(a, b);
    return b;
}

Mat cholesky_solve_multi(Mat a, Mat b) {
    if (a.rows != b.rows) throw std::invalid_argument("cholesky_solve_multi: size mismatch");
    cholesky_factor(a);
    std::vector<double> col(b.rows);
    for (int64_t j = 0; j < b.cols; ++j) {
        for (int64_t i = 0; i < b.rows; ++i) col[i] = b.at(i, j);
        chol_solve_inplace(a, col);
        for (int64_t i = 0; i < b.rows; ++i) b.at(i, j) = col[i];
    }
    return b;
}

Mat operator_matrix(const std::function<std::vector<double>(const std::vector<double>&)>& apply,
                    int64_t in_dim, int64_t out_dim) {
    Mat A(out_dim, in_dim);
    std::vector<double> e(in_dim, 0.0);
    for (int64_t j = 0; j < in_dim; ++j) {
        e[j] = 1.0;
        std::vector<double> col = apply(e);
        if ((int64_t)col.size() != out_dim) throw std::invalid_argument("operator_matrix: bad map");
        for (int64_t i = 0; i < out_dim; ++i) A.at(i, j) = col[i];
        e[j] = 0.0;
    }
    return A;
}

Mat conv_matrix(const GroundTruthOperator& op, const Shape& image_shape) {
    int64_t n = shape_numel(image_shape);
    int64_t m = shape_numel(op.output_shape(image_shape));
    return operator_matrix(
        [&](const std::vector<double>& v) {
            Image x(image_shape, v);
            return apply_gt(op, x).vec();
        },
        n, m);
}

GaussianPosterior gaussian_posterior(const std::vector<double>& mu, const Mat& Sigma, const Mat& A,
                                     double sigma, const std::vector<double>& y) {
    if (A.cols != (int64_t)mu.size() || A.rows != (int64_t)y.size())
        throw std::invalid_argument("gaussian_posterior: dimension mismatch");
    Mat SAt = matmul(Sigma, transpose(A));       // n x m
    Mat M = matmul(A, SAt);                      // m x m
    for (int64_t i = 0; i < M.rows; ++i) M.at(i, i) += sigma * sigma;

    std::vector<double> resid = matvec(A, mu);
    for (size_t i = 0; i < resid.size(); ++i) resid[i] = y[i] - resid[i];

    std::vector<double> w = cholesky_solve(M, resid);   // throws when singular
    GaussianPosterior post;
    post.mean = matvec(SAt, w);
    for (size_t i = 0; i < mu.size(); ++i) post.mean[i] += mu[i];

    Mat W = cholesky_solve_multi(M, transpose(SAt));    // m x n
    Mat corr = matmul(SAt, W);                          // n x n
    post.cov = Sigma;
    for (int64_t i = 0; i < post.cov.rows; ++i)
        for (int64_t j = 0; j < post.cov.cols; ++j) post.cov.at(i, j) -= corr.at(i, j);
    return post;
}

BlindMapResult enumerate_blind_map(const DiscreteBlindGrid& grid, const Image& y, double sigma) {
    if (grid.xs.empty() || grid.ops.empty())
        throw std::invalid_argument("enumerate_blind_map: empty grid");
    int64_t total = (int64_t)grid.xs.size() * (int64_t)grid.ops.size();
    if (total > grid.budget)
        throw std::runtime_error("enumerate_blind_map: grid size " + std::to_string(total) +
                                 " exceeds budget " + std::to_string(grid.budget));
    if (!(sigma > 0.0)) throw std::invalid_argument("enumerate_blind_map: sigma must be positive");
    if (!grid.log_prior_x.empty() && grid.log_prior_x.size() != grid.xs.size())
        throw std::invalid_argument("enumerate_blind_map: bad x prior size");
    if (!grid.log_prior_op.empty() && grid.log_prior_op.size() != grid.ops.size())
        throw std::invalid_argument("enumerate_blind_map: bad op prior size");

    BlindMapResult best;
    best.log_joint = -1e300;
    double inv = 1.0 / (2.0 * sigma * sigma);
    for (size_t xi = 0; xi < grid.xs.size(); ++xi) {
        for (size_t oi = 0; oi < grid.ops.size(); ++oi) {
            Image pred = apply_gt(grid.ops[oi], grid.xs[xi]);
            pred.check_same(y);
            double ll = 0.0;
            for (int64_t i = 0; i < y.numel(); ++i) {
                double d = y[i] - pred[i];
                ll -= d * d;
            }
            ll *= inv;
            if (!grid.log_prior_x.empty()) ll += grid.log_prior_x[xi];
            if (!grid.log_prior_op.empty()) ll += grid.log_prior_op[oi];
            if (ll > best.log_joint) {  // strict: first hit wins ties
                best.log_joint = ll;
                best.x_index = (int)xi;
                best.op_index = (int)oi;
            }
        }
    }
    return best;
}

double psnr(const Image& a, const Image& b, double peak) {
    a.check_same(b);
    if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
    double mse = mean_sq_diff(a, b);
    if (mse == 0.0) return 99.0;
    double v = 10.0 * std::log10(peak * peak / mse);
    return v > 99.0 ? 99.0 : v;
}

}  // namespace blindrestore::oracle
