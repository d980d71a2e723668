#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace metasel {

using Vec = std::vector<double>;

// Dense row-major matrix, just big enough for small MLP work.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }

    std::size_t size() const { return a.size(); }
};

inline double dot(const Vec& x, const Vec& y) {
    if (x.size() != y.size()) throw std::invalid_argument("dot: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline double norm(const Vec& x) { return std::sqrt(dot(x, x)); }

inline double frobenius_dot(const Mat& x, const Mat& y) {
    if (x.rows != y.rows || x.cols != y.cols) throw std::invalid_argument("frobenius_dot: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.a.size(); ++i) s += x.a[i] * y.a[i];
    return s;
}

inline double frobenius_norm_sq(const Mat& x) {
    double s = 0.0;
    for (double v : x.a) s += v * v;
    return s;
}

// y = A x + b
inline Vec affine(const Mat& A, const Vec& x, const Vec& b) {
    if (A.cols != x.size() || A.rows != b.size()) throw std::invalid_argument("affine: shape mismatch");
    Vec y(b);
    for (std::size_t r = 0; r < A.rows; ++r) {
        double s = 0.0;
        const double* row = &A.a[r * A.cols];
        for (std::size_t c = 0; c < A.cols; ++c) s += row[c] * x[c];
        y[r] += s;
    }
    return y;
}

// y = A^T x
inline Vec transpose_apply(const Mat& A, const Vec& x) {
    if (A.rows != x.size()) throw std::invalid_argument("transpose_apply: shape mismatch");
    Vec y(A.cols, 0.0);
    for (std::size_t r = 0; r < A.rows; ++r) {
        const double* row = &A.a[r * A.cols];
        for (std::size_t c = 0; c < A.cols; ++c) y[c] += row[c] * x[r];
    }
    return y;
}

inline bool all_finite(const Vec& x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

inline bool all_finite(const Mat& m) {
    for (double v : m.a)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace metasel
