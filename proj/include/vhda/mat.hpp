#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace vhda {

// Dense row-major matrix of doubles. Column vectors are (n x 1).
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
    Mat(int r, int c, double fill)
        : rows(r), cols(c), a(static_cast<size_t>(r) * c, fill) {}

    double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

    double* row_ptr(int i) { return a.data() + static_cast<size_t>(i) * cols; }
    const double* row_ptr(int i) const { return a.data() + static_cast<size_t>(i) * cols; }

    size_t size() const { return a.size(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

    void set_zero() { std::fill(a.begin(), a.end(), 0.0); }

    static Mat zeros(int r, int c) { return Mat(r, c); }
    static Mat constant(int r, int c, double v) { return Mat(r, c, v); }
    static Mat column(const std::vector<double>& v) {
        Mat m(static_cast<int>(v.size()), 1);
        m.a = v;
        return m;
    }
};

// C = A * B. Nearly every product in this codebase is a matrix-vector
// product, so that case gets a dedicated dot-product loop.
inline void gemm(const Mat& A, const Mat& B, Mat& C) {
    assert(A.cols == B.rows && C.rows == A.rows && C.cols == B.cols);
    if (B.cols == 1) {
        const double* b = B.a.data();
        for (int i = 0; i < A.rows; ++i) {
            const double* arow = A.row_ptr(i);
            double acc = 0.0;
            for (int l = 0; l < A.cols; ++l) acc += arow[l] * b[l];
            C.a[i] = acc;
        }
        return;
    }
    C.set_zero();
    for (int i = 0; i < A.rows; ++i) {
        double* crow = C.row_ptr(i);
        const double* arow = A.row_ptr(i);
        for (int l = 0; l < A.cols; ++l) {
            const double av = arow[l];
            const double* brow = B.row_ptr(l);
            for (int j = 0; j < B.cols; ++j) crow[j] += av * brow[j];
        }
    }
}

// C += A * B^T   (used for dA += dC * B^T in matmul backward)
inline void gemm_nt_acc(const Mat& A, const Mat& B, Mat& C) {
    assert(A.cols == B.cols && C.rows == A.rows && C.cols == B.rows);
    if (A.cols == 1) {  // outer product of two columns
        const double* b = B.a.data();
        for (int i = 0; i < A.rows; ++i) {
            const double av = A.a[i];
            double* crow = C.row_ptr(i);
            for (int j = 0; j < B.rows; ++j) crow[j] += av * b[j];
        }
        return;
    }
    for (int i = 0; i < A.rows; ++i) {
        const double* arow = A.row_ptr(i);
        double* crow = C.row_ptr(i);
        for (int j = 0; j < B.rows; ++j) {
            const double* brow = B.row_ptr(j);
            double acc = 0.0;
            for (int l = 0; l < A.cols; ++l) acc += arow[l] * brow[l];
            crow[j] += acc;
        }
    }
}

// C += A^T * B   (used for dB += A^T * dC in matmul backward)
inline void gemm_tn_acc(const Mat& A, const Mat& B, Mat& C) {
    assert(A.rows == B.rows && C.rows == A.cols && C.cols == B.cols);
    if (B.cols == 1) {  // axpy per row of A
        double* c = C.a.data();
        for (int i = 0; i < A.rows; ++i) {
            const double bv = B.a[i];
            if (bv == 0.0) continue;
            const double* arow = A.row_ptr(i);
            for (int l = 0; l < A.cols; ++l) c[l] += bv * arow[l];
        }
        return;
    }
    for (int i = 0; i < A.rows; ++i) {
        const double* arow = A.row_ptr(i);
        const double* brow = B.row_ptr(i);
        for (int l = 0; l < A.cols; ++l) {
            const double av = arow[l];
            double* crow = C.row_ptr(l);
            for (int j = 0; j < B.cols; ++j) crow[j] += av * brow[j];
        }
    }
}

inline double stable_sigmoid(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double stable_softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

}  // namespace vhda
