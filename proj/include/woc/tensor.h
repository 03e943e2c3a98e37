#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace woc {

// Dense row-major 64-bit float tensor. Value-like: copy/move do what you expect.
struct tensor {
    std::vector<int64_t> shape;
    std::vector<double> data;

    tensor() = default;
    explicit tensor(std::vector<int64_t> s);                       // zero-filled
    tensor(std::vector<int64_t> s, std::vector<double> d);

    static tensor zeros(std::vector<int64_t> s) { return tensor(std::move(s)); }
    static tensor full(std::vector<int64_t> s, double v);
    static tensor scalar(double v) { return tensor({1}, {v}); }
    // 2-D convenience for tests and hand-written examples.
    static tensor from_rows(const std::vector<std::vector<double>>& rows);

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int64_t dim(int i) const;

    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }

    double& at(int64_t i);
    double at(int64_t i) const;
    double& at(int64_t r, int64_t c);
    double at(int64_t r, int64_t c) const;

    bool same_shape(const tensor& o) const { return shape == o.shape; }
    std::string shape_str() const;

    void fill(double v);
    bool all_finite() const;
    double max_abs() const;
};

// y = a·b for a:[n,k], b:[k,m].
tensor matmul(const tensor& a, const tensor& b);
tensor transpose2d(const tensor& a);

// Forward-only elementwise/reduction helpers shared by the autodiff nodes and
// by test oracles.
tensor sigmoid(const tensor& x);
tensor relu(const tensor& x);
// Softmax over the last axis, max-subtracted for stability.
tensor softmax_lastdim(const tensor& x);

namespace kern {

// c[n,m] = a[n,k] · b[k,m]           (accumulate=false zeroes c first)
void matmul_nn(const double* a, const double* b, double* c, int64_t n, int64_t k, int64_t m,
               bool accumulate);
// c[n,m] = a[n,k] · b[m,k]ᵀ
void matmul_nt(const double* a, const double* b, double* c, int64_t n, int64_t k, int64_t m,
               bool accumulate);
// c[k,m] = a[n,k]ᵀ · b[n,m]
void matmul_tn(const double* a, const double* b, double* c, int64_t n, int64_t k, int64_t m,
               bool accumulate);

// dst[i] = exp(src[i]); compiled in a separate fast-math translation unit so
// the hot training loops get the vectorized libm entry points.
void batch_exp(double* dst, const double* src, int64_t n);

// In-place row softmax with max subtraction; rows of width w, n rows.
void softmax_rows_inplace(double* x, int64_t n, int64_t w);

} // namespace kern

} // namespace woc
