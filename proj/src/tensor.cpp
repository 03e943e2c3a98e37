#include "woc/tensor.h"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "woc/common.h"

namespace woc {

static int64_t shape_product(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t e : s) {
        if (e < 0) throw std::invalid_argument("tensor: negative extent");
        n *= e;
    }
    return n;
}

tensor::tensor(std::vector<int64_t> s) : shape(std::move(s)), data(shape_product(shape), 0.0) {}

tensor::tensor(std::vector<int64_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_product(shape) != static_cast<int64_t>(data.size()))
        throw std::invalid_argument(
            str("tensor: shape ", shape_str(), " wants ", shape_product(shape), " values, got ", data.size()));
}

tensor tensor::full(std::vector<int64_t> s, double v) {
    tensor t(std::move(s));
    t.fill(v);
    return t;
}

tensor tensor::from_rows(const std::vector<std::vector<double>>& rows) {
    const int64_t n = static_cast<int64_t>(rows.size());
    const int64_t m = n > 0 ? static_cast<int64_t>(rows[0].size()) : 0;
    tensor t({n, m});
    for (int64_t i = 0; i < n; ++i) {
        if (static_cast<int64_t>(rows[i].size()) != m)
            throw std::invalid_argument("tensor::from_rows: ragged rows");
        std::memcpy(t.data.data() + i * m, rows[i].data(), m * sizeof(double));
    }
    return t;
}

int64_t tensor::dim(int i) const {
    if (i < 0 || i >= rank()) throw std::out_of_range(str("tensor::dim: axis ", i, " of rank ", rank()));
    return shape[i];
}

double& tensor::at(int64_t i) {
    if (i < 0 || i >= numel()) throw std::out_of_range(str("tensor::at: index ", i, " of ", numel()));
    return data[i];
}

double tensor::at(int64_t i) const { return const_cast<tensor*>(this)->at(i); }

double& tensor::at(int64_t r, int64_t c) {
    if (rank() != 2) throw std::out_of_range(str("tensor::at(r,c) on rank-", rank(), " tensor"));
    if (r < 0 || r >= shape[0] || c < 0 || c >= shape[1])
        throw std::out_of_range(str("tensor::at: (", r, ",", c, ") of ", shape_str()));
    return data[r * shape[1] + c];
}

double tensor::at(int64_t r, int64_t c) const { return const_cast<tensor*>(this)->at(r, c); }

std::string tensor::shape_str() const {
    std::string s = "[";
    for (int i = 0; i < rank(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
}

void tensor::fill(double v) { std::fill(data.begin(), data.end(), v); }

bool tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

double tensor::max_abs() const {
    double m = 0.0;
    for (double v : data) m = std::max(m, std::fabs(v));
    return m;
}

tensor matmul(const tensor& a, const tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw std::invalid_argument(str("matmul: need rank-2 operands, got ", a.shape_str(), " and ", b.shape_str()));
    if (a.shape[1] != b.shape[0])
        throw std::invalid_argument(
            str("matmul: inner dimensions disagree: ", a.shape_str(), " vs ", b.shape_str()));
    tensor c({a.shape[0], b.shape[1]});
    kern::matmul_nn(a.ptr(), b.ptr(), c.ptr(), a.shape[0], a.shape[1], b.shape[1], false);
    return c;
}

tensor transpose2d(const tensor& a) {
    if (a.rank() != 2) throw std::invalid_argument(str("transpose2d: got ", a.shape_str()));
    tensor t({a.shape[1], a.shape[0]});
    for (int64_t i = 0; i < a.shape[0]; ++i)
        for (int64_t j = 0; j < a.shape[1]; ++j) t.data[j * a.shape[0] + i] = a.data[i * a.shape[1] + j];
    return t;
}

tensor sigmoid(const tensor& x) {
    tensor y = x;
    for (double& v : y.data) v = 1.0 / (1.0 + std::exp(-v));
    return y;
}

tensor relu(const tensor& x) {
    tensor y = x;
    for (double& v : y.data) v = v > 0.0 ? v : 0.0;
    return y;
}

tensor softmax_lastdim(const tensor& x) {
    if (x.rank() < 1) throw std::invalid_argument("softmax_lastdim: rank-0 input");
    tensor y = x;
    const int64_t w = x.shape.back();
    kern::softmax_rows_inplace(y.ptr(), x.numel() / w, w);
    return y;
}

namespace kern {

void matmul_nn(const double* a, const double* b, double* c, int64_t n, int64_t k, int64_t m,
               bool accumulate) {
    for (int64_t i = 0; i < n; ++i) {
        double* ci = c + i * m;
        if (!accumulate) std::memset(ci, 0, m * sizeof(double));
        const double* ai = a + i * k;
        for (int64_t p = 0; p < k; ++p) {
            const double av = ai[p];
            if (av == 0.0) continue;
            const double* bp = b + p * m;
            for (int64_t j = 0; j < m; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul_nt(const double* a, const double* b, double* c, int64_t n, int64_t k, int64_t m,
               bool accumulate) {
    // b arrives row-major as [m,k]; staging it as [k,m] lets the hot loop run
    // unit-stride over j instead of doing a scalar reduction per output. Each
    // c[i][j] still accumulates its k terms in ascending order.
    double stack_bt[4096];
    std::vector<double> heap_bt;
    double* bt = stack_bt;
    if (k * m > 4096) {
        heap_bt.resize(size_t(k) * size_t(m));
        bt = heap_bt.data();
    }
    for (int64_t j = 0; j < m; ++j)
        for (int64_t p = 0; p < k; ++p) bt[p * m + j] = b[j * k + p];
    for (int64_t i = 0; i < n; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * m;
        if (!accumulate) std::memset(ci, 0, m * sizeof(double));
        for (int64_t p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = bt + p * m;
            for (int64_t j = 0; j < m; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul_tn(const double* a, const double* b, double* c, int64_t n, int64_t k, int64_t m,
               bool accumulate) {
    if (!accumulate) std::memset(c, 0, k * m * sizeof(double));
    for (int64_t i = 0; i < n; ++i) {
        const double* ai = a + i * k;
        const double* bi = b + i * m;
        for (int64_t p = 0; p < k; ++p) {
            const double av = ai[p];
            if (av == 0.0) continue;
            double* cp = c + p * m;
            for (int64_t j = 0; j < m; ++j) cp[j] += av * bi[j];
        }
    }
}

void softmax_rows_inplace(double* x, int64_t n, int64_t w) {
    for (int64_t i = 0; i < n; ++i) {
        double* row = x + i * w;
        double mx = row[0];
        for (int64_t j = 1; j < w; ++j) mx = std::max(mx, row[j]);
        for (int64_t j = 0; j < w; ++j) row[j] -= mx;
        batch_exp(row, row, w);
        double sum = 0.0;
        for (int64_t j = 0; j < w; ++j) sum += row[j];
        const double inv = 1.0 / sum;
        for (int64_t j = 0; j < w; ++j) row[j] *= inv;
    }
}

} // namespace kern

} // namespace woc
