#include "recode/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace recode {

void Tensor::allocate(int rank, std::size_t d0, std::size_t d1) {
    rank_ = rank;
    dims_ = {d0, d1};
    size_ = rank == 2 ? d0 * d1 : d0;
    if (size_ > kInlineCap) {
        heap_.assign(size_, 0.0);
    } else {
        heap_.clear();
        sbo_.fill(0.0);
    }
}

Tensor Tensor::zeros(std::size_t n) {
    Tensor t;
    t.allocate(1, n, 0);
    return t;
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) {
    Tensor t;
    t.allocate(2, rows, cols);
    return t;
}

Tensor Tensor::scalar(double v) {
    Tensor t = zeros(1);
    t[0] = v;
    return t;
}

Tensor Tensor::vector(std::initializer_list<double> vals) {
    return vector(std::span<const double>(vals.begin(), vals.size()));
}

Tensor Tensor::vector(std::span<const double> vals) {
    Tensor t = zeros(vals.size());
    double* d = t.data();
    for (std::size_t i = 0; i < vals.size(); ++i) d[i] = vals[i];
    return t;
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> vals) {
    if (vals.size() != rows * cols) {
        throw std::invalid_argument("Tensor::matrix: value count does not match rows*cols");
    }
    Tensor t = zeros(rows, cols);
    double* d = t.data();
    std::size_t i = 0;
    for (double v : vals) d[i++] = v;
    return t;
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t = zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[" << dims_[0];
    if (rank_ == 2) os << "x" << dims_[1];
    os << "]";
    return os.str();
}

void Tensor::fill(double v) {
    double* d = data();
    for (std::size_t i = 0; i < size_; ++i) d[i] = v;
}

bool Tensor::all_finite() const {
    const double* d = data();
    for (std::size_t i = 0; i < size_; ++i) {
        if (!std::isfinite(d[i])) return false;
    }
    return true;
}

void Tensor::add(const Tensor& other) {
    if (!same_shape(other)) {
        throw std::invalid_argument("Tensor::add: shape mismatch " + shape_str() + " vs " +
                                    other.shape_str());
    }
    double* d = data();
    const double* o = other.data();
    for (std::size_t i = 0; i < size_; ++i) d[i] += o[i];
}

void Tensor::add_scaled(const Tensor& other, double alpha) {
    if (!same_shape(other)) {
        throw std::invalid_argument("Tensor::add_scaled: shape mismatch " + shape_str() + " vs " +
                                    other.shape_str());
    }
    double* d = data();
    const double* o = other.data();
    for (std::size_t i = 0; i < size_; ++i) d[i] += alpha * o[i];
}

double Tensor::sum() const {
    const double* d = data();
    double s = 0.0;
    for (std::size_t i = 0; i < size_; ++i) s += d[i];
    return s;
}

namespace kernels {

void affine(const double* x, std::size_t n, std::size_t k,
            const double* w, std::size_t m, const double* b, double* y) {
    for (std::size_t i = 0; i < n; ++i) {
        double* yi = y + i * m;
        for (std::size_t j = 0; j < m; ++j) yi[j] = b ? b[j] : 0.0;
        const double* xi = x + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double xv = xi[kk];
            const double* wk = w + kk * m;
            for (std::size_t j = 0; j < m; ++j) yi[j] += xv * wk[j];
        }
    }
}

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void tanh_inplace(double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] = std::tanh(x[i]);
}

void relu_inplace(double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void sigmoid_inplace(double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] = sigmoid(x[i]);
}

double softplus(double x) {
    // max(x,0) + log1p(exp(-|x|))
    const double m = x > 0.0 ? x : 0.0;
    return m + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace kernels

}  // namespace recode
