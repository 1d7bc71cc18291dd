#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace recode {

// Dense row-major f64 array, rank 1 or 2. Values up to 64 doubles live
// inline; larger buffers spill to the heap. A scalar is shape [1].
class Tensor {
public:
    static constexpr std::size_t kInlineCap = 64;

    Tensor() = default;

    static Tensor zeros(std::size_t n);
    static Tensor zeros(std::size_t rows, std::size_t cols);
    static Tensor scalar(double v);
    static Tensor vector(std::initializer_list<double> vals);
    static Tensor vector(std::span<const double> vals);
    // Row-major values, rows*cols entries.
    static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> vals);
    static Tensor identity(std::size_t n);

    bool empty() const { return size_ == 0; }
    std::size_t numel() const { return size_; }
    int rank() const { return rank_; }
    std::size_t dim(int i) const { return dims_[static_cast<std::size_t>(i)]; }
    std::size_t rows() const { return rank_ == 2 ? dims_[0] : 1; }
    std::size_t cols() const { return rank_ == 2 ? dims_[1] : dims_[0]; }

    bool same_shape(const Tensor& other) const {
        return rank_ == other.rank_ && dims_ == other.dims_;
    }
    std::string shape_str() const;

    double* data() { return size_ <= kInlineCap ? sbo_.data() : heap_.data(); }
    const double* data() const { return size_ <= kInlineCap ? sbo_.data() : heap_.data(); }
    std::span<double> values() { return {data(), size_}; }
    std::span<const double> values() const { return {data(), size_}; }

    double& operator[](std::size_t i) { return data()[i]; }
    double operator[](std::size_t i) const { return data()[i]; }
    double& at(std::size_t r, std::size_t c) { return data()[r * dims_[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data()[r * dims_[1] + c]; }

    std::span<double> row(std::size_t r) { return {data() + r * dims_[1], dims_[1]}; }
    std::span<const double> row(std::size_t r) const { return {data() + r * dims_[1], dims_[1]}; }

    void fill(double v);
    void set_zero() { fill(0.0); }
    bool all_finite() const;

    // this += other (shapes must match)
    void add(const Tensor& other);
    // this += alpha * other
    void add_scaled(const Tensor& other, double alpha);
    double sum() const;

private:
    void allocate(int rank, std::size_t d0, std::size_t d1);

    std::size_t size_ = 0;
    int rank_ = 1;
    std::array<std::size_t, 2> dims_{0, 0};
    std::array<double, kInlineCap> sbo_{};
    std::vector<double> heap_;
};

// Shared arithmetic kernels. The autodiff graph and the batched inference
// paths both call these, so the two routes produce bit-identical values.
namespace kernels {

// y[n x m] = x[n x k] * w[k x m] + b[m]
void affine(const double* x, std::size_t n, std::size_t k,
            const double* w, std::size_t m, const double* b, double* y);
double dot(const double* a, const double* b, std::size_t n);
void tanh_inplace(double* x, std::size_t n);
void relu_inplace(double* x, std::size_t n);
void sigmoid_inplace(double* x, std::size_t n);
double sigmoid(double x);
// log(1 + exp(x)) without overflow
double softplus(double x);

}  // namespace kernels

}  // namespace recode
