#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mfusion::num {

// Dense row-major tensor of 64-bit floats. The two model architectures only
// need rank 1 and rank 2; shapes with more dims are rejected on construction.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor vec(std::vector<double> data);
    static Tensor mat(std::size_t rows, std::size_t cols, std::vector<double> data);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    // rank-2 accessors; rank-1 tensors count as a single row
    std::size_t rows() const;
    std::size_t cols() const;

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    double* raw() { return data_.data(); }
    const double* raw() const { return data_.data(); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    std::string shape_str() const;

    void fill(double v);
    bool all_finite() const;

    Tensor& operator+=(const Tensor& other);
    Tensor& operator*=(double s);

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::string shape_str(const std::vector<std::size_t>& shape);

// Forward-only kernels shared by the tape and by callers that never need
// gradients. All of them check conformance and throw ShapeError.

// C = A(m x k) * B(k x n)
Tensor matmul(const Tensor& a, const Tensor& b);
// C = A(m x k) * B(n x k)^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// C = A(k x m)^T * B(k x n)
Tensor matmul_tn(const Tensor& a, const Tensor& b);
// y = W(m x n) * x(n)
Tensor matvec(const Tensor& w, const Tensor& x);

// accumulate versions used by backward passes
void add_matmul(Tensor& c, const Tensor& a, const Tensor& b);
void add_matmul_nt(Tensor& c, const Tensor& a, const Tensor& b);
void add_matmul_tn(Tensor& c, const Tensor& a, const Tensor& b);
// c += a * b^T for vectors a(m), b(n) -> c(m x n)
void add_outer(Tensor& c, const Tensor& a, const Tensor& b);
// y += W^T * g for g(m), W(m x n) -> y(n)
void add_matvec_t(Tensor& y, const Tensor& w, const Tensor& g);

void assert_finite(const Tensor& t, const char* what);

}  // namespace mfusion::num
