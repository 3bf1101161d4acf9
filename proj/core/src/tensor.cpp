#include "mfusion/tensor.hpp"

#include <Eigen/Core>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mfusion/errors.hpp"

namespace mfusion::num {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const EMat> emap(const Tensor& t) {
    return {t.raw(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

Eigen::Map<EMat> emap(Tensor& t) {
    return {t.raw(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

Eigen::Map<const Eigen::VectorXd> evec(const Tensor& t) {
    return {t.raw(), static_cast<Eigen::Index>(t.size())};
}

Eigen::Map<Eigen::VectorXd> evec(Tensor& t) {
    return {t.raw(), static_cast<Eigen::Index>(t.size())};
}

std::size_t checked_product(const std::vector<std::size_t>& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have rank >= 1");
    if (shape.size() > 2) throw ShapeError("tensor rank > 2 unsupported, got " + shape_str(shape));
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw ShapeError("tensor dims must be positive, got " + shape_str(shape));
        n *= d;
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    data_.assign(checked_product(shape_), 0.0);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_product(shape_) != data_.size()) {
        throw ShapeError("shape " + mfusion::num::shape_str(shape_) + " does not match data length " +
                         std::to_string(data_.size()));
    }
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::vec(std::vector<double> data) {
    std::size_t n = data.size();
    return Tensor({n}, std::move(data));
}

Tensor Tensor::mat(std::size_t rows, std::size_t cols, std::vector<double> data) {
    return Tensor({rows, cols}, std::move(data));
}

std::size_t Tensor::rows() const { return rank() == 1 ? 1 : shape_[0]; }

std::size_t Tensor::cols() const { return rank() == 1 ? shape_[0] : shape_[1]; }

std::string Tensor::shape_str() const { return num::shape_str(shape_); }

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Tensor& Tensor::operator+=(const Tensor& other) {
    if (!same_shape(other)) {
        throw ShapeError("elementwise add: " + shape_str() + " vs " + other.shape_str());
    }
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

namespace {

void check_mm(const Tensor& a, const Tensor& b, std::size_t ak, std::size_t bk, const char* op) {
    if (ak != bk) {
        throw ShapeError(std::string(op) + ": " + a.shape_str() + " vs " + b.shape_str());
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    Tensor c({a.rows(), b.cols()});
    add_matmul(c, a, b);
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    Tensor c({a.rows(), b.rows()});
    add_matmul_nt(c, a, b);
    return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    Tensor c({a.cols(), b.cols()});
    add_matmul_tn(c, a, b);
    return c;
}

Tensor matvec(const Tensor& w, const Tensor& x) {
    if (w.rank() != 2 || x.rank() != 1 || w.cols() != x.size()) {
        throw ShapeError("matvec: " + w.shape_str() + " vs " + x.shape_str());
    }
    Tensor y({w.rows()});
    evec(y).noalias() = emap(w) * evec(x);
    return y;
}

void add_matmul(Tensor& c, const Tensor& a, const Tensor& b) {
    check_mm(a, b, a.cols(), b.rows(), "matmul");
    emap(c).noalias() += emap(a) * emap(b);
}

void add_matmul_nt(Tensor& c, const Tensor& a, const Tensor& b) {
    check_mm(a, b, a.cols(), b.cols(), "matmul_nt");
    emap(c).noalias() += emap(a) * emap(b).transpose();
}

void add_matmul_tn(Tensor& c, const Tensor& a, const Tensor& b) {
    check_mm(a, b, a.rows(), b.rows(), "matmul_tn");
    emap(c).noalias() += emap(a).transpose() * emap(b);
}

void add_outer(Tensor& c, const Tensor& a, const Tensor& b) {
    emap(c).noalias() += evec(a) * evec(b).transpose();
}

void add_matvec_t(Tensor& y, const Tensor& w, const Tensor& g) {
    evec(y).noalias() += emap(w).transpose() * evec(g);
}

void assert_finite(const Tensor& t, const char* what) {
    if (!t.all_finite()) {
        throw NumericError(std::string("non-finite values in ") + what);
    }
}

}  // namespace mfusion::num
