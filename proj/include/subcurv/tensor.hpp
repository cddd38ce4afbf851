#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include <Eigen/Dense>

#include "subcurv/expr.hpp"
#include "subcurv/model.hpp"

namespace subcurv {

// Dense numeric tensor whose indices all range over {0, ..., n-1}.
// Storage is row-major in the index list.
class NumTensor {
 public:
  NumTensor() = default;
  NumTensor(int n, int order)
      : n_(n), order_(order), data_(pow_size(n, order), 0.0) {}

  int n() const { return n_; }
  int order() const { return order_; }
  std::size_t size() const { return data_.size(); }

  double& operator[](std::size_t flat) { return data_[flat]; }
  double operator[](std::size_t flat) const { return data_[flat]; }

  double& at(std::initializer_list<int> idx) { return data_[flat_index(idx)]; }
  double at(std::initializer_list<int> idx) const {
    return data_[flat_index(idx)];
  }

  std::size_t flat_index(std::initializer_list<int> idx) const {
    std::size_t f = 0;
    for (int i : idx) f = f * static_cast<std::size_t>(n_) + i;
    return f;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  static std::size_t pow_size(int n, int order) {
    std::size_t s = 1;
    for (int i = 0; i < order; ++i) s *= static_cast<std::size_t>(n);
    return s;
  }

 private:
  int n_ = 0;
  int order_ = 0;
  std::vector<double> data_;
};

// Dense symbolic tensor over the frame: every index runs over the frame
// indices {0, ..., n-1} and every component is a scalar expression in the
// chart coordinates.  The interpretation of each slot (vector vs covector)
// is tracked by the caller; see covariant_derivative().
class SymTensor {
 public:
  SymTensor() = default;
  SymTensor(int n, int order)
      : n_(n),
        order_(order),
        data_(NumTensor::pow_size(n, order), Expr::constant(0.0)) {}

  int n() const { return n_; }
  int order() const { return order_; }
  std::size_t size() const { return data_.size(); }

  Expr& operator[](std::size_t flat) { return data_[flat]; }
  const Expr& operator[](std::size_t flat) const { return data_[flat]; }

  Expr& at(std::initializer_list<int> idx) { return data_[flat_index(idx)]; }
  const Expr& at(std::initializer_list<int> idx) const {
    return data_[flat_index(idx)];
  }

  std::size_t flat_index(std::initializer_list<int> idx) const {
    std::size_t f = 0;
    for (int i : idx) f = f * static_cast<std::size_t>(n_) + i;
    return f;
  }

  bool is_identically_zero() const {
    for (const auto& e : data_)
      if (!e.is_zero()) return false;
    return true;
  }

  NumTensor eval(const Eigen::VectorXd& x) const {
    NumTensor out(n_, order_);
    for (std::size_t f = 0; f < data_.size(); ++f) out[f] = data_[f].eval(x.data());
    return out;
  }

 private:
  int n_ = 0;
  int order_ = 0;
  std::vector<Expr> data_;
};

// Derivative of a scalar expression along frame field X_a:
// X_a(f) = sum_mu (coefficient of d/dx_mu in X_a) * df/dx_mu.
Expr frame_derivative(const Frame& frame, int a, const Expr& f);

// Covariant derivative of a frame tensor.  `upper[s]` marks slot s of E as a
// vector slot (transforming with +Gamma); covector slots get -Gamma.  The
// result has one extra covector slot prepended: out(a, i_0, ..., i_{k-1}) =
// (nabla_{X_a} E)(i_0, ..., i_{k-1}).  `gamma` is indexed (k, i, j) with
// nabla_{X_i} X_j = sum_k gamma(k,i,j) X_k.
SymTensor covariant_derivative(const SymTensor& E,
                               const std::vector<bool>& upper,
                               const SymTensor& gamma, const Frame& frame);

}  // namespace subcurv
