#pragma once

#include <memory>
#include <vector>

#include "sclab/types.hpp"

namespace sclab {

// Monomials eps^n in r real variables with total degree <= order, graded.
class JetSpace {
 public:
  JetSpace(int r, int order);

  int vars() const { return r_; }
  int order() const { return order_; }
  int size() const { return static_cast<int>(mono_.size()); }
  const std::vector<int>& exponents(int i) const { return mono_[i]; }
  int degree(int i) const { return deg_[i]; }
  // Index of mono_i * mono_j, -1 when the product exceeds the order.
  int product(int i, int j) const { return mul_[i * size() + j]; }
  // d/d eps_k mono_i = factor * mono_{index}; index -1 when zero.
  int derivative_index(int i, int k) const { return dix_[i * r_ + k]; }
  int derivative_factor(int i, int k) const { return mono_[i][k]; }
  int linear_index(int k) const { return lin_[k]; }

 private:
  int r_;
  int order_;
  std::vector<std::vector<int>> mono_;
  std::vector<int> deg_;
  std::vector<int> mul_;
  std::vector<int> dix_;
  std::vector<int> lin_;
};

using JetSpacePtr = std::shared_ptr<const JetSpace>;

// Truncated Taylor expansion sum_n c_n eps^n with d x d complex matrix coefficients.
class Jet {
 public:
  Jet() = default;
  Jet(JetSpacePtr space, int dim);

  static Jet constant(JetSpacePtr space, const CMat& value);
  // value + sum_k eps_k slope_k
  static Jet affine(JetSpacePtr space, const CMat& value, const std::vector<CMat>& slopes);

  const JetSpacePtr& space() const { return space_; }
  int dim() const { return dim_; }
  const CMat& coeff(int i) const { return c_[i]; }
  CMat& coeff(int i) { return c_[i]; }
  const CMat& value() const { return c_[0]; }

  Jet adjoint() const;
  Jet derivative(int k) const;
  // sum_k w_k d/d eps_k
  Jet directional(const RVec& w) const;
  double max_norm() const;

  Jet operator+(const Jet& o) const;
  Jet operator-(const Jet& o) const;
  Jet operator*(const Jet& o) const;
  Jet& operator+=(const Jet& o);

 private:
  JetSpacePtr space_;
  int dim_ = 0;
  std::vector<CMat> c_;
};

Jet operator*(cplx s, const Jet& a);
Jet operator*(const CMat& m, const Jet& a);
Jet operator*(const Jet& a, const CMat& m);

}  // namespace sclab
