#include "sclab/jet.hpp"

#include <functional>
#include <map>
#include <stdexcept>

namespace sclab {

JetSpace::JetSpace(int r, int order) : r_(r), order_(order) {
  if (r < 0 || order < 0) throw std::invalid_argument("JetSpace: negative size");
  std::map<std::vector<int>, int> index;
  std::vector<int> cur(r, 0);
  for (int d = 0; d <= order; ++d) {
    std::function<void(int, int)> rec = [&](int pos, int rem) {
      if (pos == r) {
        if (rem == 0) {
          index[cur] = static_cast<int>(mono_.size());
          mono_.push_back(cur);
          deg_.push_back(d);
        }
        return;
      }
      for (int v = rem; v >= 0; --v) {
        cur[pos] = v;
        rec(pos + 1, rem - v);
      }
      cur[pos] = 0;
    };
    if (r == 0) {
      if (d == 0) {
        mono_.push_back({});
        deg_.push_back(0);
        index[{}] = 0;
      }
      continue;
    }
    rec(0, d);
  }
  const int n = size();
  mul_.assign(static_cast<std::size_t>(n) * n, -1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (deg_[i] + deg_[j] > order_) continue;
      std::vector<int> e(r);
      for (int k = 0; k < r; ++k) e[k] = mono_[i][k] + mono_[j][k];
      mul_[i * n + j] = index.at(e);
    }
  dix_.assign(static_cast<std::size_t>(n) * r, -1);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < r; ++k) {
      if (mono_[i][k] == 0) continue;
      std::vector<int> e = mono_[i];
      e[k] -= 1;
      dix_[i * r + k] = index.at(e);
    }
  lin_.assign(r, -1);
  if (order_ >= 1)
    for (int k = 0; k < r; ++k) {
      std::vector<int> e(r, 0);
      e[k] = 1;
      lin_[k] = index.at(e);
    }
}

Jet::Jet(JetSpacePtr space, int dim) : space_(std::move(space)), dim_(dim) {
  c_.assign(space_->size(), CMat::Zero(dim, dim));
}

Jet Jet::constant(JetSpacePtr space, const CMat& value) {
  Jet j(std::move(space), static_cast<int>(value.rows()));
  j.c_[0] = value;
  return j;
}

Jet Jet::affine(JetSpacePtr space, const CMat& value, const std::vector<CMat>& slopes) {
  Jet j = constant(space, value);
  if (static_cast<int>(slopes.size()) != space->vars()) throw std::invalid_argument("Jet::affine: slope count");
  if (space->order() >= 1)
    for (int k = 0; k < space->vars(); ++k) j.c_[space->linear_index(k)] = slopes[k];
  return j;
}

Jet Jet::adjoint() const {
  Jet r(space_, dim_);
  for (int i = 0; i < space_->size(); ++i) r.c_[i] = c_[i].adjoint();
  return r;
}

Jet Jet::derivative(int k) const {
  Jet r(space_, dim_);
  for (int i = 0; i < space_->size(); ++i) {
    const int t = space_->derivative_index(i, k);
    if (t >= 0) r.c_[t] += static_cast<double>(space_->derivative_factor(i, k)) * c_[i];
  }
  return r;
}

Jet Jet::directional(const RVec& w) const {
  if (w.size() != space_->vars()) throw std::invalid_argument("Jet::directional: dimension mismatch");
  Jet r(space_, dim_);
  for (int i = 0; i < space_->size(); ++i)
    for (int k = 0; k < space_->vars(); ++k) {
      const int t = space_->derivative_index(i, k);
      if (t >= 0 && w(k) != 0.0) r.c_[t] += (w(k) * space_->derivative_factor(i, k)) * c_[i];
    }
  return r;
}

double Jet::max_norm() const {
  double m = 0.0;
  for (const auto& c : c_) m = std::max(m, c.cwiseAbs().maxCoeff());
  return m;
}

Jet Jet::operator+(const Jet& o) const {
  Jet r = *this;
  r += o;
  return r;
}

Jet& Jet::operator+=(const Jet& o) {
  if (o.space_ != space_ || o.dim_ != dim_) throw std::invalid_argument("Jet: incompatible operands");
  for (int i = 0; i < space_->size(); ++i) c_[i] += o.c_[i];
  return *this;
}

Jet Jet::operator-(const Jet& o) const { return *this + cplx(-1.0) * o; }

Jet Jet::operator*(const Jet& o) const {
  if (o.space_ != space_ || o.dim_ != dim_) throw std::invalid_argument("Jet: incompatible operands");
  Jet r(space_, dim_);
  const int n = space_->size();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int t = space_->product(i, j);
      if (t >= 0) r.c_[t].noalias() += c_[i] * o.c_[j];
    }
  return r;
}

Jet operator*(cplx s, const Jet& a) {
  Jet r = a;
  for (int i = 0; i < a.space()->size(); ++i) r.coeff(i) *= s;
  return r;
}

Jet operator*(const CMat& m, const Jet& a) {
  Jet r = a;
  for (int i = 0; i < a.space()->size(); ++i) r.coeff(i) = m * a.coeff(i);
  return r;
}

Jet operator*(const Jet& a, const CMat& m) {
  Jet r = a;
  for (int i = 0; i < a.space()->size(); ++i) r.coeff(i) = a.coeff(i) * m;
  return r;
}

}  // namespace sclab
