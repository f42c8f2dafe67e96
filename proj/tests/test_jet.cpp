#include <memory>
#include <random>

#include <doctest.h>

#include "sclab/jet.hpp"

using namespace sclab;

namespace {

Jet random_jet(const JetSpacePtr& s, int dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Jet j(s, dim);
  for (int i = 0; i < s->size(); ++i)
    for (int a = 0; a < dim; ++a)
      for (int b = 0; b < dim; ++b) j.coeff(i)(a, b) = cplx(U(rng), U(rng));
  return j;
}

double dist(const Jet& a, const Jet& b) { return (a - b).max_norm(); }

}  // namespace

TEST_CASE("jet space counting") {
  JetSpace s(3, 2);
  CHECK(s.size() == 10);
  CHECK(s.degree(0) == 0);
  for (int k = 0; k < 3; ++k) CHECK(s.degree(s.linear_index(k)) == 1);
  const int a = s.linear_index(0), b = s.linear_index(1);
  CHECK(s.degree(s.product(a, b)) == 2);
  CHECK(s.product(s.product(a, b), a) == -1);
}

TEST_CASE("jet algebra") {
  auto s = std::make_shared<const JetSpace>(2, 3);
  std::mt19937_64 rng(1);
  const Jet A = random_jet(s, 2, rng), B = random_jet(s, 2, rng), C = random_jet(s, 2, rng);
  CHECK(dist((A * B) * C, A * (B * C)) < 1e-13);
  CHECK(dist(A * (B + C), A * B + A * C) < 1e-13);
  CHECK(dist((A * B).adjoint(), B.adjoint() * A.adjoint()) < 1e-13);
  // Leibniz rule holds up to the truncation order.
  for (int k = 0; k < 2; ++k) {
    const Jet lhs = (A * B).derivative(k), rhs = A.derivative(k) * B + A * B.derivative(k);
    for (int i = 0; i < s->size(); ++i)
      if (s->degree(i) < s->order()) CHECK((lhs.coeff(i) - rhs.coeff(i)).norm() < 1e-13);
  }
  RVec w(2);
  w << 0.3, -1.2;
  CHECK(dist(A.directional(w), cplx(0.3) * A.derivative(0) + cplx(-1.2) * A.derivative(1)) < 1e-14);
}

TEST_CASE("affine jets") {
  auto s = std::make_shared<const JetSpace>(2, 2);
  const CMat v = CMat::Identity(2, 2), d0 = CMat::Constant(2, 2, 0.5), d1 = CMat::Identity(2, 2) * cplx(0, 1);
  const Jet a = Jet::affine(s, v, {d0, d1});
  CHECK((a.value() - v).norm() == 0.0);
  CHECK((a.derivative(0).value() - d0).norm() == 0.0);
  CHECK((a.derivative(1).value() - d1).norm() == 0.0);
  CHECK(a.derivative(0).derivative(0).max_norm() == 0.0);
  const Jet c = Jet::constant(s, v);
  CHECK(c.derivative(1).max_norm() == 0.0);
  CHECK(dist(c * a, a) == 0.0);
}
