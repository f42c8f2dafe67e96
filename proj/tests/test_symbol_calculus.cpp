#include <cmath>
#include <random>

#include <doctest.h>

#include "sclab/symbol_calculus.hpp"

using namespace sclab;

namespace {

PolySymbol random_symbol(int D, int degree, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  PolySymbol F(D);
  std::vector<int> e(2 * D, 0);
  std::function<void(int, int)> rec = [&](int pos, int rem) {
    if (pos == 2 * D) {
      F.add(MultiIndex(e.begin(), e.begin() + D), MultiIndex(e.begin() + D, e.end()),
            CMat::Constant(1, 1, cplx(U(rng), U(rng))));
      return;
    }
    for (int v = 0; v <= rem; ++v) {
      e[pos] = v;
      rec(pos + 1, rem - v);
    }
    e[pos] = 0;
  };
  rec(0, degree);
  return F;
}

PolySymbol random_matrix_symbol(int D, int degree, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  PolySymbol F(D, 2);
  std::vector<int> e(2 * D, 0);
  std::function<void(int, int)> rec = [&](int pos, int rem) {
    if (pos == 2 * D) {
      CMat c(2, 2);
      for (int i = 0; i < 4; ++i) c(i / 2, i % 2) = cplx(U(rng), U(rng));
      F.add(MultiIndex(e.begin(), e.begin() + D), MultiIndex(e.begin() + D, e.end()), c);
      return;
    }
    for (int v = 0; v <= rem; ++v) {
      e[pos] = v;
      rec(pos + 1, rem - v);
    }
    e[pos] = 0;
  };
  rec(0, degree);
  return F;
}

double coeff_distance(const PolySymbol& A, const PolySymbol& B) { return (A - B).max_abs_coeff(); }

PhaseVector point(std::initializer_list<double> v) {
  PhaseVector X(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double x : v) X(i++) = x;
  return X;
}

// Gauss-Hermite nodes/weights for the weight e^{-x^2} (Golub-Welsch).
void gauss_hermite(int n, RVec& x, RVec& w) {
  RMat J = RMat::Zero(n, n);
  for (int i = 1; i < n; ++i) J(i, i - 1) = J(i - 1, i) = std::sqrt(i / 2.0);
  Eigen::SelfAdjointEigenSolver<RMat> es(J);
  x = es.eigenvalues();
  w = std::sqrt(kPi) * es.eigenvectors().row(0).transpose().array().square();
}

}  // namespace

TEST_CASE("evaluation") {
  const PolySymbol one = PolySymbol::constant(1, 1.0);
  CHECK(one.eval_scalar(point({0.4, -2.0})) == cplx(1.0));
  const PolySymbol zz = PolySymbol::z(1, 0) * PolySymbol::zbar(1, 0);
  CHECK(std::abs(zz.eval_scalar(point({3.0, 4.0})) - 25.0) < 1e-12);
}

TEST_CASE("affine spin symbol reproduces the interaction symbol") {
  ModelConfig c;
  c.kmax = 2.0;
  const Model m = make_model(c);
  const AffineSymbol H = h_int_affine(m);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int k = 0; k < 5; ++k) {
    PhaseVector X(2 * m.D());
    for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = U(rng);
    CHECK((H.eval(X) - h_int_symbol(m, X)).norm() < 1e-14);
  }
}

TEST_CASE("Laplacian and heat operator") {
  const PolySymbol q = PolySymbol::q(1, 0), p = PolySymbol::p(1, 0);
  CHECK(coeff_distance(laplacian(q * q), PolySymbol::constant(1, 2.0)) < 1e-15);
  CHECK(laplacian(q * cplx(3.0) + p).max_abs_coeff() == 0.0);
  CHECK(coeff_distance(laplacian(PolySymbol::z(1, 0) * PolySymbol::zbar(1, 0)), PolySymbol::constant(1, 4.0)) < 1e-15);
  const double h = 0.37;
  CHECK(coeff_distance(heat(q * q, h), q * q + PolySymbol::constant(1, h)) < 1e-15);
  CHECK(coeff_distance(heat(q + p, h), q + p) == 0.0);
  std::mt19937_64 rng(8);
  const PolySymbol F = random_symbol(2, 6, rng);
  CHECK(coeff_distance(heat(heat(F, h), -h), F) < 1e-12 * F.max_abs_coeff());
}

TEST_CASE("Wick quantization") {
  const double h = 0.3;
  FockBasis b1(1, 15);
  const PolySymbol q = PolySymbol::q(1, 0), p = PolySymbol::p(1, 0);
  CHECK((wick_quantize(q * q + p * p, b1, h).mat - cplx(2.0 * h) * number_operator(b1).mat).norm() < 1e-13);
  SpMat id(b1.size(), b1.size());
  id.setIdentity();
  CHECK((wick_quantize(PolySymbol::constant(1, 1.0), b1, h).mat - id).norm() == 0.0);

  FockBasis b(2, 25);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const PolySymbol F = random_symbol(2, 3, rng);
  const FockOperator op = wick_quantize(F, b, 0.25);
  for (int k = 0; k < 20; ++k) {
    PhaseVector X(4);
    for (int i = 0; i < 4; ++i) X(i) = U(rng);
    X *= std::abs(U(rng)) / X.norm();
    const cplx want = F.eval_scalar(X);
    CHECK(std::abs(wick_symbol_photon(op, b, X, 0.25) - want) <= 1e-6 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("anti-Wick quantization against Gauss-Hermite quadrature") {
  // <m| Op^AW(F) |n> = (1/pi) int F(sqrt(2h) u, sqrt(2h) v) e^{-u^2-v^2} z^m zbar^n / sqrt(m! n!), z = u + i v.
  const double h = 0.4;
  const int nmax = 12, inner = 4, nodes = 30;
  FockBasis b(1, nmax);
  std::mt19937_64 rng(3);
  const PolySymbol F = random_symbol(1, 4, rng);
  const CMat aw = CMat(anti_wick_quantize(F, b, h).mat);
  RVec x, w;
  gauss_hermite(nodes, x, w);
  for (int m = 0; m <= inner; ++m)
    for (int n = 0; n <= inner; ++n) {
      cplx acc = 0.0;
      for (int i = 0; i < nodes; ++i)
        for (int j = 0; j < nodes; ++j) {
          const cplx z(x(i), x(j));
          const cplx f = F.eval_scalar(point({std::sqrt(2.0 * h) * x(i), std::sqrt(2.0 * h) * x(j)}));
          acc += w(i) * w(j) * f * std::pow(z, m) * std::pow(std::conj(z), n);
        }
      acc /= kPi * std::sqrt(std::tgamma(m + 1.0) * std::tgamma(n + 1.0));
      CHECK(std::abs(aw(m, n) - acc) < 1e-10);
    }
  const PolySymbol q = PolySymbol::q(1, 0);
  CHECK((anti_wick_quantize(q * q, b, h).mat - wick_quantize(q * q + PolySymbol::constant(1, h), b, h).mat).norm() <
        1e-13);
}

TEST_CASE("Mizrahi composition") {
  const double h = 0.21;
  const PolySymbol q = PolySymbol::q(1, 0);
  CHECK(coeff_distance(mizrahi_compose(q, q, h), q * q + PolySymbol::constant(1, h / 2)) < 1e-15);
  // sigma(Op(q)^2) = q^2 + h/2 by ladder algebra.
  FockBasis b1(1, 30);
  const SpMat opq = wick_quantize(q, b1, h).mat;
  const FockOperator sq{SpMat(opq * opq), false, 1};
  CHECK(std::abs(wick_symbol_photon(sq, b1, point({0.3, 0.2}), h) - (0.09 + h / 2)) < 1e-10);

  std::mt19937_64 rng(6);
  const PolySymbol F = random_symbol(2, 3, rng), G = random_symbol(2, 3, rng);
  CHECK(coeff_distance(mizrahi_compose(F, PolySymbol::constant(2, 1.0), h), F) < 1e-15);
  // Exact operator identity below the cutoff.
  FockBasis b(2, 10);
  const CMat lhs = CMat(wick_quantize(mizrahi_compose(F, G, h), b, h).mat);
  const CMat rhs = CMat(wick_quantize(F, b, h).mat) * CMat(wick_quantize(G, b, h).mat);
  for (std::size_t c = 0; c < b.size(); ++c) {
    if (b.total(c) > b.n_max() - 3) continue;
    CHECK((lhs.col(c) - rhs.col(c)).norm() <= 1e-10 * std::max(1.0, rhs.col(c).norm()));
  }
  // Associativity of the composition.
  const PolySymbol K = random_symbol(2, 2, rng);
  CHECK(coeff_distance(mizrahi_compose(mizrahi_compose(F, G, h), K, h), mizrahi_compose(F, mizrahi_compose(G, K, h), h)) <
        1e-12);
  // Truncation after order one leaves exactly the h^2 and h^3 terms for cubic symbols.
  const PolySymbol r1 = mizrahi_compose(F, G, h) - mizrahi_compose(F, G, h, 1);
  const PolySymbol tail = mizrahi_term(F, G, 2) * cplx(h * h) + mizrahi_term(F, G, 3) * cplx(h * h * h);
  CHECK(coeff_distance(r1, tail) < 1e-14);
  CHECK(mizrahi_term(F, G, 4).max_abs_coeff() == 0.0);
}

TEST_CASE("first order cross term for affine symbols") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  PhaseVector V(2), W(2);
  V << U(rng), U(rng);
  W << U(rng), U(rng);
  const PolySymbol F = PolySymbol::linear(V, CMat::Constant(1, 1, 1.0));
  const PolySymbol G = PolySymbol::linear(W, CMat::Constant(1, 1, 1.0));
  const cplx I(0.0, 1.0);
  // 1/2 (d_q F - i d_p F)(d_q G + i d_p G)
  const cplx closed = 0.5 * (V(0) - I * V(1)) * (W(0) + I * W(1));
  CHECK(std::abs(mizrahi_term(F, G, 1).eval_scalar(point({0.5, 0.1})) - closed) < 1e-15);
  AffineSymbol A;
  A.constant = CMat::Zero(1, 1);
  A.terms.push_back({V, CMat::Constant(1, 1, 1.0)});
  auto dG = [&](const PhaseVector& Z) { return CMat::Constant(1, 1, W.dot(Z)); };
  CHECK(std::abs(c1_cross_left<CMat>(A, dG, CMat::Zero(1, 1))(0, 0) - closed) < 1e-15);
  // C^1(G, F) with F on the right.
  const cplx closed_r = 0.5 * (W(0) - I * W(1)) * (V(0) + I * V(1));
  CHECK(std::abs(c1_cross_right<CMat>(A, dG, CMat::Zero(1, 1))(0, 0) - closed_r) < 1e-15);
}

TEST_CASE("commutator with a Segal field") {
  // sigma([Phi(V), Op(G)]) = h [C^1(phi_V, G) - C^1(G, phi_V)] + [phi_V, G] for matrix-valued G.
  const double h = 0.3;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  PhaseVector V(2);
  V << U(rng), U(rng);
  const CMat S = (CMat(2, 2) << 0.3, cplx(0.1, 0.2), cplx(0.1, -0.2), -0.4).finished();
  const PolySymbol phi = PolySymbol::linear(V, S);
  const PolySymbol G = random_matrix_symbol(1, 2, rng);
  const PolySymbol lhs = mizrahi_compose(phi, G, h) - mizrahi_compose(G, phi, h);
  const PolySymbol rhs = (mizrahi_term(phi, G, 1) - mizrahi_term(G, phi, 1)) * cplx(h) + (phi * G - G * phi);
  CHECK(coeff_distance(lhs, rhs) < 1e-14);
}

TEST_CASE("symbol derivatives and translation") {
  std::mt19937_64 rng(14);
  const PolySymbol F = random_symbol(2, 4, rng);
  const PhaseVector X = point({0.3, -0.2, 0.5, 0.1}), Y = point({0.1, 0.4, -0.3, 0.2});
  CHECK(std::abs(F.translated(Y).eval_scalar(X) - F.eval_scalar(X + Y)) < 1e-13);
  const double eps = 1e-6;
  PhaseVector e = PhaseVector::Zero(4);
  e(1) = eps;
  const cplx fd = (F.eval_scalar(X + e) - F.eval_scalar(X - e)) / (2 * eps);
  CHECK(std::abs(F.dq(1).eval_scalar(X) - fd) < 1e-8);
  e.setZero();
  e(3) = eps;
  const cplx fdp = (F.eval_scalar(X + e) - F.eval_scalar(X - e)) / (2 * eps);
  CHECK(std::abs(F.dp(1).eval_scalar(X) - fdp) < 1e-8);
  const auto raw = F.to_raw();
  std::map<std::pair<MultiIndex, MultiIndex>, cplx> rs;
  for (const auto& [k, v] : raw) rs[k] = v(0, 0);
  CHECK(coeff_distance(PolySymbol::from_raw(2, rs), F) < 1e-13);
}
