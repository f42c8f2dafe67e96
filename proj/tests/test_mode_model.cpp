#include <cmath>
#include <random>

#include <doctest.h>

#include "sclab/mode_model.hpp"

using namespace sclab;

namespace {

ModelConfig minimal_config() {
  ModelConfig c;
  c.kmax = 2.0;
  c.radial_nodes = 1;
  return c;
}

PhaseVector random_vector(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  PhaseVector v(n);
  for (int i = 0; i < n; ++i) v(i) = U(rng);
  return v;
}

}  // namespace

TEST_CASE("minimal grid has one k-point at r = 1") {
  const ModeGrid g = build_grid(minimal_config());
  CHECK(g.kpoints() == 1);
  CHECK(g.D() == 4);
  CHECK(g.omega[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK((g.frame[0][0] - Vec3(1, 0, 0)).norm() < 1e-14);
  CHECK((g.frame[0][1] - Vec3(0, 1, 0)).norm() < 1e-14);
  const Vec3 khat = g.k[0].normalized();
  CHECK((khat.cross(g.frame[0][0]) - g.frame[0][1]).norm() < 1e-14);
}

TEST_CASE("octahedral grid with two radial nodes") {
  ModelConfig c = minimal_config();
  c.radial_nodes = 2;
  c.directions = "octahedral";
  const ModeGrid g = build_grid(c);
  CHECK(g.kpoints() == 12);
  CHECK(g.D() == 48);
  for (int i = 0; i < g.kpoints(); ++i) {
    const Vec3 khat = g.k[i].normalized();
    CHECK(std::abs(khat.dot(g.frame[i][0])) < 1e-14);
    CHECK((khat.cross(g.frame[i][0]) - g.frame[i][1]).norm() < 1e-14);
  }
}

TEST_CASE("config validation rejects bad input") {
  ModelConfig c = minimal_config();
  c.radial_nodes = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = minimal_config();
  c.spin_count = 2;
  c.positions = {Vec3::Zero(), Vec3::Zero()};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"cutoff", {{"family", "box"}}}}).validate(), std::invalid_argument);
}

TEST_CASE("magnetic coupling on a single unit k-point") {
  const ModeGrid g = grid_from_points({Vec3(0, 0, 1)}, {1.0});
  ModelConfig c;
  c.cutoff_family = "unit";
  c.kmax = 2.0;
  const PhaseVector b3 = coupling_B(g, c, 3, Vec3::Zero());
  CHECK(b3.norm() == doctest::Approx(0.0));
  // k x e_1 = e_2: purely imaginary amplitude, i.e. a p-component on the even e_2 slot.
  const PhaseVector b1 = coupling_B(g, c, 1, Vec3::Zero());
  const double amp = std::pow(2.0 * kPi, -1.5);
  PhaseVector expect = PhaseVector::Zero(8);
  expect(4 + ModeGrid::slot(0, 1, 0)) = amp;
  CHECK((b1 - expect).norm() < 1e-15);
}

TEST_CASE("helicity operator") {
  ModelConfig c = minimal_config();
  c.directions = "octahedral";
  const Model m = make_model(c);
  std::mt19937_64 rng(3);
  for (int k = 0; k < 5; ++k) {
    const PhaseVector u = random_vector(2 * m.D(), rng);
    CHECK((apply_helicity(m.grid, apply_helicity(m.grid, u)) + u).norm() < 1e-14);
    CHECK((apply_helicity(m.grid, apply_F(u)) - apply_F(apply_helicity(m.grid, u))).norm() < 1e-14);
  }
  const Vec3 x(0.2, -0.4, 0.7);
  for (int a = 1; a <= 3; ++a)
    CHECK((apply_helicity(m.grid, coupling_B(m.grid, c, a, x)) - coupling_E(m.grid, c, a, x)).norm() < 1e-15);
  CHECK(apply_helicity(m.grid, PhaseVector::Zero(2 * m.D())).norm() == 0.0);
}

TEST_CASE("polarization projectors") {
  const Model m = make_model(minimal_config());
  std::mt19937_64 rng(5);
  const PhaseVector X = random_vector(2 * m.D(), rng);
  const PhaseVector P = polarization_project(m.grid, 1, X);
  const PhaseVector Q = polarization_project(m.grid, -1, X);
  CHECK((polarization_project(m.grid, 1, P) - P).norm() < 1e-14);
  CHECK((P + Q - X).norm() < 1e-14);
  // J X = F X for the + component, hence its - projection vanishes.
  CHECK((apply_helicity(m.grid, P) - apply_F(P)).norm() < 1e-14);
  CHECK(polarization_project(m.grid, -1, P).norm() < 1e-14);
  CHECK_THROWS_AS(polarization_project(m.grid, 0, X), std::invalid_argument);
}

TEST_CASE("discrete smeared density") {
  const ModeGrid g = grid_from_points({Vec3(0, 0, 1)}, {1.0});
  ModelConfig c;
  c.cutoff_family = "unit";
  c.kmax = 2.0;
  const double norm = std::pow(2.0 * kPi, -3.0);
  const Vec3 x(0.3, -0.1, 0.8);
  CHECK(rho_discrete(g, c, x).value == doctest::Approx(norm * std::cos(0.8)).epsilon(1e-14));
  CHECK(rho_discrete(g, c, Vec3::Zero()).grad.norm() == 0.0);
  CHECK(rho_discrete(g, c, Vec3::Zero()).value == doctest::Approx(norm));
}

TEST_CASE("symplectic pairing of electric and magnetic couplings") {
  ModelConfig c = minimal_config();
  c.directions = "octahedral";
  c.radial_nodes = 2;
  const ModeGrid g = build_grid(c);
  const Vec3 x(0.1, 0.5, -0.3), y(-0.4, 0.2, 0.6);
  const Vec3 grad = rho_discrete(g, c, x - y).grad;
  for (int m = 1; m <= 3; ++m)
    for (int n = 1; n <= 3; ++n) {
      const double lhs = symplectic(coupling_E(g, c, m, x), coupling_B(g, c, n, y));
      const double rhs = grad.dot(Vec3::Unit(m - 1).cross(Vec3::Unit(n - 1)));
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10).scale(1e-6));
    }
}

TEST_CASE("Pauli matrices and spin operators") {
  const cplx I(0.0, 1.0);
  CHECK((pauli(3) - SpinMatrix(Eigen::Vector2cd(1.0, -1.0).asDiagonal())).norm() == 0.0);
  CHECK((pauli(1) * pauli(2) - I * pauli(3)).norm() < 1e-15);
  for (int m = 1; m <= 3; ++m)
    for (int j = 1; j <= 3; ++j) {
      const SpinMatrix a = spin_operator(2, 1, m), b = spin_operator(2, 2, j);
      CHECK((a * b - b * a).norm() == 0.0);
      CHECK((a * a - SpinMatrix::Identity(4, 4)).norm() == 0.0);
    }
}

TEST_CASE("interaction symbol") {
  ModelConfig c = minimal_config();
  c.beta = Vec3(0, 0, 0.7);
  const Model m = make_model(c);
  const SpinMatrix H0 = h_int_symbol(m, PhaseVector::Zero(2 * m.D()));
  CHECK((H0 - 0.7 * pauli(3)).norm() < 1e-15);
  Eigen::SelfAdjointEigenSolver<SpinMatrix> es(H0);
  CHECK(es.eigenvalues()(0) == doctest::Approx(-0.7));
  CHECK(es.eigenvalues()(1) == doctest::Approx(0.7));
  std::mt19937_64 rng(9);
  const PhaseVector X = random_vector(2 * m.D(), rng);
  const SpinMatrix H = h_int_symbol(m, X);
  CHECK((H - H.adjoint()).norm() < 1e-15);
  // Affine in X with the constant gradient.
  const PhaseVector V = random_vector(2 * m.D(), rng);
  CHECK((h_int_symbol(m, X + V) - H - h_int_gradient(m, V)).norm() < 1e-14);
}

TEST_CASE("free flow") {
  const Model m = make_model(minimal_config());
  std::mt19937_64 rng(13);
  const PhaseVector X = random_vector(8, rng), Y = random_vector(8, rng);
  CHECK((chi_flow(m.grid, 0.0, X) - X).norm() == 0.0);
  CHECK((chi_flow(m.grid, 0.4, chi_flow(m.grid, 0.3, X)) - chi_flow(m.grid, 0.7, X)).norm() < 1e-14);
  CHECK(chi_flow(m.grid, 1.3, X).norm() == doctest::Approx(X.norm()));
  CHECK(symplectic(chi_flow(m.grid, 1.3, X), chi_flow(m.grid, 1.3, Y)) == doctest::Approx(symplectic(X, Y)));
  CHECK((chi_matrix(m.grid, 0.6).transpose() - chi_matrix(m.grid, -0.6)).norm() < 1e-14);
  // Unit frequency, quarter period: (q, p) = (1, 0) -> (0, -1).
  PhaseVector e = PhaseVector::Zero(8);
  e(0) = 1.0;
  PhaseVector want = PhaseVector::Zero(8);
  want(4) = -1.0;
  CHECK((chi_flow(m.grid, kPi / 2, e) - want).norm() < 1e-14);
}

TEST_CASE("quadratic form of the propagator bound") {
  const Model m = make_model(minimal_config());
  CHECK(q_form(m, 0.0).A.norm() == 0.0);
  const QuadFormQ q1 = q_form(m, 0.5), q2 = q_form(m, 1.0);
  Eigen::SelfAdjointEigenSolver<RMat> e1(q1.A), e12(q2.A - q1.A);
  CHECK(e1.eigenvalues().minCoeff() > -1e-12);
  CHECK(e12.eigenvalues().minCoeff() > -1e-12);
  CHECK(q2.trace == doctest::Approx(q2.A.trace()).epsilon(1e-8));
  // 2^N |t| int_0^t sum |chi_s^T B|^2 ds with |chi_s^T B| = |B|.
  double sum = 0.0;
  for (const auto& row : m.B)
    for (const auto& b : row) sum += b.squaredNorm();
  CHECK(q2.trace == doctest::Approx(2.0 * 1.0 * 1.0 * sum).epsilon(1e-8));
}

TEST_CASE("observable data") {
  const Model m = make_model(minimal_config());
  ObservableSpec s;
  s.kind = ObservableKind::spin;
  s.axis = 2;
  const FormA fs = form_of(m, s);
  CHECK(fs.F.norm() == 0.0);
  CHECK((fs.S - pauli(2)).norm() == 0.0);
  ObservableSpec b;
  b.kind = ObservableKind::field_B;
  b.axis = 1;
  const FormA fb = form_of(m, b);
  CHECK((fb.F - coupling_B(m.grid, m.config, 1, Vec3::Zero())).norm() == 0.0);
  CHECK(fb.S.norm() == 0.0);
  const auto roundtrip = observable_from_json(observable_to_json(b));
  CHECK(roundtrip.label() == b.label());
  CHECK_THROWS_AS(observable_from_json(nlohmann::json{{"kind", "spin"}, {"axis", 4}}), std::invalid_argument);
}
