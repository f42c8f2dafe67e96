#include <cmath>
#include <memory>

#include <doctest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "sclab/oracle.hpp"

using namespace sclab;

namespace {

ModelConfig minimal_config() {
  ModelConfig c;
  c.kmax = 2.0;
  c.radial_nodes = 1;
  return c;
}

PhaseVector small_point(int D) {
  PhaseVector X = PhaseVector::Zero(2 * D);
  X(0) = 0.3;
  X(1) = -0.2;
  X(D + 2) = 0.25;
  return X;
}

CVec tensor_coherent(const Hamiltonian& H, const PhaseVector& X, int i) {
  return embed_spin(coherent_state(*H.basis, X, H.h).psi, H.spin_dim, i);
}

}  // namespace

TEST_CASE("Hamiltonian structure") {
  const Model m = make_model(minimal_config());
  auto basis = std::make_shared<const FockBasis>(m.D(), 5);
  const Hamiltonian H = build_hamiltonian(m, basis, 0.3);
  const SpMat G = H.generator();
  CHECK(SpMat(G - SpMat(G.adjoint())).norm() <= 1e-12 * G.norm());

  ModelConfig off = minimal_config();
  off.coupling_scale = 0.0;
  off.beta = Vec3::Zero();
  const Hamiltonian H0 = build_hamiltonian(make_model(off), basis, 0.3);
  CHECK(H0.h_int_op.norm() == 0.0);
  const RVec e = photon_energies(*basis, make_model(off).grid.slot_omega());
  for (std::size_t s = 0; s < basis->size(); ++s)
    for (int i = 0; i < 2; ++i) CHECK(H0.photon_diag(2 * s + i) == doctest::Approx(e(s)));
}

TEST_CASE("coupling lowers the ground state energy") {
  auto basis = std::make_shared<const FockBasis>(4, 6);
  const Model m = make_model(minimal_config());
  const double h = 0.5;
  const Hamiltonian H = build_hamiltonian(m, basis, h);
  Eigen::SelfAdjointEigenSolver<CMat> es(CMat(H.generator()) * cplx(h));
  // Best vacuum x spin trial state has energy -h |beta|.
  CHECK(es.eigenvalues()(0) < -h * m.config.beta.norm() - 1e-6);
}

TEST_CASE("Lanczos exponential against the dense exponential") {
  const Model m = make_model(minimal_config());
  auto basis = std::make_shared<const FockBasis>(m.D(), 5);
  const Hamiltonian H = build_hamiltonian(m, basis, 0.4);
  const CMat A = CMat(H.generator());
  CVec v = CVec::Zero(A.rows());
  v(0) = 1.0;
  v(3) = cplx(0.0, 1.0);
  v.normalize();
  const CVec want = (cplx(0.0, -0.7) * A).exp() * v;
  const CVec got = expmv_hermitian([&](const CVec& x) { return CVec(A * x); }, v, 0.7, 60, 1e-14);
  CHECK((got - want).norm() < 1e-11);
}

TEST_CASE("interaction picture steppers against the dense exponential") {
  const Model m = make_model(minimal_config());
  auto basis = std::make_shared<const FockBasis>(m.D(), 6);
  const Hamiltonian H = build_hamiltonian(m, basis, 0.25);
  const CVec psi0 = tensor_coherent(H, small_point(m.D()), 0);
  const double t = 1.3;
  const CVec want = (cplx(0.0, -t) * CMat(H.generator())).exp() * psi0;
  for (const char* stepper : {"cf4", "midpoint2"}) {
    OracleOptions opt;
    opt.stepper = stepper;
    opt.tol = 1e-11;
    PropagationLog log;
    const CVec got = evolve_interaction_picture(H, psi0, t, opt, &log);
    CHECK((got - want).norm() < 1e-8);
    CHECK(log.max_unitarity_defect < 1e-10);
    CHECK(log.steps > 0);
  }
  OracleOptions bad;
  bad.stepper = "euler";
  CHECK_THROWS_AS(evolve_interaction_picture(H, psi0, t, bad), std::invalid_argument);
}

TEST_CASE("free evolution is exact") {
  ModelConfig c = minimal_config();
  c.coupling_scale = 0.0;
  const Model m = make_model(c);
  auto basis = std::make_shared<const FockBasis>(m.D(), 8);
  const Hamiltonian H = build_hamiltonian(m, basis, 0.3);
  const CVec psi0 = tensor_coherent(H, small_point(m.D()), 1);
  const CVec got = evolve_interaction_picture(H, psi0, 0.9, {});
  const CVec want = (cplx(0.0, -0.9) * CMat(H.generator())).exp() * psi0;
  CHECK((got - want).norm() < 1e-12);
}

TEST_CASE("norm and energy conservation") {
  const Model m = make_model(minimal_config());
  auto basis = std::make_shared<const FockBasis>(m.D(), 12);
  const Hamiltonian H = build_hamiltonian(m, basis, 0.2);
  const CVec psi0 = tensor_coherent(H, small_point(m.D()), 0);
  const CVec psi = evolve_interaction_picture(H, psi0, 1.0, {});
  CHECK(psi.norm() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(energy(H, psi) == doctest::Approx(energy(H, psi0)).epsilon(1e-8));
}

TEST_CASE("evolved Wick symbols at t = 0 and without coupling") {
  const Model m = make_model(minimal_config());
  auto basis = std::make_shared<const FockBasis>(m.D(), 14);
  const double h = 0.2;
  const Hamiltonian H = build_hamiltonian(m, basis, h);
  const PhaseVector X = small_point(m.D());
  ObservableSpec s;
  s.kind = ObservableKind::spin;
  s.axis = 2;
  CHECK((evolved_wick_symbol(m, H, s, 0.0, X, {}) - pauli(2)).norm() < 1e-12);
  const SpMat N = kron_identity(number_operator(*basis).mat, 2);
  const SpinMatrix nsym = symbol_from_states(N, evolve_coherent_basis(H, X, 0.0, {}));
  CHECK((nsym - (X.squaredNorm() / (2 * h)) * SpinMatrix::Identity(2, 2)).norm() < 1e-10);

  ModelConfig off = minimal_config();
  off.coupling_scale = 0.0;
  const Model m0 = make_model(off);
  const Hamiltonian H0 = build_hamiltonian(m0, basis, h);
  // Field of the coupled model observed under the free dynamics.
  ObservableSpec b;
  b.kind = ObservableKind::field_B;
  b.axis = 1;
  const PhaseVector F = form_of(m, b).F;
  const double want = F.dot(chi_flow(m0.grid, 0.8, X));
  const SpMat phi = kron_identity(segal_field(*basis, F, h).mat, 2);
  const SpinMatrix got = symbol_from_states(phi, evolve_coherent_basis(H0, X, 0.8, {}));
  CHECK((got - want * SpinMatrix::Identity(2, 2)).norm() < 1e-9);
  CHECK(photon_rate_exact(m0, H0, 0.8, X, {}).norm() < 1e-12);
}

TEST_CASE("photon rate operator matches the time derivative of the photon number") {
  const Model m = make_model(minimal_config());
  auto basis = std::make_shared<const FockBasis>(m.D(), 12);
  const double h = 0.25;
  const Hamiltonian H = build_hamiltonian(m, basis, h);
  CHECK(photon_rate_exact(m, H, 0.0, PhaseVector::Zero(2 * m.D()), {}).norm() < 1e-12);
  const CVec psi0 = tensor_coherent(H, small_point(m.D()), 0);
  OracleOptions opt;
  opt.tol = 1e-12;
  const double t = 0.6, dt = 1e-3;
  const SpMat N = kron_identity(number_operator(*basis).mat, 2);
  auto mean_n = [&](double s) {
    const CVec p = evolve_interaction_picture(H, psi0, s, opt);
    return p.dot(N * p).real();
  };
  const double fd = (mean_n(t + dt) - mean_n(t - dt)) / (2 * dt);
  const CVec p = evolve_interaction_picture(H, psi0, t, opt);
  const double rate = p.dot(number_rate_operator(H) * p).real();
  CHECK(fd == doctest::Approx(rate).epsilon(1e-5).scale(1e-3));
}

TEST_CASE("truncation is reported") {
  const Model m = make_model(minimal_config());
  auto basis = std::make_shared<const FockBasis>(m.D(), 3);
  const Hamiltonian H = build_hamiltonian(m, basis, 0.05);
  PhaseVector X = PhaseVector::Zero(2 * m.D());
  X(0) = 1.5;
  CHECK_THROWS_AS(evolve_coherent_basis(H, X, 0.5, {}), TruncationError);
}
