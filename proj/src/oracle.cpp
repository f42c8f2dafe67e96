#include "sclab/oracle.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace sclab {

namespace {

using Triplets = std::vector<Eigen::Triplet<cplx>>;

CVec phase(const RVec& e, double s, const CVec& x) {
  CVec y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) y(i) = std::exp(cplx(0.0, s * e(i))) * x(i);
  return y;
}

}  // namespace

void PropagationLog::merge(const PropagationLog& o) {
  steps += o.steps;
  rejected += o.rejected;
  matvecs += o.matvecs;
  step_sizes.insert(step_sizes.end(), o.step_sizes.begin(), o.step_sizes.end());
  local_errors.insert(local_errors.end(), o.local_errors.begin(), o.local_errors.end());
  unitarity_defects.insert(unitarity_defects.end(), o.unitarity_defects.begin(), o.unitarity_defects.end());
  max_unitarity_defect = std::max(max_unitarity_defect, o.max_unitarity_defect);
}

nlohmann::json PropagationLog::to_json() const {
  double max_err = 0.0;
  for (double e : local_errors) max_err = std::max(max_err, e);
  return {{"steps", steps},
          {"rejected", rejected},
          {"matvecs", matvecs},
          {"max_local_error", max_err},
          {"max_unitarity_defect", max_unitarity_defect},
          {"step_sizes", step_sizes}};
}

SpMat Hamiltonian::generator() const {
  SpMat d(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(dim()));
  Triplets t;
  for (Eigen::Index i = 0; i < photon_diag.size(); ++i)
    if (photon_diag(i) != 0.0) t.emplace_back(i, i, photon_diag(i));
  d.setFromTriplets(t.begin(), t.end());
  SpMat g = d + h_int_op;
  g.makeCompressed();
  return g;
}

Hamiltonian build_hamiltonian(const Model& model, std::shared_ptr<const FockBasis> basis, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("build_hamiltonian: h must be positive");
  if (!basis || basis->D() != model.D())
    throw std::invalid_argument("build_hamiltonian: Fock basis does not match the mode grid");
  Hamiltonian H;
  H.basis = basis;
  H.spin_dim = model.spin_dim();
  H.h = h;
  const int sd = H.spin_dim;
  const RVec e = photon_energies(*basis, model.grid.slot_omega());
  H.photon_diag.resize(e.size() * sd);
  for (Eigen::Index i = 0; i < e.size(); ++i)
    for (int s = 0; s < sd; ++s) H.photon_diag(i * sd + s) = e(i);

  SpinMatrix constant = SpinMatrix::Zero(sd, sd);
  PhaseVector zero = PhaseVector::Zero(2 * model.D());
  constant = h_int_symbol(model, zero);
  const std::size_t n = basis->size();
  SpMat acc(static_cast<Eigen::Index>(n) * sd, static_cast<Eigen::Index>(n) * sd);
  for (int l = 0; l < model.N(); ++l)
    for (int m = 1; m <= 3; ++m) {
      if (model.B[l][m - 1].cwiseAbs().maxCoeff() == 0.0) continue;
      const FockOperator phi = segal_field(*basis, model.B[l][m - 1], h);
      acc += tensor_with_spin(phi, spin_operator(model.N(), l + 1, m)).mat;
    }
  Triplets t;
  for (std::size_t i = 0; i < n; ++i)
    for (int a = 0; a < sd; ++a)
      for (int b = 0; b < sd; ++b)
        if (constant(a, b) != cplx(0.0)) t.emplace_back(i * sd + a, i * sd + b, constant(a, b));
  SpMat c(acc.rows(), acc.cols());
  c.setFromTriplets(t.begin(), t.end());
  H.h_int_op = acc + c;
  H.h_int_op.makeCompressed();
  return H;
}

CVec expmv_hermitian(const std::function<CVec(const CVec&)>& apply, const CVec& v, double dt, int max_dim,
                     double tol, long* matvecs) {
  const double beta = v.norm();
  if (beta == 0.0) return v;
  std::vector<CVec> Q;
  std::vector<double> alpha, off;
  Q.push_back(v / beta);
  CVec result;
  for (int m = 1; m <= max_dim; ++m) {
    CVec w = apply(Q.back());
    if (matvecs) ++*matvecs;
    const double a = Q.back().dot(w).real();
    alpha.push_back(a);
    w -= a * Q.back();
    if (m > 1) w -= off.back() * Q[Q.size() - 2];
    // one local correction keeps the short recurrence orthogonal to round-off
    w -= Q.back().dot(w) * Q.back();
    if (m > 1) w -= Q[Q.size() - 2].dot(w) * Q[Q.size() - 2];
    const double b = w.norm();

    RMat T = RMat::Zero(m, m);
    for (int i = 0; i < m; ++i) T(i, i) = alpha[i];
    for (int i = 0; i + 1 < m; ++i) T(i, i + 1) = T(i + 1, i) = off[i];
    Eigen::SelfAdjointEigenSolver<RMat> es(T);
    CVec c(m);
    for (int i = 0; i < m; ++i) {
      cplx s = 0.0;
      for (int k = 0; k < m; ++k)
        s += es.eigenvectors()(i, k) * std::exp(cplx(0.0, -dt * es.eigenvalues()(k))) * es.eigenvectors()(0, k);
      c(i) = s;
    }
    const double residual = b * std::abs(c(m - 1)) * beta;
    if (residual <= tol || b <= 1e-300 || m == max_dim) {
      if (m == max_dim && residual > tol && b > 1e-300)
        throw StepFloorError("expmv_hermitian: Krylov space exhausted before convergence");
      result = CVec::Zero(v.size());
      for (int i = 0; i < m; ++i) result += c(i) * Q[i];
      return beta * result;
    }
    off.push_back(b);
    Q.push_back(w / b);
  }
  return result;
}

CVec evolve_interaction_picture(const Hamiltonian& H, const CVec& psi0, double t, const OracleOptions& opt,
                                PropagationLog* log) {
  if (psi0.size() != static_cast<Eigen::Index>(H.dim()))
    throw std::invalid_argument("evolve_interaction_picture: state dimension mismatch");
  if (opt.stepper != "cf4" && opt.stepper != "midpoint2")
    throw std::invalid_argument("evolve_interaction_picture: unknown stepper '" + opt.stepper + "'");
  PropagationLog local;
  const RVec& E = H.photon_diag;
  const double sign = t >= 0.0 ? 1.0 : -1.0;
  const double T = std::abs(t);

  // H_I(s) x = e^{isF} H_int e^{-isF} x; weighted sums of H_I at several times.
  auto combo = [&](const std::vector<std::pair<double, double>>& nodes) {
    std::vector<std::pair<CVec, double>> ph;
    for (const auto& [s, w] : nodes) ph.emplace_back(phase(E, s, CVec::Ones(E.size())), w);
    return [&H, ph](const CVec& x) {
      CVec y = CVec::Zero(x.size());
      for (const auto& [p, w] : ph) y += w * p.cwiseProduct(H.h_int_op * p.conjugate().cwiseProduct(x));
      return y;
    };
  };
  const double r3 = std::sqrt(3.0);
  const double c1 = 0.5 - r3 / 6.0, c2 = 0.5 + r3 / 6.0;
  const double a1 = (3.0 - 2.0 * r3) / 12.0, a2 = (3.0 + 2.0 * r3) / 12.0;
  auto step = [&](const CVec& x, double s0, double dt) -> CVec {
    // dt carries the direction of time.
    if (opt.stepper == "midpoint2")
      return expmv_hermitian(combo({{s0 + 0.5 * dt, 1.0}}), x, dt, opt.krylov_max, opt.krylov_tol, &local.matvecs);
    const double sa = s0 + c1 * dt, sb = s0 + c2 * dt;
    CVec y = expmv_hermitian(combo({{sa, a2}, {sb, a1}}), x, dt, opt.krylov_max, opt.krylov_tol, &local.matvecs);
    return expmv_hermitian(combo({{sa, a1}, {sb, a2}}), y, dt, opt.krylov_max, opt.krylov_tol, &local.matvecs);
  };

  const int order = opt.stepper == "cf4" ? 4 : 2;
  CVec psi = psi0;
  double s = 0.0;
  double dt = std::min(opt.initial_step, T);
  while (T - s > 1e-14 * std::max(1.0, T)) {
    dt = std::min(dt, T - s);
    const CVec full = step(psi, sign * s, sign * dt);
    const CVec half = step(step(psi, sign * s, sign * dt / 2), sign * (s + dt / 2), sign * dt / 2);
    const double err = (full - half).norm();
    if (err <= opt.tol) {
      psi = half;
      s += dt;
      ++local.steps;
      local.step_sizes.push_back(dt);
      local.local_errors.push_back(err);
      const double defect = std::abs(psi.norm() - psi0.norm());
      local.unitarity_defects.push_back(defect);
      local.max_unitarity_defect = std::max(local.max_unitarity_defect, defect);
      const double grow = err > 0.0 ? 0.9 * std::pow(opt.tol / err, 1.0 / (order + 1)) : 2.0;
      dt *= std::clamp(grow, 0.5, 2.0);
    } else {
      ++local.rejected;
      dt *= 0.5;
      if (dt < opt.step_floor) {
        if (log) log->merge(local);
        throw StepFloorError("evolve_interaction_picture: step size fell below the floor at s = " +
                             std::to_string(s));
      }
    }
  }
  if (log) log->merge(local);
  return phase(E, -t, psi);
}

std::vector<CVec> evolve_coherent_basis(const Hamiltonian& H, const PhaseVector& X, double t,
                                        const OracleOptions& opt, PropagationLog* log) {
  const CoherentState cs = coherent_state(*H.basis, X, H.h);
  if (cs.tail_mass > opt.tail_threshold)
    throw TruncationError("coherent state tail mass " + std::to_string(cs.tail_mass) +
                          " exceeds the threshold; raise n_max or h");
  std::vector<CVec> out;
  for (int i = 0; i < H.spin_dim; ++i)
    out.push_back(evolve_interaction_picture(H, embed_spin(cs.psi, H.spin_dim, i), t, opt, log));
  return out;
}

SpMat number_rate_operator(const Hamiltonian& H) {
  const int sd = H.spin_dim;
  Triplets t;
  for (Eigen::Index r = 0; r < H.h_int_op.outerSize(); ++r)
    for (SpMat::InnerIterator it(H.h_int_op, r); it; ++it) {
      const int nr = H.basis->total(static_cast<std::size_t>(it.row() / sd));
      const int nc = H.basis->total(static_cast<std::size_t>(it.col() / sd));
      if (nr != nc) t.emplace_back(it.row(), it.col(), cplx(0.0, nc - nr) * it.value());
    }
  SpMat m(H.h_int_op.rows(), H.h_int_op.cols());
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

SpMat observable_operator(const Model& model, const Hamiltonian& H, const ObservableSpec& obs) {
  if (obs.kind == ObservableKind::number_rate) return number_rate_operator(H);
  const FormA f = form_of(model, obs);
  const std::size_t n = H.basis->size();
  const int sd = H.spin_dim;
  SpMat out(static_cast<Eigen::Index>(n) * sd, static_cast<Eigen::Index>(n) * sd);
  if (f.F.cwiseAbs().maxCoeff() > 0.0) out += kron_identity(segal_field(*H.basis, f.F, H.h).mat, sd);
  if (f.S.cwiseAbs().maxCoeff() > 0.0) {
    Triplets t;
    for (std::size_t i = 0; i < n; ++i)
      for (int a = 0; a < sd; ++a)
        for (int b = 0; b < sd; ++b)
          if (f.S(a, b) != cplx(0.0)) t.emplace_back(i * sd + a, i * sd + b, f.S(a, b));
    SpMat s(out.rows(), out.cols());
    s.setFromTriplets(t.begin(), t.end());
    out += s;
  }
  out.makeCompressed();
  return out;
}

SpinMatrix symbol_from_states(const SpMat& A, const std::vector<CVec>& states) {
  const int sd = static_cast<int>(states.size());
  SpinMatrix M(sd, sd);
  for (int j = 0; j < sd; ++j) {
    const CVec Apsi = A * states[j];
    for (int i = 0; i < sd; ++i) M(i, j) = states[i].dot(Apsi);
  }
  return M;
}

SpinMatrix evolved_wick_symbol(const Model& model, const Hamiltonian& H, const ObservableSpec& obs, double t,
                               const PhaseVector& X, const OracleOptions& opt, PropagationLog* log) {
  const auto states = evolve_coherent_basis(H, X, t, opt, log);
  return symbol_from_states(observable_operator(model, H, obs), states);
}

SpinMatrix photon_rate_exact(const Model& model, const Hamiltonian& H, double t, const PhaseVector& X,
                             const OracleOptions& opt, PropagationLog* log) {
  ObservableSpec obs;
  obs.kind = ObservableKind::number_rate;
  return evolved_wick_symbol(model, H, obs, t, X, opt, log);
}

double energy(const Hamiltonian& H, const CVec& psi) {
  CVec y = H.h_int_op * psi;
  for (Eigen::Index i = 0; i < psi.size(); ++i) y(i) += H.photon_diag(i) * psi(i);
  return H.h * psi.dot(y).real();
}

}  // namespace sclab
