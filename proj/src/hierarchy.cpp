#include "sclab/hierarchy.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

#include <Eigen/SVD>

namespace sclab {

namespace {

using MatState = std::vector<CMat>;
using Rhs = std::function<MatState(double, const MatState&)>;
using PostStep = std::function<void(MatState&)>;

constexpr cplx kI(0.0, 1.0);

int levi(int j, int a, int b) {
  if (j == a || a == b || j == b) return 0;
  return ((a - j + 3) % 3 == 1) ? 1 : -1;
}

MatState axpy(const MatState& y, double a, const MatState& k) {
  MatState r = y;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += a * k[i];
  return r;
}

MatState rk4_run(const Rhs& f, MatState y, double t0, double t1, int n, const PostStep& post) {
  const double dt = (t1 - t0) / n;
  for (int i = 0; i < n; ++i) {
    const double s = t0 + i * dt;
    const MatState k1 = f(s, y);
    const MatState k2 = f(s + 0.5 * dt, axpy(y, 0.5 * dt, k1));
    const MatState k3 = f(s + 0.5 * dt, axpy(y, 0.5 * dt, k2));
    const MatState k4 = f(s + dt, axpy(y, dt, k3));
    for (std::size_t j = 0; j < y.size(); ++j) y[j] += (dt / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    if (post) post(y);
  }
  return y;
}

double max_abs(const MatState& a) {
  double m = 0.0;
  for (const auto& c : a) m = std::max(m, c.cwiseAbs().maxCoeff());
  return m;
}

double max_diff(const MatState& a, const MatState& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, (a[i] - b[i]).cwiseAbs().maxCoeff());
  return m;
}

int initial_steps(double span, const HierarchyOptions& opt) {
  return std::max(1, static_cast<int>(std::ceil(std::abs(span) / opt.initial_step - 1e-9)));
}

// Runs the fixed-step map with n, 2n, 4n, ... steps until successive results agree.
template <class Run, class Diff, class Scale>
auto with_doubling(Run&& run, Diff&& diff, Scale&& scale, double span, const HierarchyOptions& opt,
                   IntegratorLog* log) {
  if (opt.fixed_steps > 0) {
    if (log) log->steps = opt.fixed_steps;
    return run(opt.fixed_steps);
  }
  int n = initial_steps(span, opt);
  auto prev = run(n);
  for (int it = 0;; ++it) {
    n *= 2;
    if (std::abs(span) / n < opt.step_floor)
      throw StepFloorError("hierarchy integrator: step floor reached before the doubling test converged");
    auto cur = run(n);
    const double change = diff(prev, cur);
    if (log) {
      log->steps = n;
      log->doublings = it + 1;
      log->last_change = change;
    }
    if (change <= opt.tol * std::max(1.0, scale(cur))) return cur;
    prev = std::move(cur);
  }
}

MatState integrate(const Rhs& f, const MatState& y0, double t0, double t1, const HierarchyOptions& opt,
                   IntegratorLog* log, const PostStep& post = nullptr) {
  if (t1 == t0) return y0;
  return with_doubling([&](int n) { return rk4_run(f, y0, t0, t1, n, post); }, max_diff, max_abs, t1 - t0, opt,
                       log);
}

SpinMatrix polar(const SpinMatrix& G) {
  Eigen::JacobiSVD<CMat> svd(G, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

double unitarity_defect(const SpinMatrix& G) {
  return (G.adjoint() * G - SpinMatrix::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();
}

double op_norm(const CMat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMat> svd(m);
  return svd.singularValues()(0);
}

struct JetOutcome {
  std::vector<Jet> A;  // A^[0..M](t, X + U eps)
};

// Duhamel recursion with n steps; T(s) = G(t-s,0,X'), P(s) = T(s)* G(t,0,X') = G(s,0,chi_{t-s}X').
JetOutcome jets_fixed(const Model& model, const FormA& form, int M, int extra, double t, const PhaseVector& X,
                      const RMat& U, int n) {
  const int r = static_cast<int>(U.cols());
  const int sd = model.spin_dim();
  const auto space = std::make_shared<const JetSpace>(r, M + extra);
  const CMat Id = CMat::Identity(sd, sd);
  const double delta = t / (2.0 * n);

  auto hjet = [&](double tau) {
    std::vector<CMat> slopes(r);
    for (int k = 0; k < r; ++k) slopes[k] = h_int_gradient(model, chi_flow(model.grid, tau, U.col(k)));
    return Jet::affine(space, h_int_symbol(model, chi_flow(model.grid, tau, X)), slopes);
  };

  // Pass 1: G(tau, 0, X') at tau = k delta, k = 0..2n.
  std::vector<Jet> Gs;
  Gs.reserve(2 * n + 1);
  Gs.push_back(Jet::constant(space, Id));
  {
    auto f = [&](double tau, const Jet& G) { return kI * (G * hjet(tau)); };
    for (int k = 0; k < 2 * n; ++k) {
      const double tau = k * delta;
      const Jet& G = Gs.back();
      const Jet k1 = f(tau, G);
      const Jet k2 = f(tau + 0.5 * delta, G + cplx(0.5 * delta) * k1);
      const Jet k3 = f(tau + 0.5 * delta, G + cplx(0.5 * delta) * k2);
      const Jet k4 = f(tau + delta, G + cplx(delta) * k3);
      Gs.push_back(G + cplx(delta / 6.0) * (k1 + cplx(2.0) * k2 + cplx(2.0) * k3 + k4));
    }
  }

  // Per half index hh (s = hh delta): T, T*, the order-0 jet, and the C^1 directions.
  const PhaseVector chitX = chi_flow(model.grid, t, X);
  std::vector<CMat> fslopes(r);
  for (int k = 0; k < r; ++k) fslopes[k] = form.F.dot(chi_flow(model.grid, t, U.col(k))) * Id;
  const Jet field0 = Jet::affine(space, form.F.dot(chitX) * Id, fslopes);
  const bool has_spin = form.S.cwiseAbs().maxCoeff() > 0.0;

  struct Node {
    Jet T, Tadj, B0;
    std::vector<RVec> w, wt;
  };
  std::vector<Node> nodes(2 * n + 1);
  std::vector<SpinMatrix> sig;
  std::vector<PhaseVector> Bv, FBv;
  for (int l = 0; l < model.N(); ++l)
    for (int m = 1; m <= 3; ++m) {
      if (model.B[l][m - 1].cwiseAbs().maxCoeff() == 0.0) continue;
      sig.push_back(spin_operator(model.N(), l + 1, m));
      Bv.push_back(model.B[l][m - 1]);
      FBv.push_back(apply_F(model.B[l][m - 1]));
    }
  for (int hh = 0; hh <= 2 * n; ++hh) {
    Node& nd = nodes[hh];
    const double s = hh * delta;
    nd.T = Gs[2 * n - hh];
    nd.Tadj = nd.T.adjoint();
    nd.B0 = field0;
    if (has_spin) {
      const Jet P = nd.Tadj * Gs[2 * n];
      nd.B0 += P * form.S * P.adjoint();
    }
    for (std::size_t q = 0; q < Bv.size(); ++q) {
      nd.w.push_back(U.transpose() * chi_flow(model.grid, s - t, Bv[q]));
      nd.wt.push_back(U.transpose() * chi_flow(model.grid, s - t, FBv[q]));
    }
  }

  auto psi = [&](const Jet& B, const Node& nd) {
    Jet acc(space, sd);
    for (std::size_t q = 0; q < sig.size(); ++q) {
      const Jet d = B.directional(nd.w[q]);
      const Jet dt = B.directional(nd.wt[q]);
      acc += cplx(0.0, 0.5) * (sig[q] * d - d * sig[q]);
      acc += cplx(-0.5) * (sig[q] * dt + dt * sig[q]);
    }
    return acc;
  };
  auto rhs = [&](int hh, const std::vector<Jet>& C) {
    const Node& nd = nodes[hh];
    std::vector<Jet> out(M, Jet(space, sd));
    for (int i = 0; i < M; ++i) {
      const Jet B = i == 0 ? nd.B0 : nd.Tadj * C[i - 1] * nd.T;
      out[i] = nd.T * psi(B, nd) * nd.Tadj;
    }
    return out;
  };
  auto comb = [&](const std::vector<Jet>& y, double a, const std::vector<Jet>& k) {
    std::vector<Jet> r2 = y;
    for (int i = 0; i < M; ++i) r2[i] += cplx(a) * k[i];
    return r2;
  };

  // Pass 2: C_{i+1}(s) = int_0^s T Psi_i T* du, RK4 with step 2 delta.
  std::vector<Jet> C(M, Jet(space, sd));
  const double Delta = 2.0 * delta;
  for (int k = 0; k < n && M > 0; ++k) {
    const auto k1 = rhs(2 * k, C);
    const auto k2 = rhs(2 * k + 1, comb(C, 0.5 * Delta, k1));
    const auto k3 = rhs(2 * k + 1, comb(C, 0.5 * Delta, k2));
    const auto k4 = rhs(2 * k + 2, comb(C, Delta, k3));
    for (int i = 0; i < M; ++i)
      C[i] += cplx(Delta / 6.0) * (k1[i] + cplx(2.0) * k2[i] + cplx(2.0) * k3[i] + k4[i]);
  }
  JetOutcome out;
  out.A.push_back(nodes[2 * n].B0);
  for (auto& c : C) out.A.push_back(std::move(c));
  return out;
}

JetOutcome jets(const Model& model, const FormA& form, int M, int extra, double t, const PhaseVector& X,
                const RMat& U, const HierarchyOptions& opt, IntegratorLog* log) {
  auto diff = [](const JetOutcome& a, const JetOutcome& b) {
    double m = 0.0;
    for (std::size_t j = 0; j < a.A.size(); ++j)
      for (int i = 0; i < a.A[j].space()->size(); ++i)
        m = std::max(m, (a.A[j].coeff(i) - b.A[j].coeff(i)).cwiseAbs().maxCoeff());
    return m;
  };
  auto scale = [](const JetOutcome& a) {
    double m = 0.0;
    for (const auto& j : a.A) m = std::max(m, j.max_norm());
    return m;
  };
  if (t == 0.0) return jets_fixed(model, form, M, extra, t, X, U, 1);
  return with_doubling([&](int n) { return jets_fixed(model, form, M, extra, t, X, U, n); }, diff, scale, t, opt,
                       log);
}

void check_order(int M) {
  if (M < 0) throw std::invalid_argument("hierarchy: expansion order must be non-negative");
}

}  // namespace

nlohmann::json IntegratorLog::to_json() const {
  return {{"steps", steps},
          {"doublings", doublings},
          {"last_change", last_change},
          {"reunitarizations", reunitarizations},
          {"max_unitarity_defect", max_unitarity_defect}};
}

SpinTriple cross_sym(const SpinTriple& U, const SpinTriple& W) {
  SpinTriple r;
  for (int j = 0; j < 3; ++j) {
    r[j] = SpinMatrix::Zero(U[0].rows(), U[0].cols());
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        const int e = levi(j, a, b);
        if (e) r[j] += (0.5 * e) * (U[a] * W[b] + W[b] * U[a]);
      }
  }
  return r;
}

PropagatorState propagator_G(const Model& model, double t, double s, const PhaseVector& X,
                             const HierarchyOptions& opt) {
  PropagatorState out;
  const int sd = model.spin_dim();
  Rhs f = [&](double tau, const MatState& y) {
    return MatState{kI * (y[0] * h_int_symbol(model, chi_flow(model.grid, tau, X)))};
  };
  IntegratorLog& log = out.log;
  PostStep post = [&](MatState& y) {
    const double d = unitarity_defect(y[0]);
    log.max_unitarity_defect = std::max(log.max_unitarity_defect, d);
    if (d > opt.tol / 10.0) {
      y[0] = polar(y[0]);
      ++log.reunitarizations;
    }
  };
  out.G = integrate(f, {CMat::Identity(sd, sd)}, s, t, opt, &log, post)[0];
  return out;
}

SpinMatrix order0(const Model& model, const ObservableSpec& obs, double t, const PhaseVector& X,
                  const HierarchyOptions& opt) {
  const FormA form = form_of(model, obs);
  const SpinMatrix G = propagator_G(model, t, 0.0, X, opt).G;
  const int sd = model.spin_dim();
  return form.F.dot(chi_flow(model.grid, t, X)) * SpinMatrix::Identity(sd, sd) + G * form.S * G.adjoint();
}

std::vector<SpinTriple> bloch_spin0(const Model& model, double t, const PhaseVector& X,
                                    const HierarchyOptions& opt, IntegratorLog* log) {
  const int N = model.N();
  MatState y0;
  for (int l = 0; l < N; ++l)
    for (int m = 1; m <= 3; ++m) y0.push_back(spin_operator(N, l + 1, m));
  Rhs f = [&](double tau, const MatState& y) {
    const PhaseVector cx = chi_flow(model.grid, tau, X);
    MatState d(y.size());
    for (int l = 0; l < N; ++l) {
      Vec3 b;
      for (int a = 0; a < 3; ++a) b(a) = model.config.beta(a) + model.B[l][a].dot(cx);
      for (int j = 0; j < 3; ++j) {
        CMat acc = CMat::Zero(y[0].rows(), y[0].cols());
        for (int a = 0; a < 3; ++a)
          for (int c = 0; c < 3; ++c)
            if (levi(j, a, c)) acc += (2.0 * levi(j, a, c) * b(a)) * y[3 * l + c];
        d[3 * l + j] = acc;
      }
    }
    return d;
  };
  const MatState y = integrate(f, y0, 0.0, t, opt, log);
  std::vector<SpinTriple> out(N);
  for (int l = 0; l < N; ++l)
    for (int m = 0; m < 3; ++m) out[l][m] = y[3 * l + m];
  return out;
}

RMat reduced_basis(const Model& model, const std::vector<PhaseVector>& extra) {
  const int D = model.D();
  const RVec om = model.grid.slot_omega();
  std::vector<double> freqs;
  for (int i = 0; i < D; ++i) {
    bool seen = false;
    for (double f : freqs) seen = seen || std::abs(f - om(i)) <= 1e-12 * std::max(1.0, std::abs(f));
    if (!seen) freqs.push_back(om(i));
  }
  std::vector<PhaseVector> seeds = extra;
  for (const auto& bl : model.B)
    for (const auto& b : bl) seeds.push_back(b);
  std::vector<PhaseVector> cand;
  double scale = 0.0;
  for (const auto& v : seeds)
    for (double f : freqs) {
      PhaseVector p = PhaseVector::Zero(2 * D);
      for (int i = 0; i < D; ++i)
        if (std::abs(om(i) - f) <= 1e-12 * std::max(1.0, std::abs(f))) {
          p(i) = v(i);
          p(D + i) = v(D + i);
        }
      cand.push_back(p);
      cand.push_back(apply_F(p));
      scale = std::max(scale, p.norm());
    }
  std::vector<PhaseVector> basis;
  for (auto v : cand) {
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& u : basis) v -= u.dot(v) * u;
    const double nv = v.norm();
    if (nv > 1e-10 * std::max(scale, 1e-300)) basis.push_back(v / nv);
  }
  RMat U(2 * D, static_cast<Eigen::Index>(basis.size()));
  for (std::size_t k = 0; k < basis.size(); ++k) U.col(static_cast<Eigen::Index>(k)) = basis[k];
  return U;
}

nlohmann::json HierarchyResult::to_json() const {
  nlohmann::json ords = nlohmann::json::array();
  for (const auto& A : orders) {
    nlohmann::json m = nlohmann::json::array();
    for (Eigen::Index a = 0; a < A.rows(); ++a) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index b = 0; b < A.cols(); ++b) row.push_back({A(a, b).real(), A(a, b).imag()});
      m.push_back(row);
    }
    ords.push_back(m);
  }
  return {{"observable", observable_to_json(observable)},
          {"t", t},
          {"X", std::vector<double>(X.data(), X.data() + X.size())},
          {"orders", ords},
          {"meta", meta}};
}

HierarchyResult run_hierarchy(const Model& model, const ObservableSpec& obs, int M, double t,
                              const PhaseVector& X, const HierarchyOptions& opt) {
  check_order(M);
  if (X.size() != 2 * model.D()) throw std::invalid_argument("run_hierarchy: dimension mismatch");
  const FormA form = form_of(model, obs);
  const RMat U = reduced_basis(model);
  IntegratorLog log;
  const JetOutcome out = jets(model, form, M, 0, t, X, U, opt, &log);
  HierarchyResult res;
  res.observable = obs;
  res.t = t;
  res.X = X;
  for (const auto& a : out.A) res.orders.push_back(a.value());
  res.meta = {{"integrator", log.to_json()},
              {"tol", opt.tol},
              {"initial_step", opt.initial_step},
              {"reduced_dimension", U.cols()},
              {"kpoints", model.grid.kpoints()},
              {"q_trace", q_form(model, t).trace},
              {"hs_pairing", "Tr(A B*), unnormalized"}};
  return res;
}

SpinMatrix order_j(const Model& model, const ObservableSpec& obs, int j, double t, const PhaseVector& X,
                   const HierarchyOptions& opt) {
  if (j == 0) return order0(model, obs, t, X, opt);
  return run_hierarchy(model, obs, j, t, X, opt).orders.at(j);
}

SpinMatrix order_j_derivative(const Model& model, const ObservableSpec& obs, int j, double t,
                              const PhaseVector& X, const PhaseVector& V, const HierarchyOptions& opt) {
  check_order(j);
  const FormA form = form_of(model, obs);
  const RMat U = reduced_basis(model, {V});
  const JetOutcome out = jets(model, form, j, 1, t, X, U, opt, nullptr);
  return out.A[j].directional(U.transpose() * V).value();
}

std::vector<TangentBundleState> tangent_derivatives(const Model& model, int j, const PhaseVector& V,
                                                    const std::vector<double>& times, const PhaseVector& X,
                                                    const HierarchyOptions& opt) {
  check_order(j);
  const int N = model.N();
  std::vector<TangentBundleState> out;
  if (j == 0) {
    MatState y0;
    for (int l = 0; l < N; ++l)
      for (int m = 1; m <= 3; ++m) y0.push_back(spin_operator(N, l + 1, m));
    for (int l = 0; l < N; ++l)
      for (int m = 0; m < 3; ++m) y0.push_back(CMat::Zero(model.spin_dim(), model.spin_dim()));
    Rhs f = [&](double tau, const MatState& y) {
      const PhaseVector cx = chi_flow(model.grid, tau, X);
      const PhaseVector cv = chi_flow(model.grid, tau, V);
      MatState d(y.size());
      for (int l = 0; l < N; ++l) {
        Vec3 b, db;
        for (int a = 0; a < 3; ++a) {
          b(a) = model.config.beta(a) + model.B[l][a].dot(cx);
          db(a) = model.B[l][a].dot(cv);
        }
        for (int jj = 0; jj < 3; ++jj) {
          CMat s = CMat::Zero(y[0].rows(), y[0].cols());
          CMat ds = s;
          for (int a = 0; a < 3; ++a)
            for (int c = 0; c < 3; ++c) {
              const int e = levi(jj, a, c);
              if (!e) continue;
              s += (2.0 * e * b(a)) * y[3 * l + c];
              ds += (2.0 * e * b(a)) * y[3 * N + 3 * l + c] + (2.0 * e * db(a)) * y[3 * l + c];
            }
          d[3 * l + jj] = s;
          d[3 * N + 3 * l + jj] = ds;
        }
      }
      return d;
    };
    for (double tk : times) {
      const MatState y = integrate(f, y0, 0.0, tk, opt, nullptr);
      TangentBundleState st;
      st.t = tk;
      st.S.resize(N);
      st.dS.resize(N);
      for (int l = 0; l < N; ++l)
        for (int m = 0; m < 3; ++m) {
          st.S[l][m] = y[3 * l + m];
          st.dS[l][m] = y[3 * N + 3 * l + m];
        }
      out.push_back(std::move(st));
    }
    return out;
  }
  const RMat U = reduced_basis(model, {V});
  const RVec w = U.transpose() * V;
  for (double tk : times) {
    TangentBundleState st;
    st.t = tk;
    st.S.resize(N);
    st.dS.resize(N);
    for (int l = 0; l < N; ++l)
      for (int m = 1; m <= 3; ++m) {
        ObservableSpec obs;
        obs.kind = ObservableKind::spin;
        obs.spin = l + 1;
        obs.axis = m;
        const JetOutcome o = jets(model, form_of(model, obs), j, 1, tk, X, U, opt, nullptr);
        st.S[l][m - 1] = o.A[j].value();
        st.dS[l][m - 1] = o.A[j].directional(w).value();
      }
    out.push_back(std::move(st));
  }
  return out;
}

FirstOrderState first_order_system(const Model& model, double t, const PhaseVector& X,
                                   const HierarchyOptions& opt) {
  const int N = model.N();
  const int sd = model.spin_dim();
  const int D = model.D();
  FirstOrderState st;
  st.U = reduced_basis(model);
  const int r = static_cast<int>(st.U.cols());
  const RVec om = model.grid.slot_omega();
  const int base_dS = 3 * N, base_S1 = 3 * N + 3 * N * r, base_Y = base_S1 + 3 * N;
  auto iS0 = [](int l, int m) { return 3 * l + m; };
  auto idS = [&](int l, int k, int m) { return base_dS + (l * r + k) * 3 + m; };
  auto iS1 = [&](int l, int m) { return base_S1 + 3 * l + m; };
  const CMat Z = CMat::Zero(sd, sd);

  MatState y0(base_Y + 2 * D, Z);
  for (int l = 0; l < N; ++l)
    for (int m = 0; m < 3; ++m) y0[iS0(l, m)] = spin_operator(N, l + 1, m + 1);

  std::vector<PhaseVector> FB(N * 3);
  for (int l = 0; l < N; ++l)
    for (int a = 0; a < 3; ++a) FB[3 * l + a] = apply_F(model.B[l][a]);

  Rhs f = [&](double tau, const MatState& y) {
    MatState d(y.size(), Z);
    const PhaseVector cx = chi_flow(model.grid, tau, X);
    std::vector<PhaseVector> cu(r);
    for (int k = 0; k < r; ++k) cu[k] = chi_flow(model.grid, tau, st.U.col(k));
    for (int l = 0; l < N; ++l) {
      Vec3 b;
      SpinTriple S0, S1, B1, K;
      for (int a = 0; a < 3; ++a) {
        b(a) = model.config.beta(a) + model.B[l][a].dot(cx);
        S0[a] = y[iS0(l, a)];
        S1[a] = y[iS1(l, a)];
        B1[a] = Z;
        for (int i = 0; i < 2 * D; ++i)
          if (model.B[l][a](i) != 0.0) B1[a] += model.B[l][a](i) * y[base_Y + i];
      }
      // gradient of X -> B_a . chi_tau X along U_k is B_a . chi_tau U_k
      for (int j = 0; j < 3; ++j) {
        K[j] = Z;
        for (int a = 0; a < 3; ++a)
          for (int c = 0; c < 3; ++c) {
            const int e = levi(j, a, c);
            if (!e) continue;
            for (int k = 0; k < r; ++k) K[j] += (e * model.B[l][a].dot(cu[k])) * y[idS(l, k, c)];
          }
      }
      const SpinTriple bs = cross_sym(B1, S0);
      for (int j = 0; j < 3; ++j) {
        CMat s0 = Z, s1 = Z;
        for (int a = 0; a < 3; ++a)
          for (int c = 0; c < 3; ++c) {
            const int e = levi(j, a, c);
            if (!e) continue;
            s0 += (2.0 * e * b(a)) * S0[c];
            s1 += (2.0 * e * b(a)) * S1[c];
          }
        d[iS0(l, j)] = s0;
        d[iS1(l, j)] = s1 + 2.0 * bs[j] + K[j];
        for (int k = 0; k < r; ++k) {
          CMat ds = Z;
          for (int a = 0; a < 3; ++a)
            for (int c = 0; c < 3; ++c) {
              const int e = levi(j, a, c);
              if (!e) continue;
              ds += (2.0 * e * b(a)) * y[idS(l, k, c)] + (2.0 * e * model.B[l][a].dot(cu[k])) * S0[c];
            }
          d[idS(l, k, j)] = ds;
        }
      }
    }
    // dY/dt = -Omega F Y - sum F B_{n mu} S_n^[mu,0]
    for (int i = 0; i < D; ++i) {
      d[base_Y + i] = om(i) * y[base_Y + D + i];
      d[base_Y + D + i] = -om(i) * y[base_Y + i];
    }
    for (int l = 0; l < N; ++l)
      for (int a = 0; a < 3; ++a)
        for (int i = 0; i < 2 * D; ++i)
          if (FB[3 * l + a](i) != 0.0) d[base_Y + i] -= FB[3 * l + a](i) * y[iS0(l, a)];
    return d;
  };
  const MatState y = integrate(f, y0, 0.0, t, opt, &st.log);
  st.S0.resize(N);
  st.S1.resize(N);
  st.dS0.assign(N, std::vector<SpinTriple>(r));
  for (int l = 0; l < N; ++l)
    for (int m = 0; m < 3; ++m) {
      st.S0[l][m] = y[iS0(l, m)];
      st.S1[l][m] = y[iS1(l, m)];
      for (int k = 0; k < r; ++k) st.dS0[l][k][m] = y[idS(l, k, m)];
    }
  st.Y.assign(y.begin() + base_Y, y.end());
  return st;
}

namespace {

SpinMatrix contract(const PhaseVector& V, const std::vector<SpinMatrix>& Y) {
  SpinMatrix acc = SpinMatrix::Zero(Y[0].rows(), Y[0].cols());
  for (Eigen::Index i = 0; i < V.size(); ++i)
    if (V(i) != 0.0) acc += V(i) * Y[static_cast<std::size_t>(i)];
  return acc;
}

}  // namespace

nlohmann::json MaxwellReport::to_json() const {
  return {{"t", t},
          {"max_rel_deviation", max_rel_deviation},
          {"divergence_residual", divergence_residual},
          {"pass", pass}};
}

MaxwellReport maxwell_cross_check(const Model& model, double t, const PhaseVector& X, double tol,
                                  const HierarchyOptions& opt) {
  MaxwellReport rep;
  rep.t = t;
  const FirstOrderState st = first_order_system(model, t, X, opt);
  double num = 0.0, den = 0.0;
  for (int l = 0; l < model.N(); ++l) {
    std::array<SpinMatrix, 3> ode, rec;
    for (int m = 1; m <= 3; ++m) {
      ode[m - 1] = contract(model.B[l][m - 1], st.Y);
      ObservableSpec obs;
      obs.kind = ObservableKind::field_B;
      obs.axis = m;
      obs.point = model.config.positions[l];
      rec[m - 1] = order_j(model, obs, 1, t, X, opt);
      num = std::max(num, op_norm(ode[m - 1] - rec[m - 1]));
      den = std::max(den, op_norm(rec[m - 1]));
    }
    rep.field_ode.push_back(ode);
    rep.field_recursion.push_back(rec);
  }
  rep.max_rel_deviation = den > 0.0 ? num / den : num;

  // Divergence of the reconstructed order-one B and E fields at a few points.
  std::vector<Vec3> pts = model.config.positions;
  pts.push_back(model.config.positions[0] + Vec3(0.3, -0.2, 0.1));
  pts.push_back(model.config.positions[0] + Vec3(-0.5, 0.4, 0.7));
  double div = 0.0, fscale = 0.0;
  for (const auto& x : pts) {
    SpinMatrix dB = SpinMatrix::Zero(model.spin_dim(), model.spin_dim()), dE = dB;
    for (int a = 1; a <= 3; ++a) {
      dB += contract(coupling_B_dx(model.grid, model.config, a, x, a), st.Y);
      dE += contract(coupling_E_dx(model.grid, model.config, a, x, a), st.Y);
      fscale = std::max(fscale, op_norm(contract(coupling_B(model.grid, model.config, a, x), st.Y)));
      fscale = std::max(fscale, op_norm(contract(coupling_E(model.grid, model.config, a, x), st.Y)));
    }
    div = std::max({div, op_norm(dB), op_norm(dE)});
  }
  rep.divergence_residual = fscale > 0.0 ? div / fscale : div;
  rep.pass = rep.max_rel_deviation <= tol && rep.divergence_residual <= tol;
  return rep;
}

std::vector<SpinTriple> spin_correction1(const Model& model, double t, const PhaseVector& X,
                                         const HierarchyOptions& opt) {
  return first_order_system(model, t, X, opt).S1;
}

std::vector<SpinMatrix> photon_rate_expansion(const Model& model, double t, const PhaseVector& X, int M,
                                              const HierarchyOptions& opt) {
  if (M < 0 || M > 1) throw std::invalid_argument("photon_rate_expansion: orders 0 and 1 are supported");
  const FirstOrderState st = first_order_system(model, t, X, opt);
  const int sd = model.spin_dim();
  const int r = static_cast<int>(st.U.cols());
  const PhaseVector cx = chi_flow(model.grid, t, X);
  SpinMatrix N0 = SpinMatrix::Zero(sd, sd), N1 = N0;
  for (int l = 0; l < model.N(); ++l)
    for (int m = 0; m < 3; ++m) {
      const PhaseVector W = -apply_F(model.B[l][m]);
      const double w0 = W.dot(cx);
      N0 += w0 * st.S0[l][m];
      if (M < 1) continue;
      // C^1(W . chi_t X, S0_m) = 1/2 (dS0_m(V) + i dS0_m(F V)), V = chi_{-t} W
      const PhaseVector V = chi_flow(model.grid, -t, W);
      const PhaseVector FV = apply_F(V);
      SpinMatrix dv = SpinMatrix::Zero(sd, sd), dfv = dv;
      for (int k = 0; k < r; ++k) {
        dv += st.U.col(k).dot(V) * st.dS0[l][k][m];
        dfv += st.U.col(k).dot(FV) * st.dS0[l][k][m];
      }
      N1 += w0 * st.S1[l][m] + contract(W, st.Y) * st.S0[l][m] + 0.5 * (dv + kI * dfv);
    }
  std::vector<SpinMatrix> out{N0};
  if (M >= 1) out.push_back(N1);
  return out;
}

}  // namespace sclab
