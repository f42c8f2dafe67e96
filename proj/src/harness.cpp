#include "sclab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "sclab/symbol_calculus.hpp"

namespace sclab {

namespace {

nlohmann::json matrix_json(const CMat& A) {
  nlohmann::json m = nlohmann::json::array();
  for (Eigen::Index a = 0; a < A.rows(); ++a) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index b = 0; b < A.cols(); ++b) row.push_back({A(a, b).real(), A(a, b).imag()});
    m.push_back(row);
  }
  return m;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void write_file(const std::string& dir, const std::string& name, const std::string& content) {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  std::ofstream out(std::filesystem::path(dir) / name);
  if (!out) throw std::runtime_error("cannot write " + name + " in " + dir);
  out << content;
}

SelftestEntry entry(const std::string& name, double residual, double threshold) {
  return {name, residual, threshold, residual <= threshold};
}

nlohmann::json entries_json(const std::vector<SelftestEntry>& es) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& e : es)
    a.push_back({{"name", e.name}, {"residual", e.residual}, {"threshold", e.threshold}, {"pass", e.pass}});
  return a;
}

// Oracle evaluation shared by all observables at one (t, X, h).
struct OracleCell {
  std::vector<CVec> states;
  HygieneStats hygiene;
  std::string failure;
};

OracleCell oracle_cell(const Hamiltonian& H, const PhaseVector& X, double t, const OracleOptions& opt) {
  OracleCell c;
  try {
    PropagationLog log;
    const CoherentState cs = coherent_state(*H.basis, X, H.h);
    c.states = evolve_coherent_basis(H, X, t, opt, &log);
    for (int i = 0; i < H.spin_dim; ++i) {
      const double e0 = energy(H, embed_spin(cs.psi, H.spin_dim, i));
      const double e1 = energy(H, c.states[static_cast<std::size_t>(i)]);
      c.hygiene.max_energy_drift = std::max(c.hygiene.max_energy_drift, std::abs(e1 - e0) / std::max(1.0, std::abs(e0)));
    }
    c.hygiene.max_unitarity_defect = log.max_unitarity_defect;
    for (double e : log.local_errors) c.hygiene.max_local_error = std::max(c.hygiene.max_local_error, e);
    c.hygiene.oracle_steps = log.steps;
  } catch (const TruncationError& e) {
    c.failure = std::string("truncation: ") + e.what();
  } catch (const StepFloorError& e) {
    c.failure = std::string("step floor: ") + e.what();
  }
  return c;
}

std::vector<SpinMatrix> hierarchy_orders(const Model& model, const ObservableSpec& obs, int M, double t,
                                         const PhaseVector& X, const HierarchyOptions& opt) {
  if (obs.kind == ObservableKind::number_rate) return photon_rate_expansion(model, t, X, std::min(M, 1), opt);
  return run_hierarchy(model, obs, M, t, X, opt).orders;
}

}  // namespace

int worker_count() {
  if (const char* env = std::getenv("SCLAB_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int n, const std::function<void(int)>& body) {
  const int workers = std::min(worker_count(), std::max(n, 1));
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

bool cutoff_adequate(const PhaseVector& X, double h, int n_max) {
  const double mean = X.squaredNorm() / (2.0 * h);
  return mean + 3.0 * std::sqrt(mean) <= n_max;
}

void ExperimentPlan::validate(int D) const {
  if (h_list.size() < 4) throw std::invalid_argument("plan: slope fits need at least 4 values of h");
  for (std::size_t i = 0; i < h_list.size(); ++i) {
    if (!(h_list[i] > 0.0 && h_list[i] <= 1.0)) throw std::invalid_argument("plan: every h must lie in (0, 1]");
    if (i > 0 && !(h_list[i] < h_list[i - 1])) throw std::invalid_argument("plan: h list must be strictly decreasing");
  }
  if (M < 0) throw std::invalid_argument("plan: M must be non-negative");
  if (n_max < 1) throw std::invalid_argument("plan: n_max must be positive");
  if (X_samples.empty()) throw std::invalid_argument("plan: no X samples");
  if (t_samples.empty()) throw std::invalid_argument("plan: no t samples");
  for (const auto& X : X_samples) {
    if (X.size() != 2 * D) throw std::invalid_argument("plan: X sample has the wrong dimension");
    if (!cutoff_adequate(X, h_list.back(), n_max))
      throw std::invalid_argument("plan: cutoff precheck failed; mean photon number too large for n_max");
  }
}

ExperimentPlan plan_from_json(const nlohmann::json& j, int D) {
  ExperimentPlan p;
  if (j.contains("model")) p.model = config_from_json(j.at("model"));
  if (j.contains("observables"))
    for (const auto& o : j.at("observables")) p.observables.push_back(observable_from_json(o));
  p.t_samples = j.value("t", p.t_samples);
  p.h_list = j.value("h", p.h_list);
  p.M = j.value("M", p.M);
  p.n_max = j.value("n_max", p.n_max);
  p.seed = j.value("seed", p.seed);
  p.output_dir = j.value("output_dir", p.output_dir);
  if (j.contains("oracle")) {
    const auto& o = j.at("oracle");
    p.oracle.tol = o.value("tol", p.oracle.tol);
    p.oracle.initial_step = o.value("initial_step", p.oracle.initial_step);
    p.oracle.step_floor = o.value("step_floor", p.oracle.step_floor);
    p.oracle.stepper = o.value("stepper", p.oracle.stepper);
    p.oracle.tail_threshold = o.value("tail_threshold", p.oracle.tail_threshold);
  }
  if (j.contains("hierarchy")) {
    const auto& o = j.at("hierarchy");
    p.hierarchy.tol = o.value("tol", p.hierarchy.tol);
    p.hierarchy.initial_step = o.value("initial_step", p.hierarchy.initial_step);
    p.hierarchy.step_floor = o.value("step_floor", p.hierarchy.step_floor);
  }
  if (j.contains("X")) {
    const auto& xs = j.at("X");
    if (xs.is_object() && xs.contains("random")) {
      const auto& r = xs.at("random");
      const int count = r.value("count", 1);
      const double norm = r.value("norm", 0.5);
      std::mt19937_64 rng(p.seed);
      std::normal_distribution<double> nd(0.0, 1.0);
      for (int c = 0; c < count; ++c) {
        PhaseVector X(2 * D);
        for (int i = 0; i < 2 * D; ++i) X(i) = nd(rng);
        p.X_samples.push_back(norm * X / X.norm());
      }
    } else {
      for (const auto& x : xs) {
        const auto v = x.get<std::vector<double>>();
        p.X_samples.push_back(Eigen::Map<const PhaseVector>(v.data(), static_cast<Eigen::Index>(v.size())));
      }
    }
  }
  return p;
}

ExperimentPlan load_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open plan file " + path);
  const nlohmann::json j = nlohmann::json::parse(in);
  const ModelConfig cfg = j.contains("model") ? config_from_json(j.at("model")) : ModelConfig{};
  const int D = build_grid(cfg).D();
  ExperimentPlan p = plan_from_json(j, D);
  p.validate(D);
  return p;
}

nlohmann::json plan_to_json(const ExperimentPlan& p) {
  nlohmann::json obs = nlohmann::json::array();
  for (const auto& o : p.observables) obs.push_back(observable_to_json(o));
  nlohmann::json xs = nlohmann::json::array();
  for (const auto& X : p.X_samples) xs.push_back(std::vector<double>(X.data(), X.data() + X.size()));
  return {{"model", config_to_json(p.model)},
          {"observables", obs},
          {"X", xs},
          {"t", p.t_samples},
          {"h", p.h_list},
          {"M", p.M},
          {"n_max", p.n_max},
          {"seed", p.seed},
          {"oracle", {{"tol", p.oracle.tol}, {"initial_step", p.oracle.initial_step}, {"stepper", p.oracle.stepper}}},
          {"hierarchy", {{"tol", p.hierarchy.tol}, {"initial_step", p.hierarchy.initial_step}}}};
}

SlopeFit fit_loglog(const std::vector<double>& h, const std::vector<double>& e) {
  const std::size_t n = h.size();
  if (n < 2 || e.size() != n) throw std::invalid_argument("fit_loglog: need matching samples");
  double sx = 0, sy = 0;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::log(h[i]);
    y[i] = std::log(std::max(e[i], 1e-300));
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  SlopeFit f;
  f.slope = sxy / sxx;
  f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

double operator_norm(const CMat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMat> svd(m);
  return svd.singularValues()(0);
}

bool slope_acceptable(int M, double slope) {
  if (M == 0) return slope >= 0.8 && slope <= 1.2;
  return slope >= M + 0.7;
}

void HygieneStats::merge(const HygieneStats& o) {
  max_unitarity_defect = std::max(max_unitarity_defect, o.max_unitarity_defect);
  max_energy_drift = std::max(max_energy_drift, o.max_energy_drift);
  max_local_error = std::max(max_local_error, o.max_local_error);
  oracle_steps += o.oracle_steps;
}

nlohmann::json HygieneStats::to_json() const {
  return {{"max_unitarity_defect", max_unitarity_defect},
          {"max_energy_drift", max_energy_drift},
          {"max_local_error", max_local_error},
          {"oracle_steps", oracle_steps}};
}

std::string ConvergenceReport::to_csv() const {
  std::ostringstream os;
  os << "observable,M,t,X_id,h,error,slope,r2,status\n";
  for (const auto& c : cells)
    for (std::size_t i = 0; i < c.h.size(); ++i)
      os << c.observable << ',' << c.M << ',' << fmt_double(c.t) << ',' << c.x_id << ',' << fmt_double(c.h[i]) << ','
         << fmt_double(c.error[i]) << ',' << fmt_double(c.slope) << ',' << fmt_double(c.r2) << ',' << c.status << '\n';
  return os.str();
}

nlohmann::json ConvergenceReport::to_json() const {
  nlohmann::json cs = nlohmann::json::array();
  for (const auto& c : cells)
    cs.push_back({{"observable", c.observable},
                  {"M", c.M},
                  {"t", c.t},
                  {"X_id", c.x_id},
                  {"h", c.h},
                  {"error", c.error},
                  {"slope", c.slope},
                  {"r2", c.r2},
                  {"status", c.status},
                  {"reason", c.reason}});
  return {{"format", "sclab-convergence-v1"}, {"cells", cs}, {"hygiene", hygiene.to_json()}, {"meta", meta},
          {"all_pass", all_pass}};
}

ConvergenceReport run_convergence(const ExperimentPlan& plan) {
  const Model model = make_model(plan.model);
  plan.validate(model.D());
  if (plan.observables.empty()) throw std::invalid_argument("run_convergence: plan lists no observables");
  const auto basis = std::make_shared<const FockBasis>(model.D(), plan.n_max);
  std::vector<Hamiltonian> Hs;
  for (double h : plan.h_list) Hs.push_back(build_hamiltonian(model, basis, h));

  const int nO = static_cast<int>(plan.observables.size());
  const int nT = static_cast<int>(plan.t_samples.size());
  const int nX = static_cast<int>(plan.X_samples.size());
  const int nH = static_cast<int>(plan.h_list.size());
  std::vector<std::vector<SpinMatrix>> coeffs(static_cast<std::size_t>(nO) * nT * nX);
  std::vector<std::string> coeff_fail(coeffs.size());
  std::vector<OracleCell> exact(static_cast<std::size_t>(nT) * nX * nH);
  const int jobsA = static_cast<int>(coeffs.size());
  const int jobsB = static_cast<int>(exact.size());
  parallel_for(jobsA + jobsB, [&](int job) {
    if (job < jobsA) {
      const int o = job / (nT * nX), t = (job / nX) % nT, x = job % nX;
      try {
        coeffs[job] = hierarchy_orders(model, plan.observables[o], plan.M, plan.t_samples[t], plan.X_samples[x],
                                       plan.hierarchy);
      } catch (const StepFloorError& e) {
        coeff_fail[job] = std::string("hierarchy step floor: ") + e.what();
      }
      return;
    }
    const int k = job - jobsA;
    const int t = k / (nX * nH), x = (k / nH) % nX, h = k % nH;
    exact[k] = oracle_cell(Hs[h], plan.X_samples[x], plan.t_samples[t], plan.oracle);
  });

  ConvergenceReport rep;
  std::vector<SpMat> ops(static_cast<std::size_t>(nO) * nH);
  for (int o = 0; o < nO; ++o)
    for (int h = 0; h < nH; ++h) ops[o * nH + h] = observable_operator(model, Hs[h], plan.observables[o]);
  for (const auto& c : exact) rep.hygiene.merge(c.hygiene);

  for (int o = 0; o < nO; ++o)
    for (int t = 0; t < nT; ++t)
      for (int x = 0; x < nX; ++x) {
        const auto& A = coeffs[(o * nT + t) * nX + x];
        const std::string& afail = coeff_fail[(o * nT + t) * nX + x];
        const int Mmax = plan.observables[o].kind == ObservableKind::number_rate ? std::min(plan.M, 1) : plan.M;
        for (int M = 0; M <= Mmax; ++M) {
          ConvergenceCell cell;
          cell.observable = plan.observables[o].label();
          cell.M = M;
          cell.t = plan.t_samples[t];
          cell.x_id = x;
          cell.h = plan.h_list;
          cell.reason = afail;
          for (int h = 0; h < nH && cell.reason.empty(); ++h) {
            const OracleCell& ex = exact[(t * nX + x) * nH + h];
            if (!ex.failure.empty()) {
              cell.reason = ex.failure;
              break;
            }
            SpinMatrix sum = A[0];
            for (int j = 1; j <= M; ++j) sum += std::pow(plan.h_list[h], j) * A[j];
            cell.error.push_back(operator_norm(symbol_from_states(ops[o * nH + h], ex.states) - sum));
          }
          if (!cell.reason.empty()) {
            cell.status = "truncation_failed";
            cell.error.assign(cell.h.size(), std::nan(""));
            rep.all_pass = false;
          } else if (*std::max_element(cell.error.begin(), cell.error.end()) <= 1e-8) {
            cell.status = "exact";
          } else {
            const SlopeFit f = fit_loglog(cell.h, cell.error);
            cell.slope = f.slope;
            cell.r2 = f.r2;
            cell.status = slope_acceptable(M, f.slope) ? "pass" : "fail";
            if (cell.status == "fail") rep.all_pass = false;
          }
          rep.cells.push_back(std::move(cell));
        }
      }
  rep.meta = {{"plan", plan_to_json(plan)}, {"fock_dimension", basis->size()}, {"spin_dim", model.spin_dim()}};
  write_file(plan.output_dir, "convergence.csv", rep.to_csv());
  write_file(plan.output_dir, "convergence.json", rep.to_json().dump(2));
  return rep;
}

std::string PhotonReport::to_csv() const {
  std::ostringstream os;
  os << "t,X_id,h,error0,error1,slope0,slope1,sign,status\n";
  for (const auto& c : cells)
    for (std::size_t i = 0; i < c.h.size(); ++i)
      os << fmt_double(c.t) << ',' << c.x_id << ',' << fmt_double(c.h[i]) << ','
         << fmt_double(i < c.error0.size() ? c.error0[i] : std::nan("")) << ','
         << fmt_double(i < c.error1.size() ? c.error1[i] : std::nan("")) << ',' << fmt_double(c.fit0.slope) << ','
         << fmt_double(c.fit1.slope) << ',' << fmt_double(c.sign) << ',' << c.status << '\n';
  return os.str();
}

nlohmann::json PhotonReport::to_json() const {
  nlohmann::json cs = nlohmann::json::array();
  for (const auto& c : cells)
    cs.push_back({{"t", c.t},
                  {"X_id", c.x_id},
                  {"h", c.h},
                  {"error0", c.error0},
                  {"error1", c.error1},
                  {"slope0", c.fit0.slope},
                  {"r2_0", c.fit0.r2},
                  {"slope1", c.fit1.slope},
                  {"r2_1", c.fit1.r2},
                  {"sign", c.sign},
                  {"polarized_residual", c.polarized_residual},
                  {"N0_plus", matrix_json(c.N0_plus)},
                  {"N0_minus", matrix_json(c.N0_minus)},
                  {"status", c.status},
                  {"reason", c.reason}});
  return {{"format", "sclab-photon-v1"},
          {"cells", cs},
          {"sign", sign},
          {"sign_consistent", sign_consistent},
          {"hygiene", hygiene.to_json()},
          {"all_pass", all_pass}};
}

PhotonReport run_photon_rate(const ExperimentPlan& plan) {
  const Model model = make_model(plan.model);
  plan.validate(model.D());
  const auto basis = std::make_shared<const FockBasis>(model.D(), plan.n_max);
  std::vector<Hamiltonian> Hs;
  for (double h : plan.h_list) Hs.push_back(build_hamiltonian(model, basis, h));
  const int nT = static_cast<int>(plan.t_samples.size());
  const int nX = static_cast<int>(plan.X_samples.size());
  const int nH = static_cast<int>(plan.h_list.size());

  std::vector<OracleCell> exact(static_cast<std::size_t>(nT) * nX * nH);
  parallel_for(static_cast<int>(exact.size()), [&](int k) {
    const int t = k / (nX * nH), x = (k / nH) % nX, h = k % nH;
    exact[k] = oracle_cell(Hs[h], plan.X_samples[x], plan.t_samples[t], plan.oracle);
  });

  PhotonReport rep;
  for (const auto& c : exact) rep.hygiene.merge(c.hygiene);
  std::vector<SpMat> rate_ops;
  for (const auto& H : Hs) rate_ops.push_back(number_rate_operator(H));

  // sum_{lambda,m} (w_m(x_lambda) . chi_t Y) S^[lambda,0]_m(t,Y) for a coupling family w.
  auto contracted = [&](double t, const PhaseVector& Y, bool polarized) {
    const auto S = bloch_spin0(model, t, Y, plan.hierarchy);
    const PhaseVector cy = chi_flow(model.grid, t, Y);
    SpinMatrix acc = SpinMatrix::Zero(model.spin_dim(), model.spin_dim());
    for (int l = 0; l < model.N(); ++l)
      for (int m = 1; m <= 3; ++m) {
        const Vec3& x = model.config.positions[l];
        const PhaseVector w = polarized ? coupling_E_pol(model.grid, model.config, m, x)
                                        : coupling_E(model.grid, model.config, m, x);
        acc += w.dot(cy) * S[l][m - 1];
      }
    return acc;
  };

  for (int t = 0; t < nT; ++t)
    for (int x = 0; x < nX; ++x) {
      PhotonCell cell;
      cell.t = plan.t_samples[t];
      cell.x_id = x;
      cell.h = plan.h_list;
      const PhaseVector& X = plan.X_samples[x];
      const auto N = photon_rate_expansion(model, cell.t, X, 1, plan.hierarchy);
      std::vector<SpinMatrix> ex;
      for (int h = 0; h < nH; ++h) {
        const OracleCell& oc = exact[(t * nX + x) * nH + h];
        if (!oc.failure.empty()) {
          cell.reason = oc.failure;
          break;
        }
        ex.push_back(symbol_from_states(rate_ops[h], oc.states));
        cell.error0.push_back(operator_norm(ex.back() - N[0]));
        cell.error1.push_back(operator_norm(ex.back() - N[0] - plan.h_list[h] * N[1]));
      }
      const PhaseVector Xp = polarization_project(model.grid, +1, X);
      const PhaseVector Xm = polarization_project(model.grid, -1, X);
      cell.N0_plus = photon_rate_expansion(model, cell.t, Xp, 0, plan.hierarchy)[0];
      cell.N0_minus = photon_rate_expansion(model, cell.t, Xm, 0, plan.hierarchy)[0];
      if (!cell.reason.empty()) {
        cell.status = "truncation_failed";
        rep.all_pass = false;
        rep.cells.push_back(std::move(cell));
        continue;
      }
      // Sign of the exact rate against the leading term sum (E_pol . chi_t X) S.
      const SpinMatrix P = contracted(cell.t, X, true);
      const double proj = (P.adjoint() * ex.back()).trace().real();
      cell.sign = std::abs(proj) > 1e-12 * std::max(1.0, P.squaredNorm()) ? (proj > 0 ? 1.0 : -1.0) : 0.0;
      // For J X = F X the leading term is sign * sum (E . chi_t X) S.
      const SpinMatrix Q = contracted(cell.t, Xp, false);
      const double sgn = cell.sign == 0.0 ? 1.0 : cell.sign;
      cell.polarized_residual = operator_norm(cell.N0_plus - sgn * Q) / std::max(operator_norm(Q), 1e-300);
      if (operator_norm(Q) <= 1e-14) cell.polarized_residual = operator_norm(cell.N0_plus - sgn * Q);
      const double emax = *std::max_element(cell.error0.begin(), cell.error0.end());
      if (emax <= 1e-8) {
        cell.status = "exact";
      } else {
        cell.fit0 = fit_loglog(cell.h, cell.error0);
        cell.fit1 = fit_loglog(cell.h, cell.error1);
        cell.status = cell.fit0.slope >= 0.8 && cell.polarized_residual <= 1e-8 ? "pass" : "fail";
      }
      if (cell.status == "fail") rep.all_pass = false;
      if (cell.sign != 0.0) {
        if (rep.sign == 0.0) rep.sign = cell.sign;
        else if (rep.sign != cell.sign) rep.sign_consistent = false;
      }
      rep.cells.push_back(std::move(cell));
    }
  if (!rep.sign_consistent) rep.all_pass = false;
  write_file(plan.output_dir, "photon.csv", rep.to_csv());
  write_file(plan.output_dir, "photon.json", rep.to_json().dump(2));
  return rep;
}

nlohmann::json SelftestReport::to_json() const {
  return {{"format", "sclab-selftest-v1"}, {"entries", entries_json(entries)}, {"all_pass", all_pass}};
}

nlohmann::json CrosscheckReport::to_json() const {
  return {{"format", "sclab-crosscheck-v1"}, {"entries", entries_json(entries)}, {"all_pass", all_pass}};
}

SelftestReport run_calculus_selftest(unsigned seed) {
  SelftestReport rep;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  auto random_symbol = [&](int D, int degree) {
    PolySymbol F(D);
    std::vector<MultiIndex> keys;
    std::function<void(int, MultiIndex&, int)> rec = [&](int pos, MultiIndex& cur, int rem) {
      if (pos == 2 * D) {
        keys.push_back(cur);
        return;
      }
      for (int v = 0; v <= rem; ++v) {
        cur[pos] = v;
        rec(pos + 1, cur, rem - v);
      }
      cur[pos] = 0;
    };
    MultiIndex cur(2 * D, 0);
    rec(0, cur, degree);
    for (const auto& k : keys) {
      MultiIndex a(k.begin(), k.begin() + D), b(k.begin() + D, k.end());
      F.add(a, b, CMat::Constant(1, 1, cplx(U(rng), U(rng))));
    }
    return F;
  };
  auto random_point = [&](int D, double radius) -> PhaseVector {
    PhaseVector X(2 * D);
    for (int i = 0; i < 2 * D; ++i) X(i) = U(rng);
    return X * (radius * std::abs(U(rng)) / X.norm());
  };

  {  // heat round trip
    const double h = 0.3;
    const PolySymbol F = random_symbol(2, 6);
    const PolySymbol back = heat(heat(F, h), -h) - F;
    rep.entries.push_back(entry("heat_roundtrip", back.max_abs_coeff() / F.max_abs_coeff(), 1e-12));
  }
  {  // Op(q^2 + p^2) = 2 h N
    const double h = 0.37;
    FockBasis b(1, 20);
    const PolySymbol F = PolySymbol::q(1, 0) * PolySymbol::q(1, 0) + PolySymbol::p(1, 0) * PolySymbol::p(1, 0);
    const SpMat diff = wick_quantize(F, b, h).mat - cplx(2.0 * h) * number_operator(b).mat;
    rep.entries.push_back(entry("wick_number_operator", diff.cwiseAbs().sum(), 1e-12));
  }
  {  // Wick symbol of Op(F) is F
    const double h = 0.25;
    FockBasis b(2, 25);
    const PolySymbol F = random_symbol(2, 3);
    const FockOperator op = wick_quantize(F, b, h);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      const PhaseVector X = random_point(2, 1.0);
      const cplx a = wick_symbol_photon(op, b, X, h, 1e-6), e = F.eval_scalar(X);
      worst = std::max(worst, std::abs(a - e) / std::max(1.0, std::abs(e)));
    }
    rep.entries.push_back(entry("wick_symbol_roundtrip", worst, 1e-6));
  }
  {  // Op(C_h(F,G)) = Op(F) Op(G) on states where no truncation enters
    const double h = 0.3;
    FockBasis b(2, 12);
    const PolySymbol F = random_symbol(2, 3), G = random_symbol(2, 3);
    const SpMat lhs = wick_quantize(mizrahi_compose(F, G, h), b, h).mat;
    const SpMat rhs = wick_quantize(F, b, h).mat * wick_quantize(G, b, h).mat;
    const CMat d = CMat(lhs) - CMat(rhs);
    double num = 0.0, den = 0.0;
    for (std::size_t c = 0; c < b.size(); ++c) {
      if (b.total(c) > b.n_max() - 3) continue;
      num = std::max(num, d.col(static_cast<Eigen::Index>(c)).cwiseAbs().maxCoeff());
      den = std::max(den, CMat(rhs).col(static_cast<Eigen::Index>(c)).cwiseAbs().maxCoeff());
    }
    rep.entries.push_back(entry("mizrahi_operator_identity", num / den, 1e-6));
  }
  {  // coherent overlaps
    FockBasis b(2, 25);
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
      const double h = 0.5 + 0.5 * std::abs(U(rng));
      const PhaseVector X = random_point(2, 1.0), Y = random_point(2, 1.0);
      const CVec px = coherent_state(b, X, h).psi, py = coherent_state(b, Y, h).psi;
      const cplx got = py.dot(px);
      const cplx want = std::exp(cplx(-(X - Y).squaredNorm() / (4.0 * h), symplectic(X, Y) / (2.0 * h)));
      worst = std::max(worst, std::abs(got - want));
    }
    rep.entries.push_back(entry("coherent_overlap", worst, 1e-10));
  }
  {  // exp(-(i/h) Phi_{S,h}(F X)) Psi_0 = Psi_X
    const double h = 0.5;
    FockBasis b(2, 40);
    PhaseVector X = random_point(2, 1.0);
    X *= 0.9 / X.norm();
    const SpMat phi = segal_field(b, apply_F(X), h).mat;
    CVec vac = CVec::Zero(static_cast<Eigen::Index>(b.size()));
    vac(0) = 1.0;
    const CVec got = expmv_hermitian([&](const CVec& v) { return CVec(phi * v); }, vac, 1.0 / h, 80, 1e-15);
    const CVec want = coherent_state(b, X, h).psi;
    rep.entries.push_back(entry("displacement_identity", (got - want).norm(), 1e-8));
  }
  {  // free covariance of Segal fields and N under Gamma(chi_t)
    const double h = 0.5, t = 0.7;
    ModeGrid g = grid_from_points({Vec3(0.0, 0.0, 1.3)}, {1.0});
    FockBasis b(g.D(), 12);
    const PhaseVector X = random_point(g.D(), 0.8), V = random_point(g.D(), 1.0);
    const SpMat Gt = gamma_free(b, g.slot_omega(), t).mat;
    const SpMat Gadj = SpMat(Gt.adjoint());
    const FockOperator phi{SpMat(Gadj * segal_field(b, V, h).mat * Gt), false, 1};
    const FockOperator num{SpMat(Gadj * number_operator(b).mat * Gt), false, 1};
    const PhaseVector cx = chi_flow(g, t, X);
    const double e1 = std::abs(wick_symbol_photon(phi, b, X, h, 1e-6) - V.dot(cx));
    const double e2 = std::abs(wick_symbol_photon(num, b, X, h, 1e-6) - cx.squaredNorm() / (2.0 * h));
    rep.entries.push_back(entry("free_covariance", std::max(e1, e2), 1e-8));
  }
  for (const auto& e : rep.entries) rep.all_pass = rep.all_pass && e.pass;
  return rep;
}

SelftestReport run_model_selftest(const ModelConfig& config, unsigned seed) {
  SelftestReport rep;
  const ModeGrid grid = build_grid(config);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  auto point = [&] { return Vec3(U(rng), U(rng), U(rng)); };
  {  // sigma(E_{m x}, B_{n y}) = grad rho(x - y) . (e_m x e_n)
    double worst = 0.0, scale = 0.0;
    for (int k = 0; k < 8; ++k) {
      const Vec3 x = point(), y = point();
      const Vec3 g = rho_discrete(grid, config, x - y).grad;
      scale = std::max(scale, g.norm());
      for (int m = 1; m <= 3; ++m)
        for (int n = 1; n <= 3; ++n) {
          const double lhs = symplectic(coupling_E(grid, config, m, x), coupling_B(grid, config, n, y));
          const double rhs = g.dot(Vec3::Unit(m - 1).cross(Vec3::Unit(n - 1)));
          worst = std::max(worst, std::abs(lhs - rhs));
        }
    }
    rep.entries.push_back(entry("symplectic_seed", worst / std::max(1.0, scale), 1e-10));
  }
  {  // divergence-free couplings
    double worst = 0.0;
    for (int k = 0; k < 8; ++k) {
      const Vec3 x = point();
      PhaseVector dB = PhaseVector::Zero(2 * grid.D()), dE = dB;
      double scale = 1.0;
      for (int a = 1; a <= 3; ++a) {
        dB += coupling_B_dx(grid, config, a, x, a);
        dE += coupling_E_dx(grid, config, a, x, a);
        scale = std::max(scale, coupling_B_dx(grid, config, a, x, a).norm());
      }
      worst = std::max(worst, std::max(dB.norm(), dE.norm()) / scale);
    }
    rep.entries.push_back(entry("transversality", worst, 1e-12));
  }
  {  // Pi_+ + Pi_- = 1, Pi_s^2 = Pi_s, Pi_+ Pi_- = 0, J F Pi_s = -s Pi_s
    double worst = 0.0;
    for (int k = 0; k < 8; ++k) {
      PhaseVector X(2 * grid.D());
      for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = U(rng);
      const PhaseVector P = polarization_project(grid, 1, X), M = polarization_project(grid, -1, X);
      worst = std::max(worst, (P + M - X).norm());
      worst = std::max(worst, (polarization_project(grid, 1, P) - P).norm());
      worst = std::max(worst, (polarization_project(grid, -1, M) - M).norm());
      worst = std::max(worst, polarization_project(grid, -1, P).norm());
      worst = std::max(worst, (apply_helicity(grid, apply_F(P)) + P).norm());
      worst = std::max(worst, (apply_helicity(grid, apply_F(M)) - M).norm());
      worst = std::max(worst, (apply_helicity(grid, P) - apply_F(P)).norm());
      worst /= std::max(1.0, X.norm());
    }
    rep.entries.push_back(entry("helicity_projectors", worst, 1e-12));
  }
  for (const auto& e : rep.entries) rep.all_pass = rep.all_pass && e.pass;
  return rep;
}

CrosscheckReport run_crosscheck(const ExperimentPlan& plan, double tol) {
  const Model model = make_model(plan.model);
  CrosscheckReport rep;
  std::mt19937_64 rng(plan.seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  const int N = model.N();
  for (double t : plan.t_samples)
    for (std::size_t xi = 0; xi < plan.X_samples.size(); ++xi) {
      const PhaseVector& X = plan.X_samples[xi];
      std::ostringstream tag;
      tag << "[t=" << t << ",X" << xi << "]";
      const auto S = bloch_spin0(model, t, X, plan.hierarchy);
      const PropagatorState G = propagator_G(model, t, 0.0, X, plan.hierarchy);
      double e0 = 0.0, cas = 0.0;
      for (int l = 0; l < N; ++l) {
        SpinMatrix c = -3.0 * SpinMatrix::Identity(model.spin_dim(), model.spin_dim());
        for (int m = 0; m < 3; ++m) {
          e0 = std::max(e0, operator_norm(S[l][m] - G.G * spin_operator(N, l + 1, m + 1) * G.G.adjoint()));
          c += S[l][m] * S[l][m];
        }
        cas = std::max(cas, operator_norm(c));
      }
      rep.entries.push_back(entry("bloch_vs_propagator" + tag.str(), e0, tol));
      rep.entries.push_back(entry("casimir" + tag.str(), cas, tol));
      rep.entries.push_back(entry("propagator_unitarity" + tag.str(),
                                  operator_norm(G.G.adjoint() * G.G - SpinMatrix::Identity(G.G.rows(), G.G.cols())),
                                  tol));

      const auto S1 = spin_correction1(model, t, X, plan.hierarchy);
      double num = 0.0, den = 0.0;
      for (int l = 0; l < N; ++l)
        for (int m = 1; m <= 3; ++m) {
          ObservableSpec obs;
          obs.kind = ObservableKind::spin;
          obs.spin = l + 1;
          obs.axis = m;
          const SpinMatrix A1 = order_j(model, obs, 1, t, X, plan.hierarchy);
          num = std::max(num, operator_norm(S1[l][m - 1] - A1));
          den = std::max(den, operator_norm(A1));
        }
      rep.entries.push_back(entry("spin_correction1_vs_recursion" + tag.str(), den > 0 ? num / den : num, tol));

      const MaxwellReport mw = maxwell_cross_check(model, t, X, tol, plan.hierarchy);
      rep.entries.push_back(entry("maxwell_vs_recursion" + tag.str(), mw.max_rel_deviation, tol));
      rep.entries.push_back(entry("maxwell_divergence" + tag.str(), mw.divergence_residual, tol));

      // Tangent equations against central differences of the same fixed-step map.
      PhaseVector V(2 * model.D());
      for (Eigen::Index i = 0; i < V.size(); ++i) V(i) = nd(rng);
      V /= V.norm();
      HierarchyOptions fixed = plan.hierarchy;
      fixed.fixed_steps = std::max(20, static_cast<int>(std::ceil(std::abs(t) / plan.hierarchy.initial_step)));
      const double eps = 1e-5;
      const auto tg = tangent_derivatives(model, 0, V, {t}, X, fixed);
      const auto Sp = bloch_spin0(model, t, X + eps * V, fixed);
      const auto Sm = bloch_spin0(model, t, X - eps * V, fixed);
      double fnum = 0.0, fden = 0.0;
      for (int l = 0; l < N; ++l)
        for (int m = 0; m < 3; ++m) {
          const SpinMatrix fd = (Sp[l][m] - Sm[l][m]) / (2.0 * eps);
          fnum = std::max(fnum, operator_norm(fd - tg[0].dS[l][m]));
          fden = std::max(fden, operator_norm(fd));
        }
      const double fres = fden > 1e-12 ? fnum / fden : fnum;
      rep.entries.push_back(entry("tangent_vs_finite_difference" + tag.str(), fres, std::max(tol, 1e-6)));
    }
  for (const auto& e : rep.entries) rep.all_pass = rep.all_pass && e.pass;
  write_file(plan.output_dir, "crosscheck.json", rep.to_json().dump(2));
  return rep;
}

}  // namespace sclab
