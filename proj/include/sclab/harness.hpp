#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sclab/hierarchy.hpp"
#include "sclab/oracle.hpp"

namespace sclab {

struct ExperimentPlan {
  ModelConfig model;
  std::vector<ObservableSpec> observables;
  std::vector<PhaseVector> X_samples;
  std::vector<double> t_samples{1.0};
  std::vector<double> h_list{0.4, 0.2, 0.1, 0.05};
  int M = 1;
  int n_max = 30;
  OracleOptions oracle;
  HierarchyOptions hierarchy;
  std::string output_dir;  // empty: nothing written
  unsigned seed = 12345;

  // Throws std::invalid_argument on a malformed plan or a failed cutoff precheck.
  void validate(int D) const;
};

// X samples are either explicit arrays or {"random": {"count": k, "norm": r}} drawn with the seed.
ExperimentPlan plan_from_json(const nlohmann::json& j, int D);
ExperimentPlan load_plan(const std::string& path);
nlohmann::json plan_to_json(const ExperimentPlan& p);

// |X|^2/(2h) + 3 sqrt(|X|^2/(2h)) <= n_max
bool cutoff_adequate(const PhaseVector& X, double h, int n_max);

struct SlopeFit {
  double slope = 0.0;
  double r2 = 0.0;
};
SlopeFit fit_loglog(const std::vector<double>& h, const std::vector<double>& e);

double operator_norm(const CMat& m);

struct ConvergenceCell {
  std::string observable;
  int M = 0;
  double t = 0.0;
  int x_id = 0;
  std::vector<double> h;
  std::vector<double> error;
  double slope = 0.0;
  double r2 = 0.0;
  std::string status;  // pass | fail | exact | truncation_failed
  std::string reason;
};

struct HygieneStats {
  double max_unitarity_defect = 0.0;
  double max_energy_drift = 0.0;
  double max_local_error = 0.0;
  int oracle_steps = 0;

  void merge(const HygieneStats& o);
  nlohmann::json to_json() const;
};

struct ConvergenceReport {
  std::vector<ConvergenceCell> cells;
  HygieneStats hygiene;
  nlohmann::json meta;
  bool all_pass = true;

  std::string to_csv() const;
  nlohmann::json to_json() const;
};

// Acceptance window for the fitted slope of e_M(h).
bool slope_acceptable(int M, double slope);

ConvergenceReport run_convergence(const ExperimentPlan& plan);

struct PhotonCell {
  double t = 0.0;
  int x_id = 0;
  std::vector<double> h;
  std::vector<double> error0;  // |exact - N0|
  std::vector<double> error1;  // |exact - N0 - h N1|
  SlopeFit fit0, fit1;
  double sign = 0.0;                // measured epsilon against sum E^{pol,free} . S^[0]
  double polarized_residual = 0.0;  // |N0(Pi_+ X) - sign * sum E^free . S^[0]|
  SpinMatrix N0_plus, N0_minus;     // leading term for the two circular components
  std::string status;
  std::string reason;
};

struct PhotonReport {
  std::vector<PhotonCell> cells;
  double sign = 0.0;
  bool sign_consistent = true;
  HygieneStats hygiene;
  bool all_pass = true;

  std::string to_csv() const;
  nlohmann::json to_json() const;
};

PhotonReport run_photon_rate(const ExperimentPlan& plan);

struct SelftestEntry {
  std::string name;
  double residual = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct SelftestReport {
  std::vector<SelftestEntry> entries;
  bool all_pass = true;

  nlohmann::json to_json() const;
};

SelftestReport run_calculus_selftest(unsigned seed = 7);
// Symplectic seed, transversality and helicity projector algebra of the discrete model.
SelftestReport run_model_selftest(const ModelConfig& config, unsigned seed = 11);

struct CrosscheckReport {
  std::vector<SelftestEntry> entries;
  bool all_pass = true;

  nlohmann::json to_json() const;
};

// Dual-path agreement over the plan's t and X samples plus tangent finite-difference probes.
CrosscheckReport run_crosscheck(const ExperimentPlan& plan, double tol = 1e-6);

// Worker count from SCLAB_WORKERS (default: hardware concurrency, at least 1).
int worker_count();
void parallel_for(int n, const std::function<void(int)>& body);

}  // namespace sclab
