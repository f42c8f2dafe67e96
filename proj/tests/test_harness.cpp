#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "sclab/harness.hpp"

using namespace sclab;

namespace {

ExperimentPlan small_plan() {
  ExperimentPlan p;
  p.model.kmax = 2.0;
  ObservableSpec s;
  s.kind = ObservableKind::spin;
  s.axis = 1;
  p.observables = {s};
  PhaseVector X = PhaseVector::Zero(8);
  X(0) = 0.2;
  X(6) = 0.1;
  p.X_samples = {X};
  p.t_samples = {0.5};
  p.h_list = {0.4, 0.2, 0.1, 0.05};
  p.M = 1;
  p.n_max = 12;
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("log-log slope fit") {
  const std::vector<double> h{0.4, 0.2, 0.1, 0.05};
  std::vector<double> e;
  for (double x : h) e.push_back(3.0 * x * x);
  const SlopeFit f = fit_loglog(h, e);
  CHECK(f.slope == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(fit_loglog({0.1}, {0.2}), std::invalid_argument);
}

TEST_CASE("slope windows") {
  CHECK(slope_acceptable(0, 1.0));
  CHECK_FALSE(slope_acceptable(0, 1.3));
  CHECK_FALSE(slope_acceptable(0, 0.7));
  CHECK(slope_acceptable(1, 1.75));
  CHECK_FALSE(slope_acceptable(1, 1.6));
  CHECK(slope_acceptable(2, 3.0));
}

TEST_CASE("plan validation") {
  ExperimentPlan p = small_plan();
  CHECK_NOTHROW(p.validate(4));
  p.h_list = {0.4, 0.4, 0.1, 0.05};
  CHECK_THROWS_AS(p.validate(4), std::invalid_argument);
  p = small_plan();
  p.h_list = {2.0, 0.2, 0.1, 0.05};
  CHECK_THROWS_AS(p.validate(4), std::invalid_argument);
  p = small_plan();
  p.X_samples[0] *= 10.0;
  CHECK_FALSE(cutoff_adequate(p.X_samples[0], 0.05, p.n_max));
  CHECK_THROWS_AS(p.validate(4), std::invalid_argument);
}

TEST_CASE("plan JSON round trip and random samples") {
  const ExperimentPlan p = small_plan();
  const ExperimentPlan q = plan_from_json(plan_to_json(p), 4);
  CHECK(q.h_list == p.h_list);
  CHECK((q.X_samples[0] - p.X_samples[0]).norm() == 0.0);
  CHECK(q.observables[0].label() == p.observables[0].label());
  nlohmann::json j = plan_to_json(p);
  j["X"] = {{"random", {{"count", 3}, {"norm", 0.4}}}};
  const ExperimentPlan r1 = plan_from_json(j, 4), r2 = plan_from_json(j, 4);
  CHECK(r1.X_samples.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r1.X_samples[i].norm() == doctest::Approx(0.4));
    CHECK((r1.X_samples[i] - r2.X_samples[i]).norm() == 0.0);
  }
}

TEST_CASE("uncoupled model is reported exact") {
  ExperimentPlan p = small_plan();
  p.model.coupling_scale = 0.0;
  const ConvergenceReport rep = run_convergence(p);
  REQUIRE(rep.cells.size() == 2);
  for (const auto& c : rep.cells) {
    CHECK(c.status == "exact");
    for (double e : c.error) CHECK(e <= 1e-8);
  }
  CHECK(rep.all_pass);
}

TEST_CASE("truncation failures are recorded, not fitted") {
  ExperimentPlan p = small_plan();
  p.oracle.tail_threshold = 0.0;
  const ConvergenceReport rep = run_convergence(p);
  for (const auto& c : rep.cells) {
    CHECK(c.status == "truncation_failed");
    CHECK_FALSE(c.reason.empty());
  }
  CHECK_FALSE(rep.all_pass);
}

TEST_CASE("outputs are deterministic") {
  const auto dir = std::filesystem::temp_directory_path() / "sclab_harness_test";
  std::filesystem::remove_all(dir);
  ExperimentPlan p = small_plan();
  p.output_dir = (dir / "a").string();
  run_convergence(p);
  p.output_dir = (dir / "b").string();
  run_convergence(p);
  const std::string a = slurp(dir / "a" / "convergence.csv");
  CHECK(a.rfind("observable,M,t,X_id,h,error,slope,r2,status\n", 0) == 0);
  CHECK(a == slurp(dir / "b" / "convergence.csv"));
  CHECK(slurp(dir / "a" / "convergence.json") == slurp(dir / "b" / "convergence.json"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("photon report at the origin") {
  ExperimentPlan p = small_plan();
  p.X_samples[0].setZero();
  p.t_samples = {0.0};
  const PhotonReport rep = run_photon_rate(p);
  REQUIRE(rep.cells.size() == 1);
  for (double e : rep.cells[0].error0) CHECK(e <= 1e-8);
  CHECK(rep.cells[0].status == "exact");
  // Later on the vacuum emits at rate O(h) while the leading term stays zero.
  p.t_samples = {0.5};
  const PhotonReport later = run_photon_rate(p);
  CHECK(later.cells[0].error0.back() > 1e-6);
  CHECK(later.cells[0].fit0.slope == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("parallel_for runs every index and propagates errors") {
  std::vector<int> hit(50, 0);
  parallel_for(50, [&](int i) { hit[i] += 1; });
  for (int v : hit) CHECK(v == 1);
  CHECK_THROWS_AS(parallel_for(5, [](int i) {
                    if (i == 3) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
}

TEST_CASE("self tests pass") {
  const SelftestReport calc = run_calculus_selftest();
  for (const auto& e : calc.entries) CHECK_MESSAGE(e.pass, e.name);
  ModelConfig c;
  c.directions = "octahedral";
  c.radial_nodes = 2;
  const SelftestReport model = run_model_selftest(c);
  for (const auto& e : model.entries) CHECK_MESSAGE(e.pass, e.name);
}
