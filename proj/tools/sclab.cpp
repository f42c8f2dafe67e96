#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sclab/harness.hpp"

namespace {

void print_entries(const std::vector<sclab::SelftestEntry>& entries) {
  for (const auto& e : entries)
    std::cout << (e.pass ? "PASS " : "FAIL ") << e.name << "  residual=" << e.residual << "  threshold=" << e.threshold
              << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semiclassical spin-field expansion laboratory"};
  app.require_subcommand(1);

  std::string model_config;
  auto* selftest = app.add_subcommand("selftest", "Calculus, Fock and discrete-model identity checks");
  selftest->add_option("--model", model_config, "Model config used for the structural checks");

  std::string plan_file;
  auto* converge = app.add_subcommand("converge", "Convergence sweep against the exact oracle");
  converge->add_option("plan", plan_file, "Plan file")->required()->check(CLI::ExistingFile);
  auto* photon = app.add_subcommand("photon", "Photon-rate sweep against the exact oracle");
  photon->add_option("plan", plan_file, "Plan file")->required()->check(CLI::ExistingFile);
  double cross_tol = 1e-6;
  auto* crosscheck = app.add_subcommand("crosscheck", "Dual-path agreement of the hierarchy");
  crosscheck->add_option("plan", plan_file, "Plan file")->required()->check(CLI::ExistingFile);
  crosscheck->add_option("--tol", cross_tol, "Relative tolerance");
  std::string config_file;
  auto* dump = app.add_subcommand("dump-model", "Print the discretized model as JSON");
  dump->add_option("config", config_file, "Model config file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (selftest->parsed()) {
      sclab::ModelConfig cfg;
      if (!model_config.empty()) {
        std::ifstream in(model_config);
        cfg = sclab::config_from_json(nlohmann::json::parse(in));
      }
      const auto calc = sclab::run_calculus_selftest();
      const auto model = sclab::run_model_selftest(cfg);
      print_entries(calc.entries);
      print_entries(model.entries);
      return calc.all_pass && model.all_pass ? EXIT_SUCCESS : EXIT_FAILURE;
    }
    if (converge->parsed()) {
      const auto rep = sclab::run_convergence(sclab::load_plan(plan_file));
      std::cout << rep.to_csv();
      std::cerr << "hygiene " << rep.hygiene.to_json().dump() << '\n';
      return rep.all_pass ? EXIT_SUCCESS : EXIT_FAILURE;
    }
    if (photon->parsed()) {
      const auto rep = sclab::run_photon_rate(sclab::load_plan(plan_file));
      std::cout << rep.to_csv();
      std::cerr << "sign " << rep.sign << (rep.sign_consistent ? " (consistent)" : " (inconsistent)") << '\n';
      return rep.all_pass ? EXIT_SUCCESS : EXIT_FAILURE;
    }
    if (crosscheck->parsed()) {
      const auto rep = sclab::run_crosscheck(sclab::load_plan(plan_file), cross_tol);
      print_entries(rep.entries);
      return rep.all_pass ? EXIT_SUCCESS : EXIT_FAILURE;
    }
    if (dump->parsed()) {
      std::ifstream in(config_file);
      const sclab::Model model = sclab::make_model(sclab::config_from_json(nlohmann::json::parse(in)));
      std::cout << sclab::dump_model(model).dump(2) << '\n';
      return EXIT_SUCCESS;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return EXIT_SUCCESS;
}
