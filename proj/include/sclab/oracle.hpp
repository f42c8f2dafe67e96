#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "sclab/fock.hpp"
#include "sclab/mode_model.hpp"

namespace sclab {

struct OracleOptions {
  double tol = 1e-9;  // local error per step
  double initial_step = 0.05;
  double step_floor = 1e-7;
  std::string stepper = "cf4";  // cf4 | midpoint2
  int krylov_max = 60;
  double krylov_tol = 1e-14;
  double tail_threshold = 1e-10;
};

struct PropagationLog {
  int steps = 0;
  int rejected = 0;
  long matvecs = 0;
  std::vector<double> step_sizes;
  std::vector<double> local_errors;
  std::vector<double> unitarity_defects;
  double max_unitarity_defect = 0.0;

  void merge(const PropagationLog& o);
  nlohmann::json to_json() const;
};

// H(h) = h (F x I + H_int_op) with F = dGamma(M_omega) and
// H_int_op = sum_{lambda,m} (beta_m + Phi_{S,h}(B_{m x_lambda})) x sigma_m^[lambda].
struct Hamiltonian {
  std::shared_ptr<const FockBasis> basis;
  int spin_dim = 2;
  double h = 1.0;
  RVec photon_diag;  // F x I on the tensor space (diagonal)
  SpMat h_int_op;

  std::size_t dim() const { return static_cast<std::size_t>(photon_diag.size()); }
  // F x I + H_int_op, i.e. H(h)/h.
  SpMat generator() const;
};

Hamiltonian build_hamiltonian(const Model& model, std::shared_ptr<const FockBasis> basis, double h);

// exp(-i dt A) v for Hermitian A given by its action (Lanczos).
CVec expmv_hermitian(const std::function<CVec(const CVec&)>& apply, const CVec& v, double dt, int max_dim,
                     double tol, long* matvecs = nullptr);

// Returns e^{-i t H(h)/h} psi0, free phases exact and the interaction picture generator
// integrated by a fourth order commutator-free Magnus stepper (or the midpoint rule).
CVec evolve_interaction_picture(const Hamiltonian& H, const CVec& psi0, double t, const OracleOptions& opt,
                                PropagationLog* log = nullptr);

// Psi_X x a_i for all spin basis states, evolved to time t.
std::vector<CVec> evolve_coherent_basis(const Hamiltonian& H, const PhaseVector& X, double t,
                                        const OracleOptions& opt, PropagationLog* log = nullptr);

// Tensor space operator for an observable.
SpMat observable_operator(const Model& model, const Hamiltonian& H, const ObservableSpec& obs);
// i [H_int_op, N x I], assembled entrywise.
SpMat number_rate_operator(const Hamiltonian& H);

// M(i,j) = <A psi_j, psi_i> with psi_i the evolved coherent basis.
SpinMatrix symbol_from_states(const SpMat& A, const std::vector<CVec>& states);

SpinMatrix evolved_wick_symbol(const Model& model, const Hamiltonian& H, const ObservableSpec& obs, double t,
                               const PhaseVector& X, const OracleOptions& opt, PropagationLog* log = nullptr);
SpinMatrix photon_rate_exact(const Model& model, const Hamiltonian& H, double t, const PhaseVector& X,
                             const OracleOptions& opt, PropagationLog* log = nullptr);

// <psi, H(h) psi>
double energy(const Hamiltonian& H, const CVec& psi);

}  // namespace sclab
