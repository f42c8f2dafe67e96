#pragma once

#include <vector>

#include <json.hpp>

#include "sclab/jet.hpp"
#include "sclab/mode_model.hpp"

namespace sclab {

struct HierarchyOptions {
  double tol = 1e-10;  // accepted change between successive step doublings
  double initial_step = 1e-2;
  double step_floor = 1e-6;
  int fixed_steps = 0;  // > 0: exactly this many RK4 steps, no doubling
};

struct IntegratorLog {
  int steps = 0;
  int doublings = 0;
  double last_change = 0.0;
  int reunitarizations = 0;
  double max_unitarity_defect = 0.0;

  nlohmann::json to_json() const;
};

struct PropagatorState {
  SpinMatrix G;
  IntegratorLog log;
};

// dG/dt = i G H_int(chi_t X), G(s, s, X) = I.
PropagatorState propagator_G(const Model& model, double t, double s, const PhaseVector& X,
                             const HierarchyOptions& opt = {});

// A^[0](t,X) = (F_A . chi_t X) I + G(t,0,X) S_A G(t,0,X)*.
SpinMatrix order0(const Model& model, const ObservableSpec& obs, double t, const PhaseVector& X,
                  const HierarchyOptions& opt = {});

// Bloch equations dS/dt = 2 (beta + B^[0]) x S per spin, S(0) = sigma^[lambda].
std::vector<SpinTriple> bloch_spin0(const Model& model, double t, const PhaseVector& X,
                                    const HierarchyOptions& opt = {}, IntegratorLog* log = nullptr);

// Real orthonormal basis (columns) of the smallest chi-invariant, F-invariant subspace
// containing the coupling vectors and the extra directions.
RMat reduced_basis(const Model& model, const std::vector<PhaseVector>& extra = {});

struct HierarchyResult {
  ObservableSpec observable;
  double t = 0.0;
  PhaseVector X;
  std::vector<SpinMatrix> orders;
  nlohmann::json meta;

  nlohmann::json to_json() const;
};

// A^[0..M](t,X) from the Duhamel recursion, with the propagator and all phase-space
// derivatives carried as truncated Taylor jets in reduced coordinates.
HierarchyResult run_hierarchy(const Model& model, const ObservableSpec& obs, int M, double t,
                              const PhaseVector& X, const HierarchyOptions& opt = {});
SpinMatrix order_j(const Model& model, const ObservableSpec& obs, int j, double t, const PhaseVector& X,
                   const HierarchyOptions& opt = {});
// dA^[j](t,X)(V)
SpinMatrix order_j_derivative(const Model& model, const ObservableSpec& obs, int j, double t,
                              const PhaseVector& X, const PhaseVector& V, const HierarchyOptions& opt = {});

struct TangentBundleState {
  double t = 0.0;
  std::vector<SpinTriple> S;   // S^[lambda, j](t, X)
  std::vector<SpinTriple> dS;  // dS^[lambda, j](t, X)(V)
};

// j = 0: linearized Bloch equations; j >= 1: jets of the recursion.
std::vector<TangentBundleState> tangent_derivatives(const Model& model, int j, const PhaseVector& V,
                                                    const std::vector<double>& times, const PhaseVector& X,
                                                    const HierarchyOptions& opt = {});

// Fixed-X first-order system: S^[0], dS^[0] along the reduced basis, S^[1], and the
// order-one field amplitude Y (the symbol of Phi_{S,h}(V) at order h is V . Y).
struct FirstOrderState {
  RMat U;
  std::vector<SpinTriple> S0;
  std::vector<std::vector<SpinTriple>> dS0;  // [lambda][k] along U.col(k)
  std::vector<SpinTriple> S1;
  std::vector<SpinMatrix> Y;  // length 2D
  IntegratorLog log;
};
FirstOrderState first_order_system(const Model& model, double t, const PhaseVector& X,
                                   const HierarchyOptions& opt = {});

struct MaxwellReport {
  double t = 0.0;
  std::vector<std::array<SpinMatrix, 3>> field_ode;        // B^[1]_m(x_lambda) from the mode equations
  std::vector<std::array<SpinMatrix, 3>> field_recursion;  // the same from order_j
  double max_rel_deviation = 0.0;
  double divergence_residual = 0.0;
  bool pass = false;

  nlohmann::json to_json() const;
};
MaxwellReport maxwell_cross_check(const Model& model, double t, const PhaseVector& X, double tol = 1e-6,
                                  const HierarchyOptions& opt = {});

// S^[lambda,1](t,X) from
// dS1/dt = 2 (beta + B0) x S1 + 2 B1 x_sym S0 + K,  K_j = eps_jab dS0_b(chi_{-t} B_a).
std::vector<SpinTriple> spin_correction1(const Model& model, double t, const PhaseVector& X,
                                         const HierarchyOptions& opt = {});

// Symbol coefficients N^[0..M] of the photon-rate observable i[H_int_op, N]; M <= 1.
std::vector<SpinMatrix> photon_rate_expansion(const Model& model, double t, const PhaseVector& X, int M,
                                              const HierarchyOptions& opt = {});

// Symmetrized cross product (U x_sym W)_j = 1/2 eps_jab (U_a W_b + W_b U_a).
SpinTriple cross_sym(const SpinTriple& U, const SpinTriple& W);

}  // namespace sclab
