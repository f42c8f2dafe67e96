#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "sclab/types.hpp"

namespace sclab {

struct ModelConfig {
  int spin_count = 1;
  std::vector<Vec3> positions{Vec3::Zero()};
  Vec3 beta{0.0, 0.0, 1.0};
  std::string cutoff_family = "gaussian";  // gaussian | unit
  double cutoff_lambda = 1.0;
  double coupling_scale = 1.0;  // multiplies chi; 0 switches the field coupling off
  int radial_nodes = 1;
  double kmax = 0.0;  // <= 0: chosen so the gaussian tail is below 1e-12
  std::string directions = "z";  // z | octahedral | custom
  std::vector<Vec3> custom_directions;

  void validate() const;
};

ModelConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ModelConfig& c);

// Quadrature discretization of the transverse one-photon space.
//
// Each k-point carries the pair of plane waves (k, -k) with weight w/2 each,
// rewritten in a real basis: per polarization a in {0,1} an even ("cos") and
// an odd ("sin") combination.  The real coordinate layout is
//   slot(i, a, c) = 4 i + 2 c + a,   c = 0 even, c = 1 odd,
// and the frame used at -k is (eps1, -eps2) so that k_hat x . acts as the same
// quarter turn (u1, u2) -> (-u2, u1) on both members of the pair.
struct ModeGrid {
  std::vector<Vec3> k;
  std::vector<double> weight;
  std::vector<std::array<Vec3, 2>> frame;
  std::vector<double> omega;

  int kpoints() const { return static_cast<int>(k.size()); }
  int D() const { return 4 * kpoints(); }
  static int slot(int i, int a, int c) { return 4 * i + 2 * c + a; }
  // Frequency of every real slot (length D).
  RVec slot_omega() const;
  void validate() const;
};

ModeGrid build_grid(const ModelConfig& config);
ModeGrid grid_from_points(const std::vector<Vec3>& k, const std::vector<double>& w);

struct Model {
  ModelConfig config;
  ModeGrid grid;
  std::vector<std::array<PhaseVector, 3>> B;  // B[lambda][m] = B_{m x_lambda}

  int N() const { return config.spin_count; }
  int spin_dim() const { return 1 << config.spin_count; }
  int D() const { return grid.D(); }
};

Model make_model(const ModelConfig& config);
Model make_model(const ModelConfig& config, ModeGrid grid);

double cutoff_value(const ModelConfig& config, double r);

// Axis indices m are 1-based (1,2,3) as in the physics notation.
PhaseVector coupling_B(const ModeGrid& grid, const ModelConfig& config, int m, const Vec3& x);
PhaseVector coupling_E(const ModeGrid& grid, const ModelConfig& config, int m, const Vec3& x);
// Polarized electric coupling: symbol of E^pol_m(x) is coupling_E_pol . X.
PhaseVector coupling_E_pol(const ModeGrid& grid, const ModelConfig& config, int m, const Vec3& x);
// Spatial derivative d/dx_a (a = 1,2,3) of the coupling vectors.
PhaseVector coupling_B_dx(const ModeGrid& grid, const ModelConfig& config, int m, const Vec3& x, int a);
PhaseVector coupling_E_dx(const ModeGrid& grid, const ModelConfig& config, int m, const Vec3& x, int a);

PhaseVector apply_helicity(const ModeGrid& grid, const PhaseVector& v);
// F(q,p) = (-p, q): multiplication by i under H_C = H^2.
PhaseVector apply_F(const PhaseVector& v);
PhaseVector polarization_project(const ModeGrid& grid, int sign, const PhaseVector& X);

// sigma(U,V) = b_U . a_V - a_U . b_V for U = (a_U, b_U), V = (a_V, b_V).
double symplectic(const PhaseVector& U, const PhaseVector& V);

struct RhoValue {
  double value = 0.0;
  Vec3 grad = Vec3::Zero();
};
RhoValue rho_discrete(const ModeGrid& grid, const ModelConfig& config, const Vec3& x);

SpinMatrix pauli(int m);
// lambda is 1-based, m in {1,2,3}.
SpinMatrix spin_operator(int N, int lambda, int m);

SpinMatrix h_int_symbol(const Model& model, const PhaseVector& X);
// Constant gradient dH_int(V) = sum (B_{m x_lambda} . V) sigma_m^[lambda].
SpinMatrix h_int_gradient(const Model& model, const PhaseVector& V);

PhaseVector chi_flow(const ModeGrid& grid, double t, const PhaseVector& X);
RMat chi_matrix(const ModeGrid& grid, double t);

struct QuadFormQ {
  RMat A;
  double trace = 0.0;
};
QuadFormQ q_form(const Model& model, double t);

enum class ObservableKind { field_B, field_E, field_E_pol, spin, number_rate };

struct ObservableSpec {
  ObservableKind kind = ObservableKind::spin;
  int axis = 1;  // 1..3
  Vec3 point = Vec3::Zero();
  int spin = 1;  // 1..N

  std::string label() const;
};

ObservableSpec observable_from_json(const nlohmann::json& j);
nlohmann::json observable_to_json(const ObservableSpec& o);

// Data (F_A, S_A) of an observable Phi_{S,h}(F_A) x I + I x S_A.
struct FormA {
  PhaseVector F;
  SpinMatrix S;
};
FormA form_of(const Model& model, const ObservableSpec& obs);

nlohmann::json dump_model(const Model& model);

}  // namespace sclab
