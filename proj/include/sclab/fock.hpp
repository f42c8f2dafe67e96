#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "sclab/types.hpp"

namespace sclab {

// Occupation-number basis of the symmetric Fock space over D modes with the
// total-photon cutoff |alpha| <= n_max.  States are listed by increasing |alpha|
// and, within a shell, in decreasing lexicographic order of alpha.
class FockBasis {
 public:
  FockBasis(int D, int n_max);

  int D() const { return D_; }
  int n_max() const { return n_max_; }
  std::size_t size() const { return total_.size(); }
  static std::size_t dimension(int D, int n_max);

  int occupation(std::size_t idx, int j) const { return occ_[idx * D_ + j]; }
  std::vector<int> alpha(std::size_t idx) const;
  int total(std::size_t idx) const { return total_[idx]; }
  // Index of alpha + delta_j (or alpha - delta_j); -1 when outside the basis.
  long raise(std::size_t idx, int j) const { return up_[idx * D_ + j]; }
  long lower(std::size_t idx, int j) const { return down_[idx * D_ + j]; }
  long index_of(const std::vector<int>& alpha) const;

  nlohmann::json dump() const;

 private:
  int D_;
  int n_max_;
  std::vector<std::uint16_t> occ_;
  std::vector<int> total_;
  std::vector<long> up_;
  std::vector<long> down_;
};

struct FockOperator {
  SpMat mat;
  bool tensor = false;  // false: photon factor only
  int spin_dim = 1;
};

enum class Ladder { annihilate, create };

// Mode indices j are 0-based slots of the phase space layout.
FockOperator ladder(const FockBasis& basis, int j, Ladder kind);
// Phi_{S,h}(V) = sqrt(h) sum_j [(a_j - i b_j)/sqrt2 a(e_j) + (a_j + i b_j)/sqrt2 a*(e_j)], V = (a, b).
FockOperator segal_field(const FockBasis& basis, const PhaseVector& V, double h);
FockOperator dGamma(const FockBasis& basis, const RMat& T);
FockOperator number_operator(const FockBasis& basis);
// Diagonal sum_j alpha_j omega_j of dGamma(diag(omega)).
RVec photon_energies(const FockBasis& basis, const RVec& omega);
// Gamma(chi_t) = exp(-i t dGamma(M_omega)).
FockOperator gamma_free(const FockBasis& basis, const RVec& omega, double t);

// Photon operator tensored with a spin matrix; the spin index runs fastest.
FockOperator tensor_with_spin(const FockOperator& photon, const SpinMatrix& S);
SpMat kron_identity(const SpMat& photon, int spin_dim);

struct CoherentState {
  CVec psi;
  double tail_mass = 0.0;
  bool tail_warning = false;
};
CoherentState coherent_state(const FockBasis& basis, const PhaseVector& X, double h);

// Psi (photon) tensor the spin basis vector e_i.
CVec embed_spin(const CVec& photon, int spin_dim, int i);

// Entries M(i,j) = <A (Psi_X x a_j), Psi_X x a_i>.
SpinMatrix wick_symbol(const FockOperator& A, const FockBasis& basis, const PhaseVector& X, double h, int N,
                       double tail_threshold = 1e-10);
cplx wick_symbol_photon(const FockOperator& A, const FockBasis& basis, const PhaseVector& X, double h,
                        double tail_threshold = 1e-10);

nlohmann::json dump_operator(const FockOperator& A);

}  // namespace sclab
