#pragma once

#include <map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sclab/fock.hpp"
#include "sclab/mode_model.hpp"

namespace sclab {

using MultiIndex = std::vector<int>;

struct MonomialKey {
  MultiIndex alpha;  // powers of (q_j + i p_j)
  MultiIndex beta;   // powers of (q_j - i p_j)
  bool operator<(const MonomialKey& o) const {
    return alpha != o.alpha ? alpha < o.alpha : beta < o.beta;
  }
};

// F(q,p) = sum a_{alpha beta} (q + i p)^alpha (q - i p)^beta with scalar (1x1) or
// spin-matrix coefficients.  Products keep operator order.
class PolySymbol {
 public:
  PolySymbol(int D, int spin_dim = 1);

  static PolySymbol constant(int D, const CMat& c);
  static PolySymbol constant(int D, cplx c) { return constant(D, CMat::Constant(1, 1, c)); }
  static PolySymbol z(int D, int j);
  static PolySymbol zbar(int D, int j);
  static PolySymbol q(int D, int j);
  static PolySymbol p(int D, int j);
  // (V . X) S
  static PolySymbol linear(const PhaseVector& V, const CMat& S);
  // From raw monomials c * q^a p^b keyed by (a, b).
  static PolySymbol from_raw(int D, const std::map<std::pair<MultiIndex, MultiIndex>, cplx>& raw);

  int D() const { return D_; }
  int spin_dim() const { return spin_dim_; }
  int degree() const;
  bool empty() const { return terms_.empty(); }
  const std::map<MonomialKey, CMat>& terms() const { return terms_; }

  void add(const MultiIndex& alpha, const MultiIndex& beta, const CMat& c);
  void prune(double tol = 0.0);

  CMat eval(const PhaseVector& X) const;
  cplx eval_scalar(const PhaseVector& X) const;

  PolySymbol operator+(const PolySymbol& o) const;
  PolySymbol operator-(const PolySymbol& o) const;
  PolySymbol operator*(cplx s) const;
  // Pointwise product F G with coefficients multiplied in this order.
  PolySymbol operator*(const PolySymbol& o) const;

  PolySymbol dz(int j) const;
  PolySymbol dzbar(int j) const;
  PolySymbol dq(int j) const { return dz(j) + dzbar(j); }
  PolySymbol dp(int j) const { return (dz(j) - dzbar(j)) * cplx(0.0, 1.0); }
  // X -> F(X + Y)
  PolySymbol translated(const PhaseVector& Y) const;

  // Raw coefficients c_{a,b} of q^a p^b.
  std::map<std::pair<MultiIndex, MultiIndex>, CMat> to_raw() const;
  double max_abs_coeff() const;

  nlohmann::json dump() const;

 private:
  int D_;
  int spin_dim_;
  std::map<MonomialKey, CMat> terms_;
};

PolySymbol laplacian(const PolySymbol& F);
// e^{(h/2) Delta} F; heat(., -h) is the inverse.
PolySymbol heat(const PolySymbol& F, double h);
// k-th Mizrahi coefficient: sum_{|g|=k} (1/(2^k g!)) (d_q - i d_p)^g F (d_q + i d_p)^g G.
PolySymbol mizrahi_term(const PolySymbol& F, const PolySymbol& G, int k);
// C_h(F,G) = sum_k h^k mizrahi_term(F,G,k), truncated after max_order when max_order >= 0.
PolySymbol mizrahi_compose(const PolySymbol& F, const PolySymbol& G, double h, int max_order = -1);

// a*^beta a^alpha on the truncated space.
SpMat normal_ordered_monomial(const FockBasis& basis, const MultiIndex& alpha, const MultiIndex& beta);
FockOperator wick_quantize(const PolySymbol& F, const FockBasis& basis, double h);
FockOperator anti_wick_quantize(const PolySymbol& F, const FockBasis& basis, double h);

// Surrogate for the class norm: max over all mixed (q,p) partial derivatives of
// order <= degree at X0, measured in operator norm.
double surrogate_norm(const PolySymbol& F, const PhaseVector& X0);

// Affine L(H_sp)-valued symbol: constant + sum_i (V_i . X) S_i.
struct AffineSymbol {
  CMat constant;
  std::vector<std::pair<PhaseVector, CMat>> terms;

  CMat eval(const PhaseVector& X) const;
};

AffineSymbol h_int_affine(const Model& model);

// C^1(F, G)(X) for affine F: only the derivatives of G along V and F V are needed,
//   C^1(phi_V S, G) = 1/2 S (dG(V) + i dG(FV)),
//   C^1(G, phi_V S) = 1/2 (dG(V) - i dG(FV)) S.
// dG(W) returns the directional derivative of G at the evaluation point.
template <class Value, class DirDeriv>
Value c1_cross_left(const AffineSymbol& F, DirDeriv&& dG, Value zero) {
  const cplx I(0.0, 1.0);
  Value acc = zero;
  for (const auto& [V, S] : F.terms) {
    Value d = dG(V) + I * dG(apply_F(V));
    acc = acc + 0.5 * (S * d);
  }
  return acc;
}

template <class Value, class DirDeriv>
Value c1_cross_right(const AffineSymbol& F, DirDeriv&& dG, Value zero) {
  const cplx I(0.0, 1.0);
  Value acc = zero;
  for (const auto& [V, S] : F.terms) {
    Value d = dG(V) - I * dG(apply_F(V));
    acc = acc + 0.5 * (d * S);
  }
  return acc;
}

}  // namespace sclab
