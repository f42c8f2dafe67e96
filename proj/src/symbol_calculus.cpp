#include "sclab/symbol_calculus.hpp"

#include <cmath>
#include <functional>

namespace sclab {

namespace {

CMat mul_payload(const CMat& a, const CMat& b) {
  if (a.rows() == 1 && a.cols() == 1) return a(0, 0) * b;
  if (b.rows() == 1 && b.cols() == 1) return a * b(0, 0);
  return a * b;
}

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

double binomial(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

// All multi-indices of length D with |g| = k.
void compositions(int D, int k, std::vector<MultiIndex>& out) {
  MultiIndex cur(D, 0);
  std::function<void(int, int)> rec = [&](int pos, int rem) {
    if (pos == D - 1) {
      cur[pos] = rem;
      out.push_back(cur);
      return;
    }
    for (int v = rem; v >= 0; --v) {
      cur[pos] = v;
      rec(pos + 1, rem - v);
    }
  };
  rec(0, k);
}

int abs_index(const MultiIndex& a) {
  int s = 0;
  for (int v : a) s += v;
  return s;
}

}  // namespace

PolySymbol::PolySymbol(int D, int spin_dim) : D_(D), spin_dim_(spin_dim) {
  if (D < 1) throw std::invalid_argument("PolySymbol: D must be >= 1");
  if (spin_dim < 1) throw std::invalid_argument("PolySymbol: spin dimension must be >= 1");
}

PolySymbol PolySymbol::constant(int D, const CMat& c) {
  PolySymbol F(D, static_cast<int>(c.rows()));
  F.add(MultiIndex(D, 0), MultiIndex(D, 0), c);
  return F;
}

PolySymbol PolySymbol::z(int D, int j) {
  PolySymbol F(D);
  MultiIndex a(D, 0);
  a.at(j) = 1;
  F.add(a, MultiIndex(D, 0), CMat::Ones(1, 1));
  return F;
}

PolySymbol PolySymbol::zbar(int D, int j) {
  PolySymbol F(D);
  MultiIndex b(D, 0);
  b.at(j) = 1;
  F.add(MultiIndex(D, 0), b, CMat::Ones(1, 1));
  return F;
}

PolySymbol PolySymbol::q(int D, int j) { return (z(D, j) + zbar(D, j)) * cplx(0.5); }

PolySymbol PolySymbol::p(int D, int j) { return (z(D, j) - zbar(D, j)) * cplx(0.0, -0.5); }

PolySymbol PolySymbol::linear(const PhaseVector& V, const CMat& S) {
  const int D = static_cast<int>(V.size() / 2);
  PolySymbol F(D, static_cast<int>(S.rows()));
  // V.X = sum_j a_j q_j + b_j p_j = sum_j (a_j - i b_j)/2 z_j + (a_j + i b_j)/2 zbar_j
  for (int j = 0; j < D; ++j) {
    MultiIndex e(D, 0), zero(D, 0);
    e[j] = 1;
    const cplx cz = 0.5 * cplx(V(j), -V(D + j));
    F.add(e, zero, cz * S);
    F.add(zero, e, std::conj(cz) * S);
  }
  F.prune();
  return F;
}

PolySymbol PolySymbol::from_raw(int D, const std::map<std::pair<MultiIndex, MultiIndex>, cplx>& raw) {
  PolySymbol F(D);
  for (const auto& [key, c] : raw) {
    PolySymbol term = constant(D, c);
    for (int j = 0; j < D; ++j) {
      for (int r = 0; r < key.first.at(j); ++r) term = term * q(D, j);
      for (int r = 0; r < key.second.at(j); ++r) term = term * p(D, j);
    }
    F = F + term;
  }
  return F;
}

int PolySymbol::degree() const {
  int d = 0;
  for (const auto& [k, c] : terms_) d = std::max(d, abs_index(k.alpha) + abs_index(k.beta));
  return d;
}

void PolySymbol::add(const MultiIndex& alpha, const MultiIndex& beta, const CMat& c) {
  if (static_cast<int>(alpha.size()) != D_ || static_cast<int>(beta.size()) != D_)
    throw std::invalid_argument("PolySymbol::add: multi-index length mismatch");
  CMat v = c;
  if (v.rows() == 1 && spin_dim_ > 1) v = c(0, 0) * CMat::Identity(spin_dim_, spin_dim_);
  if (v.rows() != spin_dim_ || v.cols() != spin_dim_)
    throw std::invalid_argument("PolySymbol::add: coefficient shape mismatch");
  MonomialKey key{alpha, beta};
  auto it = terms_.find(key);
  if (it == terms_.end()) terms_.emplace(std::move(key), v);
  else it->second += v;
}

void PolySymbol::prune(double tol) {
  for (auto it = terms_.begin(); it != terms_.end();) {
    if (it->second.cwiseAbs().maxCoeff() <= tol) it = terms_.erase(it);
    else ++it;
  }
}

CMat PolySymbol::eval(const PhaseVector& X) const {
  if (X.size() != 2 * D_) throw std::invalid_argument("PolySymbol::eval: dimension mismatch");
  std::vector<cplx> z(D_), zb(D_);
  for (int j = 0; j < D_; ++j) {
    z[j] = cplx(X(j), X(D_ + j));
    zb[j] = std::conj(z[j]);
  }
  CMat acc = CMat::Zero(spin_dim_, spin_dim_);
  for (const auto& [k, c] : terms_) {
    cplx m = 1.0;
    for (int j = 0; j < D_; ++j) {
      if (k.alpha[j]) m *= std::pow(z[j], k.alpha[j]);
      if (k.beta[j]) m *= std::pow(zb[j], k.beta[j]);
    }
    acc += m * c;
  }
  return acc;
}

cplx PolySymbol::eval_scalar(const PhaseVector& X) const {
  if (spin_dim_ != 1) throw std::invalid_argument("PolySymbol::eval_scalar: symbol is matrix valued");
  return eval(X)(0, 0);
}

PolySymbol PolySymbol::operator+(const PolySymbol& o) const {
  if (o.D_ != D_) throw std::invalid_argument("PolySymbol: dimension mismatch");
  PolySymbol r(D_, std::max(spin_dim_, o.spin_dim_));
  for (const auto& [k, c] : terms_) r.add(k.alpha, k.beta, c);
  for (const auto& [k, c] : o.terms_) r.add(k.alpha, k.beta, c);
  return r;
}

PolySymbol PolySymbol::operator-(const PolySymbol& o) const { return *this + o * cplx(-1.0); }

PolySymbol PolySymbol::operator*(cplx s) const {
  PolySymbol r(D_, spin_dim_);
  for (const auto& [k, c] : terms_) r.add(k.alpha, k.beta, s * c);
  return r;
}

PolySymbol PolySymbol::operator*(const PolySymbol& o) const {
  if (o.D_ != D_) throw std::invalid_argument("PolySymbol: dimension mismatch");
  if (spin_dim_ > 1 && o.spin_dim_ > 1 && spin_dim_ != o.spin_dim_)
    throw std::invalid_argument("PolySymbol: spin dimension mismatch");
  PolySymbol r(D_, std::max(spin_dim_, o.spin_dim_));
  for (const auto& [k1, c1] : terms_)
    for (const auto& [k2, c2] : o.terms_) {
      MultiIndex a(D_), b(D_);
      for (int j = 0; j < D_; ++j) {
        a[j] = k1.alpha[j] + k2.alpha[j];
        b[j] = k1.beta[j] + k2.beta[j];
      }
      r.add(a, b, mul_payload(c1, c2));
    }
  return r;
}

PolySymbol PolySymbol::dz(int j) const {
  PolySymbol r(D_, spin_dim_);
  for (const auto& [k, c] : terms_) {
    if (k.alpha.at(j) == 0) continue;
    MultiIndex a = k.alpha;
    a[j] -= 1;
    r.add(a, k.beta, static_cast<double>(k.alpha[j]) * c);
  }
  return r;
}

PolySymbol PolySymbol::dzbar(int j) const {
  PolySymbol r(D_, spin_dim_);
  for (const auto& [k, c] : terms_) {
    if (k.beta.at(j) == 0) continue;
    MultiIndex b = k.beta;
    b[j] -= 1;
    r.add(k.alpha, b, static_cast<double>(k.beta[j]) * c);
  }
  return r;
}

PolySymbol PolySymbol::translated(const PhaseVector& Y) const {
  if (Y.size() != 2 * D_) throw std::invalid_argument("PolySymbol::translated: dimension mismatch");
  PolySymbol r(D_, spin_dim_);
  for (const auto& [k, c] : terms_) {
    PolySymbol term = constant(D_, c);
    for (int j = 0; j < D_; ++j) {
      const cplx cy(Y(j), Y(D_ + j));
      PolySymbol zs = z(D_, j) + constant(D_, cy);
      PolySymbol zbs = zbar(D_, j) + constant(D_, std::conj(cy));
      for (int e = 0; e < k.alpha[j]; ++e) term = term * zs;
      for (int e = 0; e < k.beta[j]; ++e) term = term * zbs;
    }
    r = r + term;
  }
  return r;
}

std::map<std::pair<MultiIndex, MultiIndex>, CMat> PolySymbol::to_raw() const {
  // (q + i p)^a (q - i p)^b = sum_{r,s} C(a,r) C(b,s) q^{r+s} (i p)^{a-r} (-i p)^{b-s}
  std::map<std::pair<MultiIndex, MultiIndex>, CMat> out;
  const cplx I(0.0, 1.0);
  for (const auto& [k, c] : terms_) {
    std::map<std::pair<MultiIndex, MultiIndex>, cplx> acc;
    acc[{MultiIndex(D_, 0), MultiIndex(D_, 0)}] = 1.0;
    for (int j = 0; j < D_; ++j) {
      std::map<std::pair<MultiIndex, MultiIndex>, cplx> next;
      const int a = k.alpha[j], b = k.beta[j];
      for (int r = 0; r <= a; ++r)
        for (int s = 0; s <= b; ++s) {
          const cplx f = binomial(a, r) * binomial(b, s) * std::pow(I, a - r) * std::pow(-I, b - s);
          for (const auto& [mk, mv] : acc) {
            auto key = mk;
            key.first[j] += r + s;
            key.second[j] += (a - r) + (b - s);
            next[key] += mv * f;
          }
        }
      acc = std::move(next);
    }
    for (const auto& [mk, mv] : acc) {
      auto it = out.find(mk);
      if (it == out.end()) out.emplace(mk, mv * c);
      else it->second += mv * c;
    }
  }
  return out;
}

double PolySymbol::max_abs_coeff() const {
  double m = 0.0;
  for (const auto& [k, c] : terms_) m = std::max(m, c.cwiseAbs().maxCoeff());
  return m;
}

nlohmann::json PolySymbol::dump() const {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& [k, c] : terms_) {
    nlohmann::json r = {{"alpha", k.alpha}, {"beta", k.beta}};
    if (spin_dim_ == 1) {
      r["re"] = c(0, 0).real();
      r["im"] = c(0, 0).imag();
    } else {
      nlohmann::json m = nlohmann::json::array();
      for (int a = 0; a < spin_dim_; ++a) {
        nlohmann::json row = nlohmann::json::array();
        for (int b = 0; b < spin_dim_; ++b) row.push_back({c(a, b).real(), c(a, b).imag()});
        m.push_back(row);
      }
      r["matrix"] = m;
    }
    recs.push_back(r);
  }
  return {{"format", "sclab-symbol-v1"}, {"D", D_}, {"spin_dim", spin_dim_}, {"terms", recs}};
}

PolySymbol laplacian(const PolySymbol& F) {
  const int D = F.D();
  PolySymbol r(D, F.spin_dim());
  for (const auto& [k, c] : F.terms())
    for (int j = 0; j < D; ++j) {
      if (k.alpha[j] == 0 || k.beta[j] == 0) continue;
      MultiIndex a = k.alpha, b = k.beta;
      a[j] -= 1;
      b[j] -= 1;
      r.add(a, b, 4.0 * k.alpha[j] * k.beta[j] * c);
    }
  return r;
}

PolySymbol heat(const PolySymbol& F, double h) {
  PolySymbol acc = F;
  PolySymbol term = F;
  for (int m = 1; !term.empty(); ++m) {
    term = laplacian(term) * cplx(0.5 * h / m);
    if (term.empty()) break;
    acc = acc + term;
  }
  return acc;
}

PolySymbol mizrahi_term(const PolySymbol& F, const PolySymbol& G, int k) {
  const int D = F.D();
  PolySymbol r(D, std::max(F.spin_dim(), G.spin_dim()));
  if (k == 0) return F * G;
  std::vector<MultiIndex> gammas;
  compositions(D, k, gammas);
  // (d_q - i d_p) = 2 d_z and (d_q + i d_p) = 2 d_zbar, so each term carries 2^k / g!.
  for (const auto& g : gammas) {
    PolySymbol dF = F, dG = G;
    double gf = 1.0;
    for (int j = 0; j < D; ++j) {
      for (int e = 0; e < g[j]; ++e) {
        dF = dF.dz(j);
        dG = dG.dzbar(j);
      }
      gf *= factorial(g[j]);
    }
    if (dF.empty() || dG.empty()) continue;
    r = r + (dF * dG) * cplx(std::pow(2.0, k) / gf);
  }
  return r;
}

PolySymbol mizrahi_compose(const PolySymbol& F, const PolySymbol& G, double h, int max_order) {
  const int kmax = std::min(F.degree(), G.degree());
  const int top = max_order >= 0 ? std::min(kmax, max_order) : kmax;
  PolySymbol acc = mizrahi_term(F, G, 0);
  for (int k = 1; k <= top; ++k) acc = acc + mizrahi_term(F, G, k) * cplx(std::pow(h, k));
  return acc;
}

SpMat normal_ordered_monomial(const FockBasis& basis, const MultiIndex& alpha, const MultiIndex& beta) {
  const int D = basis.D();
  std::vector<Eigen::Triplet<cplx>> t;
  for (std::size_t i = 0; i < basis.size(); ++i) {
    long cur = static_cast<long>(i);
    double amp = 1.0;
    for (int j = 0; j < D && cur >= 0; ++j)
      for (int e = 0; e < alpha[j] && cur >= 0; ++e) {
        const int n = basis.occupation(static_cast<std::size_t>(cur), j);
        if (n == 0) {
          cur = -1;
          break;
        }
        amp *= std::sqrt(static_cast<double>(n));
        cur = basis.lower(static_cast<std::size_t>(cur), j);
      }
    for (int j = 0; j < D && cur >= 0; ++j)
      for (int e = 0; e < beta[j] && cur >= 0; ++e) {
        const int n = basis.occupation(static_cast<std::size_t>(cur), j);
        cur = basis.raise(static_cast<std::size_t>(cur), j);
        amp *= std::sqrt(n + 1.0);
      }
    if (cur >= 0) t.emplace_back(cur, static_cast<long>(i), amp);
  }
  SpMat m(static_cast<Eigen::Index>(basis.size()), static_cast<Eigen::Index>(basis.size()));
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

FockOperator wick_quantize(const PolySymbol& F, const FockBasis& basis, double h) {
  if (F.D() != basis.D()) throw std::invalid_argument("wick_quantize: dimension mismatch");
  if (F.degree() > basis.n_max()) throw std::invalid_argument("wick_quantize: degree exceeds the photon cutoff");
  const std::size_t n = basis.size();
  SpMat photon_acc(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const int sd = F.spin_dim();
  SpMat tensor_acc(static_cast<Eigen::Index>(n) * sd, static_cast<Eigen::Index>(n) * sd);
  for (const auto& [k, c] : F.terms()) {
    const int m = abs_index(k.alpha) + abs_index(k.beta);
    const double scale = std::pow(2.0 * h, 0.5 * m);
    SpMat mono = normal_ordered_monomial(basis, k.alpha, k.beta) * cplx(scale);
    if (sd == 1) photon_acc += mono * c(0, 0);
    else tensor_acc += tensor_with_spin({mono, false, 1}, c).mat;
  }
  if (sd == 1) return {photon_acc, false, 1};
  return {tensor_acc, true, sd};
}

FockOperator anti_wick_quantize(const PolySymbol& F, const FockBasis& basis, double h) {
  return wick_quantize(heat(F, h), basis, h);
}

double surrogate_norm(const PolySymbol& F, const PhaseVector& X0) {
  const PolySymbol G = F.translated(X0);
  double best = 0.0;
  for (const auto& [key, c] : G.to_raw()) {
    double f = 1.0;
    for (int v : key.first) f *= factorial(v);
    for (int v : key.second) f *= factorial(v);
    const Eigen::JacobiSVD<CMat> svd(c);
    best = std::max(best, f * svd.singularValues()(0));
  }
  return best;
}

CMat AffineSymbol::eval(const PhaseVector& X) const {
  CMat acc = constant;
  for (const auto& [V, S] : terms) acc += V.dot(X) * S;
  return acc;
}

AffineSymbol h_int_affine(const Model& model) {
  AffineSymbol H;
  H.constant = CMat::Zero(model.spin_dim(), model.spin_dim());
  for (int l = 0; l < model.N(); ++l)
    for (int m = 1; m <= 3; ++m) {
      const SpinMatrix s = spin_operator(model.N(), l + 1, m);
      H.constant += model.config.beta(m - 1) * s;
      H.terms.emplace_back(model.B[l][m - 1], s);
    }
  return H;
}

}  // namespace sclab
