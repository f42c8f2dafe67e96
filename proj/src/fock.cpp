#include "sclab/fock.hpp"

#include <cmath>
#include <map>

namespace sclab {

namespace {

void enumerate_shell(int D, int pos, int remaining, std::vector<std::uint16_t>& cur,
                     std::vector<std::uint16_t>& out) {
  if (pos == D - 1) {
    cur[pos] = static_cast<std::uint16_t>(remaining);
    out.insert(out.end(), cur.begin(), cur.end());
    return;
  }
  for (int v = remaining; v >= 0; --v) {
    cur[pos] = static_cast<std::uint16_t>(v);
    enumerate_shell(D, pos + 1, remaining - v, cur, out);
  }
}

using Triplets = std::vector<Eigen::Triplet<cplx>>;

SpMat from_triplets(std::size_t n, const Triplets& t) {
  SpMat m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

}  // namespace

std::size_t FockBasis::dimension(int D, int n_max) {
  // C(D + n_max, D)
  double c = 1.0;
  for (int i = 1; i <= D; ++i) c = c * (n_max + i) / i;
  return static_cast<std::size_t>(std::llround(c));
}

FockBasis::FockBasis(int D, int n_max) : D_(D), n_max_(n_max) {
  if (D < 1) throw std::invalid_argument("FockBasis: mode count must be >= 1");
  if (n_max < 0 || n_max > 60000) throw std::invalid_argument("FockBasis: invalid cutoff");
  const std::size_t dim = dimension(D, n_max);
  if (dim > 20'000'000) throw std::invalid_argument("FockBasis: dimension too large");
  occ_.reserve(dim * D);
  std::vector<std::uint16_t> cur(D, 0);
  for (int n = 0; n <= n_max; ++n) enumerate_shell(D, 0, n, cur, occ_);
  const std::size_t count = occ_.size() / D;
  total_.resize(count);
  std::map<std::vector<std::uint16_t>, long> lookup;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<std::uint16_t> a(occ_.begin() + i * D, occ_.begin() + (i + 1) * D);
    int s = 0;
    for (auto v : a) s += v;
    total_[i] = s;
    lookup.emplace(std::move(a), static_cast<long>(i));
  }
  up_.assign(count * D, -1);
  down_.assign(count * D, -1);
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<std::uint16_t> a(occ_.begin() + i * D, occ_.begin() + (i + 1) * D);
    for (int j = 0; j < D; ++j) {
      if (a[j] > 0) {
        a[j] -= 1;
        down_[i * D + j] = lookup.at(a);
        a[j] += 1;
      }
      if (total_[i] < n_max) {
        a[j] += 1;
        up_[i * D + j] = lookup.at(a);
        a[j] -= 1;
      }
    }
  }
}

std::vector<int> FockBasis::alpha(std::size_t idx) const {
  return std::vector<int>(occ_.begin() + idx * D_, occ_.begin() + (idx + 1) * D_);
}

long FockBasis::index_of(const std::vector<int>& alpha) const {
  if (static_cast<int>(alpha.size()) != D_) throw std::invalid_argument("FockBasis::index_of: wrong length");
  long idx = 0;
  for (int j = 0; j < D_; ++j) {
    if (alpha[j] < 0) return -1;
    for (int k = 0; k < alpha[j]; ++k) {
      idx = raise(static_cast<std::size_t>(idx), j);
      if (idx < 0) return -1;
    }
  }
  return idx;
}

nlohmann::json FockBasis::dump() const {
  nlohmann::json states = nlohmann::json::array();
  for (std::size_t i = 0; i < size(); ++i) states.push_back(alpha(i));
  return {{"format", "sclab-fock-basis-v1"}, {"order", "graded, decreasing lexicographic within a shell"},
          {"D", D_}, {"n_max", n_max_}, {"states", states}};
}

FockOperator ladder(const FockBasis& basis, int j, Ladder kind) {
  if (j < 0 || j >= basis.D()) throw std::invalid_argument("ladder: mode index out of range");
  Triplets t;
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const int n = basis.occupation(i, j);
    if (kind == Ladder::annihilate) {
      const long r = basis.lower(i, j);
      if (r >= 0) t.emplace_back(r, static_cast<long>(i), std::sqrt(static_cast<double>(n)));
    } else {
      const long r = basis.raise(i, j);
      if (r >= 0) t.emplace_back(r, static_cast<long>(i), std::sqrt(static_cast<double>(n + 1)));
    }
  }
  return {from_triplets(basis.size(), t), false, 1};
}

FockOperator segal_field(const FockBasis& basis, const PhaseVector& V, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("segal_field: h must be positive");
  const int D = basis.D();
  if (V.size() != 2 * D) throw std::invalid_argument("segal_field: dimension mismatch");
  const double s = std::sqrt(h / 2.0);
  std::vector<cplx> u(D);
  for (int j = 0; j < D; ++j) u[j] = s * cplx(V(j), -V(D + j));
  Triplets t;
  for (std::size_t i = 0; i < basis.size(); ++i)
    for (int j = 0; j < D; ++j) {
      if (u[j] == cplx(0.0)) continue;
      const double n = basis.occupation(i, j);
      const long lo = basis.lower(i, j);
      if (lo >= 0) t.emplace_back(lo, static_cast<long>(i), u[j] * std::sqrt(n));
      const long hi = basis.raise(i, j);
      if (hi >= 0) t.emplace_back(hi, static_cast<long>(i), std::conj(u[j]) * std::sqrt(n + 1.0));
    }
  return {from_triplets(basis.size(), t), false, 1};
}

FockOperator dGamma(const FockBasis& basis, const RMat& T) {
  const int D = basis.D();
  if (T.rows() != D || T.cols() != D) throw std::invalid_argument("dGamma: T must be D x D");
  if ((T - T.transpose()).cwiseAbs().maxCoeff() > 1e-14 * std::max(1.0, T.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("dGamma: T must be symmetric");
  Triplets t;
  for (std::size_t i = 0; i < basis.size(); ++i)
    for (int k = 0; k < D; ++k) {
      const long m = basis.lower(i, k);
      if (m < 0) continue;
      const double ak = std::sqrt(static_cast<double>(basis.occupation(i, k)));
      for (int j = 0; j < D; ++j) {
        if (T(j, k) == 0.0) continue;
        const long r = basis.raise(static_cast<std::size_t>(m), j);
        if (r < 0) continue;
        const double aj = std::sqrt(basis.occupation(static_cast<std::size_t>(m), j) + 1.0);
        t.emplace_back(r, static_cast<long>(i), T(j, k) * ak * aj);
      }
    }
  return {from_triplets(basis.size(), t), false, 1};
}

FockOperator number_operator(const FockBasis& basis) {
  Triplets t;
  for (std::size_t i = 0; i < basis.size(); ++i)
    if (basis.total(i) > 0) t.emplace_back(static_cast<long>(i), static_cast<long>(i), basis.total(i));
  return {from_triplets(basis.size(), t), false, 1};
}

RVec photon_energies(const FockBasis& basis, const RVec& omega) {
  if (omega.size() != basis.D()) throw std::invalid_argument("photon_energies: dimension mismatch");
  RVec e(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 0; i < basis.size(); ++i) {
    double s = 0.0;
    for (int j = 0; j < basis.D(); ++j) s += basis.occupation(i, j) * omega(j);
    e(static_cast<Eigen::Index>(i)) = s;
  }
  return e;
}

FockOperator gamma_free(const FockBasis& basis, const RVec& omega, double t) {
  const RVec e = photon_energies(basis, omega);
  Triplets tr;
  for (Eigen::Index i = 0; i < e.size(); ++i) tr.emplace_back(i, i, std::exp(cplx(0.0, -t * e(i))));
  return {from_triplets(basis.size(), tr), false, 1};
}

SpMat kron_identity(const SpMat& photon, int spin_dim) {
  Triplets t;
  t.reserve(static_cast<std::size_t>(photon.nonZeros()) * spin_dim);
  for (Eigen::Index r = 0; r < photon.outerSize(); ++r)
    for (SpMat::InnerIterator it(photon, r); it; ++it)
      for (int s = 0; s < spin_dim; ++s) t.emplace_back(it.row() * spin_dim + s, it.col() * spin_dim + s, it.value());
  SpMat m(photon.rows() * spin_dim, photon.cols() * spin_dim);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

FockOperator tensor_with_spin(const FockOperator& photon, const SpinMatrix& S) {
  if (photon.tensor) throw std::invalid_argument("tensor_with_spin: operator already acts on the tensor space");
  const int sd = static_cast<int>(S.rows());
  Triplets t;
  for (Eigen::Index r = 0; r < photon.mat.outerSize(); ++r)
    for (SpMat::InnerIterator it(photon.mat, r); it; ++it)
      for (int a = 0; a < sd; ++a)
        for (int b = 0; b < sd; ++b)
          if (S(a, b) != cplx(0.0)) t.emplace_back(it.row() * sd + a, it.col() * sd + b, it.value() * S(a, b));
  SpMat m(photon.mat.rows() * sd, photon.mat.cols() * sd);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return {m, true, sd};
}

CoherentState coherent_state(const FockBasis& basis, const PhaseVector& X, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("coherent_state: h must be positive");
  const int D = basis.D();
  if (X.size() != 2 * D) throw std::invalid_argument("coherent_state: dimension mismatch");
  std::vector<cplx> z(D);
  double z2 = 0.0;
  for (int j = 0; j < D; ++j) {
    z[j] = cplx(X(j), X(D + j)) / std::sqrt(2.0 * h);
    z2 += std::norm(z[j]);
  }
  CoherentState out;
  out.psi.resize(static_cast<Eigen::Index>(basis.size()));
  out.psi(0) = std::exp(-0.5 * z2);
  for (std::size_t i = 1; i < basis.size(); ++i) {
    int j = 0;
    while (basis.occupation(i, j) == 0) ++j;
    const long prev = basis.lower(i, j);
    out.psi(static_cast<Eigen::Index>(i)) = out.psi(prev) * z[j] / std::sqrt(static_cast<double>(basis.occupation(i, j)));
  }
  const double n2 = out.psi.squaredNorm();
  out.tail_mass = std::max(0.0, 1.0 - n2);
  out.tail_warning = out.tail_mass > 1e-10;
  out.psi /= std::sqrt(n2);
  return out;
}

CVec embed_spin(const CVec& photon, int spin_dim, int i) {
  CVec v = CVec::Zero(photon.size() * spin_dim);
  for (Eigen::Index r = 0; r < photon.size(); ++r) v(r * spin_dim + i) = photon(r);
  return v;
}

SpinMatrix wick_symbol(const FockOperator& A, const FockBasis& basis, const PhaseVector& X, double h, int N,
                       double tail_threshold) {
  const int sd = 1 << N;
  const CoherentState cs = coherent_state(basis, X, h);
  if (cs.tail_mass > tail_threshold)
    throw TruncationError("wick_symbol: coherent tail mass " + std::to_string(cs.tail_mass) + " exceeds threshold");
  SpMat op = A.tensor ? A.mat : kron_identity(A.mat, sd);
  if (op.rows() != static_cast<Eigen::Index>(basis.size()) * sd)
    throw std::invalid_argument("wick_symbol: operator dimension does not match basis and spin count");
  std::vector<CVec> psi(sd);
  for (int i = 0; i < sd; ++i) psi[i] = embed_spin(cs.psi, sd, i);
  SpinMatrix M(sd, sd);
  for (int j = 0; j < sd; ++j) {
    const CVec Apsi = op * psi[j];
    for (int i = 0; i < sd; ++i) M(i, j) = psi[i].dot(Apsi);
  }
  return M;
}

cplx wick_symbol_photon(const FockOperator& A, const FockBasis& basis, const PhaseVector& X, double h,
                        double tail_threshold) {
  if (A.tensor) throw std::invalid_argument("wick_symbol_photon: expected a photon-only operator");
  const CoherentState cs = coherent_state(basis, X, h);
  if (cs.tail_mass > tail_threshold)
    throw TruncationError("wick_symbol_photon: coherent tail mass " + std::to_string(cs.tail_mass) +
                          " exceeds threshold");
  return cs.psi.dot(A.mat * cs.psi);
}

nlohmann::json dump_operator(const FockOperator& A) {
  nlohmann::json entries = nlohmann::json::array();
  for (Eigen::Index r = 0; r < A.mat.outerSize(); ++r)
    for (SpMat::InnerIterator it(A.mat, r); it; ++it)
      entries.push_back({it.row(), it.col(), it.value().real(), it.value().imag()});
  return {{"format", "sclab-operator-v1"}, {"tensor", A.tensor}, {"spin_dim", A.spin_dim},
          {"rows", A.mat.rows()}, {"entries", entries}};
}

}  // namespace sclab
