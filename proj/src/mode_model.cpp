#include "sclab/mode_model.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace sclab {

namespace {

constexpr double kInvTwoPiCubed = 1.0 / (8.0 * kPi * kPi * kPi);

// Gauss-Legendre nodes and weights on (-1, 1) by Golub-Welsch.
void gauss_legendre(int n, RVec& x, RVec& w) {
  RMat J = RMat::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    double b = k / std::sqrt(4.0 * k * k - 1.0);
    J(k, k - 1) = b;
    J(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<RMat> es(J);
  x = es.eigenvalues();
  w = 2.0 * es.eigenvectors().row(0).transpose().array().square();
}

std::array<Vec3, 2> transverse_frame(const Vec3& k) {
  Vec3 khat = k.normalized();
  Vec3 ref = std::abs(khat.y()) < 0.9 ? Vec3::UnitY() : Vec3::UnitZ();
  Vec3 e1 = ref.cross(khat).normalized();
  Vec3 e2 = khat.cross(e1);
  return {e1, e2};
}

Vec3 unit_axis(int m) {
  if (m < 1 || m > 3) throw std::invalid_argument("axis index must be 1, 2 or 3");
  return Vec3::Unit(m - 1);
}

// Real coordinates of the plane-wave pair (f(k_i), f(-k_i)).
void put_pair(PhaseVector& v, const ModeGrid& grid, int i, const CVec3& fk, const CVec3& fmk) {
  const int D = grid.D();
  const auto& fr = grid.frame[i];
  const double s = std::sqrt(grid.weight[i] / 2.0);
  // Eigen's dot conjugates its left operand; the frames are real.
  cplx uk[2] = {fr[0].cast<cplx>().dot(fk) * s, fr[1].cast<cplx>().dot(fk) * s};
  cplx umk[2] = {fr[0].cast<cplx>().dot(fmk) * s, -fr[1].cast<cplx>().dot(fmk) * s};
  const double r2 = 1.0 / std::sqrt(2.0);
  for (int a = 0; a < 2; ++a) {
    cplx even = (uk[a] + umk[a]) * r2;
    cplx odd = (uk[a] - umk[a]) * r2;
    int se = ModeGrid::slot(i, a, 0), so = ModeGrid::slot(i, a, 1);
    v(se) = even.real();
    v(D + se) = even.imag();
    v(so) = odd.real();
    v(D + so) = odd.imag();
  }
}

// B_{mx} with an optional spatial derivative d/dx_a (deriv = 0: none).
PhaseVector coupling_B_impl(const ModeGrid& grid, const ModelConfig& config, int m, const Vec3& x,
                            int deriv) {
  const Vec3 em = unit_axis(m);
  PhaseVector v = PhaseVector::Zero(2 * grid.D());
  const cplx I(0.0, 1.0);
  for (int i = 0; i < grid.kpoints(); ++i) {
    const Vec3& k = grid.k[i];
    const double r = k.norm();
    const double A = cutoff_value(config, r) * std::sqrt(r) * std::pow(2.0 * kPi, -1.5);
    const Vec3 khat = k / r;
    const double phase = k.dot(x);
    cplx ak = I * A * std::exp(-I * phase);
    cplx amk = I * A * std::exp(I * phase);
    if (deriv != 0) {
      const double ka = k(deriv - 1);
      ak *= -I * ka;
      amk *= I * ka;
    }
    CVec3 fk = ak * khat.cross(em).cast<cplx>();
    CVec3 fmk = amk * (-khat).cross(em).cast<cplx>();
    put_pair(v, grid, i, fk, fmk);
  }
  return v;
}

}  // namespace

void ModelConfig::validate() const {
  if (spin_count < 1) throw std::invalid_argument("ModelConfig: spins.count must be >= 1");
  if (static_cast<int>(positions.size()) != spin_count)
    throw std::invalid_argument("ModelConfig: spins.positions must list one point per spin");
  for (std::size_t a = 0; a < positions.size(); ++a)
    for (std::size_t b = a + 1; b < positions.size(); ++b)
      if ((positions[a] - positions[b]).norm() < 1e-12)
        throw std::invalid_argument("ModelConfig: spin positions must be pairwise distinct");
  if (cutoff_family != "gaussian" && cutoff_family != "unit")
    throw std::invalid_argument("ModelConfig: unknown cutoff family '" + cutoff_family + "'");
  if (!(cutoff_lambda > 0.0)) throw std::invalid_argument("ModelConfig: cutoff.lambda must be positive");
  if (radial_nodes < 1) throw std::invalid_argument("ModelConfig: grid.radial_nodes must be >= 1");
  if (cutoff_family == "unit" && !(kmax > 0.0))
    throw std::invalid_argument("ModelConfig: the unit cutoff needs an explicit grid.kmax");
  if (directions != "z" && directions != "octahedral" && directions != "custom")
    throw std::invalid_argument("ModelConfig: unknown direction set '" + directions + "'");
  if (directions == "custom" && custom_directions.empty())
    throw std::invalid_argument("ModelConfig: custom direction set is empty");
}

namespace {
Vec3 vec3_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}
nlohmann::json vec3_to_json(const Vec3& v) { return nlohmann::json::array({v(0), v(1), v(2)}); }
}  // namespace

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  if (j.contains("spins")) {
    const auto& s = j.at("spins");
    if (s.contains("count")) c.spin_count = s.at("count").get<int>();
    if (s.contains("positions")) {
      c.positions.clear();
      for (const auto& p : s.at("positions")) c.positions.push_back(vec3_from_json(p));
    } else {
      c.positions.assign(c.spin_count, Vec3::Zero());
      for (int l = 0; l < c.spin_count; ++l) c.positions[l] = Vec3(l, 0, 0);
    }
  }
  if (j.contains("field") && j.at("field").contains("beta")) c.beta = vec3_from_json(j.at("field").at("beta"));
  if (j.contains("cutoff")) {
    const auto& s = j.at("cutoff");
    if (s.contains("family")) c.cutoff_family = s.at("family").get<std::string>();
    if (s.contains("lambda")) c.cutoff_lambda = s.at("lambda").get<double>();
    if (s.contains("scale")) c.coupling_scale = s.at("scale").get<double>();
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    if (g.contains("radial_nodes")) c.radial_nodes = g.at("radial_nodes").get<int>();
    if (g.contains("kmax")) c.kmax = g.at("kmax").get<double>();
    if (g.contains("directions")) {
      const auto& d = g.at("directions");
      if (d.is_string()) {
        c.directions = d.get<std::string>();
      } else {
        c.directions = "custom";
        for (const auto& p : d) c.custom_directions.push_back(vec3_from_json(p));
      }
    }
  }
  c.validate();
  return c;
}

nlohmann::json config_to_json(const ModelConfig& c) {
  nlohmann::json pos = nlohmann::json::array();
  for (const auto& p : c.positions) pos.push_back(vec3_to_json(p));
  nlohmann::json dirs;
  if (c.directions == "custom") {
    dirs = nlohmann::json::array();
    for (const auto& d : c.custom_directions) dirs.push_back(vec3_to_json(d));
  } else {
    dirs = c.directions;
  }
  return {{"spins", {{"count", c.spin_count}, {"positions", pos}}},
          {"field", {{"beta", vec3_to_json(c.beta)}}},
          {"cutoff", {{"family", c.cutoff_family}, {"lambda", c.cutoff_lambda}, {"scale", c.coupling_scale}}},
          {"grid", {{"radial_nodes", c.radial_nodes}, {"kmax", c.kmax}, {"directions", dirs}}}};
}

RVec ModeGrid::slot_omega() const {
  RVec w(D());
  for (int i = 0; i < kpoints(); ++i) w.segment(4 * i, 4).setConstant(omega[i]);
  return w;
}

void ModeGrid::validate() const {
  const std::size_t n = k.size();
  if (n == 0) throw std::invalid_argument("ModeGrid: empty k-set");
  if (weight.size() != n || frame.size() != n || omega.size() != n)
    throw std::invalid_argument("ModeGrid: inconsistent array lengths");
  for (std::size_t i = 0; i < n; ++i) {
    const double r = k[i].norm();
    if (!(r > 0.0)) throw std::invalid_argument("ModeGrid: zero k-point");
    if (!(weight[i] > 0.0)) throw std::invalid_argument("ModeGrid: weights must be positive");
    if (!(omega[i] > 0.0)) throw std::invalid_argument("ModeGrid: frequencies must be positive");
    const Vec3 khat = k[i] / r;
    const auto& f = frame[i];
    if (std::abs(f[0].norm() - 1.0) > 1e-14 || std::abs(f[1].norm() - 1.0) > 1e-14 ||
        std::abs(f[0].dot(khat)) > 1e-14 || std::abs(f[1].dot(khat)) > 1e-14 ||
        std::abs(f[0].dot(f[1])) > 1e-14 || (khat.cross(f[0]) - f[1]).norm() > 1e-14)
      throw std::invalid_argument("ModeGrid: degenerate polarization frame");
  }
}

ModeGrid grid_from_points(const std::vector<Vec3>& k, const std::vector<double>& w) {
  if (k.size() != w.size()) throw std::invalid_argument("grid_from_points: k and w lengths differ");
  ModeGrid g;
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (!(k[i].norm() > 0.0)) throw std::invalid_argument("grid_from_points: zero k-point");
    g.k.push_back(k[i]);
    g.weight.push_back(w[i]);
    g.frame.push_back(transverse_frame(k[i]));
    g.omega.push_back(k[i].norm());
  }
  g.validate();
  return g;
}

ModeGrid build_grid(const ModelConfig& config) {
  config.validate();
  std::vector<Vec3> dirs;
  if (config.directions == "z") {
    dirs = {Vec3::UnitZ()};
  } else if (config.directions == "octahedral") {
    for (int a = 0; a < 3; ++a) {
      dirs.push_back(Vec3::Unit(a));
      dirs.push_back(-Vec3::Unit(a));
    }
  } else {
    for (const auto& d : config.custom_directions) {
      if (!(d.norm() > 0.0)) throw std::invalid_argument("build_grid: zero direction");
      dirs.push_back(d.normalized());
    }
  }
  double kmax = config.kmax;
  if (!(kmax > 0.0)) kmax = config.cutoff_lambda * std::sqrt(2.0 * std::log(1e12));
  RVec x, wx;
  gauss_legendre(config.radial_nodes, x, wx);
  std::vector<Vec3> ks;
  std::vector<double> ws;
  const double angular = 4.0 * kPi / static_cast<double>(dirs.size());
  for (int j = 0; j < config.radial_nodes; ++j) {
    const double r = 0.5 * kmax * (x(j) + 1.0);
    const double wr = 0.5 * kmax * wx(j);
    for (const auto& d : dirs) {
      ks.push_back(r * d);
      ws.push_back(wr * r * r * angular);
    }
  }
  return grid_from_points(ks, ws);
}

Model make_model(const ModelConfig& config) { return make_model(config, build_grid(config)); }

Model make_model(const ModelConfig& config, ModeGrid grid) {
  config.validate();
  grid.validate();
  Model m;
  m.config = config;
  m.grid = std::move(grid);
  for (int l = 0; l < config.spin_count; ++l) {
    std::array<PhaseVector, 3> b;
    for (int a = 1; a <= 3; ++a) b[a - 1] = coupling_B(m.grid, config, a, config.positions[l]);
    m.B.push_back(b);
  }
  return m;
}

double cutoff_value(const ModelConfig& config, double r) {
  double chi = 1.0;
  if (config.cutoff_family == "gaussian") {
    const double L = config.cutoff_lambda;
    chi = std::exp(-r * r / (2.0 * L * L));
  }
  return config.coupling_scale * chi;
}

PhaseVector coupling_B(const ModeGrid& grid, const ModelConfig& config, int m, const Vec3& x) {
  return coupling_B_impl(grid, config, m, x, 0);
}

PhaseVector coupling_E(const ModeGrid& grid, const ModelConfig& config, int m, const Vec3& x) {
  return apply_helicity(grid, coupling_B(grid, config, m, x));
}

PhaseVector coupling_E_pol(const ModeGrid& grid, const ModelConfig& config, int m, const Vec3& x) {
  return -apply_helicity(grid, apply_F(coupling_E(grid, config, m, x)));
}

PhaseVector coupling_B_dx(const ModeGrid& grid, const ModelConfig& config, int m, const Vec3& x, int a) {
  if (a < 1 || a > 3) throw std::invalid_argument("coupling_B_dx: derivative axis must be 1, 2 or 3");
  return coupling_B_impl(grid, config, m, x, a);
}

PhaseVector coupling_E_dx(const ModeGrid& grid, const ModelConfig& config, int m, const Vec3& x, int a) {
  return apply_helicity(grid, coupling_B_dx(grid, config, m, x, a));
}

PhaseVector apply_helicity(const ModeGrid& grid, const PhaseVector& v) {
  const int D = grid.D();
  if (v.size() != 2 * D) throw std::invalid_argument("apply_helicity: dimension mismatch");
  PhaseVector r(v.size());
  for (int part = 0; part < 2; ++part)
    for (int i = 0; i < grid.kpoints(); ++i)
      for (int c = 0; c < 2; ++c) {
        const int s1 = part * D + ModeGrid::slot(i, 0, c);
        const int s2 = part * D + ModeGrid::slot(i, 1, c);
        r(s1) = -v(s2);
        r(s2) = v(s1);
      }
  return r;
}

PhaseVector apply_F(const PhaseVector& v) {
  const Eigen::Index D = v.size() / 2;
  PhaseVector r(v.size());
  r.head(D) = -v.tail(D);
  r.tail(D) = v.head(D);
  return r;
}

PhaseVector polarization_project(const ModeGrid& grid, int sign, const PhaseVector& X) {
  if (sign != 1 && sign != -1) throw std::invalid_argument("polarization_project: sign must be +1 or -1");
  const PhaseVector jf = apply_helicity(grid, apply_F(X));
  return 0.5 * (X - sign * jf);
}

double symplectic(const PhaseVector& U, const PhaseVector& V) {
  if (U.size() != V.size() || U.size() % 2 != 0) throw std::invalid_argument("symplectic: dimension mismatch");
  const Eigen::Index D = U.size() / 2;
  return U.tail(D).dot(V.head(D)) - U.head(D).dot(V.tail(D));
}

RhoValue rho_discrete(const ModeGrid& grid, const ModelConfig& config, const Vec3& x) {
  RhoValue out;
  for (int i = 0; i < grid.kpoints(); ++i) {
    const double chi = cutoff_value(config, grid.k[i].norm());
    const double c = grid.weight[i] * chi * chi * kInvTwoPiCubed;
    const double ph = grid.k[i].dot(x);
    out.value += c * std::cos(ph);
    out.grad -= c * std::sin(ph) * grid.k[i];
  }
  return out;
}

SpinMatrix pauli(int m) {
  SpinMatrix s = SpinMatrix::Zero(2, 2);
  const cplx I(0.0, 1.0);
  switch (m) {
    case 1: s(0, 1) = 1.0; s(1, 0) = 1.0; break;
    case 2: s(0, 1) = -I; s(1, 0) = I; break;
    case 3: s(0, 0) = 1.0; s(1, 1) = -1.0; break;
    default: throw std::invalid_argument("pauli: index must be 1, 2 or 3");
  }
  return s;
}

SpinMatrix spin_operator(int N, int lambda, int m) {
  if (N < 1 || lambda < 1 || lambda > N) throw std::invalid_argument("spin_operator: spin index out of range");
  SpinMatrix out = SpinMatrix::Identity(1, 1);
  for (int l = 1; l <= N; ++l) {
    const SpinMatrix f = (l == lambda) ? pauli(m) : SpinMatrix::Identity(2, 2);
    SpinMatrix next(out.rows() * 2, out.cols() * 2);
    for (Eigen::Index r = 0; r < out.rows(); ++r)
      for (Eigen::Index c = 0; c < out.cols(); ++c) next.block(2 * r, 2 * c, 2, 2) = out(r, c) * f;
    out = next;
  }
  return out;
}

SpinMatrix h_int_gradient(const Model& model, const PhaseVector& V) {
  if (V.size() != 2 * model.D()) throw std::invalid_argument("h_int_gradient: dimension mismatch");
  SpinMatrix H = SpinMatrix::Zero(model.spin_dim(), model.spin_dim());
  for (int l = 0; l < model.N(); ++l)
    for (int m = 1; m <= 3; ++m) H += model.B[l][m - 1].dot(V) * spin_operator(model.N(), l + 1, m);
  return H;
}

SpinMatrix h_int_symbol(const Model& model, const PhaseVector& X) {
  if (X.size() != 2 * model.D()) throw std::invalid_argument("h_int_symbol: dimension mismatch");
  SpinMatrix H = SpinMatrix::Zero(model.spin_dim(), model.spin_dim());
  for (int l = 0; l < model.N(); ++l)
    for (int m = 1; m <= 3; ++m)
      H += (model.config.beta(m - 1) + model.B[l][m - 1].dot(X)) * spin_operator(model.N(), l + 1, m);
  return H;
}

PhaseVector chi_flow(const ModeGrid& grid, double t, const PhaseVector& X) {
  const int D = grid.D();
  if (X.size() != 2 * D) throw std::invalid_argument("chi_flow: dimension mismatch");
  PhaseVector r(2 * D);
  for (int i = 0; i < grid.kpoints(); ++i) {
    const double c = std::cos(grid.omega[i] * t), s = std::sin(grid.omega[i] * t);
    for (int j = 4 * i; j < 4 * i + 4; ++j) {
      r(j) = c * X(j) + s * X(D + j);
      r(D + j) = -s * X(j) + c * X(D + j);
    }
  }
  return r;
}

RMat chi_matrix(const ModeGrid& grid, double t) {
  const int D = grid.D();
  RMat C = RMat::Zero(2 * D, 2 * D);
  for (int i = 0; i < grid.kpoints(); ++i) {
    const double c = std::cos(grid.omega[i] * t), s = std::sin(grid.omega[i] * t);
    for (int j = 4 * i; j < 4 * i + 4; ++j) {
      C(j, j) = c;
      C(j, D + j) = s;
      C(D + j, j) = -s;
      C(D + j, D + j) = c;
    }
  }
  return C;
}

QuadFormQ q_form(const Model& model, double t) {
  const int n = 2 * model.D();
  QuadFormQ out;
  out.A = RMat::Zero(n, n);
  if (t == 0.0) return out;
  const double T = std::abs(t);
  const double sgn = t > 0 ? 1.0 : -1.0;
  RVec gx, gw;
  gauss_legendre(8, gx, gw);
  auto integrate = [&](int panels) {
    RMat acc = RMat::Zero(n, n);
    const double hp = T / panels;
    for (int p = 0; p < panels; ++p)
      for (int q = 0; q < gx.size(); ++q) {
        const double s = sgn * (hp * p + 0.5 * hp * (gx(q) + 1.0));
        const double w = 0.5 * hp * gw(q);
        for (const auto& bl : model.B)
          for (const auto& b : bl) {
            const PhaseVector c = chi_flow(model.grid, -s, b);
            acc.noalias() += w * c * c.transpose();
          }
      }
    return acc;
  };
  int panels = 1;
  RMat prev = integrate(panels);
  for (int it = 0; it < 20; ++it) {
    panels *= 2;
    RMat cur = integrate(panels);
    const double scale = std::max(cur.norm(), 1e-300);
    const bool done = (cur - prev).norm() <= 1e-10 * scale;
    prev = std::move(cur);
    if (done) break;
  }
  out.A = static_cast<double>(model.spin_dim()) * T * prev;
  out.A = 0.5 * (out.A + out.A.transpose()).eval();
  out.trace = out.A.trace();
  return out;
}

std::string ObservableSpec::label() const {
  std::ostringstream os;
  switch (kind) {
    case ObservableKind::field_B: os << "B" << axis; break;
    case ObservableKind::field_E: os << "E" << axis; break;
    case ObservableKind::field_E_pol: os << "Epol" << axis; break;
    case ObservableKind::spin: os << "S" << axis << "[" << spin << "]"; return os.str();
    case ObservableKind::number_rate: return "Ndot";
  }
  os << "@(" << point(0) << "," << point(1) << "," << point(2) << ")";
  return os.str();
}

ObservableSpec observable_from_json(const nlohmann::json& j) {
  ObservableSpec o;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "field_B") o.kind = ObservableKind::field_B;
  else if (kind == "field_E") o.kind = ObservableKind::field_E;
  else if (kind == "field_E_pol") o.kind = ObservableKind::field_E_pol;
  else if (kind == "spin") o.kind = ObservableKind::spin;
  else if (kind == "number_rate") o.kind = ObservableKind::number_rate;
  else throw std::invalid_argument("observable_from_json: unknown kind '" + kind + "'");
  if (j.contains("axis")) o.axis = j.at("axis").get<int>();
  if (j.contains("point")) o.point = vec3_from_json(j.at("point"));
  if (j.contains("spin")) o.spin = j.at("spin").get<int>();
  if (o.axis < 1 || o.axis > 3) throw std::invalid_argument("observable_from_json: axis must be 1, 2 or 3");
  return o;
}

nlohmann::json observable_to_json(const ObservableSpec& o) {
  static const char* names[] = {"field_B", "field_E", "field_E_pol", "spin", "number_rate"};
  nlohmann::json j = {{"kind", names[static_cast<int>(o.kind)]}, {"label", o.label()}};
  if (o.kind == ObservableKind::spin) {
    j["axis"] = o.axis;
    j["spin"] = o.spin;
  } else if (o.kind != ObservableKind::number_rate) {
    j["axis"] = o.axis;
    j["point"] = vec3_to_json(o.point);
  }
  return j;
}

FormA form_of(const Model& model, const ObservableSpec& obs) {
  FormA f;
  f.F = PhaseVector::Zero(2 * model.D());
  f.S = SpinMatrix::Zero(model.spin_dim(), model.spin_dim());
  switch (obs.kind) {
    case ObservableKind::field_B: f.F = coupling_B(model.grid, model.config, obs.axis, obs.point); break;
    case ObservableKind::field_E: f.F = coupling_E(model.grid, model.config, obs.axis, obs.point); break;
    case ObservableKind::field_E_pol: f.F = coupling_E_pol(model.grid, model.config, obs.axis, obs.point); break;
    case ObservableKind::spin:
      if (obs.spin < 1 || obs.spin > model.N()) throw std::invalid_argument("form_of: spin index out of range");
      f.S = spin_operator(model.N(), obs.spin, obs.axis);
      break;
    case ObservableKind::number_rate:
      throw std::invalid_argument("form_of: the photon-rate observable is not of the field + spin form");
  }
  return f;
}

nlohmann::json dump_model(const Model& model) {
  const auto& g = model.grid;
  nlohmann::json kp = nlohmann::json::array();
  for (int i = 0; i < g.kpoints(); ++i) {
    kp.push_back({{"k", vec3_to_json(g.k[i])},
                  {"weight", g.weight[i]},
                  {"omega", g.omega[i]},
                  {"eps1", vec3_to_json(g.frame[i][0])},
                  {"eps2", vec3_to_json(g.frame[i][1])}});
  }
  nlohmann::json couplings = nlohmann::json::array();
  for (int l = 0; l < model.N(); ++l)
    for (int m = 1; m <= 3; ++m) {
      const auto& b = model.B[l][m - 1];
      std::vector<double> q(b.data(), b.data() + model.D()), p(b.data() + model.D(), b.data() + 2 * model.D());
      couplings.push_back({{"spin", l + 1}, {"axis", m}, {"q", q}, {"p", p}});
    }
  return {{"format", "sclab-model-v1"},
          {"slot_layout", "4*i + 2*c + a (c: 0 even/cos, 1 odd/sin; a: polarization)"},
          {"config", config_to_json(model.config)},
          {"D", model.D()},
          {"kpoints", kp},
          {"coupling_B", couplings}};
}

}  // namespace sclab
