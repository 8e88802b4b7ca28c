#include "svi/rk.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "svi/generated.hpp"

namespace svi {

void ButcherTableau::validate(double tol) const {
  if (stages < 1 || A.rows() != stages || A.cols() != stages || b.size() != stages ||
      c.size() != stages)
    throw InvalidParameter("ButcherTableau: inconsistent shapes");
  for (int i = 0; i < stages; ++i)
    for (int j = i; j < stages; ++j)
      if (A(i, j) != 0.0) throw InvalidParameter("ButcherTableau: not explicit");
  if (std::abs(b.sum() - 1.0) > tol) throw InvalidParameter("ButcherTableau: weights do not sum to 1");
  for (int i = 0; i < stages; ++i)
    if (std::abs(A.row(i).sum() - c[i]) > tol)
      throw InvalidParameter("ButcherTableau: nodes are not row sums");
}

ButcherTableau ButcherTableau::classical_rk4() {
  ButcherTableau t;
  t.stages = 4;
  t.A = Mat::Zero(4, 4);
  t.A(1, 0) = 0.5;
  t.A(2, 1) = 0.5;
  t.A(3, 2) = 1.0;
  t.b = Vec(4);
  t.b << 1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0;
  t.c = Vec(4);
  t.c << 0.0, 0.5, 0.5, 1.0;
  return t;
}

ButcherTableau parse_tableau(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int stages = 0;
  double radical = 0.0;
  std::map<std::pair<int, int>, double> a;
  std::map<int, double> b;
  int lineno = 0;
  auto bad = [&](const std::string& why) {
    return ConfigError("coefficient table line " + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind)) continue;
    if (kind == "stages") {
      if (!(ls >> stages) || stages < 1) throw bad("bad stage count");
    } else if (kind == "radical") {
      if (!(ls >> radical) || radical < 0) throw bad("bad radical");
    } else if (kind == "a" || kind == "b") {
      int i = 0, j = 0;
      if (!(ls >> i)) throw bad("missing index");
      if (kind == "a" && !(ls >> j)) throw bad("missing column");
      double p, q, r;
      if (!(ls >> p >> q >> r) || r == 0.0) throw bad("expected p q r");
      if (q != 0.0 && radical == 0.0) throw bad("radical term without a radical line");
      const double v = (p + q * std::sqrt(radical)) / r;
      if (stages < 1 || i < 1 || i > stages) throw bad("index out of range");
      if (kind == "a") {
        if (j < 1 || j >= i) throw bad("tableau must be explicit");
        a[{i - 1, j - 1}] = v;
      } else {
        b[i - 1] = v;
      }
    } else {
      throw bad("unknown entry '" + kind + "'");
    }
    std::string extra;
    if (ls >> extra) throw bad("trailing text");
  }
  if (stages < 1) throw ConfigError("coefficient table: missing stages line");
  ButcherTableau t;
  t.stages = stages;
  t.A = Mat::Zero(stages, stages);
  t.b = Vec::Zero(stages);
  for (const auto& [ij, v] : a) t.A(ij.first, ij.second) = v;
  for (const auto& [i, v] : b) t.b[i] = v;
  t.c = t.A.rowwise().sum();
  try {
    t.validate(1e-13);
  } catch (const Error& e) {
    throw ConfigError(std::string("coefficient table: ") + e.what());
  }
  return t;
}

const ButcherTableau& hem4_tableau() {
  static const ButcherTableau t = parse_tableau(generated::kHem4Table);
  return t;
}

namespace {

// x + sum_{j < count} (h w_j) K_j, the one combination every scheme here uses.
Vec stage_sum(const Vec& x, const Eigen::Ref<const Eigen::RowVectorXd>& w,
              const std::vector<Vec>& K, int count, double h) {
  Vec y = x;
  for (int j = 0; j < count; ++j) y += (h * w[j]) * K[j];
  return y;
}

Vec acceleration(const LagrangianModel& L, const ForceModel* F, const Vec& u, const Vec& q,
                 const Vec& v) {
  const auto P = L.partials(q, v, Vec(), 2);
  Vec rhs = P.Lq - P.Lqdq * v;
  if (F) rhs += F->eval(q, v, u);
  try {
    return lu_solve(P.Lqdqd, rhs);
  } catch (const SingularJacobian&) {
    throw SingularMassMatrix("acceleration: singular mass matrix");
  }
}

Vec ode_rhs(const LagrangianModel& L, const ForceModel* F, const Vec& u, const Vec& x) {
  const auto n = L.dim();
  Vec out(2 * n);
  out << x.tail(n), acceleration(L, F, u, x.head(n), x.tail(n));
  return out;
}

void require_finite(const Vec& v) {
  if (!v.allFinite()) throw NonFiniteState("Runge-Kutta: non-finite stage");
}

}  // namespace

Vec explicit_rk_step(const ButcherTableau& tab, const OdeFn& f, const Vec& x, double t, double h) {
  const int s = tab.stages;
  std::vector<Vec> K(s);
  for (int i = 0; i < s; ++i) {
    const Vec y = stage_sum(x, tab.A.row(i), K, i, h);
    K[i] = f(t + tab.c[i] * h, y);
    require_finite(K[i]);
  }
  Vec out = stage_sum(x, tab.b.transpose(), K, s, h);
  require_finite(out);
  return out;
}

Vec rk4_step(const OdeFn& f, const Vec& x, double t, double h) {
  static const ButcherTableau tab = ButcherTableau::classical_rk4();
  return explicit_rk_step(tab, f, x, t, h);
}

OdeFn lagrangian_ode(LagrangianPtr L, ForcePtr F, Vec u) {
  if (!L) throw InvalidParameter("lagrangian_ode: null model");
  return [L = std::move(L), F = std::move(F), u = std::move(u)](double, const Vec& x) {
    return ode_rhs(*L, F.get(), u, x);
  };
}

ConstrainedState half_explicit_step(const ButcherTableau& tab, const ConstrainedSystem& sys,
                                    const ConstrainedState& st, double h,
                                    const HalfExplicitConfig& hc, StageMonitor* monitor) {
  const int n = sys.dim(), m = sys.count(), s = tab.stages;
  if (st.q.size() != n || st.v.size() != n) throw DimensionError("half_explicit_step: state");
  StepSize check_h(h);
  (void)check_h;
  const LagrangianModel& L = *sys.L;
  const ForceModel* F = sys.F.get();
  const Vec u0;
  Vec x(2 * n);
  x << st.q, st.v;

  std::vector<Vec> K(s);
  Vec Y = x;  // current stage value

  // Stage derivative at y with algebraic variables z = (mu, lambda).
  struct Linear {
    Vec f0;   // f(y, 0)
    Mat Fz;   // df/dz
  };
  auto linearize = [&](const Vec& y) {
    Linear lin;
    lin.f0 = ode_rhs(L, F, u0, y);
    const Mat DcT = sys.c->jac(y.head(n)).transpose();
    const auto P = L.partials(y.head(n), y.tail(n), Vec(), 2);
    lin.Fz = Mat::Zero(2 * n, 2 * m);
    lin.Fz.topLeftCorner(n, m) = DcT;
    Mat AinvDcT(n, m);
    for (int k = 0; k < m; ++k) AinvDcT.col(k) = lu_solve(P.Lqdqd, DcT.col(k));
    lin.Fz.bottomRightCorner(n, m) = AinvDcT;
    return lin;
  };
  auto g = [&](const Vec& y) {
    Vec r(2 * m);
    r << sys.c->eval(y.head(n)), sys.c->jac(y.head(n)) * y.tail(n);
    return r;
  };
  auto dg = [&](const Vec& y) {
    const Vec q = y.head(n), v = y.tail(n);
    const Mat D = sys.c->jac(q);
    const auto H = sys.c->hess(q);
    Mat G = Mat::Zero(2 * m, 2 * n);
    G.topLeftCorner(m, n) = D;
    for (int k = 0; k < m; ++k) G.row(m + k).head(n) = (H[k] * v).transpose();
    G.bottomRightCorner(m, n) = D;
    return G;
  };
  Vec z = Vec::Zero(2 * m);

  // Fixes K[j] (stage j's derivative) so that x + sum_{l<=j} h w_l K_l
  // satisfies the constraints, where w is the weight row of the next value.
  auto close_stage = [&](int j, const Eigen::Ref<const Eigen::RowVectorXd>& w) -> Vec {
    if (m == 0) {
      K[j] = ode_rhs(L, F, u0, Y);
      require_finite(K[j]);
      return stage_sum(x, w, K, j + 1, h);
    }
    const Linear lin = linearize(Y);
    const Vec partial = stage_sum(x, w, K, j, h);
    const double hw = h * w[j];
    if (hw == 0.0) throw InvalidParameter("half_explicit_step: zero coupling weight");
    auto next = [&](const Vec& zz) { return Vec(partial + hw * (lin.f0 + lin.Fz * zz)); };
    IntegratorConfig nc;
    nc.h = h;
    nc.eps_tol = hc.eps_tol;
    nc.max_iter = hc.max_iter;
    const NewtonResult nr = newton_solve([&](const Vec& zz) { return g(next(zz)); },
                                         [&](const Vec& zz) { return Mat(dg(next(zz)) * hw * lin.Fz); },
                                         z, nc);
    z = nr.x;
    K[j] = lin.f0 + lin.Fz * z;
    require_finite(K[j]);
    Vec y = stage_sum(x, w, K, j + 1, h);
    if (monitor) {
      monitor->max_residual = std::max(monitor->max_residual, inf_norm(g(y)));
      ++monitor->stages;
    }
    return y;
  };

  if (m > 0) {
    const Mat D = sys.c->jac(st.q);
    if (lu_singular(D * D.transpose()))
      throw ConstraintDegeneracy("half_explicit_step: constraint Jacobian lost rank");
  }
  for (int i = 1; i < s; ++i) Y = close_stage(i - 1, tab.A.row(i));
  Vec out = close_stage(s - 1, tab.b.transpose());
  require_finite(out);

  ConstrainedState r;
  r.q = out.head(n);
  r.v = out.tail(n);
  r.t = st.t + h;
  r.k = st.k + 1;
  return r;
}

ConstrainedState herk4_step(const ConstrainedSystem& sys, const ConstrainedState& s, double h,
                            const HalfExplicitConfig& cfg, StageMonitor* monitor) {
  static const ButcherTableau tab = ButcherTableau::classical_rk4();
  return half_explicit_step(tab, sys, s, h, cfg, monitor);
}

ConstrainedState hem4_step(const ConstrainedSystem& sys, const ConstrainedState& s, double h,
                           const HalfExplicitConfig& cfg, StageMonitor* monitor) {
  return half_explicit_step(hem4_tableau(), sys, s, h, cfg, monitor);
}

}  // namespace svi
