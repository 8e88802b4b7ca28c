#include "svi/surrogate.hpp"

#include <chrono>
#include <cmath>

namespace svi {

namespace {

using JVec = std::vector<Jet>;
using JMat = std::vector<JVec>;

enum class Failure { Mass, Constraint };

[[noreturn]] void fail(Failure f, const char* what) {
  if (f == Failure::Mass) throw SingularMassMatrix(what);
  throw ConstraintDegeneracy(what);
}

// LU of a jet matrix, pivoting on the constant parts. A pivot below 1e-12 of
// the largest entry is treated as singular (condition estimate ~1e12).
class JetLU {
 public:
  JetLU(JMat a, Failure kind) : lu_(std::move(a)), perm_(lu_.size()) {
    const size_t n = lu_.size();
    double scale = 0.0;
    for (const auto& row : lu_)
      for (const auto& x : row) scale = std::max(scale, std::abs(x.value()));
    for (size_t i = 0; i < n; ++i) perm_[i] = i;
    for (size_t k = 0; k < n; ++k) {
      size_t p = k;
      for (size_t i = k + 1; i < n; ++i)
        if (std::abs(lu_[i][k].value()) > std::abs(lu_[p][k].value())) p = i;
      if (!(std::abs(lu_[p][k].value()) > 1e-12 * scale) || !std::isfinite(scale))
        fail(kind, "surrogate: singular matrix in elimination");
      std::swap(lu_[k], lu_[p]);
      std::swap(perm_[k], perm_[p]);
      const Jet inv = inverse(lu_[k][k]);
      for (size_t i = k + 1; i < n; ++i) {
        lu_[i][k] = lu_[i][k] * inv;
        for (size_t j = k + 1; j < n; ++j) lu_[i][j] -= lu_[i][k] * lu_[k][j];
      }
      inv_diag_.push_back(inv);
    }
  }

  JVec solve(const JVec& b) const {
    const size_t n = lu_.size();
    JVec x(n);
    for (size_t i = 0; i < n; ++i) {
      x[i] = b[perm_[i]];
      for (size_t j = 0; j < i; ++j) x[i] -= lu_[i][j] * x[j];
    }
    for (size_t i = n; i-- > 0;) {
      for (size_t j = i + 1; j < n; ++j) x[i] -= lu_[i][j] * x[j];
      x[i] = x[i] * inv_diag_[i];
    }
    return x;
  }

 private:
  JMat lu_;
  std::vector<size_t> perm_;
  JVec inv_diag_;
};

Jet dot(const JVec& a, const JVec& b) {
  Jet s(0.0);
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Second-order blocks of L read from a jet of degree d + 2, at degree d.
struct Blocks {
  JMat A, Lqq, Lqdq;
  JVec b, qd;
};

Blocks blocks(const Jet& Lj, const JetSpace& sp, int n, int d, const Vec& qd) {
  Blocks B;
  JVec Lq(n), Lqd(n);
  for (int i = 0; i < n; ++i) {
    Lq[i] = Lj.derivative(i);
    Lqd[i] = Lj.derivative(n + i);
  }
  B.A.assign(n, JVec(n));
  B.Lqq.assign(n, JVec(n));
  B.Lqdq.assign(n, JVec(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      B.Lqq[i][j] = Lq[i].derivative(j);
      B.A[i][j] = Lqd[i].derivative(n + j);
      B.Lqdq[i][j] = Lqd[i].derivative(j);
    }
  B.qd.resize(n);
  for (int j = 0; j < n; ++j) B.qd[j] = Jet::variable(&sp, d, n + j, qd[j]);
  B.b.resize(n);
  for (int i = 0; i < n; ++i) {
    Jet bi = Lq[i];
    for (int j = 0; j < n; ++j) bi -= B.Lqdq[i][j] * B.qd[j];
    B.b[i] = bi.truncated(d);
  }
  return B;
}

// Constraint force Dc' lambda at degree d from constraint jets of degree d + 2.
JVec constraint_force(const Blocks& B, const JetLU& Alu, const JVec& Ainv_b, const JVec& cj,
                      int n, int d, JVec* lambda_out) {
  const int m = static_cast<int>(cj.size());
  JMat Dc(m, JVec(n));
  JVec curv(m);
  for (int k = 0; k < m; ++k) {
    JVec g(n);
    for (int j = 0; j < n; ++j) {
      g[j] = cj[k].derivative(j);
      Dc[k][j] = g[j].truncated(d);
    }
    Jet s(0.0);
    for (int i = 0; i < n; ++i) {
      Jet row(0.0);
      for (int j = 0; j < n; ++j) row += g[i].derivative(j) * B.qd[j];
      s += row * B.qd[i];
    }
    curv[k] = s;
  }
  // Y = A^-1 Dc', S = Dc Y
  JMat Y(m);
  for (int k = 0; k < m; ++k) Y[k] = Alu.solve(Dc[k]);
  JMat S(m, JVec(m));
  for (int k = 0; k < m; ++k)
    for (int l = 0; l < m; ++l) S[k][l] = dot(Dc[k], Y[l]);
  JVec rhs(m);
  for (int k = 0; k < m; ++k) rhs[k] = -(dot(Dc[k], Ainv_b) + curv[k]);
  JVec lambda = JetLU(S, Failure::Constraint).solve(rhs);
  JVec f(n, Jet(0.0));
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < m; ++k) f[i] += Dc[k][i] * lambda[k];
  if (lambda_out) *lambda_out = lambda;
  return f;
}

void require_finite(const Jet& j) {
  if (!j.finite()) throw NonFiniteDerivative("surrogate: non-finite derivative");
}

}  // namespace

// --- SurrogateLagrangian ------------------------------------------------------

SurrogateLagrangian::SurrogateLagrangian(LagrangianPtr base, double h, ConstraintPtr c, ForcePtr F)
    : LagrangianModel(base ? base->dim() : 1, F ? F->input_dim() : 0),
      base_(std::move(base)),
      h_(h),
      c_(std::move(c)),
      F_(std::move(F)) {
  if (!base_) throw InvalidParameter("surrogate: null base model");
  StepSize check_h(h);
  (void)check_h;
  if (c_ && F_) throw UnsupportedModel("surrogate: forces and constraints together are not supported");
  if (c_ && c_->dim() != base_->dim()) throw DimensionError("surrogate: constraint dimension");
  if (F_ && F_->dim() != base_->dim()) throw DimensionError("surrogate: force dimension");
}

int SurrogateLagrangian::extra_degree() const { return base_->extra_degree() + 2; }

Jet SurrogateLagrangian::taylor(const JetSpace& sp, int d, const Vec& q, const Vec& qd,
                                const Vec& u) const {
  check(q, qd, u);
  const int n = dim();
  const Jet Lj = base_->taylor(sp, d + 2, q, qd, Vec());
  require_finite(Lj);
  const Blocks B = blocks(Lj, sp, n, d, qd);
  const JetLU Alu(B.A, Failure::Mass);
  const JVec x = Alu.solve(B.b);

  Jet C(0.0);
  for (int i = 0; i < n; ++i) {
    Jet row(0.0);
    for (int j = 0; j < n; ++j) row += B.Lqq[i][j] * B.qd[j];
    C += B.qd[i] * row;
  }
  C -= dot(B.b, x);

  JVec f;
  if (c_) f = constraint_force(B, Alu, x, c_->taylor(sp, d + 2, q), n, d, nullptr);
  if (F_) {
    if (u.size() != input_dim()) throw DimensionError("surrogate: control sample required");
    f = F_->taylor(sp, d, q, qd, u);
  }
  if (!f.empty()) C += dot(f, Alu.solve(f));

  Jet r = Lj.truncated(d) + (h_ * h_ / 24.0) * C;
  require_finite(r);
  return r;
}

SurrogatePtr surrogate_conservative(LagrangianPtr L, double h) {
  return std::make_shared<const SurrogateLagrangian>(std::move(L), h);
}

Vec constraint_multiplier(const LagrangianModel& L, const ConstraintModel& c,
                          const ContinuousState& s) {
  const int n = L.dim();
  if (c.dim() != n || s.q.size() != n) throw DimensionError("constraint_multiplier: dimension");
  auto sp = JetSpace::get(L.nvars(), 2 + L.extra_degree());
  const Jet Lj = L.taylor(*sp, 2, s.q, s.qdot, Vec());
  const Blocks B = blocks(Lj, *sp, n, 0, s.qdot);
  const JetLU Alu(B.A, Failure::Mass);
  const JVec x = Alu.solve(B.b);
  JVec lambda;
  constraint_force(B, Alu, x, c.taylor(*sp, 2, s.q), n, 0, &lambda);
  Vec out(c.count());
  for (int k = 0; k < c.count(); ++k) out[k] = lambda[k].value();
  return out;
}

ConstrainedSurrogate surrogate_constrained(LagrangianPtr L, ConstraintPtr c, double h) {
  if (!c) throw InvalidParameter("surrogate_constrained: null constraint");
  auto s = std::make_shared<const SurrogateLagrangian>(std::move(L), h, c);
  return {std::move(s), std::move(c)};
}

// --- Forced surrogate -----------------------------------------------------------

SurrogateForceTerms::SurrogateForceTerms(LagrangianPtr L, ForcePtr F, double h)
    : L_(std::move(L)), F_(std::move(F)), h_(h) {
  if (!L_ || !F_) throw InvalidParameter("SurrogateForceTerms: null model");
  if (F_->dim() != L_->dim()) throw DimensionError("SurrogateForceTerms: force dimension");
  StepSize check_h(h);
  (void)check_h;
}

std::shared_ptr<const JetSpace> SurrogateForceTerms::space_for(int degree) const {
  return JetSpace::get(2 * dim() + input_dim(), degree + 4 + L_->extra_degree());
}

Vec SurrogateForceTerms::zero_udot(const Vec& udot) const {
  if (udot.size() == 0) return Vec::Zero(input_dim());
  if (udot.size() != input_dim()) throw DimensionError("SurrogateForceTerms: udot length");
  return udot;
}

SurrogateForceTerms::Raw SurrogateForceTerms::raw(const JetSpace& sp, int e, const Vec& q,
                                                  const Vec& qd, const Vec& u,
                                                  const Vec& udot_in) const {
  const int n = dim(), m = input_dim();
  const Vec udot = zero_udot(udot_in);
  const Jet Lj = L_->taylor(sp, e + 4, q, qd, Vec());
  require_finite(Lj);
  const Blocks B = blocks(Lj, sp, n, e + 2, qd);
  const JVec F = F_->taylor(sp, e + 2, q, qd, u);

  JVec rhs(n);
  for (int i = 0; i < n; ++i) rhs[i] = B.b[i] + F[i];
  const JVec theta = JetLU(B.A, Failure::Mass).solve(rhs);

  // First partials at degree e + 1, second partials at degree e.
  JMat Tq(n, JVec(n)), Tqd(n, JVec(n)), Fq(n, JVec(n)), Fqd(n, JVec(n)), Fu(n, JVec(m));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Tq[i][j] = theta[i].derivative(j);
      Tqd[i][j] = theta[i].derivative(n + j);
      Fq[i][j] = F[i].derivative(j);
      Fqd[i][j] = F[i].derivative(n + j);
    }
    for (int j = 0; j < m; ++j) Fu[i][j] = F[i].derivative(2 * n + j);
  }

  const double c = h_ * h_ / 24.0;
  Raw R;
  R.H1.resize(n);
  R.H2.resize(n);
  for (int i = 0; i < n; ++i) {
    Jet h2(0.0);
    for (int j = 0; j < n; ++j) {
      h2 -= 2.0 * (Tqd[j][i] * F[j]);
      h2 += 2.0 * (Fq[i][j] * B.qd[j]);
      h2 += 2.0 * (Fqd[i][j] * theta[j]);
    }
    for (int j = 0; j < m; ++j) h2 += 2.0 * udot[j] * Fu[i][j];
    R.H2[i] = (c * h2).truncated(e + 1);

    Jet h1(0.0);
    for (int j = 0; j < n; ++j) {
      h1 -= 2.0 * (Fq[i][j] * theta[j]);
      h1 -= 2.0 * (Tq[j][i] * F[j]);
    }
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        h1 += Fq[i][j].derivative(k) * B.qd[j] * B.qd[k];
        h1 += Fqd[i][j].derivative(n + k) * theta[j] * theta[k];
        h1 += 2.0 * (Fq[i][j].derivative(n + k) * B.qd[j] * theta[k]);
      }
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k) h1 += udot[j] * udot[k] * Fu[i][j].derivative(2 * n + k);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < m; ++k) {
        h1 += 2.0 * udot[k] * (Fq[i][j].derivative(2 * n + k) * B.qd[j]);
        h1 += 2.0 * udot[k] * (Fqd[i][j].derivative(2 * n + k) * theta[j]);
      }
    R.H1[i] = (F[i] + c * h1).truncated(e);
  }
  R.theta.resize(n);
  R.qd.resize(n);
  for (int i = 0; i < n; ++i) {
    R.theta[i] = theta[i].truncated(e);
    R.qd[i] = B.qd[i].truncated(e);
  }
  return R;
}

Vec SurrogateForceTerms::H1(const Vec& q, const Vec& qd, const Vec& u, const Vec& udot) const {
  auto sp = space_for(0);
  const Raw R = raw(*sp, 0, q, qd, u, udot);
  Vec out(dim());
  for (int i = 0; i < dim(); ++i) out[i] = R.H1[i].value();
  return out;
}

Vec SurrogateForceTerms::H2(const Vec& q, const Vec& qd, const Vec& u, const Vec& udot) const {
  auto sp = space_for(0);
  const Raw R = raw(*sp, 0, q, qd, u, udot);
  Vec out(dim());
  for (int i = 0; i < dim(); ++i) out[i] = R.H2[i].value();
  return out;
}

std::vector<Jet> SurrogateForceTerms::interior(const JetSpace& sp, int e, const Vec& q,
                                               const Vec& qd, const Vec& u,
                                               const Vec& udot_in) const {
  const int n = dim(), m = input_dim();
  const Vec udot = zero_udot(udot_in);
  const Raw R = raw(sp, e, q, qd, u, udot);
  JVec out(n);
  for (int i = 0; i < n; ++i) {
    Jet h2dot(0.0);
    for (int j = 0; j < n; ++j) {
      h2dot += R.H2[i].derivative(j) * R.qd[j];
      h2dot += R.H2[i].derivative(n + j) * R.theta[j];
    }
    for (int j = 0; j < m; ++j) h2dot += udot[j] * R.H2[i].derivative(2 * n + j);
    out[i] = (R.H1[i] - h2dot).truncated(e);
    require_finite(out[i]);
  }
  return out;
}

ForcedSurrogate surrogate_forced(LagrangianPtr L, ForcePtr F, double h) {
  if (!F) throw InvalidParameter("surrogate_forced: null force");
  auto terms = std::make_shared<const SurrogateForceTerms>(L, F, h);
  auto lag = std::make_shared<const SurrogateLagrangian>(std::move(L), h, nullptr, std::move(F));
  return {std::move(lag), std::move(terms)};
}

namespace {

Vec rate(const Vec& a, const Vec& b, double h) { return a.size() ? Vec((b - a) / h) : Vec(); }
Vec average(const Vec& a, const Vec& b) { return a.size() ? Vec(0.5 * (a + b)) : Vec(); }

Vec interior_value(const SurrogateForceTerms& T, const Vec& qk, const Vec& qn, const Vec& ubar,
                   const Vec& udot, double h) {
  auto sp = T.space_for(0);
  const auto I = T.interior(*sp, 0, 0.5 * (qk + qn), (qn - qk) / h, ubar, udot);
  Vec out(T.dim());
  for (int i = 0; i < T.dim(); ++i) out[i] = (h / 2.0) * I[i].value();
  return out;
}

}  // namespace

std::pair<Vec, Vec> surrogate_discrete_forces(const SurrogateForceTerms& terms, const Vec& q_prev,
                                              const Vec& q_k, const Vec& q_next, const Vec& u_k,
                                              const Vec& u_next, double h, const Vec& u_prev) {
  const int n = terms.dim();
  if (q_prev.size() != n) throw MissingHistory("surrogate_discrete_forces: q_prev required");
  if (q_k.size() != n || q_next.size() != n) throw DimensionError("surrogate_discrete_forces");
  const Vec udot = rate(u_k, u_next, h);
  const Vec udot_left = u_prev.size() ? rate(u_prev, u_k, h) : udot;
  const Vec mid = interior_value(terms, q_k, q_next, average(u_k, u_next), udot, h);
  const Vec left = -terms.H2(q_k, (q_k - q_prev) / h, u_k, udot_left);
  const Vec right = terms.H2(q_next, (q_next - q_k) / h, u_next, udot);
  return {left + mid, right + mid};
}

ForcedSurrogateStepper::ForcedSurrogateStepper(ForcedSurrogate s, Control control)
    : s_(std::move(s)), control_(std::move(control)) {
  if (!s_.lagrangian || !s_.terms) throw InvalidParameter("ForcedSurrogateStepper: null model");
  if (s_.terms->input_dim() > 0 && !control_)
    throw InvalidParameter("ForcedSurrogateStepper: control samples required");
}

Vec ForcedSurrogateStepper::u(long k) const {
  if (s_.terms->input_dim() == 0) return Vec();
  Vec v = control_(k);
  if (v.size() != s_.terms->input_dim()) throw DimensionError("control sample length");
  return v;
}

HistoryState ForcedSurrogateStepper::init(const ContinuousState& s0, double h) const {
  HistoryState out;
  static_cast<DiscreteState&>(out) = init_from_velocity(s_.lagrangian->base(), s0);
  out.q_prev = s0.q - h * s0.qdot;
  return out;
}

HistoryState ForcedSurrogateStepper::step(const HistoryState& s, const IntegratorConfig& cfg,
                                          StepStats* stats) const {
  const double h = cfg.h;
  const SurrogateForceTerms& T = *s_.terms;
  const int n = T.dim();
  if (s.q_prev.size() != n) throw MissingHistory("forced surrogate step: q_prev required");
  const Vec uk = u(s.k), un = u(s.k + 1);
  const Vec udot = rate(uk, un, h);
  const Vec udot_left = s.k > 0 ? rate(u(s.k - 1), uk, h) : udot;
  const Vec ubar = average(uk, un);
  const Vec& qk = s.q;
  const Vec left = -T.H2(qk, (qk - s.q_prev) / h, uk, udot_left);

  Vec cached_q, cached_mid;
  auto mid = [&](const Vec& qn) {
    if (cached_q.size() == qn.size() && cached_q == qn) return cached_mid;
    cached_q = qn;
    cached_mid = interior_value(T, qk, qn, ubar, udot, h);
    return cached_mid;
  };
  SideForces sf;
  sf.minus = [&](const Vec& qn) { return Vec(left + mid(qn)); };
  sf.minus_jac = [&](const Vec& qn) {
    auto sp = T.space_for(1);
    const auto I = T.interior(*sp, 1, 0.5 * (qk + qn), (qn - qk) / h, ubar, udot);
    Mat J(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        J(i, j) = (h / 2.0) * (0.5 * I[i].coeff(1 + j) + I[i].coeff(1 + n + j) / h);
    return J;
  };
  sf.plus = [&](const Vec& qn) {
    return Vec(T.H2(qn, (qn - qk) / h, un, udot) + mid(qn));
  };

  HistoryState out;
  static_cast<DiscreteState&>(out) = step_del(*s_.lagrangian, ubar, s, &sf, cfg, stats);
  out.q_prev = qk;
  return out;
}

// --- Linear systems ------------------------------------------------------------

const std::array<Rational, 4>& linear_surrogate_mass_coefficients() {
  static const std::array<Rational, 4> c{{{1, 12}, {1, 720}, {1, 30240}, {1, 1209600}}};
  return c;
}

const std::array<Rational, 4>& linear_surrogate_stiffness_coefficients() {
  static const std::array<Rational, 4> c{{{1, 12}, {1, 120}, {17, 20160}, {31, 362880}}};
  return c;
}

std::shared_ptr<const QuadraticLagrangian> LinearSurrogateParams::lagrangian() const {
  return std::make_shared<const QuadraticLagrangian>(Ms, Ks);
}

LinearSurrogateParams linear_surrogate(const Mat& M, const Mat& K, double h, int order) {
  if (M.rows() != M.cols() || K.rows() != K.cols() || M.rows() != K.rows() || M.rows() == 0)
    throw DimensionError("linear_surrogate: M and K must be n x n");
  if (order < 0 || order > 8 || order % 2) throw UnsupportedOrder("linear_surrogate: order in {0,2,4,6,8}");
  StepSize check_h(h);
  (void)check_h;
  Eigen::FullPivLU<Mat> lu(M);
  if (!lu.isInvertible() || lu.rcond() < 1e-12) throw SingularMassMatrix("linear_surrogate: singular M");
  const Mat W = K * lu.inverse();  // K M^-1
  const auto& cm = linear_surrogate_mass_coefficients();
  const auto& ck = linear_surrogate_stiffness_coefficients();
  LinearSurrogateParams P{M, K, order, h};
  Mat Wj = Mat::Identity(M.rows(), M.rows());  // (K M^-1)^j
  double hp = 1.0;
  for (int j = 0; 2 * (j + 1) <= order; ++j) {
    hp *= h * h;
    P.Ms -= cm[j].value() * hp * (Wj * K);
    Wj = Wj * W;
    P.Ks += ck[j].value() * hp * (Wj * K);
  }
  return P;
}

// --- Quadratic forms and higher-order operators ----------------------------------

double QuadraticForm::eval(const Vec& q, const Vec& qd) const {
  Vec x(q.size() + qd.size());
  x << q, qd;
  return 0.5 * x.dot(G * x);
}

Mat QuadraticForm::mass() const {
  const auto n = G.rows() / 2;
  return G.bottomRightCorner(n, n);
}

Mat QuadraticForm::stiffness() const {
  const auto n = G.rows() / 2;
  return -G.topLeftCorner(n, n);
}

QuadraticFlow::QuadraticFlow(const Mat& M, const Mat& K) : n_(static_cast<int>(M.rows())) {
  if (M.cols() != n_ || K.rows() != n_ || K.cols() != n_) throw DimensionError("QuadraticFlow: shapes");
  Eigen::FullPivLU<Mat> lu(M);
  if (!lu.isInvertible()) throw SingularMassMatrix("QuadraticFlow: singular M");
  J_ = Mat::Zero(2 * n_, 2 * n_);
  J_.topRightCorner(n_, n_) = Mat::Identity(n_, n_);
  J_.bottomLeftCorner(n_, n_) = -lu.solve(K);
  lag_ = QuadraticForm{Mat::Zero(2 * n_, 2 * n_)};
  lag_.G.topLeftCorner(n_, n_) = -K;
  lag_.G.bottomRightCorner(n_, n_) = M;
}

QuadraticForm QuadraticFlow::dt(const QuadraticForm& Q, int times) const {
  Mat G = Q.G;
  for (int i = 0; i < times; ++i) G = J_.transpose() * G + G * J_;
  return {G};
}

Mat QuadraticFlow::qder(int j) const {
  Mat P = Mat::Identity(2 * n_, 2 * n_);
  for (int i = 0; i < j; ++i) P = J_ * P;
  return P.topRows(n_);
}

QuadraticForm QuadraticFlow::along(const QuadraticForm& Q, int slot, int j) const {
  const Mat Gs = Q.G.middleRows(slot * n_, n_);
  const Mat S = Gs.transpose() * qder(j);
  return {S + S.transpose()};
}

QuadraticForm QuadraticFlow::second(const QuadraticForm& Q, int sa, int a, int sb, int b) const {
  const Mat Gab = Q.G.block(sa * n_, sb * n_, n_, n_);
  const Mat S = qder(a).transpose() * Gab * qder(b);
  return {S + S.transpose()};
}

QuadraticForm QuadraticFlow::theta2(const QuadraticForm& Q) const {
  return along(Q, 0, 2) * (1.0 / 8.0) + along(Q, 1, 3) * (1.0 / 24.0);
}

QuadraticForm QuadraticFlow::theta4(const QuadraticForm& Q) const {
  // Second-order Taylor terms of Q at the midpoint offsets h^2 qddot / 8 and
  // h^2 q''' / 24. The mixed term is 1/(8*24).
  return along(Q, 0, 4) * (1.0 / 384.0) + along(Q, 1, 5) * (1.0 / 1920.0) +
         second(Q, 0, 2, 0, 2) * (1.0 / 128.0) + second(Q, 1, 3, 1, 3) * (1.0 / 1152.0) +
         second(Q, 0, 2, 1, 3) * (1.0 / 192.0);
}

QuadraticForm QuadraticFlow::phi2(const QuadraticForm& Q) const {
  return theta2(Q) - dt(Q, 2) * (1.0 / 24.0);
}

QuadraticForm QuadraticFlow::phi4(const QuadraticForm& Q) const {
  return theta4(Q) + dt(Q, 4) * (7.0 / 5760.0);
}

QuadraticForm HigherOrderOperators::surrogate4() const {
  const double h2 = h * h, h4 = h2 * h2;
  return L - phi2 * h2 - phi4 * h4 + phi2_phi2 * h4 + theta2_ddot * (h4 / 24.0);
}

HigherOrderOperators higher_order_operators(const LagrangianModel& L, double h) {
  const auto* quad = dynamic_cast<const QuadraticLagrangian*>(&L);
  if (!quad || quad->f().cwiseAbs().maxCoeff() != 0.0)
    throw UnsupportedModel("higher_order_operators: L must be 1/2 qd'M qd - 1/2 q'K q");
  StepSize check_h(h);
  (void)check_h;
  const QuadraticFlow flow(quad->M(), quad->K());
  HigherOrderOperators ops;
  ops.h = h;
  ops.L = flow.lagrangian();
  ops.theta2 = flow.theta2(ops.L);
  ops.theta4 = flow.theta4(ops.L);
  ops.phi2 = flow.phi2(ops.L);
  ops.phi4 = flow.phi4(ops.L);
  ops.phi2_phi2 = flow.phi2(ops.phi2);
  ops.theta2_ddot = flow.dt(ops.theta2, 2);
  return ops;
}

}  // namespace svi
