#include "svi/model.hpp"

#include <cmath>

namespace svi {

namespace {

bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace

ContinuousState::ContinuousState(Vec q_, Vec qdot_, double t_)
    : q(std::move(q_)), qdot(std::move(qdot_)), t(t_) {
  if (q.size() < 1 || q.size() != qdot.size())
    throw DimensionError("ContinuousState: q and qdot must share a length >= 1");
  if (!all_finite(q) || !all_finite(qdot) || !std::isfinite(t))
    throw NonFiniteState("ContinuousState: non-finite entry");
}

StepSize::StepSize(double h) : h_(h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw InvalidParameter("StepSize: h must be positive and finite");
}

DerivativeSet::DerivativeSet(Jet jet, int nvars) : jet_(std::move(jet)), nvars_(nvars) {}

double DerivativeSet::d(std::initializer_list<int> vars) const {
  return d(std::vector<int>(vars));
}

double DerivativeSet::d(const std::vector<int>& vars) const {
  if (static_cast<int>(vars.size()) > order()) throw UnsupportedOrder("DerivativeSet: order too high");
  if (jet_.is_constant()) return vars.empty() ? jet_.value() : 0.0;
  std::vector<int> e(jet_.space()->nvars(), 0);
  for (int v : vars) {
    if (v < 0 || v >= nvars_) throw DimensionError("DerivativeSet: variable out of range");
    ++e[v];
  }
  return jet_.partial(jet_.space()->index(e));
}

Vec DerivativeSet::gradient() const {
  Vec g(nvars_);
  for (int i = 0; i < nvars_; ++i) g[i] = order() >= 1 ? d({i}) : 0.0;
  return g;
}

Mat DerivativeSet::hessian() const {
  Mat H = Mat::Zero(nvars_, nvars_);
  if (order() < 2) return H;
  for (int i = 0; i < nvars_; ++i)
    for (int j = 0; j < nvars_; ++j) H(i, j) = d({i, j});
  return H;
}

// --- LagrangianModel --------------------------------------------------------

LagrangianModel::LagrangianModel(int n, int m) : n_(n), m_(m) {
  if (n < 1 || m < 0) throw DimensionError("LagrangianModel: bad dimensions");
}

void LagrangianModel::check(const Vec& q, const Vec& qd, const Vec& u) const {
  if (q.size() != n_ || qd.size() != n_) throw DimensionError("Lagrangian: state length mismatch");
  if (u.size() != 0 && u.size() != m_) throw DimensionError("Lagrangian: control length mismatch");
}

std::shared_ptr<const JetSpace> LagrangianModel::space_for(int degree) const {
  return JetSpace::get(nvars(), degree + extra_degree());
}

double LagrangianModel::eval(const Vec& q, const Vec& qd, const Vec& u) const {
  auto sp = space_for(0);
  return taylor(*sp, 0, q, qd, u).value();
}

LagrangianPartials LagrangianModel::partials(const Vec& q, const Vec& qd, const Vec& u,
                                             int order) const {
  if (order < 1 || order > 2) throw UnsupportedOrder("partials: order must be 1 or 2");
  auto sp = space_for(order);
  const DerivativeSet ds(taylor(*sp, order, q, qd, u), nvars());
  LagrangianPartials P;
  P.value = ds.value();
  P.Lq.resize(n_);
  P.Lqd.resize(n_);
  for (int i = 0; i < n_; ++i) {
    P.Lq[i] = ds.d({i});
    P.Lqd[i] = ds.d({n_ + i});
  }
  if (order == 2) {
    P.Lqq.resize(n_, n_);
    P.Lqdqd.resize(n_, n_);
    P.Lqdq.resize(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        P.Lqq(i, j) = ds.d({i, j});
        P.Lqdqd(i, j) = ds.d({n_ + i, n_ + j});
        P.Lqdq(i, j) = ds.d({n_ + i, j});
      }
  }
  return P;
}

DerivativeSet LagrangianModel::oracle(const ContinuousState& s, int order, const Vec& u) const {
  if (order < 0) throw UnsupportedOrder("oracle: negative order");
  if (order > kMaxOracleOrder) throw UnsupportedOrder("oracle: order above 4 is not supported");
  auto sp = space_for(order);
  Jet j = taylor(*sp, order, s.q, s.qdot, u);
  if (!j.finite()) throw NonFiniteDerivative("oracle: non-finite derivative");
  return DerivativeSet(std::move(j), nvars());
}

// --- ForceModel -------------------------------------------------------------

ForceModel::ForceModel(int n, int m) : n_(n), m_(m) {
  if (n < 1 || m < 0) throw DimensionError("ForceModel: bad dimensions");
}

void ForceModel::check(const Vec& q, const Vec& qd, const Vec& u) const {
  if (q.size() != n_ || qd.size() != n_) throw DimensionError("force: state length mismatch");
  if (u.size() != m_) throw DimensionError("force: control length mismatch");
}

Vec ForceModel::eval(const Vec& q, const Vec& qd, const Vec& u) const {
  auto sp = JetSpace::get(2 * n_ + m_, 0);
  auto r = taylor(*sp, 0, q, qd, u);
  Vec F(n_);
  for (int i = 0; i < n_; ++i) F[i] = r[i].value();
  return F;
}

ForcePartials ForceModel::partials(const Vec& q, const Vec& qd, const Vec& u) const {
  auto sp = JetSpace::get(2 * n_ + m_, 1);
  auto r = taylor(*sp, 1, q, qd, u);
  ForcePartials P;
  P.F.resize(n_);
  P.Fq.resize(n_, n_);
  P.Fqd.resize(n_, n_);
  P.Fu.resize(n_, m_);
  for (int i = 0; i < n_; ++i) {
    P.F[i] = r[i].value();
    for (int j = 0; j < n_; ++j) {
      P.Fq(i, j) = r[i].coeff(1 + j);
      P.Fqd(i, j) = r[i].coeff(1 + n_ + j);
    }
    for (int j = 0; j < m_; ++j) P.Fu(i, j) = r[i].coeff(1 + 2 * n_ + j);
  }
  return P;
}

// --- ConstraintModel --------------------------------------------------------

ConstraintModel::ConstraintModel(int n, int m) : n_(n), m_(m) {
  if (n < 1 || m < 0 || m >= n) throw DimensionError("ConstraintModel: need 0 <= m < n");
}

void ConstraintModel::check(const Vec& q) const {
  if (q.size() != n_) throw DimensionError("constraint: q length mismatch");
}

Vec ConstraintModel::eval(const Vec& q) const {
  auto sp = JetSpace::get(n_, 0);
  auto r = taylor(*sp, 0, q);
  Vec c(m_);
  for (int i = 0; i < m_; ++i) c[i] = r[i].value();
  return c;
}

Mat ConstraintModel::jac(const Vec& q) const {
  auto sp = JetSpace::get(n_, 1);
  auto r = taylor(*sp, 1, q);
  Mat D(m_, n_);
  for (int i = 0; i < m_; ++i)
    for (int j = 0; j < n_; ++j) D(i, j) = r[i].coeff(1 + j);
  return D;
}

std::vector<Mat> ConstraintModel::hess(const Vec& q) const {
  auto sp = JetSpace::get(n_, 2);
  auto r = taylor(*sp, 2, q);
  std::vector<Mat> H(m_, Mat(n_, n_));
  std::vector<int> e(n_, 0);
  for (int k = 0; k < m_; ++k)
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        ++e[i];
        ++e[j];
        H[k](i, j) = r[k].partial(sp->index(e));
        --e[i];
        --e[j];
      }
  return H;
}

// --- QuadraticLagrangian ----------------------------------------------------

QuadraticLagrangian::QuadraticLagrangian(Mat M, Mat K, Vec f)
    : LagrangianModel(static_cast<int>(M.rows())), M_(std::move(M)), K_(std::move(K)), f_(std::move(f)) {
  const auto n = M_.rows();
  if (M_.cols() != n || K_.rows() != n || K_.cols() != n)
    throw DimensionError("QuadraticLagrangian: M and K must be n x n");
  if (f_.size() == 0) f_ = Vec::Zero(n);
  if (f_.size() != n) throw DimensionError("QuadraticLagrangian: f must have length n");
}

double QuadraticLagrangian::eval(const Vec& q, const Vec& qd, const Vec& u) const {
  check(q, qd, u);
  return 0.5 * qd.dot(M_ * qd) - 0.5 * q.dot(K_ * q) - f_.dot(q);
}

Jet QuadraticLagrangian::taylor(const JetSpace& sp, int degree, const Vec& q, const Vec& qd,
                                const Vec& u) const {
  check(q, qd, u);
  const int n = dim();
  auto a = detail::seed(sp, degree, q, 0), b = detail::seed(sp, degree, qd, n);
  Jet r(&sp, degree);
  for (int i = 0; i < n; ++i) {
    Jet mv(&sp, degree), kq(&sp, degree);
    for (int j = 0; j < n; ++j) {
      if (M_(i, j) != 0.0) mv += M_(i, j) * b[j];
      if (K_(i, j) != 0.0) kq += K_(i, j) * a[j];
    }
    r += 0.5 * (b[i] * mv) - 0.5 * (a[i] * kq) - f_[i] * a[i];
  }
  return r;
}

LagrangianPartials QuadraticLagrangian::partials(const Vec& q, const Vec& qd, const Vec& u,
                                                 int order) const {
  check(q, qd, u);
  if (order < 1 || order > 2) throw UnsupportedOrder("partials: order must be 1 or 2");
  const int n = dim();
  LagrangianPartials P;
  P.value = eval(q, qd, u);
  // Symmetric parts: only those enter the gradient of the quadratic form.
  P.Lq = -0.5 * (K_ + K_.transpose()) * q - f_;
  P.Lqd = 0.5 * (M_ + M_.transpose()) * qd;
  if (order == 2) {
    P.Lqq = -0.5 * (K_ + K_.transpose());
    P.Lqdqd = 0.5 * (M_ + M_.transpose());
    P.Lqdq = Mat::Zero(n, n);
  }
  return P;
}

// --- LinearDamping ----------------------------------------------------------

LinearDamping::LinearDamping(Mat C) : ForceModel(static_cast<int>(C.rows())), C_(std::move(C)) {
  if (C_.cols() != C_.rows()) throw DimensionError("LinearDamping: C must be square");
}

Vec LinearDamping::eval(const Vec& q, const Vec& qd, const Vec& u) const {
  check(q, qd, u);
  return -C_ * qd;
}

std::vector<Jet> LinearDamping::taylor(const JetSpace& sp, int degree, const Vec& q,
                                       const Vec& qd, const Vec& u) const {
  check(q, qd, u);
  const int n = dim();
  auto b = detail::seed(sp, degree, qd, n);
  std::vector<Jet> r(n, Jet(&sp, degree));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (C_(i, j) != 0.0) r[i] -= C_(i, j) * b[j];
  return r;
}

ForcePartials LinearDamping::partials(const Vec& q, const Vec& qd, const Vec& u) const {
  check(q, qd, u);
  const int n = dim();
  return {-C_ * qd, Mat::Zero(n, n), -C_, Mat::Zero(n, input_dim())};
}

Vec legendre_momentum(const LagrangianModel& L, const ContinuousState& s) {
  if (s.q.size() != L.dim() || s.qdot.size() != L.dim())
    throw DimensionError("legendre_momentum: dimension mismatch");
  return L.partials(s.q, s.qdot, Vec(), 1).Lqd;
}

}  // namespace svi
