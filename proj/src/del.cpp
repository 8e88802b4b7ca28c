#include "svi/del.hpp"

#include <chrono>

namespace svi {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void check_pair(const LagrangianModel& L, const Vec& a, const Vec& b, double h) {
  if (a.size() != L.dim() || b.size() != L.dim()) throw DimensionError("DEL: dimension mismatch");
  if (!(h > 0.0)) throw InvalidParameter("DEL: h must be positive");
}

LagrangianPartials at_midpoint(const LagrangianModel& L, const Vec& qk, const Vec& qn, double h,
                               const Vec& u, int order) {
  return L.partials(0.5 * (qk + qn), (qn - qk) / h, u, order);
}

Mat d2d1_from(const LagrangianPartials& P, double h) {
  return (h / 4.0) * P.Lqq + 0.5 * P.Lqdq.transpose() - 0.5 * P.Lqdq - (1.0 / h) * P.Lqdqd;
}

void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) throw NonFiniteState(what);
}

}  // namespace

void IntegratorConfig::validate() const {
  if (!(h > 0.0) || !std::isfinite(h)) throw InvalidParameter("IntegratorConfig: h must be positive");
  if (!(eps_tol > 0.0)) throw InvalidParameter("IntegratorConfig: eps_tol must be positive");
  if (max_iter < 1) throw InvalidParameter("IntegratorConfig: max_iter must be >= 1");
}

StepStats& StepStats::operator+=(const StepStats& o) {
  steps += o.steps;
  newton_iterations += o.newton_iterations;
  d1_evals += o.d1_evals;
  d2d1_evals += o.d2d1_evals;
  d1_seconds += o.d1_seconds;
  d2d1_seconds += o.d2d1_seconds;
  step_seconds += o.step_seconds;
  return *this;
}

NewtonResult newton_solve(const ResidualFn& residual, const JacobianFn& jacobian, const Vec& x0,
                          const IntegratorConfig& cfg) {
  NewtonResult r;
  r.x = x0;
  Vec f = residual(r.x);
  r.residual = inf_norm(f);
  while (!(r.residual <= cfg.eps_tol)) {
    if (!std::isfinite(r.residual)) throw NonFiniteState("newton_solve: non-finite residual");
    if (r.iterations >= cfg.max_iter)
      throw NoConvergence("newton_solve: iteration cap reached", r.residual);
    r.x -= lu_solve(jacobian(r.x), f);
    ++r.iterations;
    f = residual(r.x);
    r.residual = inf_norm(f);
  }
  return r;
}

double discrete_lagrangian(const LagrangianModel& L, const Vec& q_k, const Vec& q_next, double h,
                           const Vec& u) {
  check_pair(L, q_k, q_next, h);
  return h * L.eval(0.5 * (q_k + q_next), (q_next - q_k) / h, u);
}

Vec d1_ld(const LagrangianModel& L, const Vec& q_k, const Vec& q_next, double h, const Vec& u) {
  check_pair(L, q_k, q_next, h);
  const auto P = at_midpoint(L, q_k, q_next, h, u, 1);
  return (h / 2.0) * P.Lq - P.Lqd;
}

Vec d2_ld(const LagrangianModel& L, const Vec& q_k, const Vec& q_next, double h, const Vec& u) {
  check_pair(L, q_k, q_next, h);
  const auto P = at_midpoint(L, q_k, q_next, h, u, 1);
  return (h / 2.0) * P.Lq + P.Lqd;
}

Mat d2d1_ld(const LagrangianModel& L, const Vec& q_k, const Vec& q_next, double h, const Vec& u) {
  check_pair(L, q_k, q_next, h);
  return d2d1_from(at_midpoint(L, q_k, q_next, h, u, 2), h);
}

DiscreteState init_from_velocity(const LagrangianModel& L, const ContinuousState& s) {
  DiscreteState d;
  d.q = s.q;
  d.p = legendre_momentum(L, s);
  d.t = s.t;
  return d;
}

DiscreteState init_from_pair(const LagrangianModel& L, const Vec& q0, const Vec& q1, double h,
                             double t0) {
  DiscreteState d;
  d.q = q1;
  d.p = d2_ld(L, q0, q1, h);
  d.t = t0 + h;
  d.k = 1;
  return d;
}

std::pair<Vec, Vec> discrete_forces(const ForceModel& F, const Vec& q_k, const Vec& q_next,
                                    const Vec& u_k, double h) {
  const Vec f = (h / 2.0) * F.eval(0.5 * (q_k + q_next), (q_next - q_k) / h, u_k);
  return {f, f};
}

DiscreteState step_del(const LagrangianModel& L, const Vec& u_L, const DiscreteState& s,
                       const SideForces* forces, const IntegratorConfig& cfg, StepStats* stats) {
  cfg.validate();
  if (s.q.size() != L.dim() || s.p.size() != L.dim()) throw DimensionError("step: state length");
  require_finite(s.q, "step: non-finite q");
  require_finite(s.p, "step: non-finite p");
  const auto t_start = Clock::now();
  const double h = cfg.h;
  const Vec& qk = s.q;
  StepStats local;
  LagrangianPartials last;  // gradient at the latest residual point

  auto residual = [&](const Vec& qn) {
    const auto t0 = Clock::now();
    last = at_midpoint(L, qk, qn, h, u_L, 1);
    Vec r = s.p + ((h / 2.0) * last.Lq - last.Lqd);
    local.d1_seconds += seconds_since(t0);
    ++local.d1_evals;
    if (forces) r += forces->minus(qn);
    return r;
  };
  auto jacobian = [&](const Vec& qn) {
    const auto t0 = Clock::now();
    Mat J = d2d1_from(at_midpoint(L, qk, qn, h, u_L, 2), h);
    local.d2d1_seconds += seconds_since(t0);
    ++local.d2d1_evals;
    if (forces) J += forces->minus_jac(qn);
    return J;
  };

  const NewtonResult nr = newton_solve(residual, jacobian, qk, cfg);
  DiscreteState out;
  out.q = nr.x;
  out.p = (h / 2.0) * last.Lq + last.Lqd;
  if (forces) out.p += forces->plus(nr.x);
  out.t = s.t + h;
  out.k = s.k + 1;
  require_finite(out.q, "step: non-finite q");
  require_finite(out.p, "step: non-finite p");

  if (stats) {
    local.steps = 1;
    local.newton_iterations = nr.iterations;
    local.step_seconds = seconds_since(t_start);
    *stats += local;
  }
  return out;
}

DiscreteState step_unforced(const LagrangianModel& L, const DiscreteState& s,
                            const IntegratorConfig& cfg, StepStats* stats) {
  return step_del(L, Vec(), s, nullptr, cfg, stats);
}

namespace {

SideForces nominal_forces(const ForceModel& F, const Vec& qk, const Vec& u_k, double h) {
  SideForces sf;
  sf.minus = [&F, &qk, &u_k, h](const Vec& qn) {
    return Vec((h / 2.0) * F.eval(0.5 * (qk + qn), (qn - qk) / h, u_k));
  };
  sf.minus_jac = [&F, &qk, &u_k, h](const Vec& qn) {
    const auto P = F.partials(0.5 * (qk + qn), (qn - qk) / h, u_k);
    return Mat((h / 2.0) * (0.5 * P.Fq + (1.0 / h) * P.Fqd));
  };
  sf.plus = sf.minus;
  return sf;
}

}  // namespace

DiscreteState step_forced(const LagrangianModel& L, const ForceModel& F, const DiscreteState& s,
                          const Vec& u_k, const IntegratorConfig& cfg, StepStats* stats) {
  if (F.dim() != L.dim()) throw DimensionError("step_forced: force dimension");
  const SideForces sf = nominal_forces(F, s.q, u_k, cfg.h);
  return step_del(L, Vec(), s, &sf, cfg, stats);
}

ConstrainedDiscreteState step_constrained(const LagrangianModel& L, const ForceModel* F,
                                          const ConstraintModel& c,
                                          const ConstrainedDiscreteState& s, const Vec& u_k,
                                          const IntegratorConfig& cfg, StepStats* stats) {
  cfg.validate();
  const int n = L.dim(), m = c.count();
  if (c.dim() != n || s.q.size() != n || s.p.size() != n)
    throw DimensionError("step_constrained: dimension mismatch");
  if (F && F->dim() != n) throw DimensionError("step_constrained: force dimension");
  require_finite(s.q, "step: non-finite q");
  require_finite(s.p, "step: non-finite p");
  const auto t_start = Clock::now();
  const double h = cfg.h;
  const Vec& qk = s.q;
  const Mat Dk = c.jac(qk);
  if (lu_singular(Dk * Dk.transpose()))
    throw ConstraintDegeneracy("step_constrained: constraint Jacobian lost rank");
  const Mat DkT = Dk.transpose();

  SideForces sf;
  if (F) sf = nominal_forces(*F, qk, u_k, h);
  StepStats local;
  LagrangianPartials last;

  auto residual = [&](const Vec& x) {
    const Vec qn = x.head(n);
    const auto t0 = Clock::now();
    last = at_midpoint(L, qk, qn, h, Vec(), 1);
    Vec top = s.p + ((h / 2.0) * last.Lq - last.Lqd);
    local.d1_seconds += seconds_since(t0);
    ++local.d1_evals;
    if (F) top += sf.minus(qn);
    top -= DkT * x.tail(m);
    Vec r(n + m);
    r << top, c.eval(qn);
    return r;
  };
  auto jacobian = [&](const Vec& x) {
    const Vec qn = x.head(n);
    const auto t0 = Clock::now();
    Mat A = d2d1_from(at_midpoint(L, qk, qn, h, Vec(), 2), h);
    local.d2d1_seconds += seconds_since(t0);
    ++local.d2d1_evals;
    if (F) A += sf.minus_jac(qn);
    Mat J = Mat::Zero(n + m, n + m);
    J.topLeftCorner(n, n) = A;
    J.topRightCorner(n, m) = -DkT;
    J.bottomLeftCorner(m, n) = c.jac(qn);
    return J;
  };

  Vec x0(n + m);
  x0 << qk, (s.lambda.size() == m ? s.lambda : Vec::Zero(m));
  const NewtonResult nr = newton_solve(residual, jacobian, x0, cfg);

  ConstrainedDiscreteState out;
  out.q = nr.x.head(n);
  out.lambda = nr.x.tail(m);
  out.p = (h / 2.0) * last.Lq + last.Lqd;
  if (F) out.p += sf.plus(out.q);
  out.t = s.t + h;
  out.k = s.k + 1;
  require_finite(out.q, "step: non-finite q");
  require_finite(out.p, "step: non-finite p");
  if (stats) {
    local.steps = 1;
    local.newton_iterations = nr.iterations;
    local.step_seconds = seconds_since(t_start);
    *stats += local;
  }
  return out;
}

long step_count(double t0, double t_final, double h) {
  const double r = (t_final - t0) / h;
  return static_cast<long>(std::floor(r + 1e-9 * std::max(1.0, r)));
}

}  // namespace svi
