#pragma once

// Midpoint variational integrator in position-momentum form.
//
//   L_d(q_k, q_{k+1}) = h L((q_k + q_{k+1}) / 2, (q_{k+1} - q_k) / h)
//   p_k + D1 L_d(q_k, q_{k+1}) = 0      solved for q_{k+1} by Newton
//   p_{k+1} = D2 L_d(q_k, q_{k+1})

#include <cmath>
#include <functional>
#include <vector>

#include "svi/model.hpp"

namespace svi {

struct IntegratorConfig {
  double h = 0.0;
  double eps_tol = 1e-9;
  int max_iter = 50;

  void validate() const;
};

struct ConstrainedDiscreteState : DiscreteState {
  Vec lambda;
};

/// Instrumentation shared by all steppers. Newton iteration count means
/// Jacobian solves; every iteration evaluates D2D1 L_d once and the residual
/// (hence D1 L_d) once more, plus one initial residual per step.
struct StepStats {
  long steps = 0;
  long newton_iterations = 0;
  long d1_evals = 0;
  long d2d1_evals = 0;
  double d1_seconds = 0.0;
  double d2d1_seconds = 0.0;
  double step_seconds = 0.0;

  StepStats& operator+=(const StepStats& o);
};

struct NewtonResult {
  Vec x;
  int iterations = 0;
  double residual = 0.0;
};

using ResidualFn = std::function<Vec(const Vec&)>;
using JacobianFn = std::function<Mat(const Vec&)>;

/// x <- x - Df(x)^{-1} f(x) until |f(x)|_inf <= eps_tol.
NewtonResult newton_solve(const ResidualFn& residual, const JacobianFn& jacobian, const Vec& x0,
                          const IntegratorConfig& cfg);

double discrete_lagrangian(const LagrangianModel& L, const Vec& q_k, const Vec& q_next, double h,
                           const Vec& u = Vec());
Vec d1_ld(const LagrangianModel& L, const Vec& q_k, const Vec& q_next, double h,
          const Vec& u = Vec());
Vec d2_ld(const LagrangianModel& L, const Vec& q_k, const Vec& q_next, double h,
          const Vec& u = Vec());
Mat d2d1_ld(const LagrangianModel& L, const Vec& q_k, const Vec& q_next, double h,
            const Vec& u = Vec());

/// p = dL/dqdot of the nominal model at s.
DiscreteState init_from_velocity(const LagrangianModel& L, const ContinuousState& s);
/// p_1 = D2 L_d(q0, q1).
DiscreteState init_from_pair(const LagrangianModel& L, const Vec& q0, const Vec& q1, double h,
                             double t0 = 0.0);

/// (F_d^-, F_d^+), both (h/2) F at the midpoint with control u_k.
std::pair<Vec, Vec> discrete_forces(const ForceModel& F, const Vec& q_k, const Vec& q_next,
                                    const Vec& u_k, double h);

/// Extra discrete forces on the two DEL sides, as functions of q_{k+1}.
struct SideForces {
  std::function<Vec(const Vec&)> minus;
  std::function<Mat(const Vec&)> minus_jac;  // d F_d^- / d q_{k+1}
  std::function<Vec(const Vec&)> plus;
};

/// General one-step map; `u_L` is the control sample the Lagrangian sees
/// (empty for ordinary models), `forces` may be null.
DiscreteState step_del(const LagrangianModel& L, const Vec& u_L, const DiscreteState& s,
                       const SideForces* forces, const IntegratorConfig& cfg,
                       StepStats* stats = nullptr);

DiscreteState step_unforced(const LagrangianModel& L, const DiscreteState& s,
                            const IntegratorConfig& cfg, StepStats* stats = nullptr);

DiscreteState step_forced(const LagrangianModel& L, const ForceModel& F, const DiscreteState& s,
                          const Vec& u_k, const IntegratorConfig& cfg,
                          StepStats* stats = nullptr);

/// Solves [p_k + D1 L_d + F_d^- - Dc(q_k)' lambda ; c(q_{k+1})] = 0 for
/// (q_{k+1}, lambda_k). F may be null. The returned momentum is
/// D2 L_d + F_d^+, which keeps the one-step map equivalent to the two-step
/// constrained DEL recursion.
ConstrainedDiscreteState step_constrained(const LagrangianModel& L, const ForceModel* F,
                                          const ConstraintModel& c,
                                          const ConstrainedDiscreteState& s, const Vec& u_k,
                                          const IntegratorConfig& cfg,
                                          StepStats* stats = nullptr);

/// floor((t_final - t0) / h), tolerant to representation error in h.
long step_count(double t0, double t_final, double h);

/// Runs `step` from s0 up to t_final; returns step_count + 1 states with
/// t_k = t0 + k h. Errors are rethrown with the failing step index attached.
template <class State, class Stepper>
std::vector<State> integrate(Stepper&& step, const State& s0, double t_final,
                             const IntegratorConfig& cfg) {
  cfg.validate();
  if (!(t_final > s0.t)) throw InvalidParameter("integrate: t_final must exceed t0");
  const long n = step_count(s0.t, t_final, cfg.h);
  std::vector<State> out;
  out.reserve(static_cast<size_t>(n) + 1);
  out.push_back(s0);
  for (long k = 0; k < n; ++k) {
    try {
      State next = step(out.back());
      next.k = out.back().k + 1;
      next.t = s0.t + static_cast<double>(next.k - s0.k) * cfg.h;
      out.push_back(std::move(next));
    } catch (Error& e) {
      e.set_step_index(k);
      throw;
    }
  }
  return out;
}

}  // namespace svi
