#pragma once

// Reference Runge-Kutta integrators: classical RK4 for ODEs, and
// half-explicit methods (the 4-stage one built on the RK4 tableau, and HEM4)
// for constrained Lagrangian systems.

#include <functional>
#include <string>
#include <string_view>

#include "svi/del.hpp"
#include "svi/model.hpp"

namespace svi {

struct ButcherTableau {
  int stages = 0;
  Mat A;  // strictly lower triangular
  Vec b;
  Vec c;

  /// Shape, explicitness, sum(b) = 1 and c_i = sum_j A_ij, to `tol`.
  void validate(double tol = 1e-14) const;

  static ButcherTableau classical_rk4();
};

/// Parses the plain-text coefficient table format used by
/// data/hem4_coefficients.txt. Throws ConfigError on malformed input.
ButcherTableau parse_tableau(std::string_view text);

/// HEM4, from the table embedded at build time.
const ButcherTableau& hem4_tableau();

using OdeFn = std::function<Vec(double t, const Vec& x)>;

/// One explicit RK step with an arbitrary explicit tableau.
Vec explicit_rk_step(const ButcherTableau& tab, const OdeFn& f, const Vec& x, double t, double h);
Vec rk4_step(const OdeFn& f, const Vec& x, double t, double h);

/// First-order form x = (q, qd) of the Euler-Lagrange equations
/// A qddot = L_q - L_qdq qd + F, with control held at u.
OdeFn lagrangian_ode(LagrangianPtr L, ForcePtr F = nullptr, Vec u = Vec());

/// Constrained mechanical system in the stabilized index-2 form
///   q' = v + Dc(q)' mu,  A v' = b + F + Dc(q)' lambda,
///   0 = c(q),  0 = Dc(q) v.
/// Each stage solves for the algebraic variables z = (mu, lambda) of the
/// previous stage so that the new stage satisfies both constraints.
struct ConstrainedSystem {
  LagrangianPtr L;
  ConstraintPtr c;  // may be null: plain ODE
  ForcePtr F;       // may be null

  int dim() const { return L->dim(); }
  int count() const { return c ? c->count() : 0; }
};

struct ConstrainedState {
  Vec q, v;
  double t = 0.0;
  long k = 0;
};

struct HalfExplicitConfig {
  double eps_tol = 1e-10;
  int max_iter = 50;
};

/// Optional per-stage residual log: max |c|, |Dc v| over every stage.
struct StageMonitor {
  double max_residual = 0.0;
  long stages = 0;
};

ConstrainedState half_explicit_step(const ButcherTableau& tab, const ConstrainedSystem& sys,
                                    const ConstrainedState& s, double h,
                                    const HalfExplicitConfig& cfg = {},
                                    StageMonitor* monitor = nullptr);
ConstrainedState herk4_step(const ConstrainedSystem& sys, const ConstrainedState& s, double h,
                            const HalfExplicitConfig& cfg = {}, StageMonitor* monitor = nullptr);
ConstrainedState hem4_step(const ConstrainedSystem& sys, const ConstrainedState& s, double h,
                           const HalfExplicitConfig& cfg = {}, StageMonitor* monitor = nullptr);

}  // namespace svi
