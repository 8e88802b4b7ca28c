#pragma once

// Surrogate Lagrangians: the nominal L plus the sign-flipped leading term of
// the midpoint integrator's modified Lagrangian, so that stepping the
// surrogate reproduces the nominal flow to O(h^4).
//
// With A = L_qdqd, b = L_q - L_qdq qd and f the generalized force acting on
// the system (zero, an applied force F, or the constraint force Dc' lambda):
//
//   L^ = L + h^2/24 (qd' L_qq qd - b' A^-1 b + f' A^-1 f)
//
// qddot has already been eliminated through A qddot = b + f.

#include <array>
#include <functional>
#include <memory>
#include <utility>

#include "svi/del.hpp"
#include "svi/model.hpp"

namespace svi {

class SurrogateLagrangian final : public LagrangianModel {
 public:
  /// `c` and `F` are optional; at most one of them may be set.
  SurrogateLagrangian(LagrangianPtr base, double h, ConstraintPtr c = nullptr,
                      ForcePtr F = nullptr);

  const LagrangianModel& base() const { return *base_; }
  const LagrangianPtr& base_ptr() const { return base_; }
  double h() const { return h_; }
  int order() const { return 2; }

  int extra_degree() const override;
  Jet taylor(const JetSpace& space, int degree, const Vec& q, const Vec& qd,
             const Vec& u) const override;

 private:
  LagrangianPtr base_;
  double h_;
  ConstraintPtr c_;
  ForcePtr F_;
};

using SurrogatePtr = std::shared_ptr<const SurrogateLagrangian>;

SurrogatePtr surrogate_conservative(LagrangianPtr L, double h);

/// lambda(q, qd) = -(Dc A^-1 Dc')^-1 (Dc A^-1 b + D2c[qd, qd]), the multiplier
/// that keeps c'' = 0 along A qddot = b + Dc' lambda.
Vec constraint_multiplier(const LagrangianModel& L, const ConstraintModel& c,
                          const ContinuousState& s);

struct ConstrainedSurrogate {
  SurrogatePtr lagrangian;
  ConstraintPtr constraint;  // the input model, untouched
};

ConstrainedSurrogate surrogate_constrained(LagrangianPtr L, ConstraintPtr c, double h);

/// Coefficients of the surrogate virtual work, G^ = H1 . dq + H2 . dqd.
/// Both depend on the control rate udot as well as on (q, qd, u); the
/// control acceleration is not observable from samples and is taken as zero.
class SurrogateForceTerms {
 public:
  SurrogateForceTerms(LagrangianPtr L, ForcePtr F, double h);

  int dim() const { return L_->dim(); }
  int input_dim() const { return F_->input_dim(); }
  double h() const { return h_; }

  Vec H1(const Vec& q, const Vec& qd, const Vec& u, const Vec& udot = Vec()) const;
  Vec H2(const Vec& q, const Vec& qd, const Vec& u, const Vec& udot = Vec()) const;

  /// H1 - d/dt H2 along the forced flow, at `degree` (0 or 1) in the space of
  /// (q, qd, u) variables.
  std::vector<Jet> interior(const JetSpace& space, int degree, const Vec& q, const Vec& qd,
                            const Vec& u, const Vec& udot) const;
  /// Jet space large enough for interior() at `degree`.
  std::shared_ptr<const JetSpace> space_for(int degree) const;

 private:
  struct Raw {
    std::vector<Jet> H1, H2, theta, qd;
  };
  Raw raw(const JetSpace& space, int degree, const Vec& q, const Vec& qd, const Vec& u,
          const Vec& udot) const;
  Vec zero_udot(const Vec& udot) const;

  LagrangianPtr L_;
  ForcePtr F_;
  double h_;
};

using ForceTermsPtr = std::shared_ptr<const SurrogateForceTerms>;

struct ForcedSurrogate {
  SurrogatePtr lagrangian;
  ForceTermsPtr terms;
};

ForcedSurrogate surrogate_forced(LagrangianPtr L, ForcePtr F, double h);

/// (F^_d^-, F^_d^+) for the step q_k -> q_next. The left force needs q_prev.
/// `u_prev` sets the control rate at the left boundary; when empty the
/// forward rate (u_next - u_k) / h is used there too.
std::pair<Vec, Vec> surrogate_discrete_forces(const SurrogateForceTerms& terms, const Vec& q_prev,
                                              const Vec& q_k, const Vec& q_next, const Vec& u_k,
                                              const Vec& u_next, double h,
                                              const Vec& u_prev = Vec());

/// State of the forced surrogate stepper: the DEL state plus q_{k-1}.
struct HistoryState : DiscreteState {
  Vec q_prev;
};

/// Drives the forced surrogate DEL. Controls are sampled by step index.
class ForcedSurrogateStepper {
 public:
  using Control = std::function<Vec(long k)>;

  explicit ForcedSurrogateStepper(ForcedSurrogate s, Control control = {});

  /// Nominal momentum p0 = dL/dqdot and the bootstrap q_{-1} = q0 - h qd0.
  HistoryState init(const ContinuousState& s0, double h) const;
  HistoryState step(const HistoryState& s, const IntegratorConfig& cfg,
                    StepStats* stats = nullptr) const;

 private:
  Vec u(long k) const;

  ForcedSurrogate s_;
  Control control_;
};

// --- Linear systems ----------------------------------------------------------

struct Rational {
  long long num;
  long long den;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Rational&) const = default;
};

/// Magnitudes of the h^2, h^4, h^6, h^8 series coefficients.
/// M_s = M - sum_j mass[j] (K M^-1)^j K h^(2j+2)
/// K_s = K + sum_j stiffness[j] (K M^-1)^(j+1) K h^(2j+2)
const std::array<Rational, 4>& linear_surrogate_mass_coefficients();
const std::array<Rational, 4>& linear_surrogate_stiffness_coefficients();

struct LinearSurrogateParams {
  Mat Ms;
  Mat Ks;
  int order = 2;  // highest power of h kept
  double h = 0.0;

  std::shared_ptr<const QuadraticLagrangian> lagrangian() const;
};

/// Series truncated after the h^order terms; order in {0, 2, 4, 6, 8}, where 0
/// returns the nominal matrices.
LinearSurrogateParams linear_surrogate(const Mat& M, const Mat& K, double h, int order);

/// Quadratic form Q(q, qd) = 1/2 x' G x with x = (q, qd).
struct QuadraticForm {
  Mat G;

  double eval(const Vec& q, const Vec& qd) const;
  QuadraticForm operator+(const QuadraticForm& o) const { return {G + o.G}; }
  QuadraticForm operator-(const QuadraticForm& o) const { return {G - o.G}; }
  QuadraticForm operator*(double s) const { return {G * s}; }
  /// Mass block (coefficient of 1/2 qd' . qd) and stiffness block (of -1/2 q' . q).
  Mat mass() const;
  Mat stiffness() const;
};

/// Operators on quadratic forms along the flow of M qddot = -K q.
class QuadraticFlow {
 public:
  QuadraticFlow(const Mat& M, const Mat& K);

  int dim() const { return n_; }
  /// The nominal L as a form.
  QuadraticForm lagrangian() const { return lag_; }
  /// Time derivative along the flow.
  QuadraticForm dt(const QuadraticForm& Q, int times = 1) const;
  QuadraticForm theta2(const QuadraticForm& Q) const;
  QuadraticForm theta4(const QuadraticForm& Q) const;
  QuadraticForm phi2(const QuadraticForm& Q) const;
  QuadraticForm phi4(const QuadraticForm& Q) const;

 private:
  // Q_q . q^(j) or Q_qd . q^(j) as a form.
  QuadraticForm along(const QuadraticForm& Q, int slot, int j) const;
  // Q_xx applied to (q^(a) in slot sa, q^(b) in slot sb), as a form.
  QuadraticForm second(const QuadraticForm& Q, int sa, int a, int sb, int b) const;
  Mat qder(int j) const;  // q^(j) = qder(j) x

  int n_;
  Mat J_;
  QuadraticForm lag_;
};

struct HigherOrderOperators {
  QuadraticForm L, theta2, theta4, phi2, phi4, phi2_phi2, theta2_ddot;
  double h = 0.0;

  /// L - h^2 Phi2(L) - h^4 Phi4(L) + h^4 Phi2(Phi2(L)) + h^4/24 theta2''(L)
  QuadraticForm surrogate4() const;
};

/// Only for L = 1/2 qd' M qd - 1/2 q' K q; anything else is UnsupportedModel.
HigherOrderOperators higher_order_operators(const LagrangianModel& L, double h);

}  // namespace svi
