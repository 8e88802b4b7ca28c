#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "svi/errors.hpp"
#include "svi/jet.hpp"
#include "svi/linalg.hpp"

namespace svi {

/// Highest total derivative order the public oracle hands out.
inline constexpr int kMaxOracleOrder = 4;

struct ContinuousState {
  Vec q;
  Vec qdot;
  double t = 0.0;

  ContinuousState() = default;
  ContinuousState(Vec q_, Vec qdot_, double t_ = 0.0);
};

struct DiscreteState {
  Vec q;
  Vec p;
  double t = 0.0;
  long k = 0;
};

/// Positive, finite time increment.
class StepSize {
 public:
  explicit StepSize(double h);
  double value() const { return h_; }
  operator double() const { return h_; }  // NOLINT

 private:
  double h_;
};

/// Partial derivatives of a scalar field, read from a Taylor jet.
/// Variables are numbered in the canonical layout [q, qdot, u].
class DerivativeSet {
 public:
  DerivativeSet(Jet jet, int nvars);

  int order() const { return jet_.is_constant() ? kMaxOracleOrder : jet_.degree(); }
  int nvars() const { return nvars_; }
  double value() const { return jet_.value(); }
  /// Mixed partial with respect to the listed variables (repeats allowed).
  double d(std::initializer_list<int> vars) const;
  double d(const std::vector<int>& vars) const;
  Vec gradient() const;
  Mat hessian() const;
  const Jet& jet() const { return jet_; }

 private:
  Jet jet_;
  int nvars_;
};

/// First and second partials of L at one point. Lqdq(i, j) = d2L / dqdot_i dq_j.
struct LagrangianPartials {
  double value = 0.0;
  Vec Lq, Lqd;
  Mat Lqq, Lqdqd, Lqdq;
};

/// Scalar L(q, qdot), optionally depending on a control sample u.
///
/// Subclasses provide `taylor`; everything else has a generic default built
/// on it. Analytic subclasses override `eval` and `partials` for speed.
class LagrangianModel {
 public:
  LagrangianModel(int n, int m = 0);
  virtual ~LagrangianModel() = default;

  int dim() const { return n_; }
  int input_dim() const { return m_; }
  int nvars() const { return 2 * n_ + m_; }

  /// Extra Taylor degree this model needs from its ingredients. A surrogate
  /// of degree d consumes its base at degree d + 2.
  virtual int extra_degree() const { return 0; }

  /// Taylor expansion about (q, qd, u) in `space`, whose first 2n + m
  /// variables are q, qd, u in that order.
  virtual Jet taylor(const JetSpace& space, int degree, const Vec& q, const Vec& qd,
                     const Vec& u) const = 0;

  virtual double eval(const Vec& q, const Vec& qd, const Vec& u = Vec()) const;
  /// order 1 fills value, Lq, Lqd; order 2 also the Hessian blocks.
  virtual LagrangianPartials partials(const Vec& q, const Vec& qd, const Vec& u = Vec(),
                                      int order = 2) const;

  /// All partials up to `order` (<= 4) at s.
  DerivativeSet oracle(const ContinuousState& s, int order, const Vec& u = Vec()) const;

 protected:
  void check(const Vec& q, const Vec& qd, const Vec& u) const;
  std::shared_ptr<const JetSpace> space_for(int degree) const;

 private:
  int n_, m_;
};

using LagrangianPtr = std::shared_ptr<const LagrangianModel>;

struct ForcePartials {
  Vec F;
  Mat Fq, Fqd, Fu;
};

/// Generalized force F(q, qdot, u) of length n.
class ForceModel {
 public:
  ForceModel(int n, int m = 0);
  virtual ~ForceModel() = default;

  int dim() const { return n_; }
  int input_dim() const { return m_; }

  virtual std::vector<Jet> taylor(const JetSpace& space, int degree, const Vec& q, const Vec& qd,
                                  const Vec& u) const = 0;
  virtual Vec eval(const Vec& q, const Vec& qd, const Vec& u = Vec()) const;
  virtual ForcePartials partials(const Vec& q, const Vec& qd, const Vec& u = Vec()) const;

 protected:
  void check(const Vec& q, const Vec& qd, const Vec& u) const;

 private:
  int n_, m_;
};

using ForcePtr = std::shared_ptr<const ForceModel>;

/// Holonomic constraints c(q) = 0, m of them, m < n.
class ConstraintModel {
 public:
  ConstraintModel(int n, int m);
  virtual ~ConstraintModel() = default;

  int dim() const { return n_; }
  int count() const { return m_; }

  /// Expansion about q; q occupies the first n variables of `space`.
  virtual std::vector<Jet> taylor(const JetSpace& space, int degree, const Vec& q) const = 0;
  virtual Vec eval(const Vec& q) const;
  virtual Mat jac(const Vec& q) const;
  /// One n x n Hessian per constraint.
  virtual std::vector<Mat> hess(const Vec& q) const;

 protected:
  void check(const Vec& q) const;

 private:
  int n_, m_;
};

using ConstraintPtr = std::shared_ptr<const ConstraintModel>;

/// L = 1/2 qd' M qd - 1/2 q' K q - f' q, with analytic partials.
class QuadraticLagrangian final : public LagrangianModel {
 public:
  QuadraticLagrangian(Mat M, Mat K, Vec f = Vec());

  const Mat& M() const { return M_; }
  const Mat& K() const { return K_; }
  const Vec& f() const { return f_; }

  Jet taylor(const JetSpace& space, int degree, const Vec& q, const Vec& qd,
             const Vec& u) const override;
  double eval(const Vec& q, const Vec& qd, const Vec& u = Vec()) const override;
  LagrangianPartials partials(const Vec& q, const Vec& qd, const Vec& u = Vec(),
                              int order = 2) const override;

 private:
  Mat M_, K_;
  Vec f_;
};

/// F = -C qd.
class LinearDamping final : public ForceModel {
 public:
  explicit LinearDamping(Mat C);
  const Mat& C() const { return C_; }

  std::vector<Jet> taylor(const JetSpace& space, int degree, const Vec& q, const Vec& qd,
                          const Vec& u) const override;
  Vec eval(const Vec& q, const Vec& qd, const Vec& u = Vec()) const override;
  ForcePartials partials(const Vec& q, const Vec& qd, const Vec& u = Vec()) const override;

 private:
  Mat C_;
};

// ---------------------------------------------------------------------------
// Models from generic callables. The callable is invoked with S = double for
// plain evaluation and S = Jet for derivatives, so write it once with `auto`.

namespace detail {

inline std::vector<Jet> seed(const JetSpace& sp, int degree, const Vec& x, int offset) {
  std::vector<Jet> out;
  out.reserve(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    out.push_back(Jet::variable(&sp, degree, offset + static_cast<int>(i), x[i]));
  return out;
}

inline std::vector<double> to_std(const Vec& x) { return {x.data(), x.data() + x.size()}; }

}  // namespace detail

/// f(span<const S> q, span<const S> qd) -> S
template <class F>
class LambdaLagrangian final : public LagrangianModel {
 public:
  LambdaLagrangian(int n, F f) : LagrangianModel(n), f_(std::move(f)) {}

  double eval(const Vec& q, const Vec& qd, const Vec& u = Vec()) const override {
    check(q, qd, u);
    auto a = detail::to_std(q), b = detail::to_std(qd);
    return f_(std::span<const double>(a), std::span<const double>(b));
  }

  Jet taylor(const JetSpace& sp, int degree, const Vec& q, const Vec& qd,
             const Vec& u) const override {
    check(q, qd, u);
    auto a = detail::seed(sp, degree, q, 0), b = detail::seed(sp, degree, qd, dim());
    Jet r = f_(std::span<const Jet>(a), std::span<const Jet>(b));
    return r.is_constant() ? r : r.truncated(degree);
  }

 private:
  F f_;
};

template <class F>
LagrangianPtr make_lagrangian(int n, F f) {
  return std::make_shared<LambdaLagrangian<F>>(n, std::move(f));
}

/// f(span<const S> q, span<const S> qd, span<const S> u) -> std::vector<S>
template <class F>
class LambdaForce final : public ForceModel {
 public:
  LambdaForce(int n, int m, F f) : ForceModel(n, m), f_(std::move(f)) {}

  Vec eval(const Vec& q, const Vec& qd, const Vec& u = Vec()) const override {
    check(q, qd, u);
    auto a = detail::to_std(q), b = detail::to_std(qd), c = detail::to_std(u);
    std::vector<double> r = f_(std::span<const double>(a), std::span<const double>(b),
                               std::span<const double>(c));
    if (static_cast<int>(r.size()) != dim()) throw DimensionError("force: output length");
    return Eigen::Map<const Vec>(r.data(), dim());
  }

  std::vector<Jet> taylor(const JetSpace& sp, int degree, const Vec& q, const Vec& qd,
                          const Vec& u) const override {
    check(q, qd, u);
    auto a = detail::seed(sp, degree, q, 0), b = detail::seed(sp, degree, qd, dim()),
         c = detail::seed(sp, degree, u, 2 * dim());
    std::vector<Jet> r =
        f_(std::span<const Jet>(a), std::span<const Jet>(b), std::span<const Jet>(c));
    if (static_cast<int>(r.size()) != dim()) throw DimensionError("force: output length");
    for (auto& x : r) x = x.truncated(degree);
    return r;
  }

 private:
  F f_;
};

template <class F>
ForcePtr make_force(int n, int m, F f) {
  return std::make_shared<LambdaForce<F>>(n, m, std::move(f));
}

/// f(span<const S> q) -> std::vector<S> of length m
template <class F>
class LambdaConstraint final : public ConstraintModel {
 public:
  LambdaConstraint(int n, int m, F f) : ConstraintModel(n, m), f_(std::move(f)) {}

  Vec eval(const Vec& q) const override {
    check(q);
    auto a = detail::to_std(q);
    std::vector<double> r = f_(std::span<const double>(a));
    if (static_cast<int>(r.size()) != count()) throw DimensionError("constraint: output length");
    return Eigen::Map<const Vec>(r.data(), count());
  }

  std::vector<Jet> taylor(const JetSpace& sp, int degree, const Vec& q) const override {
    check(q);
    auto a = detail::seed(sp, degree, q, 0);
    std::vector<Jet> r = f_(std::span<const Jet>(a));
    if (static_cast<int>(r.size()) != count()) throw DimensionError("constraint: output length");
    for (auto& x : r) x = x.truncated(degree);
    return r;
  }

 private:
  F f_;
};

template <class F>
ConstraintPtr make_constraint(int n, int m, F f) {
  return std::make_shared<LambdaConstraint<F>>(n, m, std::move(f));
}

/// Partials of a scalar callable f(q, qd) at `point`, up to `order` (<= 4).
/// Throws UnsupportedOrder above 4 and NonFiniteDerivative when any
/// coefficient overflows or turns NaN.
template <class F>
DerivativeSet derivative_oracle_from_dual_numbers(F f, const ContinuousState& point, int order) {
  const int n = static_cast<int>(point.q.size());
  return LambdaLagrangian<F>(n, std::move(f)).oracle(point, order);
}

/// p = dL/dqdot at s.
Vec legendre_momentum(const LagrangianModel& L, const ContinuousState& s);

}  // namespace svi
