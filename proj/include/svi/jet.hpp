#pragma once

// Truncated multivariate Taylor polynomials ("jets") for forward-mode
// differentiation to arbitrary mixed order. A jet of degree d in N variables
// stores every Taylor coefficient c_a with |a| <= d; the partial derivative
// d^a f equals a! * c_a. Products truncate at the smaller operand degree, so
// one pass through a model evaluates every partial up to that degree.

#include <memory>
#include <span>
#include <vector>

namespace svi {

class JetSpace {
 public:
  /// Shared, immutable space for `nvars` variables up to degree `max_degree`.
  static std::shared_ptr<const JetSpace> get(int nvars, int max_degree);

  int nvars() const { return nvars_; }
  int max_degree() const { return max_degree_; }
  /// Number of monomials of total degree <= d.
  int size(int d) const { return offsets_[d + 1]; }
  int degree_of(int idx) const { return deg_[idx]; }
  const std::vector<int>& exponents(int idx) const { return exps_[idx]; }
  /// Index of a monomial, or -1 if its degree exceeds max_degree.
  int index(const std::vector<int>& exps) const;
  /// Index of monomial idx multiplied by x_var (idx must have degree < max).
  int up(int idx, int var) const { return up_[static_cast<size_t>(idx) * nvars_ + var]; }
  /// Index of the product of monomials a and b; deg(a)+deg(b) <= max_degree.
  const int* mul_row(int a) const { return mul_.data() + mul_start_[a]; }

  JetSpace(int nvars, int max_degree);

 private:
  int nvars_, max_degree_;
  std::vector<int> offsets_;  // offsets_[d] = first index of degree d
  std::vector<int> deg_;
  std::vector<std::vector<int>> exps_;
  std::vector<int> up_;
  std::vector<size_t> mul_start_;
  std::vector<int> mul_;
};

/// Truncated Taylor polynomial. A jet without a space is a plain constant and
/// behaves as if it had infinite degree.
class Jet {
 public:
  Jet() = default;
  Jet(double value) : c_{value} {}  // NOLINT: implicit promotion is the point
  /// Zero jet of the given degree.
  Jet(const JetSpace* space, int degree);

  /// The jet x_var expanded about `value`.
  static Jet variable(const JetSpace* space, int degree, int var, double value);

  bool is_constant() const { return space_ == nullptr; }
  const JetSpace* space() const { return space_; }
  int degree() const { return degree_; }
  double value() const { return c_.empty() ? 0.0 : c_[0]; }
  std::span<const double> coeffs() const { return c_; }
  double coeff(int idx) const { return idx < static_cast<int>(c_.size()) ? c_[idx] : 0.0; }
  double& coeff_ref(int idx) { return c_[idx]; }

  /// Partial derivative for the multi-index of monomial idx.
  double partial(int idx) const;
  /// d/dx_var, one degree lower.
  Jet derivative(int var) const;
  /// Drops all terms above degree d.
  Jet truncated(int d) const;
  /// True when every coefficient is finite.
  bool finite() const;

  Jet& operator+=(const Jet& o);
  Jet& operator-=(const Jet& o);
  Jet& operator*=(const Jet& o);
  Jet& operator/=(const Jet& o) { return *this = *this * inverse(o); }
  Jet& operator*=(double s);

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator*(const Jet& a, const Jet& b);
  friend Jet operator/(const Jet& a, const Jet& b) { return a * inverse(b); }
  friend Jet operator-(Jet a) { return a *= -1.0; }
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }

  friend Jet inverse(const Jet& a);
  friend Jet sqrt(const Jet& a);
  friend Jet pow(const Jet& a, double e);
  friend Jet exp(const Jet& a);
  friend Jet log(const Jet& a);
  friend Jet sin(const Jet& a);
  friend Jet cos(const Jet& a);

 private:
  // f(a0 + N) = sum_k coef[k] N^k, N the nilpotent part of a.
  static Jet compose(const Jet& a, const std::vector<double>& coef);
  void widen(const Jet& o);

  const JetSpace* space_ = nullptr;
  int degree_ = 0;
  std::vector<double> c_{0.0};
};

}  // namespace svi
