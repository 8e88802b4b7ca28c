#include "svi/jet.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <utility>

#include "svi/errors.hpp"

namespace svi {

namespace {

// Monomials of exactly degree d in n variables, in lexicographic order
// of exponent vectors (descending in the first variable).
void enumerate(int n, int d, int var, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (var == n - 1) {
    cur[var] = d;
    out.push_back(cur);
    cur[var] = 0;
    return;
  }
  for (int e = d; e >= 0; --e) {
    cur[var] = e;
    enumerate(n, d - e, var + 1, cur, out);
  }
  cur[var] = 0;
}

}  // namespace

JetSpace::JetSpace(int nvars, int max_degree) : nvars_(nvars), max_degree_(max_degree) {
  if (nvars < 1 || max_degree < 0) throw InvalidParameter("JetSpace: bad shape");
  std::vector<int> cur(nvars, 0);
  offsets_.push_back(0);
  for (int d = 0; d <= max_degree; ++d) {
    enumerate(nvars, d, 0, cur, exps_);
    offsets_.push_back(static_cast<int>(exps_.size()));
  }
  const int total = static_cast<int>(exps_.size());
  deg_.resize(total);
  std::map<std::vector<int>, int> lookup;
  for (int i = 0; i < total; ++i) {
    int d = 0;
    for (int e : exps_[i]) d += e;
    deg_[i] = d;
    lookup.emplace(exps_[i], i);
  }
  up_.assign(static_cast<size_t>(total) * nvars, -1);
  const int nup = max_degree > 0 ? size(max_degree - 1) : 0;
  for (int i = 0; i < nup; ++i) {
    for (int v = 0; v < nvars; ++v) {
      auto e = exps_[i];
      ++e[v];
      up_[static_cast<size_t>(i) * nvars + v] = lookup.at(e);
    }
  }
  mul_start_.resize(total + 1);
  for (int a = 0; a < total; ++a) {
    mul_start_[a] = mul_.size();
    const int nb = size(max_degree - deg_[a]);
    for (int b = 0; b < nb; ++b) {
      auto e = exps_[a];
      for (int v = 0; v < nvars; ++v) e[v] += exps_[b][v];
      mul_.push_back(lookup.at(e));
    }
  }
  mul_start_[total] = mul_.size();
}

std::shared_ptr<const JetSpace> JetSpace::get(int nvars, int max_degree) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::shared_ptr<const JetSpace>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{nvars, max_degree}];
  if (!slot) slot = std::make_shared<const JetSpace>(nvars, max_degree);
  return slot;
}

int JetSpace::index(const std::vector<int>& exps) const {
  if (static_cast<int>(exps.size()) != nvars_) return -1;
  int d = 0;
  for (int e : exps) d += e;
  if (d > max_degree_) return -1;
  for (int i = offsets_[d]; i < offsets_[d + 1]; ++i)
    if (exps_[i] == exps) return i;
  return -1;
}

Jet::Jet(const JetSpace* space, int degree)
    : space_(space), degree_(degree), c_(space->size(degree), 0.0) {
  if (degree > space->max_degree()) throw UnsupportedOrder("Jet: degree exceeds space");
}

Jet Jet::variable(const JetSpace* space, int degree, int var, double value) {
  Jet j(space, degree);
  j.c_[0] = value;
  if (degree >= 1) j.c_[1 + var] = 1.0;
  return j;
}

double Jet::partial(int idx) const {
  if (is_constant()) return idx == 0 ? c_[0] : 0.0;
  double f = 1.0;
  for (int e : space_->exponents(idx))
    for (int k = 2; k <= e; ++k) f *= k;
  return f * coeff(idx);
}

Jet Jet::derivative(int var) const {
  if (is_constant() || degree_ == 0) return Jet(0.0);
  Jet r(space_, degree_ - 1);
  const int n = space_->size(degree_ - 1);
  for (int i = 0; i < n; ++i) {
    const int j = space_->up(i, var);
    r.c_[i] = (space_->exponents(i)[var] + 1) * c_[j];
  }
  return r;
}

Jet Jet::truncated(int d) const {
  if (is_constant() || d >= degree_) return *this;
  Jet r = *this;
  r.degree_ = d;
  r.c_.resize(space_->size(d));
  return r;
}

bool Jet::finite() const {
  for (double v : c_)
    if (!std::isfinite(v)) return false;
  return true;
}

void Jet::widen(const Jet& o) {
  // Lift a constant into o's space and degree.
  const double v = c_[0];
  space_ = o.space_;
  degree_ = o.degree_;
  c_.assign(space_->size(degree_), 0.0);
  c_[0] = v;
}

Jet& Jet::operator+=(const Jet& o) {
  if (o.is_constant()) {
    c_[0] += o.c_[0];
    return *this;
  }
  if (is_constant()) widen(o);
  if (o.degree_ < degree_) *this = truncated(o.degree_);
  for (size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
  return *this;
}

Jet& Jet::operator-=(const Jet& o) {
  if (o.is_constant()) {
    c_[0] -= o.c_[0];
    return *this;
  }
  if (is_constant()) widen(o);
  if (o.degree_ < degree_) *this = truncated(o.degree_);
  for (size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
  return *this;
}

Jet& Jet::operator*=(double s) {
  for (double& v : c_) v *= s;
  return *this;
}

Jet& Jet::operator*=(const Jet& o) { return *this = *this * o; }

Jet operator*(const Jet& a, const Jet& b) {
  if (a.is_constant()) return b * a.c_[0];
  if (b.is_constant()) return a * b.c_[0];
  const JetSpace* sp = a.space_;
  const int D = std::min(a.degree_, b.degree_);
  Jet r(sp, D);
  const int na = sp->size(D);
  const double* B = b.c_.data();
  double* R = r.c_.data();
  for (int i = 0; i < na; ++i) {
    const double ai = a.c_[i];
    if (ai == 0.0) continue;
    const int nb = sp->size(D - sp->degree_of(i));
    const int* row = sp->mul_row(i);
    for (int j = 0; j < nb; ++j) R[row[j]] += ai * B[j];
  }
  return r;
}

Jet Jet::compose(const Jet& a, const std::vector<double>& coef) {
  if (a.is_constant() || a.degree_ == 0) {
    Jet r = a;
    r.c_[0] = coef[0];
    return r;
  }
  Jet n = a;
  n.c_[0] = 0.0;
  const int D = a.degree_;
  Jet r(a.space_, D);
  r.c_[0] = coef[D];
  for (int k = D - 1; k >= 0; --k) {
    r = r * n;
    r.c_[0] += coef[k];
  }
  return r;
}

namespace {
int order_of(const Jet& a) { return a.is_constant() ? 0 : a.degree(); }
}  // namespace

Jet inverse(const Jet& a) {
  const double x = a.value();
  std::vector<double> c(order_of(a) + 1);
  double t = 1.0 / x;
  for (size_t k = 0; k < c.size(); ++k) {
    c[k] = t;
    t *= -1.0 / x;
  }
  return Jet::compose(a, c);
}

Jet pow(const Jet& a, double e) {
  const double x = a.value();
  std::vector<double> c(order_of(a) + 1);
  // Binomial series coefficients: C(e, k) x^(e-k).
  double binom = 1.0;
  for (size_t k = 0; k < c.size(); ++k) {
    c[k] = binom * std::pow(x, e - static_cast<double>(k));
    binom *= (e - static_cast<double>(k)) / static_cast<double>(k + 1);
  }
  return Jet::compose(a, c);
}

Jet sqrt(const Jet& a) { return pow(a, 0.5); }

Jet exp(const Jet& a) {
  const double ex = std::exp(a.value());
  std::vector<double> c(order_of(a) + 1);
  double f = 1.0;
  for (size_t k = 0; k < c.size(); ++k) {
    c[k] = ex / f;
    f *= static_cast<double>(k + 1);
  }
  return Jet::compose(a, c);
}

Jet log(const Jet& a) {
  const double x = a.value();
  std::vector<double> c(order_of(a) + 1);
  c[0] = std::log(x);
  double t = 1.0 / x;
  for (size_t k = 1; k < c.size(); ++k) {
    c[k] = ((k % 2) ? 1.0 : -1.0) * t / static_cast<double>(k);
    t /= x;
  }
  return Jet::compose(a, c);
}

namespace {
std::vector<double> trig_coefs(double s, double co, int d, bool is_sin) {
  // k-th derivative of sin cycles (s, c, -s, -c); of cos (c, -s, -c, s).
  std::vector<double> c(d + 1);
  const double cyc_sin[4] = {s, co, -s, -co};
  const double cyc_cos[4] = {co, -s, -co, s};
  double f = 1.0;
  for (int k = 0; k <= d; ++k) {
    c[k] = (is_sin ? cyc_sin[k % 4] : cyc_cos[k % 4]) / f;
    f *= k + 1;
  }
  return c;
}
}  // namespace

Jet sin(const Jet& a) {
  return Jet::compose(a, trig_coefs(std::sin(a.value()), std::cos(a.value()), order_of(a), true));
}

Jet cos(const Jet& a) {
  return Jet::compose(a, trig_coefs(std::sin(a.value()), std::cos(a.value()), order_of(a), false));
}

}  // namespace svi
