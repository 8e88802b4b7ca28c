#include "svi/systems.hpp"

#include <cmath>
#include <cstdio>

namespace svi {

namespace {

constexpr double kManifoldTol = 1e-12;

Vec vec1(double x) { return Vec::Constant(1, x); }
Mat mat1(double x) { return Mat::Constant(1, 1, x); }

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw InvalidParameter(what);
}

void check_on_manifold(const SystemSpec& s) {
  const Vec c = s.constraint->eval(s.initial.q);
  const Vec cd = s.constraint->jac(s.initial.q) * s.initial.qdot;
  if (inf_norm(c) > kManifoldTol || inf_norm(cd) > kManifoldTol)
    throw InvalidParameter(s.name + ": initial state violates the constraints");
}

}  // namespace

std::string SystemSpec::describe_parameters() const {
  std::string out;
  for (const auto& [k, v] : scalars) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v);
    if (!out.empty()) out += ',';
    out += k + "=" + buf;
  }
  return out;
}

double SystemSpec::energy(const Vec& q, const Vec& qd) const {
  const auto* quad = dynamic_cast<const QuadraticLagrangian*>(lagrangian.get());
  if (!quad) throw UnsupportedModel("energy: needs a quadratic Lagrangian");
  return 0.5 * qd.dot(quad->M() * qd) + 0.5 * q.dot(quad->K() * q) + quad->f().dot(q);
}

SystemSpec harmonic_oscillator(double M, double K, double q0, double qdot0) {
  require_positive(M, "harmonic_oscillator: M must be positive");
  require_positive(K, "harmonic_oscillator: K must be positive");
  SystemSpec s;
  s.name = "harmonic-oscillator";
  s.lagrangian = std::make_shared<QuadraticLagrangian>(mat1(M), mat1(K));
  s.initial = ContinuousState(vec1(q0), vec1(qdot0));
  s.scalars = {{"M", M}, {"K", K}, {"q0", q0}, {"qdot0", qdot0}};
  s.matrices = {{"M", mat1(M)}, {"K", mat1(K)}};
  const double w = std::sqrt(K / M);
  s.analytic = [=](double t) { return vec1(q0 * std::cos(w * t) + qdot0 / w * std::sin(w * t)); };
  return s;
}

SystemSpec linear_ndof(const Mat& M, const Mat& K, const Vec& q0, const Vec& qdot0) {
  const auto n = M.rows();
  if (M.cols() != n || K.rows() != n || K.cols() != n || q0.size() != n || qdot0.size() != n)
    throw DimensionError("linear_ndof: shape mismatch");
  if (!M.isApprox(M.transpose(), 1e-14) || !K.isApprox(K.transpose(), 1e-14))
    throw InvalidParameter("linear_ndof: M and K must be symmetric");
  Eigen::LLT<Mat> llt(M);
  if (llt.info() != Eigen::Success) throw InvalidParameter("linear_ndof: M must be positive definite");

  SystemSpec s;
  s.name = "linear-ndof";
  s.lagrangian = std::make_shared<QuadraticLagrangian>(M, K);
  s.initial = ContinuousState(q0, qdot0);
  s.matrices = {{"M", M}, {"K", K}};
  s.scalars = {{"n", static_cast<double>(n)}};

  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(K, M);
  const Mat Phi = es.eigenvectors();  // Phi' M Phi = I
  const Vec w2 = es.eigenvalues();
  const Vec eta0 = Phi.transpose() * (M * q0);
  const Vec deta0 = Phi.transpose() * (M * qdot0);
  s.analytic = [=](double t) {
    Vec eta(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = w2[i];
      if (a > 0) {
        const double w = std::sqrt(a);
        eta[i] = eta0[i] * std::cos(w * t) + deta0[i] / w * std::sin(w * t);
      } else if (a < 0) {
        const double w = std::sqrt(-a);
        eta[i] = eta0[i] * std::cosh(w * t) + deta0[i] / w * std::sinh(w * t);
      } else {
        eta[i] = eta0[i] + deta0[i] * t;
      }
    }
    return Vec(Phi * eta);
  };
  return s;
}

SystemSpec damped_oscillator(double M, double K, double C, double q0, double qdot0) {
  require_positive(M, "damped_oscillator: M must be positive");
  require_positive(K, "damped_oscillator: K must be positive");
  if (!(C >= 0.0) || !std::isfinite(C)) throw InvalidParameter("damped_oscillator: C must be >= 0");
  SystemSpec s;
  s.name = "damped-oscillator";
  s.lagrangian = std::make_shared<QuadraticLagrangian>(mat1(M), mat1(K));
  s.force = std::make_shared<LinearDamping>(mat1(C));
  s.initial = ContinuousState(vec1(q0), vec1(qdot0));
  s.scalars = {{"M", M}, {"K", K}, {"C", C}, {"q0", q0}, {"qdot0", qdot0}};
  s.matrices = {{"M", mat1(M)}, {"K", mat1(K)}, {"C", mat1(C)}};
  const double gamma = C / (2.0 * M);
  const double wd2 = K / M - gamma * gamma;
  if (wd2 > 0.0) {
    const double wd = std::sqrt(wd2);
    s.analytic = [=](double t) {
      return vec1(std::exp(-gamma * t) *
                  (q0 * std::cos(wd * t) + (qdot0 + gamma * q0) / wd * std::sin(wd * t)));
    };
  } else {
    s.analytic = [](double) -> Vec {
      throw UnsupportedRegime("damped_oscillator: closed form covers the underdamped case only");
    };
  }
  return s;
}

SystemSpec pendulum_cartesian(double m, double l, double g, const Vec& q0, const Vec& qdot0) {
  require_positive(m, "pendulum: m must be positive");
  require_positive(l, "pendulum: l must be positive");
  require_positive(g, "pendulum: g must be positive");
  if (q0.size() != 2 || qdot0.size() != 2) throw DimensionError("pendulum: state is (x, y)");
  SystemSpec s;
  s.name = "pendulum-single";
  Vec f(2);
  f << 0.0, m * g;
  s.lagrangian = std::make_shared<QuadraticLagrangian>(m * Mat::Identity(2, 2), Mat::Zero(2, 2), f);
  s.constraint = make_constraint(2, 1, [l](auto q) {
    using S = std::decay_t<decltype(q[0])>;
    return std::vector<S>{q[0] * q[0] + q[1] * q[1] - l};
  });
  s.initial = ContinuousState(q0, qdot0);
  s.scalars = {{"m", m}, {"l", l}, {"g", g}};
  check_on_manifold(s);
  return s;
}

SystemSpec double_pendulum_cartesian(double m, double l, double g, const Vec& q0,
                                     const Vec& qdot0) {
  require_positive(m, "double pendulum: m must be positive");
  require_positive(l, "double pendulum: l must be positive");
  require_positive(g, "double pendulum: g must be positive");
  if (q0.size() != 4 || qdot0.size() != 4)
    throw DimensionError("double pendulum: state is (x1, y1, x2, y2)");
  SystemSpec s;
  s.name = "pendulum-double";
  Vec f(4);
  f << 0.0, m * g, 0.0, m * g;
  s.lagrangian = std::make_shared<QuadraticLagrangian>(m * Mat::Identity(4, 4), Mat::Zero(4, 4), f);
  s.constraint = make_constraint(4, 2, [l](auto q) {
    using S = std::decay_t<decltype(q[0])>;
    const S dx = q[0] - q[2], dy = q[1] - q[3];
    return std::vector<S>{q[0] * q[0] + q[1] * q[1] - l, dx * dx + dy * dy - l};
  });
  s.initial = ContinuousState(q0, qdot0);
  s.scalars = {{"m", m}, {"l", l}, {"g", g}};
  check_on_manifold(s);
  return s;
}

Mat benchmark_4dof_mass() {
  Mat M(4, 4);
  M << 2, 0.1, 0, 0.3,
       0.1, 3, 0.1, 0,
       0, 0.1, 4.1, 0.3,
       0.3, 0, 0.3, 4;
  return M;
}

Mat benchmark_4dof_stiffness() {
  Mat K(4, 4);
  K << 1, 0.5, 0, 0.5,
       0.5, 0.9, 0.35, 0,
       0, 0.35, 8.1, 0.65,
       0.5, 0, 0.65, 2.1;
  return K;
}

std::vector<std::string> preset_names() {
  return {"harmonic-1dof-paper", "linear-4dof-paper", "damped-paper", "pendulum-single-paper",
          "pendulum-double-paper"};
}

SystemSpec preset(const std::string& name) {
  SystemSpec s;
  if (name == "harmonic-1dof-paper") {
    s = harmonic_oscillator(1.0, 2.0, 0.0, 1.0);
    s.t_final = 150.0;
  } else if (name == "linear-4dof-paper") {
    s = linear_ndof(benchmark_4dof_mass(), benchmark_4dof_stiffness(), Vec::Zero(4), Vec::Ones(4));
    s.t_final = 150.0;
  } else if (name == "damped-paper") {
    const double r = std::sqrt(2.0) / 2.0;
    s = damped_oscillator(10.0, 3.0, 0.07, r, r);
    s.t_final = 300.0;
  } else if (name == "pendulum-single-paper") {
    const double l = 1.0;
    Vec q(2), v(2);
    q << 0.0, std::sqrt(l);
    v << 2.0, 0.0;
    s = pendulum_cartesian(1.0, l, 9.81, q, v);
    s.t_final = 10.0;
  } else if (name == "pendulum-double-paper") {
    const double l = 1.0;
    Vec q(4), v(4);
    q << 0.0, std::sqrt(l), 0.0, 2.0 * std::sqrt(l);
    v << 5.0, 0.0, 0.0, 0.0;
    s = double_pendulum_cartesian(1.0, l, 9.81, q, v);
    s.t_final = 10.0;
  } else {
    throw ConfigError("unknown system preset '" + name + "'");
  }
  s.name = name;
  return s;
}

}  // namespace svi
