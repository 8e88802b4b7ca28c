#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "svi/del.hpp"
#include "svi/systems.hpp"

using namespace svi;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }
Mat m1(double x) { return Mat::Constant(1, 1, x); }

IntegratorConfig config(double h, double eps = 1e-9) {
  IntegratorConfig c;
  c.h = h;
  c.eps_tol = eps;
  return c;
}

DiscreteState state(double q, double p) {
  DiscreteState s;
  s.q = v1(q);
  s.p = v1(p);
  return s;
}

const QuadraticLagrangian osc(m1(1.0), m1(2.0));
const QuadraticLagrangian particle(m1(1.0), m1(0.0));

}  // namespace

TEST_CASE("discrete Lagrangian is the midpoint rule") {
  CHECK(discrete_lagrangian(osc, v1(0.0), v1(0.1), 0.1) == doctest::Approx(0.04975));
  CHECK(discrete_lagrangian(osc, v1(0.3), v1(0.3), 0.1) == doctest::Approx(0.1 * osc.eval(v1(0.3), v1(0.0))));
  auto zero = make_lagrangian(1, [](auto, auto) { return 0.0; });
  CHECK(discrete_lagrangian(*zero, v1(0.2), v1(-0.4), 0.3) == 0.0);
}

TEST_CASE("D1 and D2 slot derivatives") {
  const double q1 = 0.0995025;
  CHECK(d1_ld(osc, v1(0.0), v1(q1), 0.1)[0] == doctest::Approx(-1.0000003).epsilon(1e-7));
  CHECK(d1_ld(particle, v1(0.5), v1(0.5), 0.1)[0] == 0.0);
  CHECK(d2_ld(particle, v1(0.5), v1(0.5), 0.1)[0] == 0.0);
  // D1 + D2 = h L_q at the midpoint.
  const Vec a = v1(0.37), b = v1(-0.21);
  const double h = 0.2;
  const double sum = d1_ld(osc, a, b, h)[0] + d2_ld(osc, a, b, h)[0];
  const auto P = osc.partials((a + b) / 2, (b - a) / h);
  CHECK(sum == doctest::Approx(h * P.Lq[0]));
}

TEST_CASE("D2D1 Jacobian") {
  CHECK(d2d1_ld(osc, v1(0.4), v1(0.1), 0.1)(0, 0) == doctest::Approx(-10.05));
  CHECK(d2d1_ld(particle, v1(0.0), v1(0.0), 1.0)(0, 0) == doctest::Approx(-1.0));
  // Agrees with a finite difference of D1 in its second slot.
  auto L = make_lagrangian(2, [](auto q, auto qd) {
    using std::cos;
    return 0.5 * qd[0] * qd[0] + 0.5 * (1.0 + q[0] * q[0]) * qd[1] * qd[1] + q[0] * qd[1] -
           cos(q[1]);
  });
  Vec a(2), b(2);
  a << 0.3, -0.2;
  b << 0.35, -0.1;
  const double h = 0.05, eps = 1e-7;
  const Mat J = d2d1_ld(*L, a, b, h);
  for (int j = 0; j < 2; ++j) {
    Vec e = Vec::Zero(2);
    e[j] = eps;
    const Vec col = (d1_ld(*L, a, b + e, h) - d1_ld(*L, a, b - e, h)) / (2 * eps);
    CHECK((J.col(j) - col).norm() <= 1e-5 * col.norm());
  }
}

TEST_CASE("Newton on scalar problems") {
  const auto cfg = config(0.1);
  auto affine = newton_solve([](const Vec& x) { return Vec(3.0 * x - v1(6.0)); },
                             [](const Vec&) { return m1(3.0); }, v1(-40.0), cfg);
  CHECK(affine.iterations == 1);
  CHECK(affine.x[0] == doctest::Approx(2.0));

  auto root = newton_solve([](const Vec& x) { return Vec(x.array().square() - 2.0); },
                           [](const Vec& x) { return Mat(2.0 * x.asDiagonal()); }, v1(1.0), cfg);
  CHECK(root.iterations <= 6);
  CHECK(root.x[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));

  CHECK_THROWS_AS(newton_solve([](const Vec& x) { return Vec(x.array().square() + 1.0); },
                               [](const Vec& x) { return Mat(2.0 * x.asDiagonal()); }, v1(0.0), cfg),
                  SingularJacobian);

  IntegratorConfig capped = cfg;
  capped.max_iter = 3;
  try {
    newton_solve([](const Vec& x) { return Vec(x.array().square() + 1.0); },
                 [](const Vec& x) { return Mat(2.0 * x.asDiagonal()); }, v1(0.5), capped);
    FAIL("expected NoConvergence");
  } catch (const NoConvergence& e) {
    CHECK(e.residual() > 0.5);
  }
}

TEST_CASE("Newton converges in one iteration on affine systems") {
  Mat A(3, 3);
  A << 4, 1, 0, 1, 3, 1, 0, 1, 2;
  Vec b(3);
  b << 1, 2, 3;
  auto r = newton_solve([&](const Vec& x) { return Vec(A * x - b); }, [&](const Vec&) { return A; },
                        Vec::Constant(3, 9.0), config(0.1, 1e-12));
  CHECK(r.iterations == 1);
  CHECK((A * r.x - b).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("unforced steps on closed-form cases") {
  const auto s1 = step_unforced(osc, state(0.0, 1.0), config(0.1));
  CHECK(s1.q[0] == doctest::Approx(1.0 / 10.05).epsilon(1e-10));

  const auto s2 = step_unforced(particle, state(0.0, 1.0), config(0.5));
  CHECK(s2.q[0] == doctest::Approx(0.5));
  CHECK(s2.p[0] == doctest::Approx(1.0));

  const auto s3 = step_unforced(osc, state(0.0, 0.0), config(0.1));
  CHECK(s3.q[0] == 0.0);
  CHECK(s3.p[0] == 0.0);
}

TEST_CASE("quadratic Lagrangian step matches the linear solve") {
  const Mat M = benchmark_4dof_mass(), K = benchmark_4dof_stiffness();
  QuadraticLagrangian L(M, K);
  DiscreteState s;
  s.q = Vec::LinSpaced(4, -0.3, 0.5);
  s.p = Vec::LinSpaced(4, 1.0, -0.2);
  const double h = 0.07;
  const auto next = step_unforced(L, s, config(h, 1e-13));
  const Vec expect = (M / h + h * K / 4).lu().solve((M / h - h * K / 4) * s.q + s.p);
  CHECK((next.q - expect).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("initialization") {
  const auto a = init_from_velocity(osc, ContinuousState(v1(0.0), v1(1.0)));
  CHECK(a.q[0] == 0.0);
  CHECK(a.p[0] == 1.0);
  CHECK(init_from_velocity(osc, ContinuousState(v1(0.2), v1(0.0))).p[0] == 0.0);
  const auto b = init_from_pair(osc, v1(0.0), v1(0.09950249), 0.1);
  // p1 = (q1 - q0) / h - (h / 2) K (q0 + q1) / 2
  CHECK(b.p[0] == doctest::Approx(0.9900497755).epsilon(1e-9));
  CHECK(b.k == 1);
  CHECK(b.t == doctest::Approx(0.1));
}

TEST_CASE("discrete forces") {
  LinearDamping F(m1(0.07));
  const auto [m, p] = discrete_forces(F, v1(0.0), v1(0.1), Vec(), 0.1);
  CHECK(m[0] == doctest::Approx(-0.0035));
  CHECK(p[0] == doctest::Approx(-0.0035));
  auto zero = make_force(1, 0, [](auto q, auto, auto) {
    using S = std::decay_t<decltype(q[0])>;
    return std::vector<S>{S(0.0)};
  });
  const auto z = discrete_forces(*zero, v1(0.3), v1(0.4), Vec(), 0.1);
  CHECK(z.first[0] == 0.0);
  CHECK(z.second[0] == 0.0);
  auto spring = make_force(1, 0, [](auto q, auto, auto) {
    using S = std::decay_t<decltype(q[0])>;
    return std::vector<S>{S(-3.0 * q[0])};
  });
  const auto w = discrete_forces(*spring, v1(0.5), v1(0.5), Vec(), 0.2);
  CHECK(w.first[0] == doctest::Approx(0.1 * -1.5));
  CHECK(w.second[0] == w.first[0]);
}

TEST_CASE("forced steps") {
  auto zero = make_force(1, 0, [](auto q, auto, auto) {
    using S = std::decay_t<decltype(q[0])>;
    return std::vector<S>{S(0.0)};
  });
  const auto cfg = config(0.1);
  const auto a = step_forced(osc, *zero, state(0.2, 0.7), Vec(), cfg);
  const auto b = step_unforced(osc, state(0.2, 0.7), cfg);
  CHECK(a.q == b.q);
  CHECK(a.p == b.p);

  // Constant force on a free particle: the impulse is exactly h g.
  const double g = -9.81;
  auto gravity = make_force(1, 0, [g](auto q, auto, auto) {
    using S = std::decay_t<decltype(q[0])>;
    return std::vector<S>{S(g)};
  });
  const auto c = step_forced(particle, *gravity, state(1.0, 2.0), Vec(), cfg);
  CHECK(c.p[0] - 2.0 == doctest::Approx(0.1 * g));

  // Damping dissipates energy at every step.
  QuadraticLagrangian L(m1(10.0), m1(3.0));
  LinearDamping damp(m1(0.07));
  const double r = std::sqrt(2.0) / 2.0;
  DiscreteState s = state(r, 10.0 * r);
  double E = 0.5 * (s.p[0] * s.p[0] / 10.0 + 3.0 * s.q[0] * s.q[0]);
  for (int k = 0; k < 10; ++k) {
    s = step_forced(L, damp, s, Vec(), cfg);
    const double En = 0.5 * (s.p[0] * s.p[0] / 10.0 + 3.0 * s.q[0] * s.q[0]);
    CHECK(En < E);
    E = En;
  }
}

TEST_CASE("instrumentation counters reconcile with Newton iterations") {
  StepStats stats;
  DiscreteState s = state(0.0, 1.0);
  auto L = make_lagrangian(1, [](auto q, auto qd) {
    using std::cos;
    return 0.5 * qd[0] * qd[0] + cos(q[0]);
  });
  for (int k = 0; k < 25; ++k) s = step_unforced(*L, s, config(0.1), &stats);
  CHECK(stats.steps == 25);
  CHECK(stats.newton_iterations > 25);
  CHECK(stats.d2d1_evals == stats.newton_iterations);
  CHECK(stats.d1_evals == stats.newton_iterations + stats.steps);
  CHECK(stats.d1_seconds + stats.d2d1_seconds <= stats.step_seconds);
}

TEST_CASE("momentum along a symmetry direction is conserved") {
  // Invariant under q -> q + a (1, 1): depends on q only through q0 - q1.
  auto L = make_lagrangian(2, [](auto q, auto qd) {
    using std::cos;
    const auto d = q[0] - q[1];
    return 0.5 * qd[0] * qd[0] + 0.5 * 2.0 * qd[1] * qd[1] + 0.1 * cos(d) * qd[0] * qd[1] -
           (1.0 - cos(d));
  });
  DiscreteState s;
  s.q = Vec::Zero(2);
  s.q << 0.4, -0.3;
  s.p = Vec::Zero(2);
  s.p << 0.8, -0.1;
  const double P0 = s.p.sum();
  for (int k = 0; k < 200; ++k) {
    const double before = s.p.sum();
    s = step_unforced(*L, s, config(0.05, 1e-13));
    CHECK(std::abs(s.p.sum() - before) <= 1e-12);
  }
  CHECK(std::abs(s.p.sum() - P0) <= 200 * 1e-12);
}

TEST_CASE("integrate counts steps exactly and keeps energy bounded") {
  CHECK(step_count(0.0, 150.0, 0.05) == 3000);
  CHECK(step_count(0.0, 10.0, 0.1) == 100);
  const auto cfg = config(0.05);
  auto traj = integrate([&](const DiscreteState& s) { return step_unforced(osc, s, cfg); },
                        init_from_velocity(osc, ContinuousState(v1(0.0), v1(1.0))), 150.0, cfg);
  REQUIRE(traj.size() == 3001);
  CHECK(traj.back().t == doctest::Approx(150.0));
  CHECK(traj.back().k == 3000);
  double lo = 1e300, hi = -1e300, first_half = 0.0, second_half = 0.0;
  for (size_t k = 0; k < traj.size(); ++k) {
    const double E = 0.5 * traj[k].p[0] * traj[k].p[0] + traj[k].q[0] * traj[k].q[0];
    lo = std::min(lo, E);
    hi = std::max(hi, E);
    (k < traj.size() / 2 ? first_half : second_half) += E;
  }
  CHECK(hi - lo < 0.01);
  CHECK(std::abs(first_half - second_half) / first_half < 1e-3);  // no drift

  const auto ptraj = integrate([&](const DiscreteState& s) { return step_unforced(particle, s, cfg); },
                               state(0.0, 1.0), 1.0, cfg);
  for (const auto& s : ptraj) CHECK(s.q[0] == doctest::Approx(static_cast<double>(s.k) * 0.05));
}

TEST_CASE("step failures carry the step index") {
  IntegratorConfig cfg = config(0.1, 1e-300);
  cfg.max_iter = 2;
  auto L = make_lagrangian(1, [](auto q, auto qd) {
    using std::cos;
    return 0.5 * qd[0] * qd[0] + cos(q[0]);
  });
  try {
    integrate([&](const DiscreteState& s) { return step_unforced(*L, s, cfg); }, state(0.1, 0.5), 1.0,
              cfg);
    FAIL("expected NoConvergence");
  } catch (const NoConvergence& e) {
    REQUIRE(e.step_index().has_value());
    CHECK(*e.step_index() == 0);
  }
  CHECK_THROWS_AS(config(0.0).validate(), InvalidParameter);
}

TEST_CASE("constrained pendulum keeps its constraint") {
  const SystemSpec single = preset("pendulum-single-paper");
  const auto cfg = config(0.01);
  ConstrainedDiscreteState s;
  static_cast<DiscreteState&>(s) = init_from_velocity(*single.lagrangian, single.initial);
  s.lambda = Vec::Zero(1);
  for (int k = 0; k < 300; ++k) {
    s = step_constrained(*single.lagrangian, nullptr, *single.constraint, s, Vec(), cfg);
    CHECK(std::abs(single.constraint->eval(s.q)[0]) <= 1e-9);
  }

  const SystemSpec dbl = preset("pendulum-double-paper");
  ConstrainedDiscreteState d;
  static_cast<DiscreteState&>(d) = init_from_velocity(*dbl.lagrangian, dbl.initial);
  d.lambda = Vec::Zero(2);
  for (int k = 0; k < 300; ++k) {
    d = step_constrained(*dbl.lagrangian, nullptr, *dbl.constraint, d, Vec(), cfg);
    REQUIRE(d.lambda.size() == 2);
    CHECK(dbl.constraint->eval(d.q).lpNorm<Eigen::Infinity>() <= 1e-9);
  }
}

TEST_CASE("constrained equilibrium without gravity stays put") {
  QuadraticLagrangian free2(Mat::Identity(2, 2), Mat::Zero(2, 2));
  auto c = make_constraint(2, 1, [](auto q) {
    using S = std::decay_t<decltype(q[0])>;
    return std::vector<S>{q[0] * q[0] + q[1] * q[1] - 1.0};
  });
  ConstrainedDiscreteState s;
  s.q = Vec::Zero(2);
  s.q << 0.6, 0.8;
  s.p = Vec::Zero(2);
  s.lambda = Vec::Zero(1);
  const auto next = step_constrained(free2, nullptr, *c, s, Vec(), config(0.05));
  CHECK((next.q - s.q).norm() == 0.0);
  CHECK(next.lambda[0] == 0.0);
}

TEST_CASE("constraint two-step DEL equivalence") {
  // The one-step map reproduces D2 Ld(q_{k-1}, q_k) + D1 Ld(q_k, q_{k+1}) = Dc(q_k)' lambda_k.
  const SystemSpec single = preset("pendulum-single-paper");
  const auto& L = *single.lagrangian;
  const auto& c = *single.constraint;
  const double h = 0.01;
  const auto cfg = config(h, 1e-13);
  ConstrainedDiscreteState s;
  static_cast<DiscreteState&>(s) = init_from_velocity(L, single.initial);
  s.lambda = Vec::Zero(1);
  auto s1 = step_constrained(L, nullptr, c, s, Vec(), cfg);
  auto s2 = step_constrained(L, nullptr, c, s1, Vec(), cfg);
  const Vec lhs = d2_ld(L, s.q, s1.q, h) + d1_ld(L, s1.q, s2.q, h);
  const Vec rhs = c.jac(s1.q).transpose() * s2.lambda;
  CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("rank-deficient constraints are rejected") {
  QuadraticLagrangian free2(Mat::Identity(2, 2), Mat::Zero(2, 2));
  auto c = make_constraint(2, 1, [](auto q) {
    using S = std::decay_t<decltype(q[0])>;
    return std::vector<S>{q[0] * q[0] + q[1] * q[1]};
  });
  ConstrainedDiscreteState s;
  s.q = Vec::Zero(2);
  s.p = Vec::Zero(2);
  s.lambda = Vec::Zero(1);
  CHECK_THROWS_AS(step_constrained(free2, nullptr, *c, s, Vec(), config(0.1)), ConstraintDegeneracy);
}
