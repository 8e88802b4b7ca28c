// End-to-end acceptance checks. Sweeps run through the svibench executable
// and are judged from the CSV and JSON files it writes.
//
//   acceptance                 all criteria
//   acceptance --criterion N   one criterion

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "svi/bench.hpp"
#include "svi/surrogate.hpp"

using namespace svi;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back(std::string(ok ? "ok " : "FAIL ") + what);
  }
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

fs::path workdir(int n) {
  fs::path d = fs::path(ACCEPTANCE_WORKDIR) / ("criterion" + std::to_string(n));
  fs::create_directories(d);
  return d;
}

// Runs svibench; `args` are shell-quoted by the caller where needed.
void svibench(Outcome& out, const std::string& args) {
  const std::string cmd = std::string("\"") + SVIBENCH_PATH + "\" " + args + " > /dev/null";
  const int rc = std::system(cmd.c_str());
  if (rc != 0) out.check(false, "svibench " + args + " exited with " + std::to_string(rc));
}

std::string stem(const std::string& system, std::string integrator) {
  std::replace(integrator.begin(), integrator.end(), ',', '-');
  return system + "_" + integrator;
}

std::vector<ConvergenceRecord> load(const fs::path& dir, const std::string& system,
                                    const std::string& integrator) {
  auto r = read_convergence_csv(dir / (stem(system, integrator) + ".csv"));
  std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.h > b.h; });
  return r;
}

json load_meta(const fs::path& dir, const std::string& system, const std::string& integrator) {
  std::ifstream in(dir / (stem(system, integrator) + ".json"));
  return json::parse(in);
}

std::vector<ConvergenceRecord> subset(const std::vector<ConvergenceRecord>& r, double hmax,
                                      double hmin) {
  std::vector<ConvergenceRecord> out;
  for (const auto& x : r)
    if (x.h <= hmax * (1 + 1e-12) && x.h >= hmin * (1 - 1e-12)) out.push_back(x);
  return out;
}

std::vector<ConvergenceRecord> coarse_half(std::vector<ConvergenceRecord> r) {
  r.resize((r.size() + 1) / 2);
  return r;
}

void slope_within(Outcome& out, const std::string& label, const std::vector<ConvergenceRecord>& r,
                  double target, double tol) {
  double s = NAN;
  try {
    s = fit_convergence_slope(r);
  } catch (const std::exception& e) {
    out.check(false, label + ": " + e.what());
    return;
  }
  out.check(std::abs(s - target) <= tol,
            label + " slope " + fmt("%.3f", s) + " vs " + fmt("%.1f", target) + " +- " +
                fmt("%.1f", tol));
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

// --- Criteria -----------------------------------------------------------------------

const std::string kSweep1 = "0.2,0.1,0.05,0.025";

Outcome criterion1() {
  Outcome out;
  const auto dir = workdir(1);
  Clock clk;
  svibench(out, "run --system harmonic-1dof-paper --integrator nominal-vi --h " + kSweep1 +
                    " --reps 1 --out " + quote(dir.string()));
  const double t = clk.seconds();
  if (!out.pass) return out;
  slope_within(out, "nominal VI", load(dir, "harmonic-1dof-paper", "nominal-vi"), 2.0, 0.2);
  out.check(t < 10.0, "runtime " + fmt("%.1f", t) + " s < 10 s");
  return out;
}

Outcome criterion2() {
  Outcome out;
  const auto dir = workdir(2);
  Clock clk;
  svibench(out, "run --system harmonic-1dof-paper --integrator " + quote("nominal-vi;surrogate-vi") +
                    " --h " + kSweep1 + " --reps 1 --out " + quote(dir.string()));
  const double t = clk.seconds();
  if (!out.pass) return out;
  const auto nom = load(dir, "harmonic-1dof-paper", "nominal-vi");
  const auto sur = load(dir, "harmonic-1dof-paper", "surrogate-vi");
  slope_within(out, "surrogate VI", sur, 4.0, 0.3);
  bool below = nom.size() == sur.size() && !sur.empty();
  for (size_t i = 0; below && i < sur.size(); ++i) below = sur[i].e_l2 < nom[i].e_l2;
  out.check(below, "surrogate error below nominal at every h");
  out.check(t < 10.0, "runtime " + fmt("%.1f", t) + " s < 10 s");
  return out;
}

Outcome criterion3() {
  Outcome out;
  const auto dir = workdir(3);
  // Convergence order k is the nominal scheme for k = 2 and the series kept
  // through h^(k-2) otherwise; the h^8 series is the floor check.
  const std::map<int, std::string> by_order = {
      {2, "nominal-vi"}, {4, "surrogate-vi,2"}, {6, "surrogate-vi,4"}, {8, "surrogate-vi,6"}};
  Clock clk;
  for (const char* sys : {"harmonic-1dof-paper", "linear-4dof-paper"})
    svibench(out, std::string("run --system ") + sys + " --integrator " +
                      quote("nominal-vi;surrogate-vi,2;surrogate-vi,4;surrogate-vi,6;surrogate-vi,8") +
                      " --h 0.4,0.2,0.1,0.05,0.025 --reps 1 --out " + quote(dir.string()));
  const double t = clk.seconds();
  if (!out.pass) return out;
  for (const char* sys : {"harmonic-1dof-paper", "linear-4dof-paper"}) {
    for (const auto& [k, id] : by_order) {
      const auto all = load(dir, sys, id);
      // Low orders stay out of the pre-asymptotic h = 0.4; high orders stay
      // above the round-off floor.
      const auto pts = k <= 4 ? subset(all, 0.2, 0.025) : subset(all, 0.4, 0.05);
      slope_within(out, std::string(sys) + " order " + std::to_string(k), pts, k, 0.4);
    }
    const auto top = load(dir, sys, "surrogate-vi,8");
    double floor_err = 1e300;
    for (const auto& r : top)
      if (r.h <= 0.1 + 1e-12) floor_err = std::min(floor_err, r.e_l2);
    out.check(floor_err <= 1e-10,
              std::string(sys) + " h^8 series reaches the floor: min e_l2 at h <= 0.1 is " +
                  fmt("%.2e", floor_err));
  }
  out.check(t < 60.0, "runtime " + fmt("%.1f", t) + " s < 60 s");
  return out;
}

Outcome criterion4() {
  Outcome out;
  const auto& m = linear_surrogate_mass_coefficients();
  const auto& k = linear_surrogate_stiffness_coefficients();
  const std::array<Rational, 4> em{{{1, 12}, {1, 720}, {1, 30240}, {1, 1209600}}};
  const std::array<Rational, 4> ek{{{1, 12}, {1, 120}, {17, 20160}, {31, 362880}}};
  out.check(m == em, "mass series rationals exact");
  out.check(k == ek, "stiffness series rationals exact");

  double worst = 0.0;
  for (const auto& [M, K] : {std::pair{Mat(Mat::Identity(1, 1)), Mat(2.0 * Mat::Identity(1, 1))},
                             std::pair{benchmark_4dof_mass(), benchmark_4dof_stiffness()}}) {
    for (double h : {0.2, 0.1, 0.05}) {
      const auto S4 = higher_order_operators(QuadraticLagrangian(M, K), h).surrogate4();
      const auto P = linear_surrogate(M, K, h, 4);
      const double rm = (S4.mass() - P.Ms).cwiseAbs().maxCoeff() / P.Ms.cwiseAbs().maxCoeff();
      const double rk = (S4.stiffness() - P.Ks).cwiseAbs().maxCoeff() / P.Ks.cwiseAbs().maxCoeff();
      const auto n = M.rows();
      const double rc = S4.G.topRightCorner(n, n).cwiseAbs().maxCoeff() / P.Ks.cwiseAbs().maxCoeff();
      worst = std::max({worst, rm, rk, rc});
    }
  }
  out.check(worst <= 1e-15, "operator composition vs order-4 series, worst relative " +
                                fmt("%.2e", worst) + " <= 1e-15");
  return out;
}

Outcome criterion5() {
  Outcome out;
  const auto dir = workdir(5);
  Clock clk;
  svibench(out, "run --system damped-paper --integrator " + quote("nominal-vi;surrogate-vi") +
                    " --h " + kSweep1 + " --reps 1 --out " + quote(dir.string()));
  const double t = clk.seconds();
  if (!out.pass) return out;
  slope_within(out, "forced surrogate", load(dir, "damped-paper", "surrogate-vi"), 4.0, 0.3);
  slope_within(out, "forced nominal", load(dir, "damped-paper", "nominal-vi"), 2.0, 0.2);
  out.check(load_meta(dir, "damped-paper", "surrogate-vi")["benchmark"] == "analytic",
            "judged against the closed form");
  out.check(t < 20.0, "runtime " + fmt("%.1f", t) + " s < 20 s");
  return out;
}

void residual_check(Outcome& out, const fs::path& dir, const std::string& sys,
                    const std::string& id) {
  const json meta = load_meta(dir, sys, id);
  double worst = 0.0;
  for (const auto& r : meta["records"])
    worst = std::max(worst, r["max_constraint_residual"].get<double>());
  out.check(worst <= 1e-9, sys + " " + id + " max |c| " + fmt("%.2e", worst) + " <= 1e-9");
}

Outcome criterion6() {
  Outcome out;
  const auto dir = workdir(6);
  const std::string common = " --t-final 10 --benchmark self --benchmark-h 1e-4 --reps 1 --eps-tol 1e-12 --out " +
                             quote(dir.string());
  const std::string single = "pendulum-single-paper", dbl = "pendulum-double-paper";
  Clock clk;
  svibench(out, "run --system " + single + " --integrator " +
                    quote("nominal-vi;surrogate-vi;herk4;hem4") +
                    " --h 0.04,0.02,0.01,0.005,0.0025" + common);
  // The chaotic double pendulum: the nominal scheme only leaves saturation
  // below h = 4e-4, the fourth-order schemes are resolved from 1e-2 down.
  // At h <= 2e-4 round-off in (q1 - q0) / h keeps Newton above 1e-12.
  if (out.pass)
    svibench(out, "run --system " + dbl + " --integrator " + quote("surrogate-vi;herk4;hem4") +
                      " --h 0.01,0.005,0.0025,0.00125,0.000625" + common);
  const fs::path dir_nom = dir / "double-nominal";
  if (out.pass)
    svibench(out, "run --system " + dbl + " --integrator nominal-vi --h 2e-4,1e-4,5e-5" +
                      " --t-final 10 --benchmark self --benchmark-h 1e-4 --reps 1 --eps-tol 1e-10 --out " +
                      quote(dir_nom.string()));
  const double t = clk.seconds();
  if (!out.pass) return out;

  slope_within(out, single + " nominal VI", load(dir, single, "nominal-vi"), 2.0, 0.3);
  slope_within(out, single + " surrogate VI", load(dir, single, "surrogate-vi"), 4.0, 0.4);
  slope_within(out, dbl + " nominal VI", load(dir_nom, dbl, "nominal-vi"), 2.0, 0.3);
  slope_within(out, dbl + " surrogate VI", load(dir, dbl, "surrogate-vi"), 4.0, 0.4);
  residual_check(out, dir, single, "nominal-vi");
  residual_check(out, dir, single, "surrogate-vi");
  residual_check(out, dir, dbl, "surrogate-vi");
  residual_check(out, dir_nom, dbl, "nominal-vi");
  for (const auto& sys : {single, dbl}) {
    const auto herk = coarse_half(load(dir, sys, "herk4"));
    double s = NAN;
    try {
      s = fit_convergence_slope(herk);
    } catch (const std::exception& e) {
      out.check(false, sys + " HERK4 coarse half: " + e.what());
    }
    if (!std::isnan(s)) out.check(s < 3.0, sys + " HERK4 coarse-half slope " + fmt("%.3f", s) + " < 3");
    slope_within(out, sys + " HEM4", load(dir, sys, "hem4"), 4.0, 0.4);
  }
  out.check(t < 300.0, "runtime " + fmt("%.1f", t) + " s < 300 s");
  return out;
}

Outcome criterion7() {
  Outcome out;
  auto v1 = [](double x) { return Vec::Constant(1, x); };
  IntegratorConfig cfg;
  cfg.h = 0.05;
  cfg.eps_tol = 1e-13;

  {  // Momentum along (1, 1) for an L that sees only q0 - q1.
    auto L = make_lagrangian(2, [](auto q, auto qd) {
      using std::cos;
      const auto d = q[0] - q[1];
      return 0.5 * qd[0] * qd[0] + qd[1] * qd[1] + 0.1 * cos(d) * qd[0] * qd[1] - (1.0 - cos(d));
    });
    DiscreteState s;
    s.q = Vec::Zero(2);
    s.q << 0.4, -0.3;
    s.p = Vec::Zero(2);
    s.p << 0.8, -0.1;
    double worst = 0.0;
    for (int k = 0; k < 500; ++k) {
      const double before = s.p.sum();
      s = step_unforced(*L, s, cfg);
      worst = std::max(worst, std::abs(s.p.sum() - before));
    }
    out.check(worst <= 1e-12, "momentum drift per step " + fmt("%.2e", worst) + " <= 1e-12");
  }
  {  // Oracle against central differences.
    auto L = make_lagrangian(2, [](auto q, auto qd) {
      using std::cos;
      using std::exp;
      return 0.5 * (2.0 + cos(q[1])) * qd[0] * qd[0] + 0.5 * qd[1] * qd[1] +
             0.3 * qd[0] * qd[1] * q[0] - exp(0.2 * q[0]) * q[1] * q[1];
    });
    double worst = 0.0;
    const double e = 1e-6;
    for (int trial = 0; trial < 100; ++trial) {
      Vec q(2), qd(2);
      q << std::sin(1.3 * trial), std::cos(0.7 * trial);
      qd << std::sin(2.1 * trial + 1.0), std::cos(1.7 * trial + 0.5);
      const auto P = L->partials(q, qd, Vec(), 2);
      for (int i = 0; i < 2; ++i) {
        Vec d = Vec::Zero(2);
        d[i] = e;
        const double fq = (L->eval(q + d, qd) - L->eval(q - d, qd)) / (2 * e);
        const double fqd = (L->eval(q, qd + d) - L->eval(q, qd - d)) / (2 * e);
        worst = std::max(worst, std::abs(P.Lq[i] - fq) / std::max(1.0, std::abs(fq)));
        worst = std::max(worst, std::abs(P.Lqd[i] - fqd) / std::max(1.0, std::abs(fqd)));
        const Vec hq = (L->partials(q + d, qd, Vec(), 1).Lqd - L->partials(q - d, qd, Vec(), 1).Lqd) / (2 * e);
        for (int j = 0; j < 2; ++j)
          worst = std::max(worst, std::abs(P.Lqdq(j, i) - hq[j]) / std::max(1.0, std::abs(hq[j])));
      }
    }
    out.check(worst <= 1e-5, "oracle vs finite differences, worst relative " + fmt("%.2e", worst));
  }
  {  // Quadratic L: one step is a linear solve.
    const Mat M = benchmark_4dof_mass(), K = benchmark_4dof_stiffness();
    QuadraticLagrangian L(M, K);
    DiscreteState s;
    s.q = Vec::LinSpaced(4, -0.3, 0.5);
    s.p = Vec::LinSpaced(4, 1.0, -0.2);
    const double h = 0.07;
    IntegratorConfig c = cfg;
    c.h = h;
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      const Vec expect = (M / h + h * K / 4).lu().solve((M / h - h * K / 4) * s.q + s.p);
      s = step_unforced(L, s, c);
      worst = std::max(worst, (s.q - expect).lpNorm<Eigen::Infinity>());
    }
    out.check(worst <= 1e-12, "quadratic closed-form step match " + fmt("%.2e", worst));
  }
  {  // Forced pipeline with F = 0 against the conservative pipeline, bit for bit.
    auto L = make_lagrangian(1, [](auto q, auto qd) {
      using std::cos;
      return 0.5 * qd[0] * qd[0] + cos(q[0]);
    });
    auto zero = make_force(1, 0, [](auto q, auto, auto) {
      using S = std::decay_t<decltype(q[0])>;
      return std::vector<S>{S(0.0)};
    });
    const double h = 0.05;
    const ForcedSurrogateStepper stepper(surrogate_forced(L, zero, h));
    const auto S = surrogate_conservative(L, h);
    const ContinuousState s0(v1(0.5), v1(0.2));
    HistoryState a = stepper.init(s0, h);
    DiscreteState b = init_from_velocity(*L, s0);
    bool same = true;
    for (int k = 0; k < 100; ++k) {
      a = stepper.step(a, cfg);
      b = step_unforced(*S, b, cfg);
      a.k = b.k = k + 1;
      same = same && a.q == b.q && a.p == b.p;
    }
    out.check(same, "forced pipeline with F = 0 bitwise-equal to the conservative one");
  }
  {  // Newton on affine residuals.
    Mat A(3, 3);
    A << 4, 1, 0, 1, 3, 1, 0, 1, 2;
    Vec b(3);
    b << 1, 2, 3;
    const auto r = newton_solve([&](const Vec& x) { return Vec(A * x - b); },
                                [&](const Vec&) { return A; }, Vec::Constant(3, 9.0), cfg);
    out.check(r.iterations == 1, "Newton converges in one iteration on an affine residual");
  }
  return out;
}

Outcome criterion8() {
  Outcome out;
  const auto dir = workdir(8);
  const std::string sys = "pendulum-double-paper";
  svibench(out, "run --system " + sys + " --integrator surrogate-vi --h 1e-3 --eps-tol 1e-9 " +
                    "--benchmark self --reps 1 --out " + quote(dir.string()));
  if (!out.pass) return out;
  const json r = load_meta(dir, sys, "surrogate-vi")["records"][0];
  const double share = r["d_eval_share"].get<double>();
  const long steps = r["steps"], iters = r["newton_iterations"];
  const long d1 = r["d1_evals"], d2d1 = r["d2d1_evals"];
  out.check(share > 0.9, "D1 + D2D1 share of step time " + fmt("%.3f", share) + " > 0.9");
  out.check(d1 == steps + iters, "D1 evaluations " + std::to_string(d1) + " = steps " +
                                     std::to_string(steps) + " + iterations " + std::to_string(iters));
  out.check(d2d1 == iters, "D2D1 evaluations " + std::to_string(d2d1) + " = iterations");
  out.notes.push_back("info step time " + fmt("%.3e", r["per_step_seconds"].get<double>()) +
                      " s, D1 " + fmt("%.3f", r["d1_seconds"].get<double>()) + " s, D2D1 " +
                      fmt("%.3f", r["d2d1_seconds"].get<double>()) + " s");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::function<Outcome()>> criteria = {
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},
      {5, criterion5}, {6, criterion6}, {7, criterion7}, {8, criterion8}};
  std::vector<int> run;
  if (argc == 3 && std::string(argv[1]) == "--criterion") {
    run.push_back(std::atoi(argv[2]));
    if (!criteria.count(run[0])) {
      std::fprintf(stderr, "unknown criterion %s\n", argv[2]);
      return 2;
    }
  } else if (argc == 1) {
    for (const auto& [n, f] : criteria) run.push_back(n);
  } else {
    std::fprintf(stderr, "usage: acceptance [--criterion N]\n");
    return 2;
  }

  bool all = true;
  for (int n : run) {
    Outcome o;
    try {
      o = criteria.at(n)();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    for (const auto& note : o.notes) std::printf("  %s\n", note.c_str());
    std::printf("criterion %d: %s\n", n, o.pass ? "PASS" : "FAIL");
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
