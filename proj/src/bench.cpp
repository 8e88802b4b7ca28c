#include "svi/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "svi/generated.hpp"
#include "svi/rk.hpp"
#include "svi/surrogate.hpp"

namespace svi {

using json = nlohmann::json;
namespace fs = std::filesystem;

// --- Oracles and metrics -------------------------------------------------------

Oracle analytic_oracle(const SystemSpec& spec, double t_final) {
  if (!spec.has_analytic()) throw ConfigError(spec.name + ": no analytic solution");
  return {spec.analytic, spec.initial.t, t_final};
}

Oracle interpolating_oracle(Trajectory fine) {
  if (fine.t.size() < 4) throw InsufficientData("interpolating_oracle: need at least 4 samples");
  const double t0 = fine.t.front();
  const double h = fine.t[1] - fine.t[0];
  const long last = static_cast<long>(fine.t.size()) - 1;
  const double t1 = fine.t.back();
  auto data = std::make_shared<Trajectory>(std::move(fine));
  auto f = [data, t0, h, last](double t) -> Vec {
    const double x = (t - t0) / h;
    const long i = std::lround(x);
    if (std::abs(x - static_cast<double>(i)) < 1e-7 && i >= 0 && i <= last) return data->q[i];
    // Cubic Lagrange through the four nearest samples.
    long j = static_cast<long>(std::floor(x)) - 1;
    j = std::clamp(j, 0L, last - 3);
    Vec out = Vec::Zero(data->q[0].size());
    for (long a = 0; a < 4; ++a) {
      double w = 1.0;
      for (long b = 0; b < 4; ++b)
        if (b != a) w *= (x - static_cast<double>(j + b)) / static_cast<double>(a - b);
      out += w * data->q[j + a];
    }
    return out;
  };
  return {f, t0, t1};
}

namespace {

void check_window(const Trajectory& traj, const Oracle& oracle) {
  if (traj.t.empty() || traj.t.size() != traj.q.size())
    throw WindowError("trajectory has no samples or mismatched arrays");
  const double tol = 1e-9 * std::max(1.0, std::abs(oracle.t1));
  if (traj.t.front() < oracle.t0 - tol || traj.t.back() > oracle.t1 + tol)
    throw WindowError("trajectory window exceeds the oracle's");
}

double sample_error(const Trajectory& traj, const Oracle& oracle, size_t k) {
  const Vec qa = oracle.q(traj.t[k]);
  if (qa.size() != traj.q[k].size()) throw DimensionError("oracle dimension mismatch");
  return (traj.q[k] - qa).norm();
}

}  // namespace

double error_2norm(const Trajectory& traj, const Oracle& oracle, double t) {
  check_window(traj, oracle);
  for (size_t k = 0; k < traj.t.size(); ++k)
    if (std::abs(traj.t[k] - t) <= 1e-9 * std::max(1.0, std::abs(t)))
      return sample_error(traj, oracle, k);
  throw WindowError("error_2norm: no sample at the requested time");
}

std::vector<double> error_2norm_series(const Trajectory& traj, const Oracle& oracle) {
  check_window(traj, oracle);
  std::vector<double> e(traj.t.size());
  for (size_t k = 0; k < e.size(); ++k) e[k] = sample_error(traj, oracle, k);
  return e;
}

double error_L2(const Trajectory& traj, const Oracle& oracle) {
  const auto e = error_2norm_series(traj, oracle);
  if (e.size() < 2) throw WindowError("error_L2: need at least two samples");
  double acc = 0.0;
  for (size_t k = 1; k < e.size(); ++k)
    acc += 0.5 * (traj.t[k] - traj.t[k - 1]) * (e[k] * e[k] + e[k - 1] * e[k - 1]);
  return std::sqrt(acc);
}

double fit_convergence_slope(const std::vector<ConvergenceRecord>& records) {
  std::vector<double> x, y;
  for (const auto& r : records) {
    if (!(r.h > 0.0) || !std::isfinite(r.e_l2) || !(r.e_l2 > kErrorFloor)) continue;
    if (std::find(x.begin(), x.end(), std::log(r.h)) != x.end()) continue;
    x.push_back(std::log(r.h));
    y.push_back(std::log(r.e_l2));
  }
  if (x.size() < 3) throw InsufficientData("fit_convergence_slope: fewer than 3 usable points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

// --- Integrator dispatch ---------------------------------------------------------

IntegratorId IntegratorId::parse(const std::string& text) {
  IntegratorId id;
  std::string head = text;
  if (auto comma = text.find(','); comma != std::string::npos) {
    head = text.substr(0, comma);
    const std::string tail = text.substr(comma + 1);
    if (head != "surrogate-vi") throw ConfigError("only surrogate-vi takes an order: '" + text + "'");
    static const std::map<std::string, int> orders{{"0", 0}, {"2", 2}, {"4", 4}, {"6", 6}, {"8", 8}};
    auto it = orders.find(tail);
    if (it == orders.end()) throw ConfigError("surrogate order must be one of 0,2,4,6,8: '" + text + "'");
    id.order = it->second;
  }
  if (head == "nominal-vi") id.kind = Kind::NominalVI;
  else if (head == "surrogate-vi") id.kind = Kind::SurrogateVI;
  else if (head == "rk4") id.kind = Kind::RK4;
  else if (head == "herk4") id.kind = Kind::HERK4;
  else if (head == "hem4") id.kind = Kind::HEM4;
  else throw ConfigError("unknown integrator '" + text + "'");
  return id;
}

std::string IntegratorId::str() const {
  switch (kind) {
    case Kind::NominalVI: return "nominal-vi";
    case Kind::SurrogateVI: return order ? "surrogate-vi," + std::to_string(*order) : "surrogate-vi";
    case Kind::RK4: return "rk4";
    case Kind::HERK4: return "herk4";
    case Kind::HEM4: return "hem4";
  }
  return "";
}

void check_compatible(const SystemSpec& spec, const IntegratorId& id) {
  using K = IntegratorId::Kind;
  if (id.kind == K::RK4 && spec.constraint)
    throw ConfigError("rk4 cannot integrate the constrained system " + spec.name);
  if (id.kind == K::SurrogateVI) {
    if (spec.force && spec.constraint)
      throw ConfigError("surrogate-vi: forced constrained systems are not supported");
    if (id.order) {
      const auto* quad = dynamic_cast<const QuadraticLagrangian*>(spec.lagrangian.get());
      if (!quad || spec.force || spec.constraint || quad->f().norm() != 0.0)
        throw ConfigError("surrogate-vi," + std::to_string(*id.order) +
                          " needs an unforced linear system");
    }
  }
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double residual_of(const SystemSpec& spec, const Vec& q) {
  return spec.constraint ? inf_norm(spec.constraint->eval(q)) : 0.0;
}

template <class State>
Trajectory collect(const SystemSpec& spec, const std::vector<State>& states) {
  Trajectory tr;
  tr.t.reserve(states.size());
  tr.q.reserve(states.size());
  for (const auto& s : states) {
    tr.t.push_back(s.t);
    tr.q.push_back(s.q);
    tr.max_constraint_residual = std::max(tr.max_constraint_residual, residual_of(spec, s.q));
  }
  return tr;
}

// Explicit loops for the Runge-Kutta family, same grid as integrate().
template <class Step>
Trajectory run_explicit(const SystemSpec& spec, Vec x, double h, double t_final, StepStats* stats,
                        Step&& step) {
  const long n = step_count(spec.initial.t, t_final, h);
  const auto dim = spec.lagrangian->dim();
  Trajectory tr;
  tr.t.reserve(n + 1);
  tr.q.reserve(n + 1);
  tr.t.push_back(spec.initial.t);
  tr.q.push_back(x.head(dim));
  tr.max_constraint_residual = residual_of(spec, tr.q.back());
  for (long k = 0; k < n; ++k) {
    const double t = spec.initial.t + static_cast<double>(k) * h;
    const auto t0 = Clock::now();
    try {
      x = step(x, t);
    } catch (Error& e) {
      e.set_step_index(k);
      throw;
    }
    if (stats) {
      stats->steps += 1;
      stats->step_seconds += seconds_since(t0);
    }
    tr.t.push_back(spec.initial.t + static_cast<double>(k + 1) * h);
    tr.q.push_back(x.head(dim));
    tr.max_constraint_residual = std::max(tr.max_constraint_residual, residual_of(spec, tr.q.back()));
  }
  return tr;
}

}  // namespace

Trajectory simulate(const SystemSpec& spec, const IntegratorId& id, double h, double t_final,
                    double eps_tol, StepStats* stats) {
  using K = IntegratorId::Kind;
  check_compatible(spec, id);
  IntegratorConfig cfg;
  cfg.h = h;
  cfg.eps_tol = eps_tol;
  cfg.validate();
  const LagrangianPtr& L = spec.lagrangian;
  const ContinuousState& x0 = spec.initial;

  if (id.kind == K::RK4) {
    const OdeFn f = lagrangian_ode(L, spec.force);
    Vec x(2 * L->dim());
    x << x0.q, x0.qdot;
    return run_explicit(spec, x, h, t_final, stats,
                        [&](const Vec& xk, double t) { return rk4_step(f, xk, t, h); });
  }
  if (id.kind == K::HERK4 || id.kind == K::HEM4) {
    const ConstrainedSystem sys{L, spec.constraint, spec.force};
    const ButcherTableau& tab =
        id.kind == K::HEM4 ? hem4_tableau() : *[] {
          static const ButcherTableau t = ButcherTableau::classical_rk4();
          return &t;
        }();
    Vec x(2 * L->dim());
    x << x0.q, x0.qdot;
    const auto n = L->dim();
    return run_explicit(spec, x, h, t_final, stats, [&](const Vec& xk, double t) {
      ConstrainedState s{xk.head(n), xk.tail(n), t, 0};
      ConstrainedState r = half_explicit_step(tab, sys, s, h);
      Vec out(2 * n);
      out << r.q, r.v;
      return out;
    });
  }

  // Variational integrators. The initial momentum is always the nominal one.
  const DiscreteState p0 = init_from_velocity(*L, x0);
  const bool surrogate = id.kind == K::SurrogateVI;

  if (spec.constraint) {
    const ConstraintModel& c = *spec.constraint;
    LagrangianPtr Ls = L;
    const ForceModel* F = spec.force.get();
    if (surrogate) Ls = surrogate_constrained(L, spec.constraint, h).lagrangian;
    ConstrainedDiscreteState s0;
    static_cast<DiscreteState&>(s0) = p0;
    s0.lambda = Vec::Zero(c.count());
    auto states = integrate(
        [&](const ConstrainedDiscreteState& s) {
          return step_constrained(*Ls, F, c, s, Vec(), cfg, stats);
        },
        s0, t_final, cfg);
    return collect(spec, states);
  }

  if (spec.force) {
    if (!surrogate) {
      auto states = integrate(
          [&](const DiscreteState& s) {
            return step_forced(*L, *spec.force, s, Vec(), cfg, stats);
          },
          p0, t_final, cfg);
      return collect(spec, states);
    }
    const ForcedSurrogateStepper stepper(surrogate_forced(L, spec.force, h));
    auto states = integrate(
        [&](const HistoryState& s) { return stepper.step(s, cfg, stats); }, stepper.init(x0, h),
        t_final, cfg);
    return collect(spec, states);
  }

  LagrangianPtr Ls = L;
  if (surrogate) {
    if (id.order) {
      const auto* quad = dynamic_cast<const QuadraticLagrangian*>(L.get());
      Ls = linear_surrogate(quad->M(), quad->K(), h, *id.order).lagrangian();
    } else {
      Ls = surrogate_conservative(L, h);
    }
  }
  auto states = integrate(
      [&](const DiscreteState& s) { return step_unforced(*Ls, s, cfg, stats); }, p0, t_final, cfg);
  return collect(spec, states);
}

// --- Timing ------------------------------------------------------------------------

double TimingResult::d_eval_share() const {
  return stats.step_seconds > 0.0 ? (stats.d1_seconds + stats.d2d1_seconds) / stats.step_seconds
                                  : 0.0;
}

TimingResult time_integrator(const SystemSpec& spec, const IntegratorId& id, double h,
                             double t_final, double eps_tol, int reps) {
  if (reps < 1) throw InvalidParameter("time_integrator: reps must be >= 1");
  TimingResult out;
  StepStats counters;
  out.trajectory = simulate(spec, id, h, t_final, eps_tol, &counters);

  std::vector<double> times;
  StepStats timed;
  for (int r = 0; r < reps; ++r) {
    StepStats local;
    const auto t0 = Clock::now();
    simulate(spec, id, h, t_final, eps_tol, &local);
    times.push_back(seconds_since(t0));
    timed += local;
  }
  const double n = static_cast<double>(reps);
  out.mean_s = std::accumulate(times.begin(), times.end(), 0.0) / n;
  if (reps > 1) {
    double ss = 0.0;
    for (double t : times) ss += (t - out.mean_s) * (t - out.mean_s);
    out.std_s = std::sqrt(ss / (n - 1.0));
  }
  out.stats = counters;
  out.stats.d1_seconds = timed.d1_seconds / n;
  out.stats.d2d1_seconds = timed.d2d1_seconds / n;
  out.stats.step_seconds = timed.step_seconds / n;
  out.per_step_s = counters.steps > 0 ? out.stats.step_seconds / static_cast<double>(counters.steps)
                                      : 0.0;
  return out;
}

// --- Configuration -----------------------------------------------------------------

namespace {

template <class T>
T get_as(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config: bad value for '") + key + "'");
  }
}

std::vector<double> parse_sweep(const json& j) {
  std::vector<double> h;
  if (j.is_array()) {
    for (const auto& x : j) {
      if (!x.is_number()) throw ConfigError("config: h entries must be numbers");
      h.push_back(x.get<double>());
    }
  } else if (j.is_object()) {
    for (const auto& [k, v] : j.items())
      if (k != "start" && k != "ratio" && k != "count")
        throw ConfigError("config: unknown h range key '" + k + "'");
    const double start = get_as<double>(j, "start");
    const double ratio = get_as<double>(j, "ratio");
    const int count = get_as<int>(j, "count");
    if (!(ratio > 0.0) || count < 0) throw ConfigError("config: bad geometric h range");
    for (int i = 0; i < count; ++i) h.push_back(start * std::pow(ratio, i));
  } else {
    throw ConfigError("config: h must be a list or a {start, ratio, count} range");
  }
  return h;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  ExperimentConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "system") c.system = get_as<std::string>(j, "system");
    else if (key == "integrator") c.integrators = {get_as<std::string>(j, "integrator")};
    else if (key == "integrators") c.integrators = get_as<std::vector<std::string>>(j, "integrators");
    else if (key == "h") c.h = parse_sweep(v);
    else if (key == "t_final") c.t_final = get_as<double>(j, "t_final");
    else if (key == "eps_tol") c.eps_tol = get_as<double>(j, "eps_tol");
    else if (key == "benchmark") c.benchmark = get_as<std::string>(j, "benchmark");
    else if (key == "benchmark_h") c.benchmark_h = get_as<double>(j, "benchmark_h");
    else if (key == "benchmark_integrator") c.benchmark_integrator = get_as<std::string>(j, "benchmark_integrator");
    else if (key == "reps") c.reps = get_as<int>(j, "reps");
    else if (key == "out") c.out = get_as<std::string>(j, "out");
    else throw ConfigError("config: unknown key '" + key + "'");
  }
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig c = from_json_text(ss.str());
  // Relative output paths are taken relative to the config file.
  if (c.out.is_relative()) c.out = path.parent_path() / c.out;
  return c;
}

void ExperimentConfig::validate() const {
  if (system.empty()) throw ConfigError("config: no system given");
  if (integrators.empty()) throw ConfigError("config: no integrator given");
  if (h.empty()) throw ConfigError("config: empty h sweep");
  for (double x : h)
    if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError("config: every h must be positive");
  if (t_final && !(*t_final > 0.0)) throw ConfigError("config: t_final must be positive");
  if (!(eps_tol > 0.0)) throw ConfigError("config: eps_tol must be positive");
  if (!benchmark.empty() && benchmark != "analytic" && benchmark != "self")
    throw ConfigError("config: benchmark must be 'analytic' or 'self'");
  if (!(benchmark_h > 0.0)) throw ConfigError("config: benchmark_h must be positive");
  if (reps < 1) throw ConfigError("config: reps must be >= 1");
  for (const auto& i : integrators) IntegratorId::parse(i);
  IntegratorId::parse(benchmark_integrator);
}

// --- Experiment runner -------------------------------------------------------------

namespace {

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Self-benchmark trajectories: memoized in-process and on disk next to the output.
struct BenchmarkCache {
  std::map<std::string, Trajectory> memory;

  static std::string key(const SystemSpec& spec, const std::string& integrator, double h,
                         double t_final, double eps_tol) {
    return spec.name + "|" + integrator + "|" + fmt17(h) + "|" + fmt17(t_final) + "|" +
           fmt17(eps_tol) + "|" + generated::kVersion;
  }

  static fs::path file_for(const fs::path& dir, const std::string& key) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016zx", std::hash<std::string>{}(key));
    return dir / (std::string("benchmark-") + buf + ".bin");
  }

  static bool load(const fs::path& file, const std::string& key, Trajectory& tr) {
    std::ifstream in(file, std::ios::binary);
    if (!in) return false;
    std::string stored;
    if (!std::getline(in, stored) || stored != key) return false;
    uint64_t n = 0, dim = 0;
    double resid = 0.0;
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    in.read(reinterpret_cast<char*>(&dim), sizeof dim);
    in.read(reinterpret_cast<char*>(&resid), sizeof resid);
    if (!in || n > (1u << 28) || dim > 1024) return false;
    tr = Trajectory{};
    tr.t.resize(n);
    tr.q.assign(n, Vec(static_cast<Eigen::Index>(dim)));
    tr.max_constraint_residual = resid;
    for (uint64_t k = 0; k < n; ++k) {
      in.read(reinterpret_cast<char*>(&tr.t[k]), sizeof(double));
      in.read(reinterpret_cast<char*>(tr.q[k].data()), static_cast<std::streamsize>(dim * sizeof(double)));
    }
    return static_cast<bool>(in);
  }

  static void store(const fs::path& file, const std::string& key, const Trajectory& tr) {
    fs::create_directories(file.parent_path());
    const fs::path tmp = file.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      out << key << '\n';
      const uint64_t n = tr.t.size(), dim = tr.q.empty() ? 0 : tr.q[0].size();
      out.write(reinterpret_cast<const char*>(&n), sizeof n);
      out.write(reinterpret_cast<const char*>(&dim), sizeof dim);
      out.write(reinterpret_cast<const char*>(&tr.max_constraint_residual), sizeof(double));
      for (uint64_t k = 0; k < n; ++k) {
        out.write(reinterpret_cast<const char*>(&tr.t[k]), sizeof(double));
        out.write(reinterpret_cast<const char*>(tr.q[k].data()), static_cast<std::streamsize>(dim * sizeof(double)));
      }
    }
    fs::rename(tmp, file);
  }

  Trajectory get(const SystemSpec& spec, const std::string& integrator, double h, double t_final,
                 double eps_tol, const fs::path& dir, std::string& status) {
    const std::string k = key(spec, integrator, h, t_final, eps_tol);
    if (auto it = memory.find(k); it != memory.end()) {
      status = "hit";
      return it->second;
    }
    const fs::path file = file_for(dir, k);
    Trajectory tr;
    if (load(file, k, tr)) {
      status = "hit";
    } else {
      status = "miss";
      tr = simulate(spec, IntegratorId::parse(integrator), h, t_final, eps_tol);
      store(file, k, tr);
    }
    memory.emplace(k, tr);
    return tr;
  }
};

BenchmarkCache& benchmark_cache() {
  static BenchmarkCache cache;
  return cache;
}

std::string file_stem(const std::string& system, const std::string& integrator) {
  std::string s = system + "_" + integrator;
  std::replace(s.begin(), s.end(), ',', '-');
  return s;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
  }
  fs::rename(tmp, path);
}

json stats_json(const TimingResult& t) {
  const StepStats& s = t.stats;
  return {{"steps", s.steps},
          {"newton_iterations", s.newton_iterations},
          {"d1_evals", s.d1_evals},
          {"d2d1_evals", s.d2d1_evals},
          {"d1_seconds", s.d1_seconds},
          {"d2d1_seconds", s.d2d1_seconds},
          {"step_seconds", s.step_seconds},
          {"per_step_seconds", t.per_step_s},
          {"d_eval_share", t.d_eval_share()},
          {"max_constraint_residual", t.trajectory.max_constraint_residual}};
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const SystemSpec spec = preset(cfg.system);
  const double t_final = cfg.t_final.value_or(spec.t_final);
  if (!(t_final > spec.initial.t)) throw ConfigError("config: t_final must exceed the start time");

  std::vector<IntegratorId> ids;
  for (const auto& s : cfg.integrators) {
    ids.push_back(IntegratorId::parse(s));
    check_compatible(spec, ids.back());
  }
  std::vector<double> hs = cfg.h;
  std::sort(hs.begin(), hs.end(), std::greater<>());
  hs.erase(std::unique(hs.begin(), hs.end()), hs.end());

  ExperimentResult result;
  result.benchmark_mode = cfg.benchmark.empty() ? (spec.has_analytic() ? "analytic" : "self")
                                                : cfg.benchmark;
  Oracle oracle;
  if (result.benchmark_mode == "analytic") {
    oracle = analytic_oracle(spec, t_final);
  } else {
    const IntegratorId bid = IntegratorId::parse(cfg.benchmark_integrator);
    check_compatible(spec, bid);
    oracle = interpolating_oracle(benchmark_cache().get(spec, bid.str(), cfg.benchmark_h, t_final,
                                                        cfg.eps_tol, cfg.out / ".svibench-cache",
                                                        result.benchmark_cache));
  }

  for (const auto& id : ids) {
    IntegratorResult run;
    run.integrator = id.str();
    for (double h : hs) {
      TimingResult t = time_integrator(spec, id, h, t_final, cfg.eps_tol, cfg.reps);
      ConvergenceRecord r;
      r.h = h;
      r.e_l2 = error_L2(t.trajectory, oracle);
      r.time_mean_s = t.mean_s;
      r.time_std_s = t.std_s;
      run.records.push_back(r);
      t.trajectory.t.clear();  // keep only the summary
      t.trajectory.q.clear();
      run.timings.push_back(std::move(t));
    }
    std::optional<double> slope;
    try {
      slope = fit_convergence_slope(run.records);
    } catch (const InsufficientData&) {
    }
    for (auto& r : run.records) r.slope = slope;
    result.runs.push_back(std::move(run));
  }

  // Every run succeeded: emit the artifacts.
  for (auto& run : result.runs) {
    const std::string stem = file_stem(cfg.system, run.integrator);
    run.csv = cfg.out / (stem + ".csv");
    run.json = cfg.out / (stem + ".json");
    std::string csv = "h,e_l2,time_mean_s,time_std_s\n";
    json rows = json::array();
    for (size_t i = 0; i < run.records.size(); ++i) {
      const auto& r = run.records[i];
      csv += fmt17(r.h) + "," + fmt17(r.e_l2) + "," + fmt17(r.time_mean_s) + "," +
             fmt17(r.time_std_s) + "\n";
      json row = stats_json(run.timings[i]);
      row["h"] = r.h;
      row["e_l2"] = r.e_l2;
      rows.push_back(row);
    }
    json meta = {{"version", generated::kVersion},
                 {"system", cfg.system},
                 {"parameters", spec.describe_parameters()},
                 {"integrator", run.integrator},
                 {"t_final", t_final},
                 {"eps_tol", cfg.eps_tol},
                 {"benchmark", result.benchmark_mode},
                 {"reps", cfg.reps},
                 {"h", hs},
                 {"records", rows}};
    if (result.benchmark_mode == "self") {
      meta["benchmark_h"] = cfg.benchmark_h;
      meta["benchmark_integrator"] = cfg.benchmark_integrator;
      meta["benchmark_cache"] = result.benchmark_cache;
    }
    meta["slope"] = run.records.empty() || !run.records[0].slope ? json(nullptr)
                                                                  : json(*run.records[0].slope);
    write_text_atomic(run.csv, csv);
    write_text_atomic(run.json, meta.dump(2) + "\n");
  }
  return result;
}

std::vector<ConvergenceRecord> read_convergence_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "h,e_l2,time_mean_s,time_std_s")
    throw ConfigError(path.string() + ": unexpected CSV header");
  std::vector<ConvergenceRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ConvergenceRecord r;
    char c1, c2, c3;
    std::istringstream ls(line);
    if (!(ls >> r.h >> c1 >> r.e_l2 >> c2 >> r.time_mean_s >> c3 >> r.time_std_s) || c1 != ',' ||
        c2 != ',' || c3 != ',')
      throw ConfigError(path.string() + ": malformed row '" + line + "'");
    out.push_back(r);
  }
  return out;
}

}  // namespace svi
