#pragma once

// Experiment harness: trajectories, error metrics, slope fits, timing and the
// run/preset/slope commands of the svibench executable.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "svi/del.hpp"
#include "svi/systems.hpp"

namespace svi {

/// Position samples on a uniform grid t_k = t0 + k h.
struct Trajectory {
  std::vector<double> t;
  std::vector<Vec> q;
  /// max |c(q_k)|_inf over the samples; 0 for unconstrained systems.
  double max_constraint_residual = 0.0;
};

/// Reference solution on [t0, t1].
struct Oracle {
  std::function<Vec(double)> q;
  double t0 = 0.0;
  double t1 = 0.0;
};

Oracle analytic_oracle(const SystemSpec& spec, double t_final);
/// Piecewise cubic interpolation of a fine uniform trajectory.
Oracle interpolating_oracle(Trajectory fine);

/// |q(t) - q_a(t)|_2 at the sample whose time equals t (WindowError if none).
double error_2norm(const Trajectory& traj, const Oracle& oracle, double t);
std::vector<double> error_2norm_series(const Trajectory& traj, const Oracle& oracle);
/// (int |q - q_a|^2 dt)^(1/2) by the trapezoid rule on the sample grid.
double error_L2(const Trajectory& traj, const Oracle& oracle);

struct ConvergenceRecord {
  double h = 0.0;
  double e_l2 = 0.0;
  double time_mean_s = 0.0;
  double time_std_s = 0.0;
  std::optional<double> slope;
};

constexpr double kErrorFloor = 1e-12;

/// Least-squares slope of log e against log h over records with e > 1e-12.
double fit_convergence_slope(const std::vector<ConvergenceRecord>& records);

/// nominal-vi | surrogate-vi[,order] | rk4 | herk4 | hem4
struct IntegratorId {
  enum class Kind { NominalVI, SurrogateVI, RK4, HERK4, HEM4 };
  Kind kind = Kind::NominalVI;
  std::optional<int> order;  // linear-surrogate truncation, surrogate-vi only

  static IntegratorId parse(const std::string& text);  // ConfigError
  std::string str() const;
};

/// Throws ConfigError if the integrator cannot run on the system.
void check_compatible(const SystemSpec& spec, const IntegratorId& id);

Trajectory simulate(const SystemSpec& spec, const IntegratorId& id, double h, double t_final,
                    double eps_tol, StepStats* stats = nullptr);

struct TimingResult {
  double mean_s = 0.0;
  double std_s = 0.0;
  double per_step_s = 0.0;
  /// Counters of a single integration; time fields averaged over the reps.
  StepStats stats;
  Trajectory trajectory;  // from the warm-up run

  /// (D1 + D2D1 evaluation time) / step time; 0 when nothing was timed.
  double d_eval_share() const;
};

/// One warm-up run, then `reps` timed full integrations.
TimingResult time_integrator(const SystemSpec& spec, const IntegratorId& id, double h,
                             double t_final, double eps_tol, int reps);

struct ExperimentConfig {
  std::string system;
  std::vector<std::string> integrators;
  std::vector<double> h;
  std::optional<double> t_final;  // preset window when unset
  double eps_tol = 1e-9;
  std::string benchmark;  // "analytic" | "self"; empty picks analytic when available
  double benchmark_h = 1e-4;
  std::string benchmark_integrator = "hem4";
  int reps = 10;
  std::filesystem::path out = ".";

  /// Reads the JSON config format documented in the README.
  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_file(const std::filesystem::path& path);
  void validate() const;  // ConfigError
};

struct IntegratorResult {
  std::string integrator;
  std::vector<ConvergenceRecord> records;
  std::vector<TimingResult> timings;
  std::filesystem::path csv;
  std::filesystem::path json;
};

struct ExperimentResult {
  std::vector<IntegratorResult> runs;
  std::string benchmark_mode;
  std::string benchmark_cache;  // "hit" | "miss" | "" (analytic)
};

/// Runs every integrator over the sweep and writes one CSV plus one JSON
/// sidecar per integrator. Nothing is written unless every run succeeds.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

std::vector<ConvergenceRecord> read_convergence_csv(const std::filesystem::path& path);

/// Entry point of svibench. Exit codes: 0 ok, 2 configuration error,
/// 3 integration failure, 1 anything else.
int cli_main(int argc, char** argv);

}  // namespace svi
