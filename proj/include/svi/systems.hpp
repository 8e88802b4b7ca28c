#pragma once

// Catalog of test systems with their oracles and named presets.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "svi/model.hpp"

namespace svi {

struct SystemSpec {
  std::string name;
  LagrangianPtr lagrangian;
  ForcePtr force;            // null when unforced
  ConstraintPtr constraint;  // null when unconstrained
  ContinuousState initial;
  double t_final = 0.0;      // experiment window
  std::map<std::string, double> scalars;
  std::map<std::string, Mat> matrices;
  /// q_a(t); empty when no closed form exists.
  std::function<Vec(double)> analytic;

  bool has_analytic() const { return static_cast<bool>(analytic); }
  /// Scalar parameters as "key=value" pairs in key order, %g formatted.
  std::string describe_parameters() const;
  /// Total energy T + V for unforced systems with a QuadraticLagrangian.
  double energy(const Vec& q, const Vec& qd) const;
};

SystemSpec harmonic_oscillator(double M, double K, double q0, double qdot0);

/// M symmetric positive definite, K symmetric. The oracle uses the
/// generalized eigendecomposition K phi = w^2 M phi.
SystemSpec linear_ndof(const Mat& M, const Mat& K, const Vec& q0, const Vec& qdot0);

/// M qddot + C qdot + K q = 0. The analytic oracle covers the underdamped
/// regime only; evaluating it otherwise throws UnsupportedRegime.
SystemSpec damped_oscillator(double M, double K, double C, double q0, double qdot0);

/// Point mass in Cartesian (x, y), V = m g y, c = x^2 + y^2 - l.
SystemSpec pendulum_cartesian(double m, double l, double g, const Vec& q0, const Vec& qdot0);

/// q = (x1, y1, x2, y2), c = [x1^2 + y1^2 - l, (x1-x2)^2 + (y1-y2)^2 - l].
SystemSpec double_pendulum_cartesian(double m, double l, double g, const Vec& q0,
                                     const Vec& qdot0);

/// The 4-DOF mass and stiffness matrices of the higher-order experiment.
Mat benchmark_4dof_mass();
Mat benchmark_4dof_stiffness();

std::vector<std::string> preset_names();
/// Throws ConfigError for unknown names.
SystemSpec preset(const std::string& name);

}  // namespace svi
