#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "fracmap/energy.hpp"
#include "fracmap/homotopy.hpp"
#include "fracmap/mesh.hpp"

namespace fracmap {

struct MinimizeConfig {
  int max_iters = 20000;
  double tol_grad = 1e-6;
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 50;
  double initial_step = 1.0;
  /// Largest node displacement allowed per step, as a fraction of the minimum node spacing.
  double max_displacement = 0.5;

  void validate() const {
    require(max_iters >= 0, ErrorKind::Precondition, "optimizer.max_iters must be nonnegative");
    require(tol_grad > 0.0, ErrorKind::Precondition, "optimizer.tol_grad must be positive");
    require(armijo_c1 > 0.0 && armijo_c1 < 1.0, ErrorKind::Precondition, "optimizer.armijo_c1 must lie in (0, 1)");
    require(backtrack > 0.0 && backtrack < 1.0, ErrorKind::Precondition, "optimizer.backtrack must lie in (0, 1)");
    require(max_backtracks > 0, ErrorKind::Precondition, "optimizer.max_backtracks must be positive");
    require(initial_step > 0.0, ErrorKind::Precondition, "optimizer.initial_step must be positive");
    require(max_displacement > 0.0, ErrorKind::Precondition, "optimizer.max_displacement must be positive");
  }
};

enum class MinimizeStatus { converged, max_iters, stalled };

inline std::string to_string(MinimizeStatus status) {
  switch (status) {
    case MinimizeStatus::converged: return "converged";
    case MinimizeStatus::max_iters: return "max_iters";
    case MinimizeStatus::stalled: return "stalled";
  }
  return "unknown";
}

struct MinimizeResult {
  Field field;
  std::vector<double> energies;
  std::vector<double> residuals;
  std::vector<double> steps;
  int iterations = 0;
  int backtracks = 0;
  MinimizeStatus status = MinimizeStatus::max_iters;
  EnergyParams params;

  bool converged() const { return status == MinimizeStatus::converged; }
  double energy() const { return energies.back(); }
  double residual() const { return residuals.back(); }
};

struct StepInfo {
  int iteration;
  double energy;
  double residual;
  double step;
  const Values& values;
};

using StepObserver = std::function<void(const StepInfo&)>;

/// Projected gradient descent u ← π(u − α d), d_i = Π(u_i) g_i / w_i, with
/// Armijo backtracking. A trial is accepted only if its energy does not
/// exceed the current one, so the recorded trajectory is nonincreasing.
inline MinimizeResult minimize(const Field& field0, const EnergyParams& params, const MinimizeConfig& cfg = {},
                               const StepObserver& observer = {}) {
  cfg.validate();
  const PairEnergy evaluator(field0.mesh_ptr(), params);
  const SphereMesh& mesh = field0.mesh();
  const TargetManifold& target = field0.target();
  const auto rows = static_cast<Eigen::Index>(mesh.size());
  const double eps = std::numeric_limits<double>::epsilon();

  Values u = field0.values();
  double current = evaluator.total(u);
  Values grad = evaluator.gradient(u);
  double residual = el_residual(mesh, u, grad);

  MinimizeResult result{field0, {current}, {residual}, {}, 0, 0, MinimizeStatus::max_iters, params};
  if (residual <= cfg.tol_grad) {
    result.status = MinimizeStatus::converged;
    return result;
  }

  const double cap = cfg.max_displacement * mesh.min_spacing();
  double alpha = cfg.initial_step;
  Values direction(rows, u.cols());
  Values trial(rows, u.cols());

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    double slope = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double w = mesh.weight(static_cast<std::size_t>(i));
      direction.row(i) = (grad.row(i) - grad.row(i).dot(u.row(i)) * u.row(i)) / w;
      slope += w * direction.row(i).squaredNorm();
    }
    const double largest = direction.rowwise().norm().maxCoeff();

    bool accepted = false;
    int tries = 0;
    double next = current;
    for (; tries <= cfg.max_backtracks; ++tries) {
      if (alpha * largest > cap) {
        alpha *= cfg.backtrack;
        continue;
      }
      trial = u - alpha * direction;
      trial.rowwise().normalize();
      next = evaluator.total(trial);
      if (next <= current && next - current <= -cfg.armijo_c1 * alpha * slope + 4.0 * eps * current) {
        accepted = true;
        break;
      }
      alpha *= cfg.backtrack;
    }
    result.backtracks += tries;
    if (!accepted) {
      result.status = MinimizeStatus::stalled;
      break;
    }

    u.swap(trial);
    current = next;
    grad = evaluator.gradient(u);
    residual = el_residual(mesh, u, grad);
    result.iterations = iter + 1;
    result.energies.push_back(current);
    result.residuals.push_back(residual);
    result.steps.push_back(alpha);
    if (observer) observer(StepInfo{iter + 1, current, residual, alpha, u});
    if (tries == 0) alpha /= cfg.backtrack;
    if (residual <= cfg.tol_grad) {
      result.status = MinimizeStatus::converged;
      break;
    }
  }
  result.field = Field(field0.mesh_ptr(), std::move(u), target);
  return result;
}

/// Greedy energy-concentration scan: nodes whose ball energy E(B(c, rho), Sⁿ)
/// exceeds eps, strongest first, skipping nodes within rho of an accepted centre.
inline std::vector<std::size_t> detect_concentration(const Field& field, const EnergyParams& params, double eps,
                                                     double rho) {
  require(rho > 0.0 && rho < 2.0, ErrorKind::Precondition, "concentration radius must lie in (0, 2)");
  const SphereMesh& mesh = field.mesh();
  const std::vector<double> rows = PairEnergy(field.mesh_ptr(), params).row_energies(field.values());
  const std::size_t count = mesh.size();
  std::vector<double> ball(count, 0.0);
  parallel_for(count, [&](std::size_t c) {
    std::vector<double> parts;
    for (std::size_t i = 0; i < count; ++i)
      if (mesh.distance(c, i) < rho) parts.push_back(rows[i]);
    ball[c] = pairwise_sum(parts);
  });
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ball[a] > ball[b]; });
  std::vector<std::size_t> centers;
  for (std::size_t c : order) {
    if (!(ball[c] > eps)) break;
    const bool near = std::any_of(centers.begin(), centers.end(),
                                  [&](std::size_t other) { return mesh.distance(c, other) < rho; });
    if (!near) centers.push_back(c);
  }
  return centers;
}

struct ContinuationSchedule {
  double s = 0.5;
  std::vector<double> t_values;

  static ContinuationSchedule geometric(double s, double delta0 = 0.2, int stages = 4) {
    ContinuationSchedule schedule{s, {}};
    for (int k = 0; k < stages; ++k) schedule.t_values.push_back(s + delta0 * std::pow(2.0, -k));
    schedule.validate();
    return schedule;
  }

  void validate() const {
    require(!t_values.empty(), ErrorKind::Precondition, "schedule needs at least one order t");
    for (std::size_t k = 0; k < t_values.size(); ++k) {
      require(t_values[k] > s && t_values[k] < 1.0, ErrorKind::Precondition, "schedule orders must lie in (s, 1)");
      if (k > 0)
        require(t_values[k] < t_values[k - 1], ErrorKind::Precondition, "schedule must be strictly decreasing");
    }
  }
};

struct ConcentrationConfig {
  double eps = std::numeric_limits<double>::infinity();
  double rho = 0.5;
};

struct ContinuationStage {
  double t = 0.0;
  double energy_t = 0.0;
  double energy_s = 0.0;
  /// 2^{(t−s)p} E_t, the diameter bound for energy_s.
  double energy_s_bound = 0.0;
  double residual = 0.0;
  std::optional<int> degree;
  std::vector<std::size_t> centers;
  MinimizeResult result;

  bool bound_holds() const { return energy_s <= energy_s_bound; }
};

struct ContinuationReport {
  std::vector<ContinuationStage> stages;

  const Field& final_field() const { return stages.back().result.field; }
};

inline std::optional<int> audit_degree(const Field& field) {
  if (field.target().ambient_dim != field.mesh().dim() + 1) return std::nullopt;
  return degree(field);
}

/// Minimizes at each t of the schedule, warm-starting from the previous stage.
inline ContinuationReport continuation(const Field& field0, const ContinuationSchedule& schedule,
                                       const EnergyParams& base, const MinimizeConfig& cfg = {},
                                       const ConcentrationConfig& concentration = {},
                                       const std::function<void(std::size_t, const StepInfo&)>& observer = {}) {
  schedule.validate();
  require(std::abs(schedule.s - base.s) <= 1e-15, ErrorKind::Precondition, "schedule s must match the energy s");
  ContinuationReport report;
  Field current = field0;
  for (std::size_t k = 0; k < schedule.t_values.size(); ++k) {
    const EnergyParams params = base.at_order(schedule.t_values[k]);
    StepObserver stage_observer;
    if (observer) stage_observer = [&observer, k](const StepInfo& info) { observer(k, info); };
    MinimizeResult result = minimize(current, params, cfg, stage_observer);
    const double energy_t = result.energy();
    const double energy_s = energy(result.field, base.at_order(base.s));
    std::vector<std::size_t> centers;
    if (std::isfinite(concentration.eps))
      centers = detect_concentration(result.field, params, concentration.eps, concentration.rho);
    ContinuationStage stage{params.t,
                            energy_t,
                            energy_s,
                            std::pow(2.0, (params.t - params.s) * params.p) * energy_t,
                            result.residual(),
                            audit_degree(result.field),
                            std::move(centers),
                            std::move(result)};
    current = stage.result.field;
    report.stages.push_back(std::move(stage));
  }
  return report;
}

}  // namespace fracmap
