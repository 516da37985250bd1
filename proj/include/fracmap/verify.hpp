#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fracmap/energy.hpp"
#include "fracmap/error.hpp"
#include "fracmap/homotopy.hpp"
#include "fracmap/mesh.hpp"
#include "fracmap/minimizer.hpp"
#include "fracmap/rescaling.hpp"

namespace fracmap {

namespace detail {

/// Brute-force energy in long double, built straight from node distances and
/// weights (no kernel table), used as the finite-difference oracle.
inline long double reference_energy(const SphereMesh& mesh, const Values& u, const EnergyParams& params) {
  const std::size_t count = mesh.size();
  const long double p = params.p;
  const long double exponent = params.kernel_exponent();
  const auto diff_pow = [&](std::size_t a, std::size_t b) {
    long double sq = 0.0L;
    for (Eigen::Index c = 0; c < u.cols(); ++c) {
      const long double d = static_cast<long double>(u(static_cast<Eigen::Index>(a), c)) -
                            static_cast<long double>(u(static_cast<Eigen::Index>(b), c));
      sq += d * d;
    }
    return std::pow(sq, p / 2.0L);
  };
  const bool corrected = params.quad.diagonal == DiagonalPolicy::exclude_with_local_correction;
  const long double q = p - params.n - params.t * p;
  const long double adjacent = (std::pow(2.0L, q + 2.0L) - 2.0L) / ((q + 1.0L) * (q + 2.0L));
  long double total = 0.0L;
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < count; ++j) {
      if (i == j) continue;
      long double term = static_cast<long double>(mesh.weight(i)) * mesh.weight(j) *
                         std::pow(static_cast<long double>(mesh.distance(i, j)), -exponent) * diff_pow(i, j);
      if (corrected && (j == (i + 1) % count || i == (j + 1) % count)) term *= adjacent;
      total += term;
    }
    if (corrected) {
      const std::size_t next = (i + 1) % count;
      const std::size_t prev = (i + count - 1) % count;
      const long double h = mesh.weight(0);
      const long double span = mesh.distance(next, prev);
      total += 2.0L * std::pow(h, q + 2.0L) / ((q + 1.0L) * (q + 2.0L)) * diff_pow(next, prev) / std::pow(span, p);
    }
  }
  return total;
}

}  // namespace detail

/// Max relative error of energy_gradient against central differences of the
/// ambient energy, over coordinates with |g| > 1e−10 (0 if there are none).
inline double check_gradient(const Field& field, const EnergyParams& params, double h = 1e-6) {
  const SphereMesh& mesh = field.mesh();
  require(mesh.size() <= 128, ErrorKind::Precondition, "check_gradient needs at most 128 nodes");
  require(h > 0.0, ErrorKind::Precondition, "finite-difference step must be positive");
  const Values g = energy_gradient(field, params);
  Values u = field.values();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    for (Eigen::Index c = 0; c < u.cols(); ++c) {
      if (!(std::abs(g(i, c)) > 1e-10)) continue;
      const double saved = u(i, c);
      u(i, c) = saved + h;
      const long double up = detail::reference_energy(mesh, u, params);
      u(i, c) = saved - h;
      const long double down = detail::reference_energy(mesh, u, params);
      u(i, c) = saved;
      const double fd = static_cast<double>((up - down) / (2.0L * h));
      worst = std::max(worst, std::abs(fd - g(i, c)) / std::abs(g(i, c)));
    }
  }
  return worst;
}

struct SuperdifficultReport {
  double lhs = 0.0;
  double bound = 0.0;
  double ratio = 0.0;
};

/// lhs = ∫∫_{[λR,R]²} |rθ − ρω|^{−α} dr dρ by the composite midpoint rule;
/// bound = (1−λ) λ^{1−α} R |Rθ − Rω|^{1−α}; ratio = lhs / bound.
inline SuperdifficultReport check_superdifficult(double alpha, double lambda, const Vector& theta, const Vector& omega,
                                                 double R, int grid = 1000) {
  require(alpha > 1.0, ErrorKind::Precondition, "alpha must exceed 1");
  require(lambda > 0.0 && lambda < 1.0, ErrorKind::Precondition, "lambda must lie in (0, 1)");
  require(R > 0.0 && std::isfinite(R), ErrorKind::Precondition, "R must be positive");
  require(grid > 0, ErrorKind::Precondition, "quadrature grid must be positive");
  require(theta.size() == omega.size() && std::abs(theta.norm() - 1.0) < 1e-12 && std::abs(omega.norm() - 1.0) < 1e-12,
          ErrorKind::Domain, "theta and omega must be unit vectors of the same dimension");
  const double gap = (theta - omega).norm();
  if (!(gap > 1e-12)) throw Error(ErrorKind::DegenerateDirection, "theta and omega coincide");

  const double cos_angle = std::clamp(theta.dot(omega), -1.0, 1.0);
  const double a = lambda * R;
  const double cell = (R - a) / grid;
  std::vector<double> nodes(static_cast<std::size_t>(grid));
  for (int k = 0; k < grid; ++k) nodes[static_cast<std::size_t>(k)] = a + (k + 0.5) * cell;
  std::vector<double> rows(nodes.size());
  parallel_for(nodes.size(), [&](std::size_t k) {
    const double r = nodes[k];
    std::vector<double> terms(nodes.size());
    for (std::size_t l = 0; l < nodes.size(); ++l) {
      const double rho = nodes[l];
      const double sq = std::max(r * r + rho * rho - 2.0 * r * rho * cos_angle, 0.0);
      terms[l] = std::pow(sq, -0.5 * alpha);
    }
    rows[k] = pairwise_sum(terms);
  });
  SuperdifficultReport report;
  report.lhs = pairwise_sum(rows) * cell * cell;
  report.bound = (1.0 - lambda) * std::pow(lambda, 1.0 - alpha) * R * std::pow(R * gap, 1.0 - alpha);
  report.ratio = report.lhs / report.bound;
  return report;
}

/// u + a·ξ projected back, ξ a seeded Gaussian vector in the tangent space at each node.
inline Field perturb_tangential(const Field& field, double amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Values v = field.values();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    Eigen::RowVectorXd xi(v.cols());
    for (Eigen::Index c = 0; c < v.cols(); ++c) xi[c] = gauss(rng);
    xi -= xi.dot(v.row(i)) * v.row(i);
    v.row(i) += amplitude * xi;
  }
  return Field::projected(field.mesh_ptr(), v, field.target());
}

/// Seeded field of normalized Gaussian vectors.
inline Field random_field(const MeshPtr& mesh, const TargetManifold& target, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Values v(static_cast<Eigen::Index>(mesh->size()), target.ambient_dim);
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    for (Eigen::Index c = 0; c < v.cols(); ++c) v(i, c) = gauss(rng);
  v.rowwise().normalize();
  return Field::projected(mesh, v, target);
}

struct BubbleConfig {
  int n = 1;
  int k = 1;
  double s = 0.5;
  std::vector<double> t_values{0.7, 0.6, 0.55};
  std::size_t resolution = 512;
  /// Conformal concentration factor of the initial field (1 keeps θ ↦ kθ).
  double concentrate = 1.0;
  double noise = 0.0;
  std::uint64_t seed = 0;
  double eps = 0.5;
  double rho = 0.5;
  std::vector<double> balance_radii{0.3, 0.5};
  MinimizeConfig optimizer{};
};

struct BalanceEntry {
  /// Concentration centre, or none when the stage had no centre (south pole used).
  std::optional<std::size_t> center;
  BalanceReport report;
};

struct ExperimentStage {
  double t = 0.0;
  double energy_t = 0.0;
  double energy_s = 0.0;
  double residual = 0.0;
  std::optional<int> degree;
  std::string status;
  int iterations = 0;
  std::vector<std::size_t> centers;
  std::vector<BalanceEntry> balance;
};

struct ExperimentReport {
  BubbleConfig config;
  MeshPtr mesh;
  std::vector<ExperimentStage> stages;
};

inline Field bubble_initial_field(const MeshPtr& mesh, const BubbleConfig& cfg) {
  Field field = degree_map(mesh, cfg.k);
  if (cfg.concentrate != 1.0) field = conformal_rescale(field, cfg.concentrate);
  if (cfg.noise > 0.0) field = perturb_tangential(field, cfg.noise, cfg.seed);
  return field;
}

/// Continuation from a degree-k field with concentration scans and balance
/// ratios at every stage. Stalled stages are recorded, not fatal.
inline ExperimentReport bubbling_experiment(const BubbleConfig& cfg) {
  require(cfg.k != 0, ErrorKind::Precondition, "experiment.k must be nonzero");
  require(cfg.concentrate > 0.0, ErrorKind::Precondition, "experiment.concentrate must be positive");
  require(!cfg.balance_radii.empty(), ErrorKind::Precondition, "experiment.balance_radii must not be empty");
  const MeshPtr mesh = make_mesh(cfg.n, cfg.resolution);
  const EnergyParams base = EnergyParams::make(cfg.n, cfg.s, cfg.s);
  const ContinuationReport run = continuation(bubble_initial_field(mesh, cfg), {cfg.s, cfg.t_values}, base,
                                              cfg.optimizer, {cfg.eps, cfg.rho});
  ExperimentReport report{cfg, mesh, {}};
  for (const ContinuationStage& stage : run.stages) {
    ExperimentStage out;
    out.t = stage.t;
    out.energy_t = stage.energy_t;
    out.energy_s = stage.energy_s;
    out.residual = stage.residual;
    out.degree = stage.degree;
    out.status = to_string(stage.result.status);
    out.iterations = stage.result.iterations;
    out.centers = stage.centers;
    const EnergyParams params = base.at_order(stage.t);
    std::vector<std::optional<std::size_t>> anchors(stage.centers.begin(), stage.centers.end());
    if (anchors.empty()) anchors.push_back(std::nullopt);
    for (const auto& anchor : anchors) {
      const SpherePoint y0 = anchor ? mesh->node(*anchor) : SpherePoint::south(cfg.n);
      for (double radius : cfg.balance_radii)
        out.balance.push_back({anchor, balance_ratio(stage.result.field, y0, radius, params)});
    }
    report.stages.push_back(std::move(out));
  }
  return report;
}

}  // namespace fracmap
