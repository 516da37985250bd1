#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

#include "fracmap/energy.hpp"
#include "fracmap/geometry.hpp"
#include "fracmap/mesh.hpp"

namespace fracmap {

/// τ(λ τ⁻¹(x)); fixes both poles.
inline SpherePoint mobius_dilate(const SpherePoint& x, double lambda) {
  require(lambda > 0.0 && std::isfinite(lambda), ErrorKind::Domain, "dilation factor must be positive");
  if (chordal_distance(x, SpherePoint::north(x.dim())) <= kPoleTolerance) return SpherePoint::north(x.dim());
  return stereo_lift(Vector(lambda * stereo_project(x)));
}

/// u_λ(x) = u(τ(λτ⁻¹(x))) by interpolation and re-projection.
inline Field conformal_rescale(const Field& field, double lambda) {
  require(lambda > 0.0 && std::isfinite(lambda), ErrorKind::Domain, "conformal_rescale needs lambda > 0");
  const SphereMesh& mesh = field.mesh();
  require(mesh.size() >= 32, ErrorKind::Resolution, "conformal_rescale needs at least 32 nodes");
  Values out(field.values().rows(), field.values().cols());
  parallel_for(mesh.size(), [&](std::size_t i) {
    out.row(static_cast<Eigen::Index>(i)) = field.sample(mobius_dilate(mesh.node(i), lambda)).transpose();
  });
  return field.with_values(std::move(out));
}

/// n(t/s − 1), the exponent of the rescaling prefactors.
inline double rescale_exponent(const EnergyParams& params) { return params.n * (params.t / params.s - 1.0); }

/// K_λ(r, R) = [f(r) f(R)]^{(n/2)(t/s−1)}, f(r) = (r² + λ²)/(λ(r² + 1)).
inline double kernel_K(double lambda, double r, double R, const EnergyParams& params) {
  require(lambda > 0.0, ErrorKind::Domain, "kernel_K needs lambda > 0");
  const auto f = [lambda](double x) { return (x * x + lambda * lambda) / (lambda * (x * x + 1.0)); };
  return std::pow(f(r) * f(R), 0.5 * rescale_exponent(params));
}

struct KernelBoundReport {
  double both_small = -std::numeric_limits<double>::infinity();
  double both_large = -std::numeric_limits<double>::infinity();
  double mixed = -std::numeric_limits<double>::infinity();
  std::size_t samples = 0;

  double max_violation() const { return std::max({both_small, both_large, mixed}); }
};

/// Samples (r, R) log-uniformly on [1e-3, 1e3]² and records max K/bound − 1 per
/// regime, with bounds (2λ)^e (both ≤ λ), (2/λ)^e (both ≥ λ) and their mean otherwise.
inline KernelBoundReport kernel_bound_check(double lambda, const EnergyParams& params, std::size_t samples,
                                            std::uint64_t seed = 20240601) {
  require(lambda > 0.0 && lambda < 2.0, ErrorKind::Precondition, "kernel_bound_check needs lambda in (0, 2)");
  const double e = rescale_exponent(params);
  const double small = std::pow(2.0 * lambda, e);
  const double large = std::pow(2.0 / lambda, e);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> logr(std::log(1e-3), std::log(1e3));
  KernelBoundReport report;
  report.samples = samples;
  for (std::size_t k = 0; k < samples; ++k) {
    const double r = std::exp(logr(rng));
    const double R = std::exp(logr(rng));
    const double excess = kernel_K(lambda, r, R, params);
    if (r <= lambda && R <= lambda) {
      report.both_small = std::max(report.both_small, excess / small - 1.0);
    } else if (r >= lambda && R >= lambda) {
      report.both_large = std::max(report.both_large, excess / large - 1.0);
    } else {
      report.mixed = std::max(report.mixed, excess / (0.5 * (small + large)) - 1.0);
    }
  }
  return report;
}

/// Chordal radius of D(S, r_λ), the image of the chart ball |x| < λ.
inline double r_lambda(double lambda) { return 2.0 * lambda / std::sqrt(lambda * lambda + 1.0); }

struct BoundReport {
  double lambda = 1.0;
  double r_lambda = 0.0;
  double lhs = 0.0;
  double ball_energy = 0.0;
  double complement_energy = 0.0;
  double ball_factor = 1.0;
  double complement_factor = 1.0;

  double ball_term() const { return ball_factor * ball_energy; }
  double complement_term() const { return complement_factor * complement_energy; }
  double rhs() const { return ball_term() + complement_term(); }
  double slack() const { return rhs() - lhs; }
};

/// E_t(u_λ) against (2λ)^e E_t(u; D(S,r_λ) × Sⁿ) + (2/λ)^e E_t(u; (Sⁿ∖D) × Sⁿ).
inline BoundReport rescale_bound_check(const Field& field, double lambda, const EnergyParams& params) {
  require(lambda > 0.0 && lambda < 2.0, ErrorKind::Precondition, "rescale_bound_check needs lambda in (0, 2)");
  require(params.t > params.s, ErrorKind::Precondition, "rescale_bound_check needs t > s");
  const SphereMesh& mesh = field.mesh();
  const PairEnergy evaluator(field.mesh_ptr(), params);
  const IndexSet all = all_indices(mesh);
  const IndexSet ball = ball_indices(mesh, SpherePoint::south(mesh.dim()), r_lambda(lambda));
  const IndexSet rest = complement(mesh, ball);
  const double e = rescale_exponent(params);
  BoundReport report;
  report.lambda = lambda;
  report.r_lambda = r_lambda(lambda);
  report.lhs = evaluator.total(conformal_rescale(field, lambda).values());
  report.ball_energy = evaluator.energy(field.values(), ball, all);
  report.complement_energy = evaluator.energy(field.values(), rest, all);
  report.ball_factor = std::pow(2.0 * lambda, e);
  report.complement_factor = std::pow(2.0 / lambda, e);
  return report;
}

struct BalanceReport {
  double rho = 0.0;
  double t = 0.0;
  std::size_t ball_nodes = 0;
  double lhs = 0.0;
  double rhs_core = 0.0;
  double implied_constant = 0.0;
};

/// Implied constant C = E(D(y0,ρ) × Sⁿ) ρ^{n(t/s−1)} / E((Sⁿ∖D) × Sⁿ); 0/0 is 0.
inline BalanceReport balance_ratio(const Field& field, const SpherePoint& y0, double rho, const EnergyParams& params) {
  require(rho > 0.0 && rho < std::sqrt(0.8), ErrorKind::Precondition, "balance radius must lie in (0, sqrt(4/5))");
  const SphereMesh& mesh = field.mesh();
  const PairEnergy evaluator(field.mesh_ptr(), params);
  const IndexSet all = all_indices(mesh);
  const IndexSet ball = ball_indices(mesh, y0, rho);
  BalanceReport report;
  report.rho = rho;
  report.t = params.t;
  report.ball_nodes = ball.size();
  report.lhs = evaluator.energy(field.values(), ball, all);
  report.rhs_core = evaluator.energy(field.values(), complement(mesh, ball), all);
  const double scaled = report.lhs * std::pow(rho, rescale_exponent(params));
  if (report.rhs_core > 0.0) {
    report.implied_constant = scaled / report.rhs_core;
  } else {
    report.implied_constant = scaled > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return report;
}

}  // namespace fracmap
