#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "fracmap/energy.hpp"
#include "fracmap/error.hpp"
#include "fracmap/geometry.hpp"
#include "fracmap/mesh.hpp"

namespace fracmap {

/// Cubic smoothstep on [0, 1].
inline double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

namespace detail {

inline void require_compatible(const Field& u, const Field& v) {
  require(u.mesh_ptr() == v.mesh_ptr() || u.mesh().nodes() == v.mesh().nodes(), ErrorKind::Domain,
          "fields must share a mesh");
  require(u.target().ambient_dim == v.target().ambient_dim, ErrorKind::Domain, "fields must share a target");
}

/// π((1−η)a + ηb), reporting the blend norm so callers can find the worst node.
struct Blend {
  Vector value;
  double norm;
};

inline Blend blend(const Vector& a, const Vector& b, double eta) {
  const Vector mix = (1.0 - eta) * a + eta * b;
  return {mix, mix.norm()};
}

inline void throw_glue_failure(std::size_t node, double norm, const TargetManifold& target) {
  throw Error(ErrorKind::GlueFailure,
              "blend leaves the tubular neighbourhood at node " + std::to_string(node) + " (|blend| = " +
                  std::to_string(norm) + ", tubular radius " + std::to_string(target.tubular_radius) + ")",
              node);
}

}  // namespace detail

/// v on B(center, ρ), u outside B(center, 2ρ), projected smoothstep blend between (chordal radius).
inline Field cutoff_interpolate(const Field& u, const Field& v, const SpherePoint& center, double rho) {
  detail::require_compatible(u, v);
  require(rho > 0.0, ErrorKind::Precondition, "cutoff radius must be positive");
  const SphereMesh& mesh = u.mesh();
  const TargetManifold& target = u.target();
  Values out = u.values();
  std::optional<std::size_t> worst;
  double worst_norm = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const double d = chordal_distance(mesh.node(i), center);
    const auto row = static_cast<Eigen::Index>(i);
    if (d <= rho) {
      out.row(row) = v.values().row(row);
    } else if (d < 2.0 * rho) {
      const double eta = smoothstep((2.0 * rho - d) / rho);
      const auto mix = detail::blend(u.value(i), v.value(i), eta);
      if (mix.norm <= 1.0 - target.tubular_radius && mix.norm < worst_norm) {
        worst = i;
        worst_norm = mix.norm;
      }
      if (mix.norm > 0.0) out.row(row) = (mix.value / mix.norm).transpose();
    }
  }
  if (worst) detail::throw_glue_failure(*worst, worst_norm, target);
  return u.with_values(std::move(out));
}

/// Nodes in the stereographic chart centred at a point; the antipode has no
/// chart coordinates and is flagged instead.
struct ChartNodes {
  StereoChart chart;
  Values coords;
  std::vector<double> radius;
  std::vector<bool> at_infinity;
  std::vector<double> weights;

  ChartNodes(const SphereMesh& mesh, const SpherePoint& center)
      : chart(center),
        coords(Values::Zero(static_cast<Eigen::Index>(mesh.size()), mesh.dim())),
        radius(mesh.size(), std::numeric_limits<double>::infinity()),
        at_infinity(mesh.size(), false),
        weights(mesh.size(), 0.0) {
    require(center.dim() == mesh.dim(), ErrorKind::Domain, "chart centre has the wrong dimension");
    for (std::size_t i = 0; i < mesh.size(); ++i) {
      const SpherePoint x = mesh.node(i);
      if (chart.at_infinity(x)) {
        at_infinity[i] = true;
        continue;
      }
      const Vector z = chart.to_chart(x);
      coords.row(static_cast<Eigen::Index>(i)) = z.transpose();
      radius[i] = z.norm();
      weights[i] = mesh.weight(i) * chart.measure_factor(z);
    }
  }

  Vector at(std::size_t i) const { return coords.row(static_cast<Eigen::Index>(i)).transpose(); }

  IndexSet where(const std::function<bool(double)>& keep) const {
    IndexSet out;
    for (std::size_t i = 0; i < radius.size(); ++i)
      if (!at_infinity[i] && keep(radius[i])) out.push_back(i);
    return out;
  }

  PointCloud cloud() const { return PointCloud{coords, weights}; }
};

/// Chart-Euclidean energy ∫_A ∫_B |f(x)−f(y)|^p / |x−y|^{n+tp} dx dy.
inline double chart_energy(const ChartNodes& chart, const Values& values, const EnergyParams& params,
                           const IndexSet& rows, const IndexSet& cols) {
  return cloud_energy(chart.cloud(), values, params.p, params.kernel_exponent(), rows, cols,
                      params.quad.deterministic);
}

/// Measured [w]^p on B(2r) against the glue estimate, all in chart coordinates.
/// `sp` is t·p for the order the energies were measured at; σ = max(p − 1, sp).
struct GlueEnergyReport {
  int n = 1;
  double p = 2.0;
  double sp = 1.0;
  double sigma = 1.0;
  double r = 0.0;
  double delta = 0.0;
  double lhs = 0.0;
  double u_annulus = 0.0;
  double v_ball = 0.0;
  double boundary_u = 0.0;
  double boundary_v = 0.0;
  double boundary_sphere = 0.0;
  double sup_gap = 0.0;

  double boundary_term() const { return std::pow(delta, -sp) * r * (boundary_u + boundary_v); }
  double sphere_term() const { return delta * r * boundary_sphere; }
  double gap_term() const { return std::pow(delta, -sigma) * std::pow(r, n - sp) * std::pow(sup_gap, p); }
  double rhs() const { return u_annulus + v_ball + boundary_term() + sphere_term() + gap_term(); }
  double ratio() const {
    const double total = rhs();
    if (total > 0.0) return lhs / total;
    return lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
};

struct GlueResult {
  Field field;
  GlueEnergyReport report;
};

namespace detail {

/// Quadrature of ∂B(r) in the chart: {±r} with unit weights for n=1, equal arcs for n=2.
inline std::vector<std::pair<Vector, double>> boundary_points(int n, double r, int samples = 128) {
  std::vector<std::pair<Vector, double>> out;
  if (n == 1) {
    for (double sign : {-1.0, 1.0}) out.emplace_back(Vector::Constant(1, sign * r), 1.0);
    return out;
  }
  const double arc = 2.0 * std::numbers::pi * r / samples;
  for (int k = 0; k < samples; ++k) {
    const double a = 2.0 * std::numbers::pi * (k + 0.5) / samples;
    out.emplace_back(Vector(Eigen::Vector2d(r * std::cos(a), r * std::sin(a))), arc);
  }
  return out;
}

}  // namespace detail

/// Luckhaus-type glue in the chart centred at `center`: u for |x| ≥ r, the
/// dilate v(x/(1−δ)) for |x| ≤ (1−δ)r, and the projected radial blend of
/// u(θ), v(θ), θ = r x/|x|, in between. η is 1 up to (1−3δ/4)r and 0 from (1−δ/2)r.
inline GlueResult luckhaus_glue(const Field& u, const Field& v, double r, double delta, const EnergyParams& params,
                                const std::optional<SpherePoint>& center = std::nullopt) {
  detail::require_compatible(u, v);
  require(r > 0.0, ErrorKind::Precondition, "glue radius must be positive");
  require(delta > 0.0 && delta < 0.25, ErrorKind::Precondition, "glue delta must lie in (0, 1/4)");
  const SphereMesh& mesh = u.mesh();
  const int n = mesh.dim();
  require(params.n == n, ErrorKind::Domain, "energy parameters do not match the mesh dimension");
  const TargetManifold& target = u.target();
  const ChartNodes chart(mesh, center.value_or(SpherePoint::south(n)));

  const double inner = (1.0 - delta) * r;
  const double full = (1.0 - 0.75 * delta) * r;
  const double none = (1.0 - 0.5 * delta) * r;
  const auto eta = [&](double rad) { return smoothstep((none - rad) / (none - full)); };

  Values out = u.values();
  std::optional<std::size_t> worst;
  double worst_norm = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const double rad = chart.radius[i];
    if (chart.at_infinity[i] || rad >= r) continue;
    const auto row = static_cast<Eigen::Index>(i);
    const Vector x = chart.at(i);
    if (rad <= inner) {
      out.row(row) = v.sample(chart.chart.from_chart(Vector(x / (1.0 - delta)))).transpose();
      continue;
    }
    const SpherePoint theta = chart.chart.from_chart(Vector(r * x / rad));
    const auto mix = detail::blend(u.sample(theta), v.sample(theta), eta(rad));
    if (mix.norm <= 1.0 - target.tubular_radius && mix.norm < worst_norm) {
      worst = i;
      worst_norm = mix.norm;
    }
    if (mix.norm > 0.0) out.row(row) = (mix.value / mix.norm).transpose();
  }
  if (worst) detail::throw_glue_failure(*worst, worst_norm, target);
  Field w = u.with_values(std::move(out));

  GlueEnergyReport report;
  report.r = r;
  report.delta = delta;
  report.n = n;
  report.p = params.p;
  report.sp = params.t * params.p;
  report.sigma = std::max(params.p - 1.0, report.sp);

  const IndexSet big = chart.where([&](double rad) { return rad < 2.0 * r; });
  const IndexSet annulus = chart.where([&](double rad) { return rad >= r && rad < 2.0 * r; });
  const IndexSet ball = chart.where([&](double rad) { return rad < r; });
  report.lhs = chart_energy(chart, w.values(), params, big, big);
  report.u_annulus = chart_energy(chart, u.values(), params, annulus, annulus);
  report.v_ball = chart_energy(chart, v.values(), params, ball, ball);

  const detail::PowerLaw power(params.p);
  const double exponent = params.kernel_exponent();
  const auto boundary = detail::boundary_points(n, r);
  std::vector<Vector> u_theta, v_theta;
  for (const auto& [theta, weight] : boundary) {
    const SpherePoint y = chart.chart.from_chart(theta);
    u_theta.push_back(u.sample(y));
    v_theta.push_back(v.sample(y));
  }
  const auto shell = [&](const Field& f, const std::vector<Vector>& values, const IndexSet& region) {
    double acc = 0.0;
    for (std::size_t b = 0; b < boundary.size(); ++b) {
      double inner_sum = 0.0;
      for (std::size_t j : region) {
        const double d = (chart.at(j) - boundary[b].first).norm();
        if (!(d > 0.0)) continue;
        inner_sum += chart.weights[j] * power.value((values[b] - f.value(j)).squaredNorm()) * std::pow(d, -exponent);
      }
      acc += boundary[b].second * inner_sum;
    }
    return acc;
  };
  report.boundary_u = shell(u, u_theta, annulus);
  report.boundary_v = shell(v, v_theta, ball);
  if (n >= 2) {
    double acc = 0.0;
    for (std::size_t a = 0; a < boundary.size(); ++a)
      for (std::size_t b = 0; b < boundary.size(); ++b) {
        if (a == b) continue;
        const double d = (boundary[a].first - boundary[b].first).norm();
        acc += boundary[a].second * boundary[b].second * power.value((u_theta[a] - u_theta[b]).squaredNorm()) *
               std::pow(d, -(n - 1 + report.sp));
      }
    report.boundary_sphere = acc;
  }
  for (std::size_t b = 0; b < boundary.size(); ++b)
    report.sup_gap = std::max(report.sup_gap, (v_theta[b] - u_theta[b]).norm());
  return GlueResult{std::move(w), report};
}

struct InversionResult {
  Field field;
  double inner_energy = 0.0;
  double outer_energy = 0.0;

  /// E(v, B(λρ)) / E(u, B(ρ)); 0/0 is 1.
  double ratio() const {
    if (inner_energy > 0.0) return outer_energy / inner_energy;
    return outer_energy > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  }
};

/// v = u on B(ρ), v(x) = u(ρ²x/|x|²) outside, in the chart centred at `center`.
inline InversionResult inversion_extend(const Field& u, double rho, double lambda, const EnergyParams& params,
                                        const std::optional<SpherePoint>& center = std::nullopt) {
  require(rho > 0.0 && std::isfinite(rho), ErrorKind::Precondition, "inversion radius must be positive");
  require(lambda >= 1.0 && std::isfinite(lambda * rho), ErrorKind::Precondition, "inversion needs lambda >= 1");
  const SphereMesh& mesh = u.mesh();
  const SpherePoint c = center.value_or(SpherePoint::south(mesh.dim()));
  const ChartNodes chart(mesh, c);
  Values out = u.values();
  const Vector at_center = u.sample(c);
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    if (chart.at_infinity[i]) {
      out.row(row) = at_center.transpose();
    } else if (chart.radius[i] > rho) {
      const Vector x = chart.at(i);
      out.row(row) = u.sample(chart.chart.from_chart(Vector(rho * rho * x / x.squaredNorm()))).transpose();
    }
  }
  Field v = u.with_values(std::move(out));
  const IndexSet small = chart.where([&](double rad) { return rad < rho; });
  const IndexSet large = chart.where([&](double rad) { return rad < lambda * rho; });
  const double inner = chart_energy(chart, u.values(), params, small, small);
  const double outer = chart_energy(chart, v.values(), params, large, large);
  return InversionResult{std::move(v), inner, outer};
}

/// ζ_ℓ = clamp(log(R/d) / log(R/ρ), 0, 1) with R = 2^{−ℓ}, ρ = R², d the chordal distance to `center`.
inline ScalarField capacity_cutoff(const MeshPtr& mesh, int ell, const SpherePoint& center) {
  require(ell >= 1, ErrorKind::Precondition, "capacity cutoff level must be positive");
  const double R = std::pow(2.0, -ell);
  const double rho = R * R;
  const double span = std::log(R / rho);
  Vector values(static_cast<Eigen::Index>(mesh->size()));
  std::size_t inside = 0;
  for (std::size_t i = 0; i < mesh->size(); ++i) {
    const double d = chordal_distance(mesh->node(i), center);
    if (d < rho) ++inside;
    values[static_cast<Eigen::Index>(i)] = d <= rho ? 1.0 : std::clamp(std::log(R / d) / span, 0.0, 1.0);
  }
  if (inside < 4)
    throw Error(ErrorKind::Resolution, "mesh does not resolve the cutoff core: " + std::to_string(inside) +
                                           " nodes within radius " + std::to_string(rho) + ", need 4");
  return ScalarField{mesh, std::move(values)};
}

/// u∘φ₁ in the chart centred at `center`: φ₁ is the identity on B(2ρ), collapses
/// |x| ≥ 3ρ to the origin, and maps x ↦ 2(3ρ − |x|) x/|x| in between.
inline Field opening_map(const Field& u, double rho, const std::optional<SpherePoint>& center = std::nullopt) {
  require(rho > 0.0 && std::isfinite(rho), ErrorKind::Precondition, "opening radius must be positive");
  const SphereMesh& mesh = u.mesh();
  const SpherePoint c = center.value_or(SpherePoint::south(mesh.dim()));
  const ChartNodes chart(mesh, c);
  const Vector at_center = u.sample(c);
  Values out = u.values();
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double rad = chart.radius[i];
    if (rad <= 2.0 * rho) continue;
    if (rad >= 3.0 * rho) {
      out.row(row) = at_center.transpose();
      continue;
    }
    const Vector x = chart.at(i);
    out.row(row) = u.sample(chart.chart.from_chart(Vector(2.0 * (3.0 * rho - rad) * x / rad))).transpose();
  }
  return u.with_values(std::move(out));
}

}  // namespace fracmap
