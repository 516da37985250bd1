#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "fracmap/energy.hpp"
#include "fracmap/error.hpp"
#include "fracmap/mesh.hpp"

namespace fracmap {

inline constexpr double kAntipodalGap = 2.0 - 1e-9;

namespace detail {

inline void check_gap(const Values& u, std::size_t a, std::size_t b) {
  const double gap = (u.row(static_cast<Eigen::Index>(a)) - u.row(static_cast<Eigen::Index>(b))).norm();
  if (gap >= kAntipodalGap)
    throw Error(ErrorKind::IllConditionedDegree,
                "antipodal jump between nodes " + std::to_string(a) + " and " + std::to_string(b), a);
}

}  // namespace detail

/// Unrounded degree: total signed angle / 2π on S¹, total signed image area / 4π on S².
inline double degree_real(const Field& field) {
  const SphereMesh& mesh = field.mesh();
  const int n = mesh.dim();
  require(field.target().ambient_dim == n + 1, ErrorKind::Domain, "degree needs target S^n for domain S^n");
  const Values& u = field.values();
  if (n == 1) {
    const std::size_t count = mesh.size();
    double total = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = (i + 1) % count;
      detail::check_gap(u, i, j);
      const double cross = u(i, 0) * u(j, 1) - u(i, 1) * u(j, 0);
      const double dot = u(i, 0) * u(j, 0) + u(i, 1) * u(j, 1);
      total += std::atan2(cross, dot);
    }
    return total / (2.0 * std::numbers::pi);
  }
  require(!mesh.triangles().empty(), ErrorKind::Unsupported, "degree on S^2 needs mesh triangles");
  double total = 0.0;
  for (const auto& t : mesh.triangles()) {
    for (int a = 0; a < 3; ++a) detail::check_gap(u, t[a], t[(a + 1) % 3]);
    total += signed_spherical_area(u.row(static_cast<Eigen::Index>(t[0])).transpose(),
                                   u.row(static_cast<Eigen::Index>(t[1])).transpose(),
                                   u.row(static_cast<Eigen::Index>(t[2])).transpose());
  }
  return total / (4.0 * std::numbers::pi);
}

inline int degree(const Field& field) { return static_cast<int>(std::lround(degree_real(field))); }

/// Small-energy test: [u]_{W^{s,p}} < eps at order t = s.
inline bool is_energy_trivial(const Field& field, const EnergyParams& params, double eps) {
  return seminorm(field, params.at_order(params.s)) < eps;
}

/// Standard degree-k map: θ ↦ kθ on S¹, z ↦ z^k (z̄^{|k|} for k < 0) in the stereographic chart of S².
inline Field degree_map(const MeshPtr& mesh, int k) {
  if (mesh->dim() == 1) {
    return Field::from_function(mesh, TargetManifold::sphere(2), [k](const SpherePoint& x) {
      const double angle = k * std::atan2(x[1], x[0]);
      return Vector(Eigen::Vector2d(std::cos(angle), std::sin(angle)));
    });
  }
  return Field::from_function(mesh, TargetManifold::sphere(3), [k](const SpherePoint& x) -> Vector {
    if (chordal_distance(x, SpherePoint::north(2)) <= kPoleTolerance) return SpherePoint::north(2).coords();
    const Vector z = stereo_project(x);
    std::complex<double> w(z[0], k >= 0 ? z[1] : -z[1]);
    w = std::pow(w, std::abs(k));
    return stereo_lift(Vector(Eigen::Vector2d(w.real(), w.imag()))).coords();
  });
}

}  // namespace fracmap
