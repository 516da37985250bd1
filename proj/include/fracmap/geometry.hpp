#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "fracmap/error.hpp"

namespace fracmap {

using Vector = Eigen::VectorXd;

/// Coordinate carrying the north/south poles. The circle chart
/// τ(r) = (2r/(r²+1), (r²−1)/(r²+1)) puts them on the last axis; for n ≥ 2 the
/// polar chart uses x₁ = cos φ, i.e. the first axis.
inline int pole_axis(int n) { return n == 1 ? 1 : 0; }

/// Point of Sⁿ ⊂ ℝⁿ⁺¹, normalized on construction.
class SpherePoint {
 public:
  SpherePoint() = default;

  explicit SpherePoint(Vector coords) : coords_(std::move(coords)) {
    require(coords_.size() >= 2, ErrorKind::Domain, "sphere point needs at least 2 coordinates");
    require(coords_.allFinite(), ErrorKind::Domain, "non-finite sphere point coordinates");
    const double norm = coords_.norm();
    require(norm > 0.0, ErrorKind::Domain, "cannot normalize the zero vector onto the sphere");
    coords_ /= norm;
  }

  static SpherePoint pole(int n, double sign) {
    Vector c = Vector::Zero(n + 1);
    c[pole_axis(n)] = sign;
    return SpherePoint(std::move(c));
  }
  static SpherePoint north(int n) { return pole(n, 1.0); }
  static SpherePoint south(int n) { return pole(n, -1.0); }

  const Vector& coords() const { return coords_; }
  int dim() const { return static_cast<int>(coords_.size()) - 1; }
  double operator[](Eigen::Index i) const { return coords_[i]; }

 private:
  Vector coords_;
};

inline double chordal_distance(const SpherePoint& x, const SpherePoint& y) {
  return (x.coords() - y.coords()).norm();
}

/// Inverse stereographic projection ℝ → S¹ ∖ {N}.
inline SpherePoint stereo_lift(double r) {
  require(std::isfinite(r), ErrorKind::Domain, "stereo_lift: non-finite chart coordinate");
  const double q = r * r + 1.0;
  Vector c(2);
  c << 2.0 * r / q, (r * r - 1.0) / q;
  return SpherePoint(std::move(c));
}

/// Inverse stereographic projection ℝⁿ → Sⁿ ∖ {N}.
inline SpherePoint stereo_lift(const Vector& x) {
  require(x.size() >= 1 && x.allFinite(), ErrorKind::Domain, "stereo_lift: non-finite chart coordinate");
  if (x.size() == 1) return stereo_lift(x[0]);
  const double r2 = x.squaredNorm();
  const double q = r2 + 1.0;
  Vector c(x.size() + 1);
  c[0] = (r2 - 1.0) / q;
  c.tail(x.size()) = 2.0 * x / q;
  return SpherePoint(std::move(c));
}

inline constexpr double kPoleTolerance = 1e-9;

inline Vector stereo_project(const SpherePoint& x) {
  const int n = x.dim();
  if (chordal_distance(x, SpherePoint::north(n)) <= kPoleTolerance)
    throw Error(ErrorKind::Pole, "stereo_project: point at the north pole");
  const Vector& c = x.coords();
  if (n == 1) {
    Vector r(1);
    r[0] = c[0] / (1.0 - c[1]);
    return r;
  }
  return c.tail(n) / (1.0 - c[0]);
}

inline double stereo_project_circle(const SpherePoint& x) {
  require(x.dim() == 1, ErrorKind::Domain, "stereo_project_circle expects a point of S^1");
  return stereo_project(x)[0];
}

/// Round sphere S^{M−1} ⊂ ℝ^M with its nearest-point and tangential projections.
struct TargetManifold {
  int ambient_dim = 2;
  double tubular_radius = 0.5;

  static TargetManifold sphere(int ambient_dim) { return TargetManifold{ambient_dim, 0.5}; }

  double distance(const Vector& v) const { return std::abs(v.norm() - 1.0); }

  bool on_manifold(const Vector& v, double tol = 1e-9) const {
    return v.size() == ambient_dim && distance(v) <= tol;
  }

  /// v/|v|. Only the inner collar can fail: the projection degenerates
  /// towards the origin, so |v| ≤ 1 − tubular_radius is a tubular violation.
  Vector project(const Vector& v) const {
    require(v.size() == ambient_dim, ErrorKind::Domain, "project_to_target: wrong ambient dimension");
    require(v.allFinite(), ErrorKind::Domain, "project_to_target: non-finite vector");
    const double norm = v.norm();
    if (!(norm > 1.0 - tubular_radius))
      throw Error(ErrorKind::TubularViolation,
                  "vector at distance " + std::to_string(1.0 - norm) + " inside the target, beyond the tubular radius " +
                      std::to_string(tubular_radius));
    return v / norm;
  }

  /// Π(p)w = w − ⟨w,p⟩p.
  Vector tangential(const Vector& p, const Vector& w) const {
    require(on_manifold(p), ErrorKind::Domain, "tangential_project: base point is off the target");
    require(w.size() == ambient_dim, ErrorKind::Domain, "tangential_project: wrong ambient dimension");
    return w - w.dot(p) * p;
  }
};

inline Vector project_to_target(const Vector& v, const TargetManifold& target) { return target.project(v); }

inline Vector tangential_project(const Vector& p, const Vector& w, const TargetManifold& target) {
  return target.tangential(p, w);
}

/// Stereographic chart centred at an arbitrary point: a Householder reflection
/// sends `center` to the south pole, which the standard chart maps to 0.
class StereoChart {
 public:
  explicit StereoChart(const SpherePoint& center) : n_(center.dim()), center_(center) {
    const Vector v = center.coords() - SpherePoint::south(n_).coords();
    reflect_ = Eigen::MatrixXd::Identity(n_ + 1, n_ + 1);
    if (v.norm() > 1e-14) reflect_ -= 2.0 * v * v.transpose() / v.squaredNorm();
  }

  int dim() const { return n_; }
  const SpherePoint& center() const { return center_; }

  /// True for the antipode of the centre, which sits at chart infinity.
  bool at_infinity(const SpherePoint& x) const {
    return chordal_distance(SpherePoint(reflect_ * x.coords()), SpherePoint::north(n_)) <= kPoleTolerance;
  }

  Vector to_chart(const SpherePoint& x) const { return stereo_project(SpherePoint(reflect_ * x.coords())); }

  SpherePoint from_chart(const Vector& z) const { return SpherePoint(reflect_ * stereo_lift(z).coords()); }

  /// Chart density relative to sphere measure: dz = ((1+|z|²)/2)ⁿ dσ.
  double measure_factor(const Vector& z) const { return std::pow(0.5 * (1.0 + z.squaredNorm()), n_); }

 private:
  int n_;
  SpherePoint center_;
  Eigen::MatrixXd reflect_;
};

}  // namespace fracmap
