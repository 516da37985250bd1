#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fracmap/error.hpp"
#include "fracmap/geometry.hpp"

namespace fracmap {

/// Per-node rows; row i is the value (or coordinates) at node i.
using Values = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using IndexSet = std::vector<std::size_t>;
using Triangle = std::array<std::size_t, 3>;

inline double sphere_area(int n) {
  return n == 1 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi;
}

/// Signed area of the spherical triangle (a, b, c); positive when the triple is
/// counter-clockwise seen from outside.
inline double signed_spherical_area(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  const double det = a.dot(b.cross(c));
  const double denom = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
  return 2.0 * std::atan2(det, denom);
}

class SphereMesh {
 public:
  /// Explicit mesh. For n=1 the node order is taken as the cyclic order of
  /// the circle; n=2 meshes need outward-oriented triangles for degree and
  /// interpolation.
  static SphereMesh from_nodes(int n, Values nodes, std::vector<double> weights, std::vector<Triangle> triangles = {}) {
    require(n == 1 || n == 2, ErrorKind::Unsupported, "only S^1 and S^2 domains are supported");
    require(nodes.cols() == n + 1, ErrorKind::Domain, "node coordinates must live in R^{n+1}");
    require(static_cast<std::size_t>(nodes.rows()) == weights.size(), ErrorKind::Domain,
            "one quadrature weight per node");
    require(nodes.rows() >= 2, ErrorKind::Domain, "mesh needs at least two nodes");
    for (Eigen::Index i = 0; i < nodes.rows(); ++i) {
      require(std::abs(nodes.row(i).norm() - 1.0) <= 1e-12, ErrorKind::Domain, "mesh node off the unit sphere");
      require(weights[i] > 0.0, ErrorKind::Domain, "quadrature weights must be positive");
    }
    double total = 0.0;
    for (double w : weights) total += w;
    require(std::abs(total - sphere_area(n)) <= 1e-10, ErrorKind::Domain, "weights must sum to |S^n|");

    SphereMesh mesh;
    mesh.n_ = n;
    mesh.nodes_ = std::move(nodes);
    mesh.weights_ = std::move(weights);
    mesh.triangles_ = std::move(triangles);
    mesh.resolution_ = static_cast<int>(mesh.nodes_.rows());
    mesh.finish();
    return mesh;
  }

  int dim() const { return n_; }
  std::size_t size() const { return static_cast<std::size_t>(nodes_.rows()); }
  int resolution() const { return resolution_; }
  const Values& nodes() const { return nodes_; }
  SpherePoint node(std::size_t i) const { return SpherePoint(nodes_.row(static_cast<Eigen::Index>(i)).transpose()); }
  const std::vector<double>& weights() const { return weights_; }
  double weight(std::size_t i) const { return weights_[i]; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<IndexSet>& neighbors() const { return neighbors_; }
  bool uniform_circle() const { return uniform_circle_; }

  double distance(std::size_t i, std::size_t j) const {
    return (nodes_.row(static_cast<Eigen::Index>(i)) - nodes_.row(static_cast<Eigen::Index>(j))).norm();
  }

  /// Smallest chordal distance between adjacent nodes.
  double min_spacing() const { return min_spacing_; }

  /// Linear interpolation of per-node rows at an arbitrary sphere point:
  /// periodic in angle on the uniform circle, barycentric on triangles for n=2.
  /// The result is not projected.
  Vector interpolate(const Values& values, const SpherePoint& y) const {
    require(y.dim() == n_, ErrorKind::Domain, "interpolation point has the wrong dimension");
    if (n_ == 1) {
      require(uniform_circle_, ErrorKind::Unsupported, "circle interpolation needs a uniform angular mesh");
      const std::size_t count = size();
      const double h = 2.0 * std::numbers::pi / static_cast<double>(count);
      double theta = std::atan2(y[1], y[0]);
      if (theta < 0.0) theta += 2.0 * std::numbers::pi;
      const double pos = theta / h;
      const double base = std::floor(pos);
      const double frac = pos - base;
      const std::size_t k = static_cast<std::size_t>(base) % count;
      const std::size_t k1 = (k + 1) % count;
      return ((1.0 - frac) * values.row(static_cast<Eigen::Index>(k)) + frac * values.row(static_cast<Eigen::Index>(k1)))
          .transpose();
    }
    const auto [tri, bary] = locate(y.coords());
    Vector out = Vector::Zero(values.cols());
    for (int a = 0; a < 3; ++a) out += bary[a] * values.row(static_cast<Eigen::Index>(triangles_[tri][a])).transpose();
    return out;
  }

 private:
  friend SphereMesh build_mesh(int n, int resolution);

  void finish() {
    const std::size_t count = size();
    neighbors_.assign(count, {});
    if (n_ == 1) {
      for (std::size_t i = 0; i < count; ++i) neighbors_[i] = {(i + count - 1) % count, (i + 1) % count};
    } else {
      for (const auto& t : triangles_) {
        for (int a = 0; a < 3; ++a) {
          const std::size_t u = t[a];
          const std::size_t v = t[(a + 1) % 3];
          neighbors_[u].push_back(v);
          neighbors_[v].push_back(u);
        }
      }
      for (auto& nb : neighbors_) {
        std::sort(nb.begin(), nb.end());
        nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
      }
      incident_.assign(count, {});
      inverses_.clear();
      inverses_.reserve(triangles_.size());
      for (std::size_t t = 0; t < triangles_.size(); ++t) {
        Eigen::Matrix3d m;
        for (int a = 0; a < 3; ++a) {
          m.col(a) = nodes_.row(static_cast<Eigen::Index>(triangles_[t][a])).transpose();
          incident_[triangles_[t][a]].push_back(t);
        }
        inverses_.push_back(m.inverse());
      }
    }
    min_spacing_ = 2.0;
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t j : neighbors_[i]) min_spacing_ = std::min(min_spacing_, distance(i, j));
  }

  std::pair<std::size_t, std::array<double, 3>> locate(const Vector& y) const {
    require(!triangles_.empty(), ErrorKind::Unsupported, "n=2 interpolation needs mesh triangles");
    auto try_triangle = [&](std::size_t t, std::array<double, 3>& bary) {
      const Eigen::Vector3d b = inverses_[t] * Eigen::Vector3d(y[0], y[1], y[2]);
      if (b.minCoeff() < -1e-12) return false;
      const double sum = b.sum();
      if (!(sum > 0.0)) return false;
      for (int a = 0; a < 3; ++a) bary[a] = b[a] / sum;
      return true;
    };
    std::size_t nearest = 0;
    double best = 1e300;
    for (std::size_t i = 0; i < size(); ++i) {
      const double d = (nodes_.row(static_cast<Eigen::Index>(i)).transpose() - y).squaredNorm();
      if (d < best) {
        best = d;
        nearest = i;
      }
    }
    std::array<double, 3> bary{};
    for (std::size_t t : incident_[nearest])
      if (try_triangle(t, bary)) return {t, bary};
    for (std::size_t t = 0; t < triangles_.size(); ++t)
      if (try_triangle(t, bary)) return {t, bary};
    throw Error(ErrorKind::Domain, "point not covered by any mesh triangle");
  }

  int n_ = 1;
  int resolution_ = 0;
  bool uniform_circle_ = false;
  double min_spacing_ = 0.0;
  Values nodes_;
  std::vector<double> weights_;
  std::vector<Triangle> triangles_;
  std::vector<IndexSet> neighbors_;
  std::vector<IndexSet> incident_;
  std::vector<Eigen::Matrix3d> inverses_;
};

namespace detail {

inline void icosphere(int level, Values& nodes, std::vector<Triangle>& triangles) {
  const double g = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> pts = {{-1, g, 0}, {1, g, 0}, {-1, -g, 0}, {1, -g, 0}, {0, -1, g}, {0, 1, g},
                                      {0, -1, -g}, {0, 1, -g}, {g, 0, -1}, {g, 0, 1}, {-g, 0, -1}, {-g, 0, 1}};
  for (auto& p : pts) p.normalize();
  std::vector<Triangle> tris = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                                {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                                {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> midpoints;
    auto midpoint = [&](std::size_t a, std::size_t b) {
      const auto key = std::minmax(a, b);
      auto it = midpoints.find(key);
      if (it != midpoints.end()) return it->second;
      pts.push_back((pts[a] + pts[b]).normalized());
      midpoints.emplace(key, pts.size() - 1);
      return pts.size() - 1;
    };
    std::vector<Triangle> next;
    next.reserve(tris.size() * 4);
    for (const auto& t : tris) {
      const std::size_t ab = midpoint(t[0], t[1]);
      const std::size_t bc = midpoint(t[1], t[2]);
      const std::size_t ca = midpoint(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({t[1], bc, ab});
      next.push_back({t[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    tris = std::move(next);
  }
  for (auto& t : tris) {
    const Eigen::Vector3d normal = (pts[t[1]] - pts[t[0]]).cross(pts[t[2]] - pts[t[0]]);
    if (normal.dot(pts[t[0]] + pts[t[1]] + pts[t[2]]) < 0.0) std::swap(t[1], t[2]);
  }
  nodes.resize(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) nodes.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  triangles = std::move(tris);
}

/// Spherical Voronoi cell areas: each triangle is cut along the bisector arcs
/// from its edge midpoints to its circumcentre. Signed pieces keep the total
/// exact even for obtuse triangles.
inline std::vector<double> voronoi_weights(const Values& nodes, const std::vector<Triangle>& triangles) {
  std::vector<double> weights(static_cast<std::size_t>(nodes.rows()), 0.0);
  auto p = [&](std::size_t i) -> Eigen::Vector3d { return nodes.row(static_cast<Eigen::Index>(i)).transpose(); };
  for (const auto& t : triangles) {
    const Eigen::Vector3d a = p(t[0]), b = p(t[1]), c = p(t[2]);
    Eigen::Vector3d cc = (b - a).cross(c - a).normalized();
    if (cc.dot(a + b + c) < 0.0) cc = -cc;
    const std::array<Eigen::Vector3d, 3> v = {a, b, c};
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d& x = v[k];
      const Eigen::Vector3d next_mid = (x + v[(k + 1) % 3]).normalized();
      const Eigen::Vector3d prev_mid = (x + v[(k + 2) % 3]).normalized();
      weights[t[k]] += signed_spherical_area(x, next_mid, cc) + signed_spherical_area(x, cc, prev_mid);
    }
  }
  return weights;
}

}  // namespace detail

/// n=1: `resolution` angle-uniform nodes (cos 2πk/N, sin 2πk/N) with weight 2π/N.
/// n=2: icosphere at subdivision level `resolution` with Voronoi-area weights.
inline SphereMesh build_mesh(int n, int resolution) {
  SphereMesh mesh;
  mesh.n_ = n;
  mesh.resolution_ = resolution;
  if (n == 1) {
    require(resolution >= 8, ErrorKind::Precondition, "circle meshes need at least 8 nodes");
    const auto count = static_cast<std::size_t>(resolution);
    mesh.nodes_.resize(resolution, 2);
    const double h = 2.0 * std::numbers::pi / static_cast<double>(count);
    for (std::size_t k = 0; k < count; ++k) {
      const double theta = h * static_cast<double>(k);
      mesh.nodes_(static_cast<Eigen::Index>(k), 0) = std::cos(theta);
      mesh.nodes_(static_cast<Eigen::Index>(k), 1) = std::sin(theta);
    }
    mesh.weights_.assign(count, h);
    mesh.uniform_circle_ = true;
  } else if (n == 2) {
    require(resolution >= 1 && resolution <= 6, ErrorKind::Precondition, "icosphere level must be in [1, 6]");
    detail::icosphere(resolution, mesh.nodes_, mesh.triangles_);
    mesh.weights_ = detail::voronoi_weights(mesh.nodes_, mesh.triangles_);
  } else {
    throw Error(ErrorKind::Unsupported, "unsupported domain dimension n=" + std::to_string(n));
  }
  mesh.finish();
  return mesh;
}

/// Indices i with chordal |x_i − center| < rho, ascending.
inline IndexSet ball_indices(const SphereMesh& mesh, const SpherePoint& center, double rho) {
  require(rho > 0.0 && rho < 2.0, ErrorKind::Precondition, "ball radius must lie in (0, 2)");
  IndexSet out;
  const Vector& c = center.coords();
  for (std::size_t i = 0; i < mesh.size(); ++i)
    if ((mesh.nodes().row(static_cast<Eigen::Index>(i)).transpose() - c).norm() < rho) out.push_back(i);
  return out;
}

inline IndexSet all_indices(const SphereMesh& mesh) {
  IndexSet out(mesh.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  return out;
}

inline IndexSet complement(const SphereMesh& mesh, const IndexSet& set) {
  std::vector<bool> in(mesh.size(), false);
  for (std::size_t i : set) in[i] = true;
  IndexSet out;
  for (std::size_t i = 0; i < mesh.size(); ++i)
    if (!in[i]) out.push_back(i);
  return out;
}

using MeshPtr = std::shared_ptr<const SphereMesh>;

inline MeshPtr make_mesh(int n, int resolution) { return std::make_shared<const SphereMesh>(build_mesh(n, resolution)); }

/// Manifold-valued map sampled at mesh nodes.
class Field {
 public:
  static constexpr double kOnManifoldTol = 1e-9;

  Field(MeshPtr mesh, Values values, TargetManifold target)
      : mesh_(std::move(mesh)), values_(std::move(values)), target_(target) {
    require(mesh_ != nullptr, ErrorKind::Domain, "field without a mesh");
    require(static_cast<std::size_t>(values_.rows()) == mesh_->size(), ErrorKind::Domain,
            "field needs one value per mesh node");
    require(values_.cols() == target_.ambient_dim, ErrorKind::Domain, "field values have the wrong ambient dimension");
    for (Eigen::Index i = 0; i < values_.rows(); ++i) {
      if (!(std::abs(values_.row(i).norm() - 1.0) <= kOnManifoldTol))
        throw Error(ErrorKind::Domain, "field value off the target at node " + std::to_string(i),
                    static_cast<std::size_t>(i));
    }
  }

  /// Projects every row first; rows outside the tubular neighbourhood throw.
  static Field projected(MeshPtr mesh, Values values, TargetManifold target) {
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      try {
        values.row(i) = target.project(values.row(i).transpose()).transpose();
      } catch (const Error& e) {
        throw Error(e.kind(), std::string(e.what()) + " (node " + std::to_string(i) + ")", static_cast<std::size_t>(i));
      }
    }
    return Field(std::move(mesh), std::move(values), target);
  }

  static Field constant(MeshPtr mesh, TargetManifold target, const Vector& value) {
    Values values(static_cast<Eigen::Index>(mesh->size()), target.ambient_dim);
    const Vector v = target.project(value);
    for (Eigen::Index i = 0; i < values.rows(); ++i) values.row(i) = v.transpose();
    return Field(std::move(mesh), std::move(values), target);
  }

  template <class F>
  static Field from_function(MeshPtr mesh, TargetManifold target, F&& f) {
    Values values(static_cast<Eigen::Index>(mesh->size()), target.ambient_dim);
    for (std::size_t i = 0; i < mesh->size(); ++i)
      values.row(static_cast<Eigen::Index>(i)) = Vector(f(mesh->node(i))).transpose();
    return projected(std::move(mesh), std::move(values), target);
  }

  const SphereMesh& mesh() const { return *mesh_; }
  const MeshPtr& mesh_ptr() const { return mesh_; }
  const Values& values() const { return values_; }
  const TargetManifold& target() const { return target_; }
  std::size_t size() const { return mesh_->size(); }
  Vector value(std::size_t i) const { return values_.row(static_cast<Eigen::Index>(i)).transpose(); }

  /// Interpolated value at an arbitrary point, projected back onto the target.
  Vector sample(const SpherePoint& y) const { return target_.project(mesh_->interpolate(values_, y)); }

  Field with_values(Values values) const { return Field(mesh_, std::move(values), target_); }

 private:
  MeshPtr mesh_;
  Values values_;
  TargetManifold target_;
};

/// Real-valued function on the mesh (no manifold constraint).
struct ScalarField {
  MeshPtr mesh;
  Vector values;

  Values as_rows() const { return Values(values); }
};

/// u(x) = x for M = n+1.
inline Field identity_field(MeshPtr mesh) {
  const int n = mesh->dim();
  return Field::from_function(std::move(mesh), TargetManifold::sphere(n + 1),
                              [](const SpherePoint& x) { return x.coords(); });
}

}  // namespace fracmap
