#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "fracmap/error.hpp"
#include "fracmap/mesh.hpp"
#include "fracmap/parallel.hpp"

namespace fracmap {

enum class DiagonalPolicy { exclude, exclude_with_local_correction };

inline std::string to_string(DiagonalPolicy policy) {
  return policy == DiagonalPolicy::exclude ? "exclude" : "exclude_with_local_correction";
}

struct QuadraturePolicy {
  DiagonalPolicy diagonal = DiagonalPolicy::exclude;
  bool deterministic = true;
};

/// Orders and exponent of E_{t,p}, p = n/s.
struct EnergyParams {
  int n = 1;
  double s = 0.5;
  double t = 0.5;
  double p = 2.0;
  QuadraturePolicy quad{};

  static EnergyParams make(int n, double s, double t, QuadraturePolicy quad = {}) {
    EnergyParams params{n, s, t, static_cast<double>(n) / s, quad};
    params.validate();
    return params;
  }

  /// n + t·p = n(1 + t/s); equals 2n at t = s.
  double kernel_exponent() const { return n + t * p; }

  EnergyParams at_order(double order) const { return make(n, s, order, quad); }

  void validate() const {
    require(n == 1 || n == 2, ErrorKind::Unsupported, "domain dimension must be 1 or 2");
    require(s > 0.0 && s < 1.0, ErrorKind::Precondition, "base order s must lie in (0, 1)");
    require(t >= s && t < 1.0, ErrorKind::Precondition, "relaxed order t must lie in [s, 1)");
    require(std::abs(p - n / s) <= 1e-14 * p, ErrorKind::Precondition, "exponent p must equal n/s");
  }
};

/// d^{−(n + t·p)}.
inline double pair_kernel(double d, const EnergyParams& params) {
  if (!(d > 0.0)) throw Error(ErrorKind::Singularity, "pair_kernel needs a positive distance");
  return std::pow(d, -params.kernel_exponent());
}

namespace detail {

struct PowerLaw {
  double p;
  bool quadratic;

  explicit PowerLaw(double exponent) : p(exponent), quadratic(exponent == 2.0) {}

  /// |Δ|^p from |Δ|².
  double value(double sq) const { return quadratic ? sq : std::pow(sq, 0.5 * p); }

  /// |Δ|^{p−2}, continuous at 0: 0 when p > 2, 1 when p = 2.
  double slope(double sq) const {
    if (quadratic) return 1.0;
    if (sq == 0.0) return 0.0;
    return std::pow(sq, 0.5 * (p - 2.0));
  }
};

inline double row_sq_diff(const Values& u, std::size_t i, std::size_t j) {
  const auto cols = u.cols();
  const double* a = u.data() + static_cast<std::ptrdiff_t>(i) * cols;
  const double* b = u.data() + static_cast<std::ptrdiff_t>(j) * cols;
  double sq = 0.0;
  for (Eigen::Index c = 0; c < cols; ++c) {
    const double d = a[c] - b[c];
    sq += d * d;
  }
  return sq;
}

}  // namespace detail

/// Discrete E_{t,p} on a fixed mesh. Builds the weighted kernel table
/// K_ij = w_i w_j d_ij^{−(n+tp)} once (O(N²) memory) and evaluates energies,
/// per-row energies and the exact gradient of the discrete sum against it.
///
/// With `exclude_with_local_correction` (uniform circle only) adjacent-pair
/// entries are scaled by the exact-to-midpoint ratio of ∫∫|x−y|^q over
/// neighbouring cells, q = p − n − tp, and each node gets a self-cell term
/// 2h^{q+2}/((q+1)(q+2)) · |Du|^p with |Du| estimated from its two neighbours.
class PairEnergy {
 public:
  PairEnergy(MeshPtr mesh, EnergyParams params) : mesh_(std::move(mesh)), params_(params), power_(params.p) {
    params_.validate();
    const std::size_t count = mesh_->size();
    table_.assign(count * count, 0.0);
    const double exponent = params_.kernel_exponent();
    const auto& w = mesh_->weights();
    parallel_for(count, [&](std::size_t i) {
      for (std::size_t j = 0; j < count; ++j) {
        if (j == i) continue;
        const double d = mesh_->distance(i, j);
        if (!(d > 0.0)) throw Error(ErrorKind::Singularity, "coincident mesh nodes");
        table_[i * count + j] = w[i] * w[j] * std::pow(d, -exponent);
      }
    });
    if (params_.quad.diagonal == DiagonalPolicy::exclude_with_local_correction) {
      require(mesh_->uniform_circle(), ErrorKind::Unsupported,
              "local diagonal correction is implemented for uniform circle meshes only");
      corrected_ = true;
      const double q = params_.p - params_.n - params_.t * params_.p;
      const double h = w[0];
      const double norm = (q + 1.0) * (q + 2.0);
      const double adjacent = (std::pow(2.0, q + 2.0) - 2.0) / norm;
      diag_coef_ = 2.0 * std::pow(h, q + 2.0) / norm;
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t next = (i + 1) % count;
        table_[i * count + next] *= adjacent;
        table_[next * count + i] *= adjacent;
      }
      stencil_scale_.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        const double span = mesh_->distance((i + 1) % count, (i + count - 1) % count);
        stencil_scale_[i] = diag_coef_ / power_.value(span * span);
      }
    }
  }

  const EnergyParams& params() const { return params_; }
  const SphereMesh& mesh() const { return *mesh_; }
  bool corrected() const { return corrected_; }

  double kernel(std::size_t i, std::size_t j) const { return table_[i * mesh_->size() + j]; }

  /// Self-cell term of node i (zero unless the local correction is active).
  double diagonal_term(const Values& u, std::size_t i) const {
    if (!corrected_) return 0.0;
    const std::size_t count = mesh_->size();
    const double sq = detail::row_sq_diff(u, (i + 1) % count, (i + count - 1) % count);
    return stencil_scale_[i] * power_.value(sq);
  }

  double row_energy(const Values& u, std::size_t i) const {
    const std::size_t count = mesh_->size();
    const double* k = table_.data() + i * count;
    double acc = 0.0;
    for (std::size_t j = 0; j < count; ++j) {
      if (j == i) continue;
      acc += k[j] * power_.value(detail::row_sq_diff(u, i, j));
    }
    return acc + diagonal_term(u, i);
  }

  /// Σ_{i∈A} Σ_{j∈B, j≠i} K_ij |u_i − u_j|^p (+ self-cell terms for i ∈ A∩B).
  double energy(const Values& u, const IndexSet& rows, const IndexSet& cols) const {
    check(u);
    const std::size_t count = mesh_->size();
    if (cols.size() == count) {
      return reduce_rows(rows.size(), [&](std::size_t r) { return row_energy(u, rows[r]); },
                         params_.quad.deterministic);
    }
    std::vector<bool> in_cols(count, false);
    for (std::size_t j : cols) in_cols[j] = true;
    return reduce_rows(
        rows.size(),
        [&](std::size_t r) {
          const std::size_t i = rows[r];
          const double* k = table_.data() + i * count;
          double acc = 0.0;
          for (std::size_t j : cols) {
            if (j == i) continue;
            acc += k[j] * power_.value(detail::row_sq_diff(u, i, j));
          }
          if (in_cols[i]) acc += diagonal_term(u, i);
          return acc;
        },
        params_.quad.deterministic);
  }

  double total(const Values& u) const {
    check(u);
    return reduce_rows(mesh_->size(), [&](std::size_t i) { return row_energy(u, i); }, params_.quad.deterministic);
  }

  /// Per-node row sums; energy(A, full) = Σ_{i∈A} rows[i].
  std::vector<double> row_energies(const Values& u) const {
    check(u);
    std::vector<double> rows(mesh_->size());
    parallel_for(rows.size(), [&](std::size_t i) { rows[i] = row_energy(u, i); });
    return rows;
  }

  /// Exact gradient of total(): g_i = 2p Σ_{j≠i} K_ij |u_i−u_j|^{p−2}(u_i−u_j) + self-cell terms.
  Values gradient(const Values& u) const {
    check(u);
    if (params_.p < 2.0)
      throw Error(ErrorKind::UnsupportedExponent, "energy gradient needs p >= 2, got p=" + std::to_string(params_.p));
    const std::size_t count = mesh_->size();
    const auto cols = u.cols();
    Values g = Values::Zero(u.rows(), cols);
    std::vector<double> stencil;
    if (corrected_) {
      stencil.assign(count * static_cast<std::size_t>(cols), 0.0);
      for (std::size_t k = 0; k < count; ++k) {
        const std::size_t next = (k + 1) % count;
        const std::size_t prev = (k + count - 1) % count;
        const double sq = detail::row_sq_diff(u, next, prev);
        const double scale = stencil_scale_[k] * params_.p * power_.slope(sq);
        for (Eigen::Index c = 0; c < cols; ++c)
          stencil[k * cols + c] = scale * (u(static_cast<Eigen::Index>(next), c) - u(static_cast<Eigen::Index>(prev), c));
      }
    }
    const double two_p = 2.0 * params_.p;
    parallel_for(count, [&](std::size_t i) {
      const double* k = table_.data() + i * count;
      const double* ui = u.data() + static_cast<std::ptrdiff_t>(i) * cols;
      double* gi = g.data() + static_cast<std::ptrdiff_t>(i) * cols;
      for (std::size_t j = 0; j < count; ++j) {
        if (j == i) continue;
        const double* uj = u.data() + static_cast<std::ptrdiff_t>(j) * cols;
        const double coef = two_p * k[j] * power_.slope(detail::row_sq_diff(u, i, j));
        for (Eigen::Index c = 0; c < cols; ++c) gi[c] += coef * (ui[c] - uj[c]);
      }
      if (corrected_) {
        const std::size_t prev = (i + count - 1) % count;
        const std::size_t next = (i + 1) % count;
        for (Eigen::Index c = 0; c < cols; ++c) gi[c] += stencil[prev * cols + c] - stencil[next * cols + c];
      }
    });
    return g;
  }

 private:
  void check(const Values& u) const {
    require(static_cast<std::size_t>(u.rows()) == mesh_->size(), ErrorKind::Domain,
            "value rows must match the mesh node count");
  }

  MeshPtr mesh_;
  EnergyParams params_;
  detail::PowerLaw power_;
  std::vector<double> table_;
  bool corrected_ = false;
  double diag_coef_ = 0.0;
  std::vector<double> stencil_scale_;
};

inline double energy(const Field& field, const EnergyParams& params, const IndexSet& rows, const IndexSet& cols) {
  return PairEnergy(field.mesh_ptr(), params).energy(field.values(), rows, cols);
}

inline double energy(const Field& field, const EnergyParams& params) {
  return PairEnergy(field.mesh_ptr(), params).total(field.values());
}

inline double energy(const ScalarField& field, const EnergyParams& params) {
  return PairEnergy(field.mesh, params).total(field.as_rows());
}

/// [u]_{W^{t,p}} = E^{1/p}.
inline double seminorm(const Field& field, const EnergyParams& params) {
  return std::pow(energy(field, params), 1.0 / params.p);
}

inline double seminorm(const ScalarField& field, const EnergyParams& params) {
  return std::pow(energy(field, params), 1.0 / params.p);
}

inline Values energy_gradient(const Field& field, const EnergyParams& params) {
  return PairEnergy(field.mesh_ptr(), params).gradient(field.values());
}

/// sqrt(Σ_i w_i |Π(u_i) g_i|²).
inline double el_residual(const SphereMesh& mesh, const Values& u, const Values& gradient) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    const double normal = gradient.row(i).dot(u.row(i));
    acc += mesh.weight(static_cast<std::size_t>(i)) * (gradient.row(i) - normal * u.row(i)).squaredNorm();
  }
  return std::sqrt(acc);
}

inline double el_residual(const Field& field, const EnergyParams& params) {
  return el_residual(field.mesh(), field.values(), energy_gradient(field, params));
}

/// Weighted points in a Euclidean space (chart coordinates).
struct PointCloud {
  Values coords;
  std::vector<double> weights;
};

/// Σ_{i∈A} Σ_{j∈B, j≠i} |u_i−u_j|^p / |x_i−x_j|^{exponent} w_i w_j over a cloud.
/// Rows of `u` are indexed like the cloud points.
inline double cloud_energy(const PointCloud& cloud, const Values& u, double p, double exponent, const IndexSet& rows,
                           const IndexSet& cols, bool deterministic = true) {
  const detail::PowerLaw power(p);
  return reduce_rows(
      rows.size(),
      [&](std::size_t r) {
        const std::size_t i = rows[r];
        double acc = 0.0;
        for (std::size_t j : cols) {
          if (j == i) continue;
          const double d = (cloud.coords.row(static_cast<Eigen::Index>(i)) - cloud.coords.row(static_cast<Eigen::Index>(j))).norm();
          if (!(d > 0.0)) throw Error(ErrorKind::Singularity, "coincident cloud points");
          acc += cloud.weights[j] * power.value(detail::row_sq_diff(u, i, j)) * std::pow(d, -exponent);
        }
        return cloud.weights[i] * acc;
      },
      deterministic);
}

}  // namespace fracmap
