#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fracmap/constructions.hpp"
#include "fracmap/error.hpp"
#include "fracmap/mesh.hpp"
#include "fracmap/minimizer.hpp"
#include "fracmap/rescaling.hpp"
#include "fracmap/verify.hpp"

namespace fracmap {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

/// Largest |‖v‖ − 1| a loaded value may have; smaller deviations are re-projected.
inline constexpr double kLoadTolerance = 1e-6;

inline Json field_to_json(const Field& field) {
  Json values = Json::array();
  for (Eigen::Index i = 0; i < field.values().rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < field.values().cols(); ++c) row.push_back(field.values()(i, c));
    values.push_back(std::move(row));
  }
  return Json{{"n", field.mesh().dim()},
              {"resolution", field.mesh().resolution()},
              {"target_dim", field.target().ambient_dim},
              {"values", std::move(values)}};
}

inline Field field_from_json(const Json& doc) {
  try {
    const int n = doc.at("n").get<int>();
    const int resolution = doc.at("resolution").get<int>();
    const int target_dim = doc.at("target_dim").get<int>();
    require(target_dim >= 2, ErrorKind::Io, "field file: target_dim must be at least 2");
    const MeshPtr mesh = make_mesh(n, resolution);
    const Json& rows = doc.at("values");
    require(rows.is_array() && rows.size() == mesh->size(), ErrorKind::Io,
            "field file: expected " + std::to_string(mesh->size()) + " value rows");
    Values values(static_cast<Eigen::Index>(mesh->size()), target_dim);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Json& row = rows[i];
      require(row.is_array() && row.size() == static_cast<std::size_t>(target_dim), ErrorKind::Io,
              "field file: row " + std::to_string(i) + " must have target_dim entries");
      for (int c = 0; c < target_dim; ++c) values(static_cast<Eigen::Index>(i), c) = row[static_cast<std::size_t>(c)].get<double>();
      const double norm = values.row(static_cast<Eigen::Index>(i)).norm();
      if (!(std::abs(norm - 1.0) < kLoadTolerance))
        throw Error(ErrorKind::Io,
                    "field file: value " + std::to_string(i) + " is off the target by " + std::to_string(std::abs(norm - 1.0)),
                    i);
      values.row(static_cast<Eigen::Index>(i)) /= norm;
    }
    return Field(mesh, std::move(values), TargetManifold::sphere(target_dim));
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Io, std::string("field file: ") + e.what());
  }
}

inline void save_field(const std::string& path, const Field& field) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path);
  out << field_to_json(field).dump() << '\n';
}

inline Field load_field(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot read field file " + path);
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Io, path + ": " + e.what());
  }
  return field_from_json(doc);
}

/// Non-finite values become the strings "inf", "-inf" and "nan".
inline Json number(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

inline Json numbers(const std::vector<double>& xs) {
  Json out = Json::array();
  for (double x : xs) out.push_back(number(x));
  return out;
}

inline Json optional_int(const std::optional<int>& x) { return x ? Json(*x) : Json(nullptr); }

inline Json to_json(const MinimizeConfig& cfg) {
  return Json{{"max_iters", cfg.max_iters},     {"tol_grad", number(cfg.tol_grad)},
              {"armijo_c1", cfg.armijo_c1},     {"backtrack", cfg.backtrack},
              {"max_backtracks", cfg.max_backtracks}, {"initial_step", cfg.initial_step},
              {"max_displacement", cfg.max_displacement}};
}

inline Json to_json(const MinimizeResult& r) {
  return Json{{"status", to_string(r.status)},
              {"iterations", r.iterations},
              {"backtracks", r.backtracks},
              {"energy_initial", number(r.energies.front())},
              {"energy_final", number(r.energy())},
              {"residual_initial", number(r.residuals.front())},
              {"residual_final", number(r.residual())},
              {"degree_final", optional_int(audit_degree(r.field))}};
}

inline Json to_json(const ContinuationStage& stage) {
  Json centers = Json::array();
  for (std::size_t c : stage.centers) centers.push_back(c);
  return Json{{"t", stage.t},
              {"energy_t", number(stage.energy_t)},
              {"energy_s", number(stage.energy_s)},
              {"energy_s_bound", number(stage.energy_s_bound)},
              {"bound_holds", stage.bound_holds()},
              {"residual", number(stage.residual)},
              {"degree", optional_int(stage.degree)},
              {"centers", std::move(centers)},
              {"minimize", to_json(stage.result)}};
}

inline Json to_json(const KernelBoundReport& r) {
  return Json{{"samples", r.samples},
              {"both_small", number(r.both_small)},
              {"both_large", number(r.both_large)},
              {"mixed", number(r.mixed)},
              {"max_violation", number(r.max_violation())}};
}

inline Json to_json(const BoundReport& r) {
  return Json{{"lambda", r.lambda},
              {"r_lambda", r.r_lambda},
              {"lhs", number(r.lhs)},
              {"ball_energy", number(r.ball_energy)},
              {"complement_energy", number(r.complement_energy)},
              {"ball_factor", number(r.ball_factor)},
              {"complement_factor", number(r.complement_factor)},
              {"rhs", number(r.rhs())},
              {"slack", number(r.slack())}};
}

inline Json to_json(const BalanceReport& r) {
  return Json{{"rho", r.rho},
              {"t", r.t},
              {"ball_nodes", r.ball_nodes},
              {"lhs", number(r.lhs)},
              {"rhs_core", number(r.rhs_core)},
              {"implied_constant", number(r.implied_constant)}};
}

inline Json to_json(const GlueEnergyReport& r) {
  return Json{{"r", r.r},
              {"delta", r.delta},
              {"n", r.n},
              {"p", r.p},
              {"sp", r.sp},
              {"sigma", r.sigma},
              {"lhs", number(r.lhs)},
              {"u_annulus", number(r.u_annulus)},
              {"v_ball", number(r.v_ball)},
              {"boundary_u", number(r.boundary_u)},
              {"boundary_v", number(r.boundary_v)},
              {"boundary_sphere", number(r.boundary_sphere)},
              {"sup_gap", number(r.sup_gap)},
              {"boundary_term", number(r.boundary_term())},
              {"sphere_term", number(r.sphere_term())},
              {"gap_term", number(r.gap_term())},
              {"rhs", number(r.rhs())},
              {"ratio", number(r.ratio())}};
}

inline Json to_json(const SuperdifficultReport& r) {
  return Json{{"lhs", number(r.lhs)}, {"bound", number(r.bound)}, {"ratio", number(r.ratio)}};
}

inline Json to_json(const BubbleConfig& cfg) {
  return Json{{"n", cfg.n},
              {"k", cfg.k},
              {"s", cfg.s},
              {"schedule", numbers(cfg.t_values)},
              {"resolution", cfg.resolution},
              {"concentrate", cfg.concentrate},
              {"noise", cfg.noise},
              {"seed", cfg.seed},
              {"eps", number(cfg.eps)},
              {"rho", cfg.rho},
              {"balance_radii", numbers(cfg.balance_radii)},
              {"optimizer", to_json(cfg.optimizer)}};
}

inline Json to_json(const ExperimentStage& stage, const SphereMesh& mesh) {
  Json centers = Json::array();
  for (std::size_t c : stage.centers) {
    Json coords = Json::array();
    for (Eigen::Index k = 0; k < mesh.nodes().cols(); ++k) coords.push_back(mesh.nodes()(static_cast<Eigen::Index>(c), k));
    centers.push_back(Json{{"node", c}, {"point", std::move(coords)}});
  }
  Json balance = Json::array();
  for (const BalanceEntry& entry : stage.balance) {
    Json record = to_json(entry.report);
    record["center"] = entry.center ? Json(*entry.center) : Json("south_pole");
    balance.push_back(std::move(record));
  }
  return Json{{"t", stage.t},
              {"energy_t", number(stage.energy_t)},
              {"energy_s", number(stage.energy_s)},
              {"residual", number(stage.residual)},
              {"degree", optional_int(stage.degree)},
              {"status", stage.status},
              {"iterations", stage.iterations},
              {"centers", std::move(centers)},
              {"balance", std::move(balance)}};
}

inline Json provenance(bool deterministic) {
  return Json{{"version", kVersion}, {"reduction", deterministic ? "deterministic" : "parallel"}};
}

/// {"config", "stages", "provenance"}; `config` is the caller's resolved config when given.
inline Json to_json(const ExperimentReport& report, bool deterministic, const std::optional<Json>& config = std::nullopt) {
  Json stages = Json::array();
  for (const ExperimentStage& stage : report.stages) stages.push_back(to_json(stage, *report.mesh));
  return Json{{"config", config.value_or(to_json(report.config))},
              {"stages", std::move(stages)},
              {"provenance", provenance(deterministic)}};
}

}  // namespace fracmap
