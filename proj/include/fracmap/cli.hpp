#pragma once

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "fracmap/constructions.hpp"
#include "fracmap/energy.hpp"
#include "fracmap/homotopy.hpp"
#include "fracmap/json_io.hpp"
#include "fracmap/minimizer.hpp"
#include "fracmap/parallel.hpp"
#include "fracmap/rescaling.hpp"
#include "fracmap/verify.hpp"

namespace fracmap::cli {

enum ExitCode : int { kOk = 0, kValidation = 2, kStall = 3 };

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> names{"minimize",     "continue",  "rescale-check",
                                              "balance-check", "glue-check", "grad-check",
                                              "superdifficult", "bubble",   "cutoff-decay"};
  return names;
}

/// Bad configuration; `key` names the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : "config key '" + key + "': " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

namespace detail {

inline double parse_double(const std::string& key, const std::string& text) {
  const char* begin = text.c_str();
  char* end = nullptr;
  errno = 0;
  const double value = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || errno == ERANGE) throw ConfigError(key, "expected a number, got '" + text + "'");
  return value;
}

inline std::int64_t parse_int(const std::string& key, const std::string& text) {
  const char* begin = text.c_str();
  char* end = nullptr;
  errno = 0;
  const long long value = std::strtoll(begin, &end, 10);
  if (end == begin || *end != '\0' || errno == ERANGE) throw ConfigError(key, "expected an integer, got '" + text + "'");
  return value;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  const char* begin = text.c_str();
  char* end = nullptr;
  errno = 0;
  if (text.empty() || text[0] == '-') throw ConfigError(key, "expected an unsigned integer, got '" + text + "'");
  const unsigned long long value = std::strtoull(begin, &end, 10);
  if (*end != '\0' || errno == ERANGE) throw ConfigError(key, "expected an unsigned integer, got '" + text + "'");
  return value;
}

inline std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    const auto last = item.find_last_not_of(" \t");
    if (first == std::string::npos) throw ConfigError(key, "empty list entry in '" + text + "'");
    out.push_back(parse_double(key, item.substr(first, last - first + 1)));
  }
  if (out.empty()) throw ConfigError(key, "expected a comma-separated list");
  return out;
}

inline std::string format(double x) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", x);
  return buffer;
}

}  // namespace detail

/// Every recognised key with its default, as text.
inline const std::map<std::string, std::string>& default_settings() {
  static const std::map<std::string, std::string> defaults{
      {"n", "1"},
      {"s", "0.5"},
      {"t", "0.6"},
      {"schedule", "0.7,0.6,0.55"},
      {"mesh.resolution", "128"},
      {"target.dim", "0"},
      {"input.field", ""},
      {"optimizer.max_iters", "20000"},
      {"optimizer.tol_grad", "1e-6"},
      {"optimizer.armijo_c1", "1e-4"},
      {"optimizer.backtrack", "0.5"},
      {"optimizer.max_backtracks", "50"},
      {"optimizer.initial_step", "1"},
      {"optimizer.max_displacement", "0.5"},
      {"experiment.k", "1"},
      {"experiment.noise", "0.05"},
      {"experiment.seed", "0"},
      {"experiment.diagonal", "exclude"},
      {"experiment.lambda", "1.5"},
      {"experiment.kernel_samples", "10000"},
      {"experiment.balance_radii", "0.3,0.5"},
      {"experiment.eps", "inf"},
      {"experiment.concentration_rho", "0.5"},
      {"experiment.concentrate", "1"},
      {"experiment.glue_r", "1"},
      {"experiment.glue_deltas", "0.1,0.2"},
      {"experiment.glue_rotation", "0.1"},
      {"experiment.alphas", "1.5,2,3"},
      {"experiment.lambdas", "0.25,0.5,0.9"},
      {"experiment.angles", "0.52359877559829882,1.5707963267948966,2.6179938779914944"},
      {"experiment.R", "1"},
      {"experiment.grid", "1000"},
      {"experiment.levels", "1,2,3"},
      {"experiment.h", "1e-6"},
  };
  return defaults;
}

/// Resolved, typed configuration.
struct Config {
  int n = 1;
  double s = 0.5;
  double t = 0.6;
  std::vector<double> schedule;
  int resolution = 128;
  int target_dim = 2;
  std::string input;
  MinimizeConfig optimizer;
  int k = 1;
  double noise = 0.05;
  std::uint64_t seed = 0;
  DiagonalPolicy diagonal = DiagonalPolicy::exclude;
  double lambda = 1.5;
  int kernel_samples = 10000;
  std::vector<double> balance_radii;
  double eps = std::numeric_limits<double>::infinity();
  double concentration_rho = 0.5;
  double concentrate = 1.0;
  double glue_r = 1.0;
  std::vector<double> glue_deltas;
  double glue_rotation = 0.1;
  std::vector<double> alphas;
  std::vector<double> lambdas;
  std::vector<double> angles;
  double R = 1.0;
  int grid = 1000;
  std::vector<int> levels;
  double h = 1e-6;
  bool deterministic = false;

  std::map<std::string, std::string> settings;

  EnergyParams params(double order) const {
    QuadraturePolicy quad{diagonal, deterministic};
    return EnergyParams::make(n, s, order, quad);
  }
};

/// Flattens an INI tree to dotted keys; keys outside any section stay bare.
inline std::map<std::string, std::string> read_settings(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) throw ConfigError("", "config file not found: " + path);
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("", "cannot parse config file " + path + ": " + e.message() + " (line " +
                              std::to_string(e.line()) + ")");
  }
  std::map<std::string, std::string> out;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      out[name] = node.data();
      continue;
    }
    for (const auto& [key, leaf] : node) out[name + "." + key] = leaf.data();
  }
  return out;
}

inline Config resolve(const std::map<std::string, std::string>& file_settings, const std::vector<std::string>& overrides,
                      std::optional<std::uint64_t> seed, bool deterministic) {
  std::map<std::string, std::string> settings = default_settings();
  const auto assign = [&](const std::string& key, const std::string& value) {
    if (!settings.contains(key)) throw ConfigError(key, "unknown key");
    settings[key] = value;
  };
  for (const auto& [key, value] : file_settings) assign(key, value);
  for (const std::string& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError(item, "--set expects KEY=VALUE");
    assign(item.substr(0, eq), item.substr(eq + 1));
  }
  if (seed) settings["experiment.seed"] = std::to_string(*seed);

  const auto text = [&](const std::string& key) -> const std::string& { return settings.at(key); };
  const auto real = [&](const std::string& key) { return detail::parse_double(key, text(key)); };
  const auto integer = [&](const std::string& key) { return detail::parse_int(key, text(key)); };
  const auto list = [&](const std::string& key) { return detail::parse_list(key, text(key)); };
  const auto check = [](bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConfigError(key, what);
  };

  Config cfg;
  cfg.deterministic = deterministic;
  cfg.n = static_cast<int>(integer("n"));
  check(cfg.n == 1 || cfg.n == 2, "n", "domain dimension must be 1 or 2");
  cfg.s = real("s");
  check(cfg.s > 0.0 && cfg.s < 1.0, "s", "must lie in (0, 1)");
  cfg.t = real("t");
  check(cfg.t >= cfg.s && cfg.t < 1.0, "t", "must lie in [s, 1)");
  cfg.schedule = list("schedule");
  for (std::size_t k = 0; k < cfg.schedule.size(); ++k) {
    check(cfg.schedule[k] > cfg.s && cfg.schedule[k] < 1.0, "schedule", "orders must lie in (s, 1)");
    check(k == 0 || cfg.schedule[k] < cfg.schedule[k - 1], "schedule", "orders must be strictly decreasing");
  }
  const auto resolution = integer("mesh.resolution");
  check(resolution >= (cfg.n == 1 ? 3 : 0) && resolution <= (cfg.n == 1 ? 100000 : 7), "mesh.resolution",
        cfg.n == 1 ? "must be a node count in [3, 100000]" : "must be an icosphere level in [0, 7]");
  cfg.resolution = static_cast<int>(resolution);
  const auto target_dim = integer("target.dim");
  check(target_dim == 0 || target_dim >= cfg.n + 1, "target.dim", "must be 0 (auto) or at least n + 1");
  cfg.target_dim = target_dim == 0 ? cfg.n + 1 : static_cast<int>(target_dim);
  cfg.input = text("input.field");

  cfg.optimizer.max_iters = static_cast<int>(integer("optimizer.max_iters"));
  cfg.optimizer.tol_grad = real("optimizer.tol_grad");
  cfg.optimizer.armijo_c1 = real("optimizer.armijo_c1");
  cfg.optimizer.backtrack = real("optimizer.backtrack");
  cfg.optimizer.max_backtracks = static_cast<int>(integer("optimizer.max_backtracks"));
  cfg.optimizer.initial_step = real("optimizer.initial_step");
  cfg.optimizer.max_displacement = real("optimizer.max_displacement");
  try {
    cfg.optimizer.validate();
  } catch (const Error& e) {
    throw ConfigError("", e.what());
  }

  cfg.k = static_cast<int>(integer("experiment.k"));
  cfg.noise = real("experiment.noise");
  check(cfg.noise >= 0.0, "experiment.noise", "must be nonnegative");
  cfg.seed = detail::parse_u64("experiment.seed", text("experiment.seed"));
  const std::string& diagonal = text("experiment.diagonal");
  check(diagonal == "exclude" || diagonal == "exclude_with_local_correction", "experiment.diagonal",
        "must be exclude or exclude_with_local_correction");
  cfg.diagonal = diagonal == "exclude" ? DiagonalPolicy::exclude : DiagonalPolicy::exclude_with_local_correction;
  cfg.lambda = real("experiment.lambda");
  check(cfg.lambda > 0.0 && cfg.lambda < 2.0, "experiment.lambda", "must lie in (0, 2)");
  cfg.kernel_samples = static_cast<int>(integer("experiment.kernel_samples"));
  check(cfg.kernel_samples > 0, "experiment.kernel_samples", "must be positive");
  cfg.balance_radii = list("experiment.balance_radii");
  for (double r : cfg.balance_radii)
    check(r > 0.0 && r < std::sqrt(0.8), "experiment.balance_radii", "radii must lie in (0, sqrt(4/5))");
  cfg.eps = real("experiment.eps");
  check(cfg.eps > 0.0, "experiment.eps", "must be positive");
  cfg.concentration_rho = real("experiment.concentration_rho");
  check(cfg.concentration_rho > 0.0 && cfg.concentration_rho < 2.0, "experiment.concentration_rho",
        "must lie in (0, 2)");
  cfg.concentrate = real("experiment.concentrate");
  check(cfg.concentrate > 0.0 && std::isfinite(cfg.concentrate), "experiment.concentrate", "must be positive");
  cfg.glue_r = real("experiment.glue_r");
  check(cfg.glue_r > 0.0 && std::isfinite(cfg.glue_r), "experiment.glue_r", "must be positive");
  cfg.glue_deltas = list("experiment.glue_deltas");
  for (double d : cfg.glue_deltas) check(d > 0.0 && d < 0.25, "experiment.glue_deltas", "entries must lie in (0, 1/4)");
  cfg.glue_rotation = real("experiment.glue_rotation");
  cfg.alphas = list("experiment.alphas");
  for (double a : cfg.alphas) check(a > 1.0, "experiment.alphas", "entries must exceed 1");
  cfg.lambdas = list("experiment.lambdas");
  for (double l : cfg.lambdas) check(l > 0.0 && l < 1.0, "experiment.lambdas", "entries must lie in (0, 1)");
  cfg.angles = list("experiment.angles");
  for (double a : cfg.angles)
    check(std::abs(std::remainder(a, 2.0 * std::numbers::pi)) > 1e-12, "experiment.angles",
          "angles must not be multiples of 2 pi");
  cfg.R = real("experiment.R");
  check(cfg.R > 0.0 && std::isfinite(cfg.R), "experiment.R", "must be positive");
  cfg.grid = static_cast<int>(integer("experiment.grid"));
  check(cfg.grid > 0 && cfg.grid <= 100000, "experiment.grid", "must lie in [1, 100000]");
  for (double l : list("experiment.levels")) {
    check(l >= 1.0 && l <= 30.0 && l == std::floor(l), "experiment.levels", "levels must be integers in [1, 30]");
    cfg.levels.push_back(static_cast<int>(l));
  }
  cfg.h = real("experiment.h");
  check(cfg.h > 0.0, "experiment.h", "must be positive");
  cfg.settings = std::move(settings);
  return cfg;
}

inline Json to_json(const Config& cfg) {
  Json out = Json::object();
  out["n"] = cfg.n;
  out["s"] = cfg.s;
  out["t"] = cfg.t;
  out["schedule"] = numbers(cfg.schedule);
  out["mesh"] = Json{{"resolution", cfg.resolution}};
  out["target"] = Json{{"dim", cfg.target_dim}};
  out["input"] = Json{{"field", cfg.input}};
  out["optimizer"] = fracmap::to_json(cfg.optimizer);
  Json levels = Json::array();
  for (int l : cfg.levels) levels.push_back(l);
  out["experiment"] = Json{{"k", cfg.k},
                           {"noise", cfg.noise},
                           {"seed", cfg.seed},
                           {"diagonal", to_string(cfg.diagonal)},
                           {"lambda", cfg.lambda},
                           {"kernel_samples", cfg.kernel_samples},
                           {"balance_radii", numbers(cfg.balance_radii)},
                           {"eps", number(cfg.eps)},
                           {"concentration_rho", cfg.concentration_rho},
                           {"concentrate", cfg.concentrate},
                           {"glue_r", cfg.glue_r},
                           {"glue_deltas", numbers(cfg.glue_deltas)},
                           {"glue_rotation", cfg.glue_rotation},
                           {"alphas", numbers(cfg.alphas)},
                           {"lambdas", numbers(cfg.lambdas)},
                           {"angles", numbers(cfg.angles)},
                           {"R", cfg.R},
                           {"grid", cfg.grid},
                           {"levels", std::move(levels)},
                           {"h", cfg.h}};
  return out;
}

/// Output sink for one command run.
struct Outputs {
  std::filesystem::path dir;

  void report(const std::string& command, const Json& doc) const {
    std::ofstream out(dir / (command + ".json"));
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write report to " + dir.string());
    out << doc.dump(2) << '\n';
  }

  void series(const std::string& command, const std::string& header, const std::vector<std::string>& rows) const {
    std::ofstream out(dir / (command + "_series.csv"));
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write series to " + dir.string());
    out << header << '\n';
    for (const std::string& row : rows) out << row << '\n';
  }

  void field(const Field& f) const { save_field((dir / "field.json").string(), f); }
};

struct CommandResult {
  Json body = Json::object();
  int exit = kOk;
  std::string summary;
};

namespace detail {

inline Field pad_target(const Field& field, int target_dim) {
  if (field.target().ambient_dim == target_dim) return field;
  Values values = Values::Zero(field.values().rows(), target_dim);
  values.leftCols(field.values().cols()) = field.values();
  return Field(field.mesh_ptr(), std::move(values), TargetManifold::sphere(target_dim));
}

inline Field initial_field(const Config& cfg) {
  Field field = cfg.input.empty() ? pad_target(degree_map(make_mesh(cfg.n, cfg.resolution), cfg.k), cfg.target_dim)
                                  : load_field(cfg.input);
  if (!cfg.input.empty()) {
    if (field.mesh().dim() != cfg.n) throw ConfigError("input.field", "field dimension does not match n");
    if (field.target().ambient_dim != cfg.target_dim)
      throw ConfigError("input.field", "field target_dim does not match target.dim");
  }
  if (cfg.concentrate != 1.0) field = conformal_rescale(field, cfg.concentrate);
  if (cfg.noise > 0.0) field = perturb_tangential(field, cfg.noise, cfg.seed);
  return field;
}

inline std::string series_row(const std::vector<std::string>& prefix, std::size_t k, const MinimizeResult& r) {
  std::string row;
  for (const std::string& p : prefix) row += p + ",";
  row += std::to_string(k) + "," + format(r.energies[k]) + "," + format(r.residuals[k]) + "," +
         (k == 0 ? std::string("0") : format(r.steps[k - 1]));
  return row;
}

inline CommandResult run_minimize(const Config& cfg, const Outputs& out) {
  const Field field0 = initial_field(cfg);
  const MinimizeResult result = minimize(field0, cfg.params(cfg.t), cfg.optimizer);
  std::vector<std::string> rows;
  for (std::size_t k = 0; k < result.energies.size(); ++k) rows.push_back(series_row({}, k, result));
  out.series("minimize", "iteration,energy,residual,step", rows);
  out.field(result.field);
  CommandResult res;
  res.body["result"] = fracmap::to_json(result);
  res.body["result"]["degree_initial"] = optional_int(audit_degree(field0));
  res.exit = result.status == MinimizeStatus::stalled ? kStall : kOk;
  res.summary = "minimize: " + to_string(result.status) + " after " + std::to_string(result.iterations) +
                " iterations, energy " + format(result.energy()) + ", residual " + format(result.residual());
  return res;
}

inline CommandResult run_continue(const Config& cfg, const Outputs& out) {
  const ContinuationReport report = continuation(initial_field(cfg), {cfg.s, cfg.schedule}, cfg.params(cfg.s),
                                                 cfg.optimizer, {cfg.eps, cfg.concentration_rho});
  std::vector<std::string> rows;
  Json stages = Json::array();
  bool stalled = false;
  for (std::size_t k = 0; k < report.stages.size(); ++k) {
    const ContinuationStage& stage = report.stages[k];
    stages.push_back(fracmap::to_json(stage));
    stalled = stalled || stage.result.status == MinimizeStatus::stalled;
    for (std::size_t i = 0; i < stage.result.energies.size(); ++i)
      rows.push_back(series_row({std::to_string(k), format(stage.t)}, i, stage.result));
  }
  out.series("continue", "stage,t,iteration,energy,residual,step", rows);
  out.field(report.final_field());
  CommandResult res;
  res.body["stages"] = std::move(stages);
  res.exit = stalled ? kStall : kOk;
  const auto& last = report.stages.back();
  res.summary = "continue: " + std::to_string(report.stages.size()) + " stages, final t " + format(last.t) +
                ", energy " + format(last.energy_t) + ", degree " +
                (last.degree ? std::to_string(*last.degree) : std::string("n/a"));
  return res;
}

inline CommandResult run_rescale_check(const Config& cfg, const Outputs&) {
  const EnergyParams params = cfg.params(cfg.t);
  const BoundReport bound = rescale_bound_check(initial_field(cfg), cfg.lambda, params);
  const KernelBoundReport kernel =
      kernel_bound_check(cfg.lambda, params, static_cast<std::size_t>(cfg.kernel_samples), cfg.seed);
  CommandResult res;
  res.body["bound"] = fracmap::to_json(bound);
  res.body["kernel"] = fracmap::to_json(kernel);
  res.summary = "rescale-check: slack " + format(bound.slack()) + ", kernel max violation " +
                format(kernel.max_violation());
  return res;
}

inline CommandResult run_balance_check(const Config& cfg, const Outputs&) {
  const Field field = initial_field(cfg);
  const EnergyParams params = cfg.params(cfg.t);
  Json entries = Json::array();
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (double rho : cfg.balance_radii) {
    const BalanceReport r = balance_ratio(field, SpherePoint::south(cfg.n), rho, params);
    entries.push_back(fracmap::to_json(r));
    lo = std::min(lo, r.implied_constant);
    hi = std::max(hi, r.implied_constant);
  }
  CommandResult res;
  res.body["center"] = "south_pole";
  res.body["balance"] = std::move(entries);
  res.summary = "balance-check: implied constants in [" + format(lo) + ", " + format(hi) + "]";
  return res;
}

inline Field rotate_target(const Field& u, double angle) {
  Values v = u.values();
  const double c = std::cos(angle), s = std::sin(angle);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double a = v(i, 0), b = v(i, 1);
    v(i, 0) = c * a - s * b;
    v(i, 1) = s * a + c * b;
  }
  return u.with_values(std::move(v));
}

inline CommandResult run_glue_check(const Config& cfg, const Outputs&) {
  const Field u = initial_field(cfg);
  const Field v = rotate_target(u, cfg.glue_rotation);
  const EnergyParams params = cfg.params(cfg.t);
  const ChartNodes chart(u.mesh(), SpherePoint::south(cfg.n));
  Json entries = Json::array();
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (double delta : cfg.glue_deltas) {
    const GlueResult glued = luckhaus_glue(u, v, cfg.glue_r, delta, params);
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (chart.at_infinity[i] || chart.radius[i] >= cfg.glue_r) {
        mismatches += glued.field.value(i) != u.value(i);
      } else if (chart.radius[i] <= (1.0 - delta) * cfg.glue_r) {
        mismatches += glued.field.value(i) != v.sample(chart.chart.from_chart(Vector(chart.at(i) / (1.0 - delta))));
      }
    }
    Json entry = fracmap::to_json(glued.report);
    entry["boundary_mismatches"] = mismatches;
    entry["degree"] = optional_int(audit_degree(glued.field));
    entries.push_back(std::move(entry));
    lo = std::min(lo, glued.report.ratio());
    hi = std::max(hi, glued.report.ratio());
  }
  CommandResult res;
  res.body["glue"] = std::move(entries);
  res.body["ratio_spread"] = number(hi / lo);
  res.summary = "glue-check: ratios in [" + format(lo) + ", " + format(hi) + "]";
  return res;
}

inline CommandResult run_grad_check(const Config& cfg, const Outputs&) {
  const MeshPtr mesh = make_mesh(cfg.n, cfg.resolution);
  const Field field = random_field(mesh, TargetManifold::sphere(cfg.target_dim), cfg.seed);
  const double error = check_gradient(field, cfg.params(cfg.t), cfg.h);
  CommandResult res;
  res.body["nodes"] = mesh->size();
  res.body["max_rel_error"] = number(error);
  res.summary = "grad-check: max relative error " + format(error);
  return res;
}

inline CommandResult run_superdifficult(const Config& cfg, const Outputs&) {
  const Vector theta = Vector(Eigen::Vector2d(1.0, 0.0));
  Json per_alpha = Json::array();
  double worst_scale = 0.0;
  for (double alpha : cfg.alphas) {
    Json samples = Json::array();
    std::vector<double> per_lambda;
    for (double lambda : cfg.lambdas) {
      double best = 0.0;
      for (double angle : cfg.angles) {
        const Vector omega = Vector(Eigen::Vector2d(std::cos(angle), std::sin(angle)));
        const SuperdifficultReport r = check_superdifficult(alpha, lambda, theta, omega, cfg.R, cfg.grid);
        const SuperdifficultReport scaled = check_superdifficult(alpha, lambda, theta, omega, 2.0 * cfg.R, cfg.grid);
        worst_scale = std::max(worst_scale, std::abs(scaled.ratio - r.ratio) / r.ratio);
        Json sample = fracmap::to_json(r);
        sample["lambda"] = lambda;
        sample["angle"] = angle;
        samples.push_back(std::move(sample));
        best = std::max(best, r.ratio);
      }
      per_lambda.push_back(best);
    }
    const auto [lo, hi] = std::minmax_element(per_lambda.begin(), per_lambda.end());
    per_alpha.push_back(Json{{"alpha", alpha},
                             {"max_ratio", number(*hi)},
                             {"lambda_max_ratios", numbers(per_lambda)},
                             {"lambda_spread", number(*hi / *lo)},
                             {"samples", std::move(samples)}});
  }
  CommandResult res;
  res.body["R"] = cfg.R;
  res.body["grid"] = cfg.grid;
  res.body["scale_invariance_error"] = number(worst_scale);
  res.body["alphas"] = std::move(per_alpha);
  res.summary = "superdifficult: scale invariance error " + format(worst_scale);
  return res;
}

inline CommandResult run_bubble(const Config& cfg, const Outputs&) {
  BubbleConfig b;
  b.n = cfg.n;
  b.k = cfg.k;
  b.s = cfg.s;
  b.t_values = cfg.schedule;
  b.resolution = static_cast<std::size_t>(cfg.resolution);
  b.concentrate = cfg.concentrate;
  b.noise = cfg.noise;
  b.seed = cfg.seed;
  b.eps = cfg.eps;
  b.rho = cfg.concentration_rho;
  b.balance_radii = cfg.balance_radii;
  b.optimizer = cfg.optimizer;
  if (cfg.target_dim != cfg.n + 1) throw ConfigError("target.dim", "bubble needs target.dim = n + 1");
  if (!cfg.input.empty()) throw ConfigError("input.field", "bubble builds its own initial field");
  if (cfg.diagonal != DiagonalPolicy::exclude) throw ConfigError("experiment.diagonal", "bubble uses exclude");
  const ExperimentReport report = bubbling_experiment(b);
  const Json doc = fracmap::to_json(report, cfg.deterministic);
  CommandResult res;
  res.body["stages"] = doc.at("stages");
  std::size_t stalled = 0;
  for (const auto& stage : report.stages) stalled += stage.status == "stalled";
  res.summary = "bubble: " + std::to_string(report.stages.size()) + " stages, " + std::to_string(stalled) + " stalled";
  return res;
}

inline CommandResult run_cutoff_decay(const Config& cfg, const Outputs&) {
  const MeshPtr mesh = make_mesh(cfg.n, cfg.resolution);
  const EnergyParams params = cfg.params(cfg.s);
  Json entries = Json::array();
  std::vector<double> values;
  for (int ell : cfg.levels) {
    double value = 0.0;
    try {
      value = seminorm(capacity_cutoff(mesh, ell, SpherePoint::south(cfg.n)), params);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Resolution) throw ConfigError("mesh.resolution", e.what());
      throw;
    }
    values.push_back(value);
    entries.push_back(Json{{"level", ell}, {"seminorm", number(value)}});
  }
  bool decreasing = true;
  for (std::size_t k = 1; k < values.size(); ++k) decreasing = decreasing && values[k] < values[k - 1];
  CommandResult res;
  res.body["levels"] = std::move(entries);
  res.body["strictly_decreasing"] = decreasing;
  res.body["last_over_first"] = number(values.back() / values.front());
  res.summary = "cutoff-decay: seminorm ratio last/first " + format(values.back() / values.front());
  return res;
}

inline bool numerical_failure(ErrorKind kind) {
  return kind == ErrorKind::TubularViolation || kind == ErrorKind::GlueFailure ||
         kind == ErrorKind::IllConditionedDegree || kind == ErrorKind::Singularity;
}

}  // namespace detail

/// Runs one command on a resolved config and writes its artifacts.
inline int execute(const std::string& command, const Config& cfg, const std::filesystem::path& dir, std::ostream& out) {
  static const std::map<std::string, std::function<CommandResult(const Config&, const Outputs&)>> table{
      {"minimize", detail::run_minimize},           {"continue", detail::run_continue},
      {"rescale-check", detail::run_rescale_check}, {"balance-check", detail::run_balance_check},
      {"glue-check", detail::run_glue_check},       {"grad-check", detail::run_grad_check},
      {"superdifficult", detail::run_superdifficult}, {"bubble", detail::run_bubble},
      {"cutoff-decay", detail::run_cutoff_decay}};
  std::filesystem::create_directories(dir);
  const Outputs outputs{dir};
  CommandResult result = table.at(command)(cfg, outputs);
  Json doc = Json::object();
  doc["command"] = command;
  doc["config"] = to_json(cfg);
  for (auto& [key, value] : result.body.items()) doc[key] = value;
  doc["provenance"] = provenance(cfg.deterministic);
  outputs.report(command, doc);
  out << result.summary << '\n';
  return result.exit;
}

/// Entry point: parses flags, resolves the config, runs the command.
/// Exit codes: 0 success, 2 validation failure, 3 numerical stall.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fractional harmonic map experiments"};
  std::string command;
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = "fracmap_out";
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  app.add_option("command", command, "Command to run")->required()->check(CLI::IsMember(commands()));
  app.add_option("--config", config_path, "INI config file");
  app.add_option("--set", overrides, "Override a config key (KEY=VALUE)")->allow_extra_args(false);
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--threads", threads, "Worker threads (default: FRACMAP_THREADS or hardware count)")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Seed (overrides experiment.seed)");
  app.add_flag("--deterministic", deterministic, "Deterministic pairwise reduction");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "fracmap: " << e.what() << '\n';
    return kValidation;
  }

  try {
    if (threads) {
      set_num_threads(*threads);
    } else if (const char* env = std::getenv("FRACMAP_THREADS"); env != nullptr && *env != '\0') {
      const auto value = detail::parse_int("FRACMAP_THREADS", env);
      if (value <= 0) throw ConfigError("FRACMAP_THREADS", "must be a positive integer");
      set_num_threads(static_cast<int>(value));
    }
    const auto file_settings =
        config_path.empty() ? std::map<std::string, std::string>{} : read_settings(config_path);
    const Config cfg = resolve(file_settings, overrides, seed, deterministic);
    return execute(command, cfg, out_dir, out);
  } catch (const ConfigError& e) {
    err << "fracmap: " << e.what() << '\n';
    return kValidation;
  } catch (const Error& e) {
    err << "fracmap: " << e.what() << '\n';
    return detail::numerical_failure(e.kind()) ? kStall : kValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "fracmap: " << e.what() << '\n';
    return kValidation;
  }
}

}  // namespace fracmap::cli
