#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fracmap/minimizer.hpp"
#include "fracmap/rescaling.hpp"

using namespace fracmap;

namespace {

Field noisy_identity(const MeshPtr& mesh, double amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Values v = identity_field(mesh).values();
  for (Eigen::Index i = 0; i < v.rows(); ++i) v.row(i) += amplitude * g(rng) * Eigen::RowVector2d(-v(i, 1), v(i, 0));
  return Field::projected(mesh, v, TargetManifold::sphere(2));
}

}  // namespace

TEST(Minimizer, ConstantFieldConvergesImmediately) {
  const MeshPtr mesh = make_mesh(1, 32);
  const Field c = Field::constant(mesh, TargetManifold::sphere(3), Vector(Eigen::Vector3d(1, 0, 0)));
  const MinimizeResult r = minimize(c, EnergyParams::make(1, 0.5, 0.6));
  EXPECT_TRUE(r.converged());
  EXPECT_EQ(r.iterations, 0);
  EXPECT_EQ(r.residual(), 0.0);
}

TEST(Minimizer, InfiniteToleranceReturnsInput) {
  const MeshPtr mesh = make_mesh(1, 32);
  const Field u = noisy_identity(mesh, 0.1, 3);
  MinimizeConfig cfg;
  cfg.tol_grad = std::numeric_limits<double>::infinity();
  const MinimizeResult r = minimize(u, EnergyParams::make(1, 0.5, 0.6), cfg);
  EXPECT_EQ(r.iterations, 0);
  EXPECT_EQ(r.field.values(), u.values());
}

TEST(Minimizer, DescentIsMonotoneAndKeepsDegree) {
  const MeshPtr mesh = make_mesh(1, 64);
  const Field u = noisy_identity(mesh, 0.1, 5);
  MinimizeConfig cfg;
  cfg.max_iters = 400;
  double previous = std::numeric_limits<double>::infinity();
  int audits = 0;
  const MinimizeResult r = minimize(u, EnergyParams::make(1, 0.5, 0.6), cfg, [&](const StepInfo& info) {
    EXPECT_LE(info.energy, previous);
    previous = info.energy;
    EXPECT_EQ(degree(Field(mesh, info.values, TargetManifold::sphere(2))), 1);
    ++audits;
  });
  EXPECT_EQ(audits, r.iterations);
  for (std::size_t k = 1; k < r.energies.size(); ++k) EXPECT_LE(r.energies[k], r.energies[k - 1]);
  EXPECT_LT(r.energy(), r.energies.front());
  EXPECT_LT(r.residual(), 1e-2 * r.residuals.front());
  EXPECT_EQ(degree(r.field), 1);
}

TEST(Minimizer, NodeDisplacementIsCapped) {
  const MeshPtr mesh = make_mesh(1, 48);
  const Field u = noisy_identity(mesh, 0.3, 8);
  MinimizeConfig cfg;
  cfg.max_iters = 50;
  Values last = u.values();
  minimize(u, EnergyParams::make(1, 0.5, 0.7), cfg, [&](const StepInfo& info) {
    EXPECT_LE((info.values - last).rowwise().norm().maxCoeff(), 0.5 * mesh->min_spacing() + 1e-12);
    last = info.values;
  });
}

TEST(Minimizer, ConvergesToTolerance) {
  const MeshPtr mesh = make_mesh(1, 32);
  MinimizeConfig cfg;
  cfg.tol_grad = 1e-5;
  const MinimizeResult r = minimize(noisy_identity(mesh, 0.1, 1), EnergyParams::make(1, 0.5, 0.6), cfg);
  EXPECT_TRUE(r.converged()) << to_string(r.status);
  EXPECT_LE(r.residual(), 1e-5);
  EXPECT_NEAR(el_residual(r.field, EnergyParams::make(1, 0.5, 0.6)), r.residual(), 1e-15);
}

TEST(Minimizer, SmallExponentIsRejected) {
  const MeshPtr mesh = make_mesh(1, 32);
  EXPECT_THROW(minimize(identity_field(mesh), EnergyParams::make(1, 0.8, 0.9)), Error);
}

TEST(Minimizer, ConfigValidation) {
  MinimizeConfig cfg;
  cfg.armijo_c1 = 1.5;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.backtrack = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Minimizer, ScheduleValidation) {
  const ContinuationSchedule geometric = ContinuationSchedule::geometric(0.5);
  ASSERT_EQ(geometric.t_values.size(), 4u);
  EXPECT_DOUBLE_EQ(geometric.t_values[0], 0.7);
  EXPECT_DOUBLE_EQ(geometric.t_values[3], 0.525);
  EXPECT_THROW((ContinuationSchedule{0.5, {0.6, 0.7}}.validate()), Error);
  EXPECT_THROW((ContinuationSchedule{0.5, {0.5}}.validate()), Error);
  EXPECT_THROW((ContinuationSchedule{0.5, {}}.validate()), Error);
}

TEST(Minimizer, ContinuationSingleStageConstant) {
  const MeshPtr mesh = make_mesh(1, 32);
  const Field c = Field::constant(mesh, TargetManifold::sphere(2), Vector(Eigen::Vector2d(0, 1)));
  const ContinuationReport report = continuation(c, {0.5, {0.6}}, EnergyParams::make(1, 0.5, 0.5));
  ASSERT_EQ(report.stages.size(), 1u);
  EXPECT_EQ(report.stages[0].energy_t, 0.0);
  EXPECT_EQ(report.stages[0].degree, 0);
  EXPECT_TRUE(report.stages[0].centers.empty());
}

TEST(Minimizer, ContinuationKeepsDegreeAndBound) {
  const MeshPtr mesh = make_mesh(1, 64);
  MinimizeConfig cfg;
  cfg.max_iters = 300;
  const auto base = EnergyParams::make(1, 0.5, 0.5);
  const ContinuationReport report =
      continuation(noisy_identity(mesh, 0.1, 9), {0.5, {0.7, 0.6, 0.55}}, base, cfg, {1e9, 0.5});
  ASSERT_EQ(report.stages.size(), 3u);
  for (std::size_t k = 0; k < report.stages.size(); ++k) {
    const auto& stage = report.stages[k];
    EXPECT_EQ(stage.degree, 1);
    EXPECT_TRUE(stage.bound_holds());
    EXPECT_TRUE(stage.centers.empty());
    EXPECT_NEAR(stage.energy_t, energy(stage.result.field, base.at_order(stage.t)), 1e-12 * stage.energy_t);
    if (k > 0) {
      const double warm = energy(report.stages[k - 1].result.field, base.at_order(stage.t));
      EXPECT_LE(stage.energy_t, warm);
    }
  }
}

TEST(Minimizer, ConcentrationEmptyCases) {
  const MeshPtr mesh = make_mesh(1, 128);
  const auto params = EnergyParams::make(1, 0.5, 0.6);
  const Field c = Field::constant(mesh, TargetManifold::sphere(2), Vector(Eigen::Vector2d(1, 0)));
  EXPECT_TRUE(detect_concentration(c, params, 1e-12, 0.5).empty());
  const Field id = identity_field(mesh);
  EXPECT_TRUE(detect_concentration(id, params, 2.0 * energy(id, params), 0.5).empty());
  EXPECT_THROW(detect_concentration(id, params, 1.0, 2.5), Error);
}

TEST(Minimizer, ConcentrationFindsRescaledBubble) {
  const MeshPtr mesh = make_mesh(1, 512);
  const auto params = EnergyParams::make(1, 0.5, 0.5);
  const Field bubble = conformal_rescale(identity_field(mesh), 20.0);
  const double total = energy(bubble, params);
  const auto centers = detect_concentration(bubble, params, 0.6 * total, 0.5);
  ASSERT_EQ(centers.size(), 1u);
  EXPECT_LT(chordal_distance(mesh->node(centers[0]), SpherePoint::south(1)), 0.1);
}

TEST(Minimizer, ConcentrationSeparatesCenters) {
  const MeshPtr mesh = make_mesh(1, 256);
  const auto params = EnergyParams::make(1, 0.5, 0.5);
  const Field id = identity_field(mesh);
  const auto centers = detect_concentration(id, params, 1e-3, 0.3);
  ASSERT_GT(centers.size(), 1u);
  for (std::size_t a = 0; a < centers.size(); ++a)
    for (std::size_t b = a + 1; b < centers.size(); ++b) EXPECT_GE(mesh->distance(centers[a], centers[b]), 0.3);
}
