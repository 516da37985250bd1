#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fracmap/homotopy.hpp"
#include "fracmap/rescaling.hpp"

using namespace fracmap;

TEST(Rescaling, MobiusDilation) {
  const SpherePoint x = stereo_lift(0.7);
  EXPECT_LT(chordal_distance(mobius_dilate(x, 1.0), x), 1e-15);
  EXPECT_LT(chordal_distance(mobius_dilate(x, 3.0), stereo_lift(2.1)), 1e-15);
  EXPECT_LT(chordal_distance(mobius_dilate(mobius_dilate(x, 2.0), 0.5), x), 1e-15);
  for (int n : {1, 2}) {
    EXPECT_EQ(mobius_dilate(SpherePoint::north(n), 5.0).coords(), SpherePoint::north(n).coords());
    EXPECT_LT(chordal_distance(mobius_dilate(SpherePoint::south(n), 5.0), SpherePoint::south(n)), 1e-15);
  }
  EXPECT_THROW(mobius_dilate(x, 0.0), Error);
}

TEST(Rescaling, IdentityScaleKeepsValues) {
  const MeshPtr mesh = make_mesh(1, 64);
  const Field u = degree_map(mesh, 3);
  EXPECT_LT((conformal_rescale(u, 1.0).values() - u.values()).cwiseAbs().maxCoeff(), 1e-12);
  const Field c = Field::constant(mesh, TargetManifold::sphere(3), Vector(Eigen::Vector3d(0, 1, 0)));
  EXPECT_LT((conformal_rescale(c, 7.0).values() - c.values()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Rescaling, RescaleNeedsResolution) {
  const Field u = identity_field(make_mesh(1, 16));
  try {
    conformal_rescale(u, 2.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Resolution);
  }
}

TEST(Rescaling, GroupPropertyWithinInterpolationError) {
  const MeshPtr mesh = make_mesh(1, 512);
  const Field u = identity_field(mesh);
  const Field back = conformal_rescale(conformal_rescale(u, 2.0), 0.5);
  const double spacing = 2.0 * std::numbers::pi / 512.0;
  EXPECT_LT((back.values() - u.values()).rowwise().norm().maxCoeff(), 2.0 * spacing);
}

TEST(Rescaling, RescaledIdentityIsExactMobius) {
  const MeshPtr mesh = make_mesh(1, 256);
  const Field u = conformal_rescale(identity_field(mesh), 1.5);
  for (std::size_t i = 0; i < mesh->size(); i += 17)
    EXPECT_LT((u.value(i) - mobius_dilate(mesh->node(i), 1.5).coords()).norm(), 1e-3);
  EXPECT_EQ(degree(u), 1);
}

TEST(Rescaling, ConformalInvarianceAtCriticalOrder) {
  const MeshPtr mesh = make_mesh(1, 512);
  const auto params = EnergyParams::make(1, 0.5, 0.5);
  for (int k : {1, 2}) {
    const Field u = degree_map(mesh, k);
    const double e0 = energy(u, params);
    for (double lambda : {1.2, 1.9}) {
      const double e1 = energy(conformal_rescale(u, lambda), params);
      EXPECT_LT(std::abs(e1 - e0) / e0, 0.01) << k << " " << lambda;
    }
  }
}

TEST(Rescaling, SphereRescaleKeepsDegree) {
  const MeshPtr mesh = make_mesh(2, 3);
  const Field u = conformal_rescale(identity_field(mesh), 1.5);
  EXPECT_EQ(degree(u), 1);
}

TEST(Rescaling, KernelValues) {
  const auto relaxed = EnergyParams::make(1, 0.5, 0.6);
  const auto critical = EnergyParams::make(1, 0.5, 0.5);
  for (double r : {0.0, 0.3, 5.0})
    for (double R : {0.1, 2.0}) {
      EXPECT_NEAR(kernel_K(1.0, r, R, relaxed), 1.0, 1e-15);
      EXPECT_EQ(kernel_K(0.4, r, R, critical), 1.0);
    }
  EXPECT_NEAR(kernel_K(0.5, 0.0, 0.0, relaxed), 0.8705505632961241, 1e-15);
  EXPECT_NEAR(kernel_K(1.5, 0.0, 0.0, relaxed), std::pow(1.5, 0.2), 1e-15);
  const auto sphere = EnergyParams::make(2, 0.5, 0.6);
  EXPECT_NEAR(kernel_K(1.5, 0.0, 0.0, sphere), std::pow(1.5, 0.4), 1e-15);
}

TEST(Rescaling, KernelBoundsHold) {
  for (int n : {1, 2}) {
    for (double ratio : {1.0, 1.2, 1.4}) {
      const auto params = EnergyParams::make(n, 0.5, 0.5 * ratio);
      for (double lambda : {0.5, 1.0, 1.5}) {
        const KernelBoundReport report = kernel_bound_check(lambda, params, 4000);
        EXPECT_LE(report.max_violation(), 1e-12) << n << " " << ratio << " " << lambda;
      }
    }
  }
  const KernelBoundReport flat = kernel_bound_check(0.7, EnergyParams::make(1, 0.5, 0.5), 1000);
  EXPECT_NEAR(flat.max_violation(), 0.0, 1e-15);
  EXPECT_THROW(kernel_bound_check(2.0, EnergyParams::make(1, 0.5, 0.6), 10), Error);
}

TEST(Rescaling, KernelBoundSamplerIsSeeded) {
  const auto params = EnergyParams::make(1, 0.5, 0.6);
  const KernelBoundReport a = kernel_bound_check(1.5, params, 10000);
  const KernelBoundReport b = kernel_bound_check(1.5, params, 10000);
  EXPECT_EQ(a.mixed, b.mixed);
  EXPECT_EQ(a.samples, 10000u);
  EXPECT_GT(a.both_small, -1.0);
  EXPECT_GT(a.both_large, -1.0);
}

TEST(Rescaling, RLambdaIsChartBallImage) {
  EXPECT_NEAR(r_lambda(1.0), std::sqrt(2.0), 1e-15);
  for (double lambda : {0.3, 1.2, 1.9})
    EXPECT_NEAR(chordal_distance(stereo_lift(lambda), SpherePoint::south(1)), r_lambda(lambda), 1e-15);
}

TEST(Rescaling, BoundCheckAtUnitScale) {
  const MeshPtr mesh = make_mesh(1, 128);
  const auto params = EnergyParams::make(1, 0.5, 0.6);
  const Field u = identity_field(mesh);
  const BoundReport report = rescale_bound_check(u, 1.0, params);
  const double total = energy(u, params);
  EXPECT_NEAR(report.ball_energy + report.complement_energy, total, 1e-12 * total);
  EXPECT_NEAR(report.slack(), (std::pow(2.0, rescale_exponent(params)) - 1.0) * total, 1e-9 * total);
}

TEST(Rescaling, BoundCheckConstantAndIdentity) {
  const MeshPtr mesh = make_mesh(1, 512);
  const auto params = EnergyParams::make(1, 0.5, 0.6);
  const Field c = Field::constant(mesh, TargetManifold::sphere(2), Vector(Eigen::Vector2d(1, 0)));
  const BoundReport zero = rescale_bound_check(c, 1.5, params);
  EXPECT_EQ(zero.lhs, 0.0);
  EXPECT_EQ(zero.rhs(), 0.0);
  const BoundReport report = rescale_bound_check(identity_field(mesh), 1.5, params);
  EXPECT_GE(report.slack(), -0.01 * report.lhs);
  EXPECT_THROW(rescale_bound_check(c, 1.5, EnergyParams::make(1, 0.5, 0.5)), Error);
}

TEST(Rescaling, BalanceRatio) {
  const MeshPtr mesh = make_mesh(1, 256);
  const auto params = EnergyParams::make(1, 0.5, 0.6);
  const Field c = Field::constant(mesh, TargetManifold::sphere(2), Vector(Eigen::Vector2d(1, 0)));
  const BalanceReport zero = balance_ratio(c, SpherePoint::south(1), 0.5, params);
  EXPECT_EQ(zero.lhs, 0.0);
  EXPECT_EQ(zero.rhs_core, 0.0);
  EXPECT_EQ(zero.implied_constant, 0.0);
  EXPECT_THROW(balance_ratio(c, SpherePoint::south(1), 1.9, params), Error);

  const Field id = identity_field(mesh);
  const BalanceReport report = balance_ratio(id, SpherePoint::south(1), 0.5, params);
  EXPECT_GT(report.implied_constant, 0.0);
  EXPECT_TRUE(std::isfinite(report.implied_constant));
  EXPECT_NEAR(report.implied_constant, report.lhs * std::pow(0.5, 0.2) / report.rhs_core, 1e-15);
  EXPECT_NEAR(report.lhs + report.rhs_core, energy(id, params), 1e-12 * energy(id, params));
}
