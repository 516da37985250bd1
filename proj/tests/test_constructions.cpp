#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fracmap/constructions.hpp"
#include "fracmap/homotopy.hpp"

using namespace fracmap;

namespace {

Field rotated(const Field& u, double angle) {
  const Eigen::Matrix2d r = Eigen::Rotation2Dd(angle).toRotationMatrix();
  return u.with_values(u.values() * r.transpose());
}

Field constant2(const MeshPtr& mesh, double angle) {
  return Field::constant(mesh, TargetManifold::sphere(2), Vector(Eigen::Vector2d(std::cos(angle), std::sin(angle))));
}

}  // namespace

TEST(Constructions, Smoothstep) {
  EXPECT_EQ(smoothstep(-1.0), 0.0);
  EXPECT_EQ(smoothstep(0.0), 0.0);
  EXPECT_EQ(smoothstep(0.5), 0.5);
  EXPECT_EQ(smoothstep(1.0), 1.0);
  EXPECT_EQ(smoothstep(3.0), 1.0);
}

TEST(Constructions, CutoffWithEqualFieldsIsIdentity) {
  const MeshPtr mesh = make_mesh(1, 128);
  const Field u = degree_map(mesh, 2);
  const Field w = cutoff_interpolate(u, u, SpherePoint::south(1), 0.4);
  EXPECT_LT((w.values() - u.values()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Constructions, CutoffRegions) {
  const MeshPtr mesh = make_mesh(1, 256);
  const Field u = identity_field(mesh);
  const Field v = rotated(u, 0.3);
  const SpherePoint c = mesh->node(10);
  const double rho = 0.3;
  const Field w = cutoff_interpolate(u, v, c, rho);
  int blended = 0;
  for (std::size_t i = 0; i < mesh->size(); ++i) {
    const double d = chordal_distance(mesh->node(i), c);
    if (d <= rho) {
      EXPECT_EQ(w.value(i), v.value(i));
    } else if (d >= 2.0 * rho) {
      EXPECT_EQ(w.value(i), u.value(i));
    } else {
      ++blended;
      const double eta = smoothstep((2.0 * rho - d) / rho);
      const Vector expected = ((1.0 - eta) * u.value(i) + eta * v.value(i)).normalized();
      EXPECT_LT((w.value(i) - expected).norm(), 1e-15);
    }
  }
  EXPECT_GT(blended, 0);
}

TEST(Constructions, CutoffCloseConstantsIsProjectedSegment) {
  const MeshPtr mesh = make_mesh(1, 128);
  const Field u = constant2(mesh, 0.0);
  const Field v = constant2(mesh, 2.0 * std::asin(0.05));
  EXPECT_NEAR((u.value(0) - v.value(0)).norm(), 0.1, 1e-15);
  const Field w = cutoff_interpolate(u, v, SpherePoint::south(1), 0.5);
  for (std::size_t i = 0; i < mesh->size(); ++i) {
    const double angle = std::atan2(w.value(i)[1], w.value(i)[0]);
    EXPECT_GE(angle, -1e-15);
    EXPECT_LE(angle, 2.0 * std::asin(0.05) + 1e-15);
  }
}

TEST(Constructions, CutoffAntipodalConstantsFail) {
  const MeshPtr mesh = make_mesh(1, 256);
  try {
    cutoff_interpolate(constant2(mesh, 0.0), constant2(mesh, std::numbers::pi), SpherePoint::south(1), 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::GlueFailure);
    ASSERT_TRUE(e.node().has_value());
    const double d = chordal_distance(mesh->node(*e.node()), SpherePoint::south(1));
    EXPECT_NEAR(smoothstep((1.0 - d) / 0.5), 0.5, 0.05);
  }
}

TEST(Constructions, GlueBoundaryIdentitiesAreExact) {
  const MeshPtr mesh = make_mesh(1, 512);
  const auto params = EnergyParams::make(1, 0.5, 0.5);
  const Field u = identity_field(mesh);
  const Field v = rotated(u, 0.1);
  const double r = 1.0, delta = 0.2;
  const GlueResult glued = luckhaus_glue(u, v, r, delta, params);
  const ChartNodes chart(*mesh, SpherePoint::south(1));
  int inside = 0, outside = 0;
  for (std::size_t i = 0; i < mesh->size(); ++i) {
    if (chart.at_infinity[i] || chart.radius[i] >= r) {
      EXPECT_EQ(glued.field.value(i), u.value(i));
      ++outside;
    } else if (chart.radius[i] <= (1.0 - delta) * r) {
      const Vector expected = v.sample(chart.chart.from_chart(Vector(chart.at(i) / (1.0 - delta))));
      EXPECT_EQ(glued.field.value(i), expected);
      ++inside;
    }
  }
  EXPECT_GT(inside, 0);
  EXPECT_GT(outside, 0);
  EXPECT_EQ(degree(glued.field), 1);
}

TEST(Constructions, GlueOfEqualConstantsIsZero) {
  const MeshPtr mesh = make_mesh(1, 128);
  const Field c = constant2(mesh, 0.4);
  const GlueResult glued = luckhaus_glue(c, c, 1.0, 0.1, EnergyParams::make(1, 0.5, 0.5));
  EXPECT_LT((glued.field.values() - c.values()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT(glued.report.lhs, 1e-25);
  EXPECT_LT(glued.report.rhs(), 1e-25);
  EXPECT_EQ(glued.report.sup_gap, 0.0);
}

TEST(Constructions, GlueEstimateConstantIsStable) {
  const MeshPtr mesh = make_mesh(1, 1024);
  const auto params = EnergyParams::make(1, 0.5, 0.5);
  const Field u = identity_field(mesh);
  const Field v = rotated(u, 0.1);
  const GlueEnergyReport a = luckhaus_glue(u, v, 1.0, 0.1, params).report;
  const GlueEnergyReport b = luckhaus_glue(u, v, 1.0, 0.2, params).report;
  EXPECT_NEAR(a.sup_gap, 2.0 * std::sin(0.05), 1e-3);
  EXPECT_DOUBLE_EQ(a.sigma, 1.0);
  EXPECT_EQ(a.sphere_term(), 0.0);
  EXPECT_GT(a.ratio(), 0.0);
  EXPECT_LT(std::max(a.ratio(), b.ratio()) / std::min(a.ratio(), b.ratio()), 4.0);
}

TEST(Constructions, GlueOnSphere) {
  const MeshPtr mesh = make_mesh(2, 3);
  const auto params = EnergyParams::make(2, 0.5, 0.5);
  const Field u = identity_field(mesh);
  const Eigen::Matrix3d q = Eigen::AngleAxisd(0.1, Eigen::Vector3d::UnitX()).toRotationMatrix();
  const Field v = u.with_values(u.values() * q.transpose());
  const GlueResult glued = luckhaus_glue(u, v, 1.0, 0.2, params);
  EXPECT_GT(glued.report.boundary_sphere, 0.0);
  EXPECT_TRUE(std::isfinite(glued.report.ratio()));
  EXPECT_EQ(degree(glued.field), 1);
}

TEST(Constructions, GlueValidatesDelta) {
  const MeshPtr mesh = make_mesh(1, 64);
  const Field u = identity_field(mesh);
  EXPECT_THROW(luckhaus_glue(u, u, 1.0, 0.3, EnergyParams::make(1, 0.5, 0.5)), Error);
  EXPECT_THROW(luckhaus_glue(u, u, 1.0, 0.0, EnergyParams::make(1, 0.5, 0.5)), Error);
}

TEST(Constructions, InversionOfConstant) {
  const MeshPtr mesh = make_mesh(1, 256);
  const Field c = constant2(mesh, 1.0);
  const InversionResult inv = inversion_extend(c, 0.5, 2.0, EnergyParams::make(1, 0.5, 0.5));
  EXPECT_EQ(inv.field.values(), c.values());
  EXPECT_EQ(inv.ratio(), 1.0);
}

TEST(Constructions, InversionIsContinuousAtRing) {
  const MeshPtr mesh = make_mesh(1, 512);
  const Field u = identity_field(mesh);
  const double rho = 0.5;
  const InversionResult inv = inversion_extend(u, rho, 2.0, EnergyParams::make(1, 0.5, 0.5));
  const ChartNodes chart(*mesh, SpherePoint::south(1));
  for (std::size_t i = 0; i < mesh->size(); ++i) {
    if (chart.at_infinity[i]) continue;
    if (chart.radius[i] <= rho) {
      EXPECT_EQ(inv.field.value(i), u.value(i));
    } else if (chart.radius[i] < rho * 1.02) {
      EXPECT_LT((inv.field.value(i) - u.value(i)).norm(), 0.03);
    }
  }
  EXPECT_GT(inv.ratio(), 0.0);
  EXPECT_LT(inv.ratio(), 10.0);
}

TEST(Constructions, InversionValidates) {
  const Field u = identity_field(make_mesh(1, 64));
  EXPECT_THROW(inversion_extend(u, 0.5, 0.5, EnergyParams::make(1, 0.5, 0.5)), Error);
}

TEST(Constructions, CapacityCutoffProfile) {
  const MeshPtr mesh = make_mesh(1, 2048);
  const SpherePoint c = mesh->node(0);
  const ScalarField zeta = capacity_cutoff(mesh, 2, c);
  EXPECT_EQ(zeta.values[0], 1.0);
  for (std::size_t i = 0; i < mesh->size(); ++i) {
    const double d = chordal_distance(mesh->node(i), c);
    EXPECT_GE(zeta.values[i], 0.0);
    EXPECT_LE(zeta.values[i], 1.0);
    if (d >= 0.25) {
      EXPECT_EQ(zeta.values[i], 0.0);
    }
    if (d <= 0.0625) {
      EXPECT_EQ(zeta.values[i], 1.0);
    }
  }
}

TEST(Constructions, CapacityCutoffNeedsResolution) {
  const MeshPtr coarse = make_mesh(1, 256);
  try {
    capacity_cutoff(coarse, 3, coarse->node(0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Resolution);
  }
}

TEST(Constructions, CapacitySeminormsDecrease) {
  const MeshPtr mesh = make_mesh(1, 2048);
  const auto params = EnergyParams::make(1, 0.5, 0.5);
  const double expected[] = {3.179, 2.740, 2.448};
  double previous = std::numeric_limits<double>::infinity();
  for (int ell : {1, 2, 3}) {
    const double value = seminorm(capacity_cutoff(mesh, ell, SpherePoint::south(1)), params);
    EXPECT_NEAR(value, expected[ell - 1], 2e-3) << ell;
    EXPECT_LT(value, previous);
    previous = value;
  }
}

TEST(Constructions, OpeningMap) {
  const MeshPtr mesh = make_mesh(1, 512);
  const Field u = identity_field(mesh);
  const double rho = 0.2;
  const Field w = opening_map(u, rho);
  const ChartNodes chart(*mesh, SpherePoint::south(1));
  const Vector at_center = u.sample(SpherePoint::south(1));
  for (std::size_t i = 0; i < mesh->size(); ++i) {
    if (!chart.at_infinity[i] && chart.radius[i] <= 2.0 * rho) {
      EXPECT_EQ(w.value(i), u.value(i));
    }
    if (chart.at_infinity[i] || chart.radius[i] >= 3.0 * rho) {
      EXPECT_EQ(w.value(i), at_center);
    }
  }
  const Field c = constant2(mesh, 2.0);
  EXPECT_LT((opening_map(c, rho).values() - c.values()).cwiseAbs().maxCoeff(), 1e-15);
}
