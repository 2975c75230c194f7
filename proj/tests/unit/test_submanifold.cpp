#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "minsub/errors.hpp"
#include "minsub/immersion.hpp"
#include "minsub/submanifold.hpp"

using namespace minsub;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

DiscreteImmersion circle(double r, int n) {
  std::vector<Vec> v;
  for (int i = 0; i < n; ++i) v.push_back(v2(r * std::cos(2 * kPi * i / n), r * std::sin(2 * kPi * i / n)));
  return DiscreteImmersion::closed_curve(v);
}

DiscreteImmersion latitude(double t, int n) {
  std::vector<Vec> v;
  for (int i = 0; i < n; ++i) v.push_back(v2(t, 2 * kPi * i / n));
  return DiscreteImmersion::closed_curve(v);
}

}  // namespace

TEST(Volume, PolygonPerimeter) {
  const int n = 50;
  EXPECT_NEAR(volume(circle(2.0, n), models::flat(1)), 2 * n * 2.0 * std::sin(kPi / n), 1e-12);
}

TEST(Volume, LatitudeLengthOnTheSphere) {
  EXPECT_NEAR(volume(latitude(0.7, 400), models::sphere_polar(1.0)), 2 * kPi * std::sin(0.7), 1e-4);
}

TEST(Volume, PatchAreaOfAFlatSquare) {
  std::vector<Vec> v;
  for (int j = 0; j < 5; ++j)
    for (int i = 0; i < 5; ++i) {
      Vec p(3);
      p << 0.0, 0.25 * i, 0.25 * j;
      v.push_back(p);
    }
  const auto patch = DiscreteImmersion::grid_patch(v, {5, 5, false, false});
  EXPECT_NEAR(volume(patch, models::flat(2)), 1.0, 1e-12);
}

TEST(MeanCurvature, CircleInThePlane) {
  const auto c = circle(2.0, 256);
  const auto H = mean_curvature(c, models::flat(1));
  for (int i = 0; i < c.size(); ++i) {
    EXPECT_NEAR(H[i].norm(), 0.5, 1e-4);
    // Points towards the center.
    EXPECT_LT(H[i].dot(c.vertex(i)), 0.0);
  }
}

TEST(MeanCurvature, LatitudeOnTheSphere) {
  const MetricFamily s = models::sphere_polar(1.0);
  EXPECT_LT(max_mean_curvature(latitude(0.5 * kPi, 128), s), 1e-12);
  EXPECT_NEAR(max_mean_curvature(latitude(0.6, 512), s), 1.0 / std::tan(0.6), 1e-3);
}

TEST(TauTheta, LatitudeSitsInALevelSet) {
  const auto tt = tau_theta(latitude(1.1, 64), models::sphere_polar(1.0));
  for (std::size_t i = 0; i < tt.tau.size(); ++i) {
    EXPECT_DOUBLE_EQ(tt.tau[i], 1.1);
    EXPECT_NEAR(tt.theta[i], 0.0, 1e-12);
  }
}

TEST(TauTheta, MeridianSegmentIsAlongTheT) {
  std::vector<Vec> v;
  for (int i = 0; i < 20; ++i) v.push_back(v2(0.5 + 0.05 * i, 1.0));
  const auto tt = tau_theta(DiscreteImmersion::open_curve(v), models::sphere_polar(1.0));
  for (double th : tt.theta) EXPECT_NEAR(th, 0.5 * kPi, 1e-6);
}

TEST(Laplacian, FormulaMatchesTheDiscreteOperatorOnAGeodesicArc) {
  // Great circle through (t, x) = (pi/2 - 0.5, 0) tilted out of the
  // equator: tau varies along it, H = 0.
  const MetricFamily s = models::sphere_polar(1.0);
  const int n = 400;
  const double tilt = 0.5;
  std::vector<Vec> v;
  for (int i = 0; i < n; ++i) {
    const double a = -0.6 + 1.2 * i / (n - 1);
    const double z = std::sin(tilt) * std::sin(a);
    const double x = std::cos(a), y = std::cos(tilt) * std::sin(a);
    v.push_back(v2(std::acos(z), std::atan2(y, x)));
  }
  const auto arc = DiscreteImmersion::open_curve(v);
  EXPECT_LT(max_mean_curvature(arc, s), 1e-4);
  const auto lt = laplacian_tau(arc, s);
  const auto lb = discrete_laplace_beltrami(arc, s, tau_theta(arc, s).tau);
  double err = 0.0, scale = 0.0;
  for (int i = 1; i < n - 1; ++i) {
    err = std::max(err, std::abs(lt.laplacian[i] - lb[i]));
    scale = std::max(scale, std::abs(lb[i]));
  }
  EXPECT_LT(err / scale, 1e-3);
}

TEST(Eta, WarpedSliceExpansionRate) {
  // det g = f^{2n}: eta = 2 n f'/f.
  const MetricFamily w = models::warped(ScalarFunction::cosh(), 2);
  Vec p(3);
  p << 0.4, 1.0, 2.0;
  EXPECT_NEAR(eta_at(w, p), 4.0 * std::tanh(0.4), 1e-12);
}

TEST(Conformal, ConstantFactorRescalesCurvature) {
  ConformalFactor a;
  a.value = [](const Vec&) { return 0.4; };
  a.gradient = [](const Vec&) { return Vec(Vec::Zero(2)); };
  const auto r = conformal_mc_check(circle(1.0, 128), models::flat(1), a);
  for (double x : r) EXPECT_LT(x, 1e-10);
}

TEST(SliceShapeOperator, LatitudeDefectIsSmall) {
  EXPECT_LT(slice_shape_operator_defect(latitude(0.8, 256), models::sphere_polar(1.0)), 1e-3);
}

TEST(Immersion, TextRoundTripIsExact) {
  const auto c = circle(1.0 / 3.0, 17);
  std::stringstream ss;
  c.write(ss);
  const auto back = DiscreteImmersion::read(ss);
  ASSERT_EQ(back.size(), c.size());
  EXPECT_EQ(back.topology(), Topology::ClosedCurve);
  for (int i = 0; i < c.size(); ++i) EXPECT_EQ(back.vertex(i), c.vertex(i));
}

TEST(Immersion, BadHeaderIsAnIoError) {
  std::stringstream ss("curve 2 3\n0 0\n");
  try {
    DiscreteImmersion::read(ss);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
}
