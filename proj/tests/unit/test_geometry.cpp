#include <gtest/gtest.h>

#include <cmath>

#include "minsub/geometry.hpp"

using namespace minsub;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// Spherical law of cosines in polar coordinates.
double sphere_distance(const Vec& p, const Vec& q) {
  return std::acos(std::cos(p[0]) * std::cos(q[0]) +
                   std::sin(p[0]) * std::sin(q[0]) * std::cos(p[1] - q[1]));
}

// dt^2 + cosh(t)^2 dx^2 is the hyperbolic plane in Fermi coordinates
// along the geodesic t = 0.
double hyperbolic_distance(const Vec& p, const Vec& q) {
  return std::acosh(std::cosh(p[0]) * std::cosh(q[0]) * std::cosh(p[1] - q[1]) -
                    std::sinh(p[0]) * std::sinh(q[0]));
}

}  // namespace

TEST(Christoffel, FlatVanishes) {
  const auto c = christoffel(models::flat(2), Vec::Zero(3));
  for (double x : c.data) EXPECT_EQ(x, 0.0);
}

TEST(Christoffel, WarpedSymbols) {
  // dt^2 + cosh(t)^2 dx^2: Gamma^t_xx = -f f', Gamma^x_tx = f'/f.
  const auto c = christoffel(models::warped(ScalarFunction::cosh()), v2(0.6, 1.0));
  EXPECT_NEAR(c(0, 1, 1), -std::cosh(0.6) * std::sinh(0.6), 1e-9);
  EXPECT_NEAR(c(1, 0, 1), std::tanh(0.6), 1e-9);
  EXPECT_NEAR(c(1, 1, 0), std::tanh(0.6), 1e-9);
}

TEST(Geodesics, ShootingKeepsUnitSpeed) {
  const MetricFamily h = models::hyperbolic_polar(1.0);
  const auto path = geodesic_shoot(h, v2(1.0, 0.0), v2(0.3, 1.0), 1.5, 128);
  for (std::size_t i = 0; i < path.points.size(); ++i) {
    const Vec& v = path.velocities[i];
    EXPECT_NEAR(std::sqrt(v.dot(h.ambient(path.points[i]) * v)), 1.0, 1e-8);
  }
}

TEST(Geodesics, SphereDistanceMatchesLawOfCosines) {
  const MetricFamily s = models::sphere_polar(1.0);
  const Vec p = v2(0.9, 0.2), q = v2(1.7, 1.4);
  EXPECT_NEAR(geodesic_distance(s, p, q), sphere_distance(p, q), 1e-6);
}

TEST(Geodesics, HyperbolicDistanceMatchesLawOfCosines) {
  const MetricFamily h = models::hyperbolic_polar(1.0);
  const Vec p = v2(1.2, 0.3), q = v2(0.8, 1.3);
  EXPECT_NEAR(geodesic_distance(h, p, q), hyperbolic_distance(p, q), 1e-6);
}

TEST(Geodesics, ExpMapEndpointIsAtTheShotDistance) {
  const MetricFamily s = models::sphere_polar(1.0);
  const Vec p = v2(1.0, 0.5);
  Vec v = v2(0.4, 0.7);
  v *= 0.8 / std::sqrt(v.dot(s.ambient(p) * v));
  EXPECT_NEAR(sphere_distance(p, exp_map(s, p, v)), 0.8, 1e-8);
}

TEST(NormalGrowth, HyperbolicRaysIncrease) {
  std::vector<double> radii;
  for (int i = 1; i <= 12; ++i) radii.push_back(0.25 * i);
  const auto g = normal_growth_probe(models::hyperbolic_polar(1.0), v2(0.0, 1.0), v2(0.0, 1.0), radii, true);
  EXPECT_TRUE(g.strictly_increasing);
  EXPECT_DOUBLE_EQ(g.monotone_until, 3.0);
}

TEST(NormalGrowth, SphereRaysTurnAtTheEquator) {
  std::vector<double> radii;
  for (int i = 1; i <= 28; ++i) radii.push_back(0.1 * i);
  const auto g = normal_growth_probe(models::sphere_polar(1.0), v2(0.0, 1.0), v2(0.0, 1.0), radii, true);
  EXPECT_FALSE(g.strictly_increasing);
  EXPECT_NEAR(g.monotone_until, 0.5 * kPi, 0.11);
}

TEST(OrthonormalFrame, IsOrthonormalInTheGivenMetric) {
  Mat G(3, 3);
  G << 2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 0.5;
  Vec first(3);
  first << 1.0, 1.0, 0.0;
  const auto f = orthonormal_frame(G, first);
  ASSERT_EQ(f.size(), 3u);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(f[i].dot(G * f[j]), i == j ? 1.0 : 0.0, 1e-12);
  EXPECT_NEAR(f[0][0], f[0][1], 1e-12);
}
