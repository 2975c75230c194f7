#include <gtest/gtest.h>

#include <cmath>

#include "minsub/errors.hpp"
#include "minsub/flow.hpp"
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

DiscreteImmersion wavy_latitude(double level, double amp, int n, int dim = 2) {
  std::vector<Vec> v;
  for (int i = 0; i < n; ++i) {
    const double x = 2 * kPi * i / n;
    Vec p = Vec::Zero(dim);
    p[0] = level + amp * std::cos(x) + 0.5 * amp * std::sin(3 * x);
    p[1] = x;
    if (dim > 2) p[2] = 1.0 + 0.2 * std::sin(2 * x);
    v.push_back(p);
  }
  return DiscreteImmersion::closed_curve(v);
}

FlowPolicy sobolev() {
  FlowPolicy p;
  p.preconditioner = Preconditioner::Sobolev;
  return p;
}

}  // namespace

TEST(FlowStep, EquatorIsAFixedPoint) {
  const MetricFamily s = models::sphere_polar(1.0);
  const auto eq = wavy_latitude(0.5 * kPi, 0.0, 64);
  const auto next = flow_step(eq, s, 1e-2);
  double moved = 0.0;
  for (int i = 0; i < eq.size(); ++i) moved = std::max(moved, (next.vertex(i) - eq.vertex(i)).norm());
  EXPECT_LE(moved, 1e-6);
}

TEST(FlowStep, PlaneCircleShrinksAtUnitRate) {
  // R' = -1/R: one step of size dt takes R = 1 to about 1 - dt.
  const auto c = circle(1.0, 256);
  const double dt = 1e-3;
  const StepResult r = descent_step(c, models::flat(1), dt, Preconditioner::L2, 1.0, 0.0);
  ASSERT_TRUE(r.accepted);
  ASSERT_DOUBLE_EQ(r.dt_used, dt);
  double mean = 0.0;
  for (const Vec& p : r.immersion.vertices()) mean += p.norm();
  mean /= r.immersion.size();
  EXPECT_NEAR(1.0 - mean, dt, 2e-6);
}

TEST(FlowStep, ZeroStepIsTheIdentity) {
  const auto c = circle(1.0, 32);
  const auto next = flow_step(c, models::flat(1), 0.0);
  EXPECT_EQ(next.vertices(), c.vertices());
}

TEST(Redistribute, NeverLengthens) {
  std::vector<Vec> v;
  for (int i = 0; i < 40; ++i) {
    const double s = std::pow(i / 40.0, 2.0) * 2 * kPi;
    v.push_back(v2(std::cos(s), std::sin(s)));
  }
  const auto c = DiscreteImmersion::closed_curve(v);
  const MetricFamily f = models::flat(1);
  const auto r = redistribute(c, f, 1.5);
  EXPECT_NE(r.vertices(), c.vertices());
  EXPECT_LE(volume(r, f), volume(c, f));
}

TEST(RunFlow, LengthsNeverIncrease) {
  const MetricFamily w = models::warped(ScalarFunction::cosh());
  const FlowTrace tr = run_flow(wavy_latitude(0.7, 0.3, 64), w, sobolev());
  for (std::size_t i = 1; i < tr.lengths.size(); ++i)
    EXPECT_LE(tr.lengths[i], tr.lengths[i - 1] * (1.0 + 1e-10));
}

TEST(RunFlow, WarpedCoshSettlesOnTheMinimum) {
  // f' vanishes only at t = 0, where the slice is a closed geodesic.
  const MetricFamily w = models::warped(ScalarFunction::cosh());
  const FlowTrace tr = run_flow(wavy_latitude(0.7, 0.3, 64), w, sobolev());
  ASSERT_EQ(tr.verdict, FlowVerdict::ConvergedMinimal);
  EXPECT_NEAR(tr.tau_min.back(), 0.0, 1e-3);
  EXPECT_NEAR(tr.tau_max.back(), 0.0, 1e-3);
  EXPECT_LE(tr.residual.back(), 1e-6);
}

TEST(RunFlow, FlatCylinderConvergesToALevel) {
  const MetricFamily cyl = models::flat(1, {Axis{0.0, 2 * kPi, true}});
  const FlowTrace tr = run_flow(wavy_latitude(0.4, 0.3, 64), cyl, sobolev());
  ASSERT_EQ(tr.verdict, FlowVerdict::ConvergedMinimal);
  EXPECT_LE(tr.tau_max.back() - tr.tau_min.back(), 1e-3);
  EXPECT_LE(tr.theta_max.back(), 1e-2);
}

TEST(RunFlow, HyperbolicCurveCollapses) {
  SeedSpec s;
  s.center = v2(1.5, 0.4);
  s.level = 0.4;
  s.amplitude = 0.04;
  s.modes = {{2, 1.0, 0.0}, {3, -0.5, 1.0}};
  const MetricFamily h = models::hyperbolic_polar(1.0);
  const FlowTrace tr = run_flow(make_seed(h, s), h, sobolev());
  EXPECT_EQ(tr.verdict, FlowVerdict::Collapsed);
}

TEST(RunFlow, ExpandingProductHasNoMinimalWindingCurve) {
  const MetricFamily w = product_extension(models::warped(ScalarFunction::exp()));
  const FlowTrace tr = run_flow(wavy_latitude(0.5, 0.2, 64, 3), w, sobolev());
  EXPECT_EQ(tr.verdict, FlowVerdict::Collapsed);
}

TEST(RunFlow, SphereLatitudePastTheEquatorMovesAway) {
  // Latitudes beyond the equator get shorter towards the far pole.
  const MetricFamily s = models::sphere_polar(1.0);
  const FlowTrace tr = run_flow(wavy_latitude(0.5 * kPi + 0.3, 0.0, 64), s, sobolev());
  EXPECT_NE(tr.verdict, FlowVerdict::ConvergedMinimal);
  EXPECT_GT(tr.tau_min.back(), 0.5 * kPi + 0.3);
}

TEST(MaxPrinciple, ConstantTauHasNoStrictMaximum) {
  const auto eq = wavy_latitude(0.5 * kPi, 0.0, 32);
  EXPECT_FALSE(max_principle_probe(eq).strict);
}

TEST(MaxPrinciple, BumpIsDetected) {
  auto c = wavy_latitude(1.0, 0.0, 32);
  std::vector<Vec> v = c.vertices();
  v[5][0] += 0.1;
  const auto rep = max_principle_probe(c.with_vertices(v));
  EXPECT_TRUE(rep.strict);
  EXPECT_EQ(rep.vertex, 5);
  EXPECT_NEAR(rep.margin, 0.1, 1e-12);
}

TEST(Seeds, PoleSeedIsARadialGraph) {
  SeedSpec s;
  s.center = v2(0.0, 0.0);
  s.pole = true;
  s.level = 1.0;
  s.amplitude = 0.1;
  s.modes = {{2, 1.0, 0.0}};
  const auto c = make_seed(models::sphere_polar(1.0), s);
  EXPECT_NEAR(c.vertex(0)[0], 1.1, 1e-12);
}

TEST(BallThreshold, FlatBallsHoldNoMinimalCurve) {
  Ball b;
  b.center = v2(0.0, 0.0);
  BallThresholdOptions o;
  o.seeds_per_radius = 2;
  o.levels = 2;
  o.flow.preconditioner = Preconditioner::Sobolev;
  const auto r = ball_threshold_experiment(models::flat(1), b, {0.5, 1.0}, o);
  EXPECT_FALSE(r.found);
  for (const auto& oc : r.outcomes) EXPECT_FALSE(oc.success);
}
