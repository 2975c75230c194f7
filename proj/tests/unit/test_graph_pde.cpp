#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "minsub/errors.hpp"
#include "minsub/graph_pde.hpp"

using namespace minsub;

namespace {

Grid periodic_line(int n, double drift = 0.0) {
  Grid g;
  g.axes.push_back(GridAxis{n, 0.0, 2 * kPi, true, drift});
  return g;
}

GraphField sample(const Grid& g, const std::function<double(double)>& u) {
  GraphField f;
  f.grid = g;
  for (int i = 0; i < g.size(); ++i) f.u.push_back(u(g.coords(i)[0]));
  return f;
}

}  // namespace

TEST(GraphCurvature, ConstantGraphOnAWarpedModel) {
  // A slice t = c has nH = n f'(c) / f(c).
  for (int n : {1, 2}) {
    const MetricFamily w = models::warped(ScalarFunction::cosh(), n);
    Grid g;
    for (int k = 0; k < n; ++k) g.axes.push_back(GridAxis{12, 0.0, 2 * kPi, true, 0.0});
    GraphField f;
    f.grid = g;
    f.u.assign(g.size(), 0.8);
    for (double h : graph_mean_curvature(w, f)) EXPECT_NEAR(std::abs(h), n * std::tanh(0.8), 1e-10);
  }
}

TEST(GraphCurvature, NormalOfATiltedLine) {
  Grid g;
  g.axes.push_back(GridAxis{11, -1.0, 1.0, false, 0.0});
  const GraphField f = sample(g, [](double x) { return x; });
  const Vec nu = graph_normal(models::flat(1), f, 5);
  EXPECT_NEAR(nu[0], 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(nu[1], -1.0 / std::sqrt(2.0), 1e-12);
}

TEST(GraphCurvature, ArcOfACircle) {
  const double R = 2.0;
  Grid g;
  g.axes.push_back(GridAxis{201, -1.0, 1.0, false, 0.0});
  const GraphField f = sample(g, [R](double x) { return std::sqrt(R * R - x * x); });
  const auto h = graph_mean_curvature(models::flat(1), f);
  for (int i = 1; i + 1 < g.size(); ++i) EXPECT_NEAR(std::abs(h[i]), 1.0 / R, 1e-4);
  EXPECT_EQ(h.front(), 0.0);
  EXPECT_EQ(h.back(), 0.0);
}

TEST(Specializations, WrongStructureIsRejected) {
  const MetricFamily k = models::killing({ScalarFunction::cosh()});
  ManufacturedField u;
  u.value = [](const Vec&) { return 0.0; };
  u.gradient = [](const Vec&) { return Vec(Vec::Zero(1)); };
  u.hessian = [](const Vec&) { return Mat(Mat::Zero(1, 1)); };
  try {
    specialization_crosscheck(k, periodic_line(16), u, Specialization::Warped);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StructureMismatch);
  }
}

TEST(Newton, CoshSettlesOnTheMinimalSlice) {
  const MetricFamily w = models::warped(ScalarFunction::cosh());
  const GraphField u0 = sample(periodic_line(32), [](double x) { return 0.3 + 0.1 * std::cos(x); });
  const SolveResult r = newton_solve(w, u0);
  ASSERT_TRUE(r.report.converged);
  EXPECT_EQ(r.report.verdict, SolverVerdict::ConstantSolution);
  EXPECT_LE(std::max(std::abs(r.report.u_min), std::abs(r.report.u_max)), 1e-8);
}

TEST(Newton, FlatAffineGraphWithDrift) {
  const GraphField u0 =
      sample(periodic_line(24, 0.5), [](double x) { return 0.5 * x + 0.05 * std::sin(2 * x); });
  NewtonOptions o;
  o.pin_node = 0;
  const SolveResult r = newton_solve(models::flat(1), u0, o);
  ASSERT_TRUE(r.report.converged);
  EXPECT_EQ(r.report.verdict, SolverVerdict::NonconstantSolution);
  for (int i = 0; i < r.field.grid.size(); ++i)
    EXPECT_NEAR(r.field.u[i], 0.5 * r.field.grid.coords(i)[0], 1e-8);
}

TEST(Dirichlet, ExpWarpingHasNoSolution) {
  Grid g;
  g.axes.push_back(GridAxis{41, 0.0, kPi, false, 0.0});
  const SolveResult r =
      dirichlet_solve(models::warped(ScalarFunction::exp()), g, 0.0, SignConstraint::AtLeast);
  EXPECT_EQ(r.report.verdict, SolverVerdict::NoConvergence);
  EXPECT_GE(r.report.final_infnorm_residual, 0.9);
}

TEST(GraphField, CsvRoundTripIsExact) {
  Grid g;
  g.axes.push_back(GridAxis{5, 0.0, 1.0, false, 0.0});
  g.axes.push_back(GridAxis{4, 0.0, 2 * kPi, true, 0.25});
  GraphField f;
  f.grid = g;
  f.family_id = "flat";
  for (int i = 0; i < g.size(); ++i) f.u.push_back(std::sin(1.0 / 3.0 + i));
  std::stringstream ss;
  f.write_csv(ss);
  const GraphField back = GraphField::read_csv(ss);
  ASSERT_EQ(back.grid.size(), g.size());
  EXPECT_EQ(back.grid.axes[1].periodic, true);
  EXPECT_EQ(back.grid.axes[1].drift, 0.25);
  EXPECT_EQ(back.u, f.u);
}
