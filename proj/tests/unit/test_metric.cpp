#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "minsub/errors.hpp"
#include "minsub/metric.hpp"

using namespace minsub;

namespace {

Vec v1(double a) {
  Vec v(1);
  v << a;
  return v;
}

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST(ScalarFunction, DerivativesMatchCentralDifferences) {
  const std::vector<ScalarFunction> fs = {
      ScalarFunction::cosh(1.3, 0.7, 0.2), ScalarFunction::exp(2.0, -0.4),
      ScalarFunction::sin(0.3, 2.0, 0.5, 1.5), ScalarFunction::power(1.0, 3.0, 0.0, 1.0),
      ScalarFunction::sinh(0.5, 1.5), ScalarFunction::affine(-0.3, 2.0),
      ScalarFunction::sum({ScalarFunction::exp(), ScalarFunction::sin()})};
  const double h = 1e-5;
  for (const auto& f : fs)
    for (double t : {-0.8, 0.1, 0.9, 1.7}) {
      EXPECT_NEAR(f.d1(t), (f.value(t + h) - f.value(t - h)) / (2 * h), 1e-7) << f.describe();
      EXPECT_NEAR(f.d2(t), (f.d1(t + h) - f.d1(t - h)) / (2 * h), 1e-7) << f.describe();
    }
}

TEST(ScalarFunction, SplineReproducesAQuadratic) {
  std::vector<double> k, v;
  for (int i = 0; i <= 40; ++i) {
    k.push_back(i * 0.05);
    v.push_back(1.0 + k.back() * k.back());
  }
  const auto f = ScalarFunction::spline(k, v);
  EXPECT_NEAR(f.value(1.01), 1.0 + 1.01 * 1.01, 1e-5);
  EXPECT_NEAR(f.d1(1.01), 2.02, 1e-3);
}

TEST(MetricFamily, SphereComponents) {
  const MetricFamily s = models::sphere_polar(1.0);
  const MetricValue v = s.eval(0.8, v1(1.0));
  EXPECT_DOUBLE_EQ(v.beta, 1.0);
  EXPECT_NEAR(v.g(0, 0), std::sin(0.8) * std::sin(0.8), 1e-15);
}

TEST(MetricFamily, AnalyticAndFiniteDifferenceLieDerivativesAgree) {
  const std::vector<MetricFamily> fams = {
      models::hyperbolic_polar(1.0), models::warped(ScalarFunction::cosh(), 2),
      models::doubly_warped(ScalarFunction::cosh(), ScalarFunction::exp(1.0, 0.5)),
      models::killing({ScalarFunction::sin(0.3, 1.0, 0.0, 1.2)})};
  for (const auto& f : fams) {
    const MetricFamily fd = f.with_mode(DerivativeMode::FiniteDifference);
    Vec x = Vec::Constant(f.fiber_dim(), 0.7);
    const auto a = f.lie_derivative_t(0.9, x);
    const auto b = fd.lie_derivative_t(0.9, x);
    EXPECT_NEAR(a.dbeta, b.dbeta, 1e-6) << f.name();
    EXPECT_LT((a.dg - b.dg).cwiseAbs().maxCoeff(), 1e-6) << f.name();
  }
}

TEST(MetricFamily, EvaluationOutsideTheDomainFails) {
  const MetricFamily s = models::sphere_polar(1.0);
  try {
    s.eval(-0.1, v1(0.0));
    FAIL() << "expected DomainError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DomainError);
  }
}

TEST(GeneralizedEigenvalues, MatchEigenSolver) {
  Mat g(3, 3), dg(3, 3);
  g << 2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0;
  dg << 0.5, -0.1, 0.0, -0.1, -0.7, 0.4, 0.0, 0.4, 0.2;
  const Vec mine = generalized_eigenvalues(dg, g);
  const Eigen::Matrix3d A = dg, B = g;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::Matrix3d> es(A, B);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(mine[i], es.eigenvalues()[i], 1e-12);
}

TEST(Classification, HyperbolicIsExpanding) {
  Region r{{{0.2, 3.0}, {0.0, 6.0}}};
  const auto rep = classify_monotonicity(models::hyperbolic_polar(1.0), r, 9);
  EXPECT_TRUE(rep.flags.expanding);
  EXPECT_TRUE(rep.flags.non_shrinking);
  EXPECT_FALSE(rep.flags.non_expanding);
  EXPECT_FALSE(rep.flags.indefinite);
}

TEST(Classification, SphereBeyondTheEquatorIsIndefinite) {
  Region r{{{0.3, 2.8}, {0.0, 6.0}}};
  const auto rep = classify_monotonicity(models::sphere_polar(1.0), r, 9);
  EXPECT_TRUE(rep.flags.indefinite);
  EXPECT_FALSE(rep.flags.non_shrinking);
  EXPECT_FALSE(rep.flags.non_expanding);
  Region north{{{0.3, 1.4}, {0.0, 6.0}}};
  EXPECT_TRUE(classify_monotonicity(models::sphere_polar(1.0), north, 9).flags.expanding);
}

TEST(Classification, FlatIsBothNonShrinkingAndNonExpanding) {
  Region r{{{-1.0, 1.0}, {-1.0, 1.0}}};
  const auto rep = classify_monotonicity(models::flat(1), r, 5);
  EXPECT_TRUE(rep.flags.non_shrinking);
  EXPECT_TRUE(rep.flags.non_expanding);
  EXPECT_FALSE(rep.flags.expanding);
  EXPECT_FALSE(rep.flags.contracting);
}

TEST(Classification, KillingLapseIsNeutral) {
  Region r{{{-1.0, 1.0}, {0.0, 6.0}}};
  const auto rep = classify_monotonicity(models::killing({ScalarFunction::sin(0.3, 1.0, 0.0, 1.2)}), r, 7);
  EXPECT_TRUE(rep.flags.non_shrinking);
  EXPECT_TRUE(rep.flags.non_expanding);
}

TEST(ModelLibrary, NameLookup) {
  ModelSpec spec;
  spec.model = "hyperbolic_polar";
  spec.params["k"] = 4.0;
  const MetricFamily h = model_metric(spec);
  EXPECT_NEAR(h.eval(1.0, v1(0.0)).g(0, 0), 0.5 * std::pow(std::cosh(2.0), 2), 1e-12);
}

TEST(ModelLibrary, UnknownModelAndBadParameters) {
  ModelSpec spec;
  spec.model = "torus";
  try {
    model_metric(spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownModel);
  }
  spec.model = "sphere_polar";
  spec.params["radius"] = 2.0;
  try {
    model_metric(spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidParams);
  }
}

TEST(ProductExtension, AddsAFlatCircle) {
  const MetricFamily w = product_extension(models::warped(ScalarFunction::exp()));
  EXPECT_EQ(w.dim(), 3);
  const MetricValue v = w.eval(0.5, v2(1.0, 2.0));
  EXPECT_NEAR(v.g(0, 0), std::exp(1.0), 1e-12);
  EXPECT_DOUBLE_EQ(v.g(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(w.dg_dt(0.5, v2(1.0, 2.0))(1, 1), 0.0);
}

TEST(ConformalFamily, ScalesEveryComponent) {
  ConformalFactor a;
  a.value = [](const Vec& p) { return 0.2 * p[0] + 0.1 * p[1]; };
  const MetricFamily base = models::warped(ScalarFunction::cosh());
  const MetricFamily c = conformal_family(base, a);
  const double t = 0.4, x = 1.1;
  const double s = std::exp(2.0 * (0.2 * t + 0.1 * x));
  EXPECT_NEAR(c.eval(t, v1(x)).beta, s, 1e-12);
  EXPECT_NEAR(c.eval(t, v1(x)).g(0, 0), s * std::cosh(t) * std::cosh(t), 1e-12);
}
