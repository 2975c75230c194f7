#include <cmath>
#include <set>

#include "minsub/errors.hpp"
#include "minsub/metric.hpp"

namespace minsub {
namespace models {

namespace {

std::vector<Axis> periodic_axes(int n, double period) {
  if (!(period > 0.0) || !std::isfinite(period))
    fail(ErrorCode::InvalidParams, "period must be positive");
  return std::vector<Axis>(n, Axis{0.0, period, true});
}

MetricFamily warped_named(std::string name, const ScalarFunction& f, int n, Interval t,
                          double period, bool pole, double diameter) {
  if (n < 1 || n > 3) fail(ErrorCode::InvalidParams, "fiber_dim must be 1, 2 or 3");
  // Tabulated profiles are only defined between their knots.
  t.lo = std::max(t.lo, f.lower_bound());
  t.hi = std::min(t.hi, f.upper_bound());
  MetricFamily::Evaluators ev;
  ev.beta = [](double, const Vec&) { return 1.0; };
  ev.g = [f, n](double t, const Vec&) -> Mat {
    const double v = f.value(t);
    return Mat::Identity(n, n) * (v * v);
  };
  ev.dbeta_dt = [](double, const Vec&) { return 0.0; };
  ev.dg_dt = [f, n](double t, const Vec&) -> Mat {
    return Mat::Identity(n, n) * (2.0 * f.value(t) * f.d1(t));
  };
  ev.dbeta_dx = [](double, const Vec&, int) { return 0.0; };
  ev.dg_dx = [n](double, const Vec&, int) -> Mat { return Mat::Zero(n, n); };
  MetricStructure st;
  st.kind = MetricStructure::Kind::Warped;
  st.functions = {f};
  st.pole_at_lower = pole;
  st.diameter = diameter;
  return MetricFamily(std::move(name), t, periodic_axes(n, period), ev, DerivativeMode::Analytic,
                      st);
}

void require_positive(double k, const char* what) {
  if (!(k > 0.0) || !std::isfinite(k))
    fail(ErrorCode::InvalidParams, std::string(what) + " must be positive");
}

}  // namespace

MetricFamily euclidean_polar() {
  return warped_named("euclidean_polar", ScalarFunction::affine(1.0, 0.0), 1, {0.0, kInf},
                      2.0 * kPi, true, 0.0);
}

// Angular coefficient k^{-1/2} cosh^2(sqrt(k) r): curvature -k, and r = 0
// is a closed geodesic rather than a point.
MetricFamily hyperbolic_polar(double k) {
  require_positive(k, "k");
  return warped_named("hyperbolic_polar",
                      ScalarFunction::cosh(std::pow(k, -0.25), std::sqrt(k)), 1, {0.0, kInf},
                      2.0 * kPi, true, 0.0);
}

MetricFamily sphere_polar(double k) {
  require_positive(k, "k");
  const double rk = std::sqrt(k);
  return warped_named("sphere_polar", ScalarFunction::sin(std::pow(k, -0.25), rk), 1,
                      {0.0, kPi / rk}, 2.0 * kPi, true, kPi / rk);
}

MetricFamily warped(const ScalarFunction& f, int fiber_dim, Interval t, double period) {
  return warped_named("warped", f, fiber_dim, t, period, false, 0.0);
}

MetricFamily killing(const std::vector<ScalarFunction>& h, std::vector<Axis> axes) {
  const int n = static_cast<int>(h.size());
  if (n < 1 || n > 3) fail(ErrorCode::InvalidParams, "killing needs 1 to 3 factors");
  if (axes.empty()) axes = periodic_axes(n, 2.0 * kPi);
  if (static_cast<int>(axes.size()) != n)
    fail(ErrorCode::InvalidParams, "killing needs one axis per factor");
  auto hval = [h, n](const Vec& x) {
    double v = 1.0;
    for (int i = 0; i < n; ++i) v *= h[i].value(x[i]);
    return v;
  };
  MetricFamily::Evaluators ev;
  ev.beta = [hval](double, const Vec& x) {
    const double v = hval(x);
    return v * v;
  };
  ev.g = [n](double, const Vec&) -> Mat { return Mat::Identity(n, n); };
  ev.dbeta_dt = [](double, const Vec&) { return 0.0; };
  ev.dg_dt = [n](double, const Vec&) -> Mat { return Mat::Zero(n, n); };
  ev.dbeta_dx = [h, n](double, const Vec& x, int axis) {
    double v = 1.0, dv = 1.0;
    for (int i = 0; i < n; ++i) {
      v *= h[i].value(x[i]);
      dv *= (i == axis) ? h[i].d1(x[i]) : h[i].value(x[i]);
    }
    return 2.0 * v * dv;
  };
  ev.dg_dx = [n](double, const Vec&, int) -> Mat { return Mat::Zero(n, n); };
  MetricStructure st;
  st.kind = MetricStructure::Kind::Killing;
  st.functions = h;
  return MetricFamily("killing", {-kInf, kInf}, std::move(axes), ev, DerivativeMode::Analytic, st);
}

MetricFamily doubly_warped(const ScalarFunction& f1, const ScalarFunction& f2, Interval t,
                           double period) {
  t.lo = std::max({t.lo, f1.lower_bound(), f2.lower_bound()});
  t.hi = std::min({t.hi, f1.upper_bound(), f2.upper_bound()});
  MetricFamily::Evaluators ev;
  ev.beta = [](double, const Vec&) { return 1.0; };
  ev.g = [f1, f2](double t, const Vec&) -> Mat {
    Mat g = Mat::Zero(2, 2);
    g(0, 0) = f1.value(t) * f1.value(t);
    g(1, 1) = f2.value(t) * f2.value(t);
    return g;
  };
  ev.dbeta_dt = [](double, const Vec&) { return 0.0; };
  ev.dg_dt = [f1, f2](double t, const Vec&) -> Mat {
    Mat g = Mat::Zero(2, 2);
    g(0, 0) = 2.0 * f1.value(t) * f1.d1(t);
    g(1, 1) = 2.0 * f2.value(t) * f2.d1(t);
    return g;
  };
  ev.dbeta_dx = [](double, const Vec&, int) { return 0.0; };
  ev.dg_dx = [](double, const Vec&, int) -> Mat { return Mat::Zero(2, 2); };
  MetricStructure st;
  st.kind = MetricStructure::Kind::DoublyWarped;
  st.functions = {f1, f2};
  return MetricFamily("doubly_warped", t, periodic_axes(2, period), ev, DerivativeMode::Analytic,
                      st);
}

MetricFamily flat(int fiber_dim, std::vector<Axis> axes, Interval t) {
  if (fiber_dim < 1 || fiber_dim > 3) fail(ErrorCode::InvalidParams, "fiber_dim must be 1 to 3");
  if (axes.empty()) axes.assign(fiber_dim, Axis{-kInf, kInf, false});
  if (static_cast<int>(axes.size()) != fiber_dim)
    fail(ErrorCode::InvalidParams, "flat needs one axis per fiber dimension");
  const int n = fiber_dim;
  MetricFamily::Evaluators ev;
  ev.beta = [](double, const Vec&) { return 1.0; };
  ev.g = [n](double, const Vec&) -> Mat { return Mat::Identity(n, n); };
  ev.dbeta_dt = [](double, const Vec&) { return 0.0; };
  ev.dg_dt = [n](double, const Vec&) -> Mat { return Mat::Zero(n, n); };
  ev.dbeta_dx = [](double, const Vec&, int) { return 0.0; };
  ev.dg_dx = [n](double, const Vec&, int) -> Mat { return Mat::Zero(n, n); };
  MetricStructure st;
  st.kind = MetricStructure::Kind::Flat;
  return MetricFamily("flat", t, std::move(axes), ev, DerivativeMode::Analytic, st);
}

}  // namespace models

namespace {

void check_keys(const ModelSpec& spec, std::set<std::string> params,
                std::set<std::string> functions) {
  for (const auto& [key, value] : spec.params) {
    (void)value;
    if (!params.count(key))
      fail(ErrorCode::InvalidParams, "model " + spec.model + " has no parameter '" + key + "'");
  }
  for (const auto& [key, value] : spec.functions) {
    (void)value;
    if (!functions.count(key))
      fail(ErrorCode::InvalidParams, "model " + spec.model + " has no function '" + key + "'");
  }
}

double param(const ModelSpec& spec, const std::string& key, double fallback) {
  auto it = spec.params.find(key);
  return it == spec.params.end() ? fallback : it->second;
}

const ScalarFunction& one_function(const ModelSpec& spec, const std::string& key) {
  auto it = spec.functions.find(key);
  if (it == spec.functions.end() || it->second.size() != 1)
    fail(ErrorCode::InvalidParams, "model " + spec.model + " needs function '" + key + "'");
  return it->second.front();
}

int int_param(const ModelSpec& spec, const std::string& key, int fallback) {
  const double v = param(spec, key, fallback);
  if (v != std::floor(v)) fail(ErrorCode::InvalidParams, key + " must be an integer");
  return static_cast<int>(v);
}

}  // namespace

MetricFamily model_metric(const ModelSpec& spec) {
  const std::string& m = spec.model;
  if (m == "euclidean_polar") {
    check_keys(spec, {}, {});
    return models::euclidean_polar();
  }
  if (m == "hyperbolic_polar") {
    check_keys(spec, {"k"}, {});
    return models::hyperbolic_polar(param(spec, "k", 1.0));
  }
  if (m == "sphere_polar") {
    check_keys(spec, {"k"}, {});
    return models::sphere_polar(param(spec, "k", 1.0));
  }
  if (m == "warped") {
    check_keys(spec, {"fiber_dim", "t_min", "t_max", "period"}, {"f"});
    return models::warped(one_function(spec, "f"), int_param(spec, "fiber_dim", 1),
                          {param(spec, "t_min", -kInf), param(spec, "t_max", kInf)},
                          param(spec, "period", 2.0 * kPi));
  }
  if (m == "killing") {
    check_keys(spec, {"period"}, {"h"});
    auto it = spec.functions.find("h");
    if (it == spec.functions.end()) fail(ErrorCode::InvalidParams, "killing needs function 'h'");
    const double period = param(spec, "period", 2.0 * kPi);
    return models::killing(it->second,
                           std::vector<Axis>(it->second.size(), Axis{0.0, period, true}));
  }
  if (m == "doubly_warped") {
    check_keys(spec, {"t_min", "t_max", "period"}, {"f1", "f2"});
    return models::doubly_warped(one_function(spec, "f1"), one_function(spec, "f2"),
                                 {param(spec, "t_min", -kInf), param(spec, "t_max", kInf)},
                                 param(spec, "period", 2.0 * kPi));
  }
  if (m == "flat") {
    check_keys(spec, {"fiber_dim", "period"}, {});
    const int n = int_param(spec, "fiber_dim", 1);
    if (n < 1 || n > 3) fail(ErrorCode::InvalidParams, "fiber_dim must be 1 to 3");
    auto it = spec.params.find("period");
    if (it == spec.params.end()) return models::flat(n);
    if (!(it->second > 0.0)) fail(ErrorCode::InvalidParams, "period must be positive");
    return models::flat(n, std::vector<Axis>(n, Axis{0.0, it->second, true}));
  }
  fail(ErrorCode::UnknownModel, "unknown model '" + m + "'");
}

}  // namespace minsub
