#pragma once

#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "minsub/functions.hpp"
#include "minsub/types.hpp"

namespace minsub {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = 3.14159265358979323846;

struct Interval {
  double lo;
  double hi;
  bool contains(double t) const { return t > lo && t < hi; }
  double length() const { return hi - lo; }
};

// One fiber coordinate. Periodic axes have period hi - lo.
struct Axis {
  double lo;
  double hi;
  bool periodic;
};

enum class DerivativeMode { Analytic, FiniteDifference };

// Closed-form description carried by the model library, used by the
// specialisation checks and by experiments that know the geometry.
struct MetricStructure {
  enum class Kind { Generic, Flat, Warped, Killing, DoublyWarped };
  Kind kind = Kind::Generic;
  // Warped: {f}. DoublyWarped: {f1, f2}. Killing: one factor per fiber axis,
  // h(x) = prod_i h_i(x_i).
  std::vector<ScalarFunction> functions;
  // True when the lower end of the t-interval is a collapsed point (polar
  // charts); t-lines are then unit-speed geodesics leaving that point.
  bool pole_at_lower = false;
  // Chart diameter when known (sphere model), zero otherwise.
  double diameter = 0.0;
};

struct MetricValue {
  double beta;
  Mat g;
};

struct LieDerivative {
  double dbeta;
  Mat dg;
};

class MetricFamily {
 public:
  struct Evaluators {
    std::function<double(double, const Vec&)> beta;
    std::function<Mat(double, const Vec&)> g;
    // Required in analytic mode, ignored otherwise.
    std::function<double(double, const Vec&)> dbeta_dt;
    std::function<Mat(double, const Vec&)> dg_dt;
    // Optional analytic x-derivatives; finite differences otherwise.
    std::function<double(double, const Vec&, int)> dbeta_dx;
    std::function<Mat(double, const Vec&, int)> dg_dx;
  };

  MetricFamily(std::string name, Interval t_interval, std::vector<Axis> axes, Evaluators ev,
               DerivativeMode mode = DerivativeMode::Analytic, MetricStructure structure = {});

  const std::string& name() const { return name_; }
  int fiber_dim() const { return static_cast<int>(axes_.size()); }
  int dim() const { return fiber_dim() + 1; }
  const Interval& t_interval() const { return t_interval_; }
  const std::vector<Axis>& axes() const { return axes_; }
  DerivativeMode mode() const { return mode_; }
  const MetricStructure& structure() const { return structure_; }
  double collar() const { return collar_; }
  double fd_step_t() const { return h_t_; }
  double fd_step_x(int axis) const { return h_x_[axis]; }

  // Copies with a different derivative mode or collar width.
  MetricFamily with_mode(DerivativeMode mode) const;
  MetricFamily with_collar(double collar) const;

  bool contains(double t, const Vec& x) const;
  bool contains(const Vec& p) const;
  // Inside the domain but within the collar of a finite end of the t-interval.
  bool in_collar(const Vec& p) const;
  Vec wrap(const Vec& p) const;
  // a - b with periodic axes reduced to the nearest image.
  Vec difference(const Vec& a, const Vec& b) const;

  // Checked evaluation: DomainError outside the domain, DegenerateMetric
  // when beta <= 0 or g is not positive definite.
  MetricValue eval(double t, const Vec& x) const;
  LieDerivative lie_derivative_t(double t, const Vec& x) const;

  // Unchecked raw evaluators.
  double beta(double t, const Vec& x) const { return ev_.beta(t, x); }
  Mat g(double t, const Vec& x) const { return ev_.g(t, x); }
  double dbeta_dt(double t, const Vec& x) const;
  Mat dg_dt(double t, const Vec& x) const;
  double dbeta_dx(double t, const Vec& x, int axis) const;
  Mat dg_dx(double t, const Vec& x, int axis) const;

  // Full ambient metric at chart point p = (t, x).
  Mat ambient(const Vec& p) const;
  // d(ambient)/dp_k, k = 0 is t.
  Mat ambient_partial(const Vec& p, int k) const;

 private:
  std::string name_;
  Interval t_interval_;
  std::vector<Axis> axes_;
  Evaluators ev_;
  DerivativeMode mode_;
  MetricStructure structure_;
  double collar_ = 1e-3;
  double h_t_;
  std::vector<double> h_x_;
};

// Sampling box over (t, x_1, ..., x_n).
struct Region {
  std::vector<std::pair<double, double>> ranges;
};

struct MonotonicityFlags {
  bool non_shrinking = false;
  bool non_expanding = false;
  bool expanding = false;
  bool contracting = false;
  bool indefinite = false;
  std::vector<std::string> names() const;
};

struct Witness {
  std::string role;  // which extreme this point realises
  Vec point;
  double lambda_min;
  double lambda_max;
  double dbeta;
};

struct MonotonicityReport {
  Region region;
  int samples_per_axis = 0;
  MonotonicityFlags flags;
  std::vector<Witness> witnesses;
  double relative_tolerance = 0.0;
  double tolerance = 0.0;  // absolute threshold actually applied
  double lambda_min = 0.0, lambda_max = 0.0;
  double dbeta_min = 0.0, dbeta_max = 0.0;
};

// Generalised eigenvalues of dg relative to g, ascending.
Vec generalized_eigenvalues(const Mat& dg, const Mat& g);

MonotonicityReport classify_monotonicity(const MetricFamily& family, const Region& region,
                                         int samples_per_axis, double relative_tolerance = 1e-9);

MetricFamily product_extension(const MetricFamily& family);

// Conformal change e^{2 alpha} of the whole ambient metric. The result is
// again of the form beta dt^2 + g_t. grad may be empty (finite differences).
struct ConformalFactor {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
  double fd_step = 1e-6;
  Vec grad(const Vec& p) const;
};
MetricFamily conformal_family(const MetricFamily& family, const ConformalFactor& alpha);

namespace models {
MetricFamily euclidean_polar();
MetricFamily hyperbolic_polar(double k = 1.0);
MetricFamily sphere_polar(double k = 1.0);
// dt^2 + f(t)^2 (dx_1^2 + ... + dx_n^2) with periodic fiber axes [0, period).
MetricFamily warped(const ScalarFunction& f, int fiber_dim = 1, Interval t = {-kInf, kInf},
                    double period = 2.0 * kPi);
// h(x)^2 dt^2 + |dx|^2, h(x) = prod_i h_i(x_i); t is a Killing direction.
MetricFamily killing(const std::vector<ScalarFunction>& h, std::vector<Axis> axes = {});
// dt^2 + f1(t)^2 dx^2 + f2(t)^2 dy^2.
MetricFamily doubly_warped(const ScalarFunction& f1, const ScalarFunction& f2,
                           Interval t = {-kInf, kInf},
                           double period = 2.0 * kPi);
MetricFamily flat(int fiber_dim = 1, std::vector<Axis> axes = {}, Interval t = {-kInf, kInf});
}  // namespace models

struct ModelSpec {
  std::string model;
  std::map<std::string, double> params;
  std::map<std::string, std::vector<ScalarFunction>> functions;
};

// Name-based constructor used by scenario configs. UnknownModel or
// InvalidParams on bad input.
MetricFamily model_metric(const ModelSpec& spec);

}  // namespace minsub
