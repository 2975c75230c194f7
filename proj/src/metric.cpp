#include "minsub/metric.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "minsub/errors.hpp"

namespace minsub {

namespace {

double default_step(double lo, double hi) {
  const double len = hi - lo;
  return std::isfinite(len) ? 1e-5 * len : 1e-5;
}

}  // namespace

MetricFamily::MetricFamily(std::string name, Interval t_interval, std::vector<Axis> axes,
                           Evaluators ev, DerivativeMode mode, MetricStructure structure)
    : name_(std::move(name)),
      t_interval_(t_interval),
      axes_(std::move(axes)),
      ev_(std::move(ev)),
      mode_(mode),
      structure_(std::move(structure)) {
  if (axes_.empty() || axes_.size() + 1 > static_cast<std::size_t>(kMaxDim))
    fail(ErrorCode::InvalidParams, "fiber dimension must be between 1 and 3");
  if (!(t_interval_.lo < t_interval_.hi)) fail(ErrorCode::InvalidParams, "empty t-interval");
  for (const auto& a : axes_)
    if (!(a.lo < a.hi) || (a.periodic && !std::isfinite(a.hi - a.lo)))
      fail(ErrorCode::InvalidParams, "invalid fiber axis bounds");
  if (!ev_.beta || !ev_.g) fail(ErrorCode::InvalidParams, "beta and g evaluators are required");
  if (mode_ == DerivativeMode::Analytic && (!ev_.dbeta_dt || !ev_.dg_dt))
    fail(ErrorCode::InvalidParams, "analytic mode needs dbeta_dt and dg_dt");
  h_t_ = default_step(t_interval_.lo, t_interval_.hi);
  for (const auto& a : axes_) h_x_.push_back(default_step(a.lo, a.hi));
}

MetricFamily MetricFamily::with_mode(DerivativeMode mode) const {
  MetricFamily copy = *this;
  if (mode == DerivativeMode::Analytic && (!ev_.dbeta_dt || !ev_.dg_dt))
    fail(ErrorCode::InvalidParams, "family has no analytic t-derivatives");
  copy.mode_ = mode;
  return copy;
}

MetricFamily MetricFamily::with_collar(double collar) const {
  if (!(collar >= 0.0)) fail(ErrorCode::InvalidParams, "collar must be non-negative");
  MetricFamily copy = *this;
  copy.collar_ = collar;
  return copy;
}

bool MetricFamily::contains(double t, const Vec& x) const {
  if (!std::isfinite(t) || !t_interval_.contains(t)) return false;
  if (x.size() != fiber_dim()) return false;
  for (int i = 0; i < fiber_dim(); ++i) {
    if (!std::isfinite(x[i])) return false;
    const Axis& a = axes_[i];
    if (!a.periodic && (x[i] < a.lo || x[i] > a.hi)) return false;
  }
  return true;
}

bool MetricFamily::contains(const Vec& p) const {
  if (p.size() != dim()) return false;
  return contains(p[0], p.tail(fiber_dim()));
}

bool MetricFamily::in_collar(const Vec& p) const {
  if (std::isfinite(t_interval_.lo) && p[0] - t_interval_.lo < collar_) return true;
  if (std::isfinite(t_interval_.hi) && t_interval_.hi - p[0] < collar_) return true;
  for (int i = 0; i < fiber_dim(); ++i) {
    const Axis& a = axes_[i];
    if (a.periodic) continue;
    if (std::isfinite(a.lo) && p[i + 1] - a.lo < collar_) return true;
    if (std::isfinite(a.hi) && a.hi - p[i + 1] < collar_) return true;
  }
  return false;
}

Vec MetricFamily::wrap(const Vec& p) const {
  Vec q = p;
  for (int i = 0; i < fiber_dim(); ++i) {
    const Axis& a = axes_[i];
    if (!a.periodic) continue;
    const double period = a.hi - a.lo;
    double r = std::fmod(q[i + 1] - a.lo, period);
    if (r < 0) r += period;
    if (r >= period) r = 0.0;
    q[i + 1] = a.lo + r;
  }
  return q;
}

Vec MetricFamily::difference(const Vec& a, const Vec& b) const {
  Vec d = a - b;
  for (int i = 0; i < fiber_dim(); ++i) {
    const Axis& ax = axes_[i];
    if (!ax.periodic) continue;
    const double period = ax.hi - ax.lo;
    d[i + 1] -= period * std::round(d[i + 1] / period);
  }
  return d;
}

MetricValue MetricFamily::eval(double t, const Vec& x) const {
  if (!contains(t, x))
    fail(ErrorCode::DomainError, "point " + format_point((Vec(dim()) << t, x).finished()) +
                                     " outside the domain of " + name_);
  MetricValue v{ev_.beta(t, x), ev_.g(t, x)};
  if (!(v.beta > 0.0) || !std::isfinite(v.beta))
    fail(ErrorCode::DegenerateMetric, "beta not positive at t=" + format_double(t));
  if (v.g.rows() != fiber_dim() || v.g.cols() != fiber_dim() || !v.g.allFinite())
    fail(ErrorCode::DegenerateMetric, "g has wrong size or non-finite entries");
  const double scale = v.g.cwiseAbs().maxCoeff();
  if ((v.g - v.g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1.0))
    fail(ErrorCode::DegenerateMetric, "g not symmetric");
  Eigen::LLT<Mat> llt(v.g);
  if (llt.info() != Eigen::Success)
    fail(ErrorCode::DegenerateMetric, "g not positive definite at t=" + format_double(t));
  return v;
}

LieDerivative MetricFamily::lie_derivative_t(double t, const Vec& x) const {
  if (!contains(t, x))
    fail(ErrorCode::DomainError, "point outside the domain of " + name_);
  if (mode_ == DerivativeMode::FiniteDifference &&
      !(t_interval_.contains(t - h_t_) && t_interval_.contains(t + h_t_)))
    fail(ErrorCode::DomainError, "finite-difference stencil at t=" + format_double(t) +
                                     " leaves the t-interval");
  return {dbeta_dt(t, x), dg_dt(t, x)};
}

double MetricFamily::dbeta_dt(double t, const Vec& x) const {
  if (mode_ == DerivativeMode::Analytic) return ev_.dbeta_dt(t, x);
  return (ev_.beta(t + h_t_, x) - ev_.beta(t - h_t_, x)) / (2.0 * h_t_);
}

Mat MetricFamily::dg_dt(double t, const Vec& x) const {
  if (mode_ == DerivativeMode::Analytic) return ev_.dg_dt(t, x);
  return (ev_.g(t + h_t_, x) - ev_.g(t - h_t_, x)) / (2.0 * h_t_);
}

double MetricFamily::dbeta_dx(double t, const Vec& x, int axis) const {
  if (mode_ == DerivativeMode::Analytic && ev_.dbeta_dx) return ev_.dbeta_dx(t, x, axis);
  const double h = h_x_[axis];
  Vec xp = x, xm = x;
  xp[axis] += h;
  xm[axis] -= h;
  return (ev_.beta(t, xp) - ev_.beta(t, xm)) / (2.0 * h);
}

Mat MetricFamily::dg_dx(double t, const Vec& x, int axis) const {
  if (mode_ == DerivativeMode::Analytic && ev_.dg_dx) return ev_.dg_dx(t, x, axis);
  const double h = h_x_[axis];
  Vec xp = x, xm = x;
  xp[axis] += h;
  xm[axis] -= h;
  return (ev_.g(t, xp) - ev_.g(t, xm)) / (2.0 * h);
}

Mat MetricFamily::ambient(const Vec& p) const {
  const int n = fiber_dim();
  const Vec x = p.tail(n);
  Mat G = Mat::Zero(n + 1, n + 1);
  G(0, 0) = ev_.beta(p[0], x);
  G.bottomRightCorner(n, n) = ev_.g(p[0], x);
  return G;
}

Mat MetricFamily::ambient_partial(const Vec& p, int k) const {
  const int n = fiber_dim();
  const Vec x = p.tail(n);
  Mat D = Mat::Zero(n + 1, n + 1);
  if (k == 0) {
    D(0, 0) = dbeta_dt(p[0], x);
    D.bottomRightCorner(n, n) = dg_dt(p[0], x);
  } else {
    D(0, 0) = dbeta_dx(p[0], x, k - 1);
    D.bottomRightCorner(n, n) = dg_dx(p[0], x, k - 1);
  }
  return D;
}

std::vector<std::string> MonotonicityFlags::names() const {
  std::vector<std::string> out;
  if (non_shrinking) out.push_back("non_shrinking");
  if (non_expanding) out.push_back("non_expanding");
  if (expanding) out.push_back("expanding");
  if (contracting) out.push_back("contracting");
  if (indefinite) out.push_back("indefinite");
  return out;
}

Vec generalized_eigenvalues(const Mat& dg, const Mat& g) {
  if (g.rows() == 1) {
    Vec ev(1);
    ev[0] = dg(0, 0) / g(0, 0);
    return ev;
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> solver(dg, g, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    fail(ErrorCode::DegenerateMetric, "generalized eigenproblem failed");
  return solver.eigenvalues();
}

MonotonicityReport classify_monotonicity(const MetricFamily& family, const Region& region,
                                         int samples_per_axis, double relative_tolerance) {
  const int d = family.dim();
  if (static_cast<int>(region.ranges.size()) != d)
    fail(ErrorCode::InvalidParams, "region needs one range per ambient coordinate");
  if (samples_per_axis < 2) fail(ErrorCode::InvalidParams, "need at least 2 samples per axis");
  if (!(relative_tolerance >= 0.0)) fail(ErrorCode::InvalidParams, "tolerance must be >= 0");

  struct Sample {
    Vec p;
    double lmin, lmax, dbeta;
  };
  std::vector<Sample> samples;
  std::vector<int> idx(d, 0);
  for (;;) {
    Vec p(d);
    for (int k = 0; k < d; ++k) {
      const auto [lo, hi] = region.ranges[k];
      p[k] = lo + (hi - lo) * idx[k] / double(samples_per_axis - 1);
    }
    const Vec x = p.tail(d - 1);
    const MetricValue mv = family.eval(p[0], x);
    const LieDerivative ld = family.lie_derivative_t(p[0], x);
    const Vec ev = generalized_eigenvalues(ld.dg, mv.g);
    samples.push_back({p, ev.minCoeff(), ev.maxCoeff(), ld.dbeta});
    int k = d - 1;
    while (k >= 0 && ++idx[k] == samples_per_axis) idx[k--] = 0;
    if (k < 0) break;
  }

  MonotonicityReport rep;
  rep.region = region;
  rep.samples_per_axis = samples_per_axis;
  rep.relative_tolerance = relative_tolerance;
  std::size_t i_lmin = 0, i_lmax = 0, i_bmin = 0, i_bmax = 0;
  double scale = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (s.lmin < samples[i_lmin].lmin) i_lmin = i;
    if (s.lmax > samples[i_lmax].lmax) i_lmax = i;
    if (s.dbeta < samples[i_bmin].dbeta) i_bmin = i;
    if (s.dbeta > samples[i_bmax].dbeta) i_bmax = i;
    scale = std::max({scale, std::abs(s.lmin), std::abs(s.lmax), std::abs(s.dbeta)});
  }
  // The unit floor keeps round-off from finite-difference derivatives of a
  // t-independent metric from being read as a sign.
  rep.tolerance = relative_tolerance * std::max(scale, 1.0);
  rep.lambda_min = samples[i_lmin].lmin;
  rep.lambda_max = samples[i_lmax].lmax;
  rep.dbeta_min = samples[i_bmin].dbeta;
  rep.dbeta_max = samples[i_bmax].dbeta;

  const double tol = rep.tolerance;
  MonotonicityFlags& f = rep.flags;
  f.non_shrinking = rep.lambda_min >= -tol && rep.dbeta_min >= -tol;
  f.non_expanding = rep.lambda_max <= tol && rep.dbeta_max <= tol;
  f.expanding = f.non_shrinking && rep.lambda_min > tol;
  f.contracting = f.non_expanding && rep.lambda_max < -tol;
  f.indefinite = !f.non_shrinking && !f.non_expanding;

  auto witness = [&](const char* role, std::size_t i) {
    rep.witnesses.push_back(
        {role, samples[i].p, samples[i].lmin, samples[i].lmax, samples[i].dbeta});
  };
  witness("lambda_min", i_lmin);
  witness("lambda_max", i_lmax);
  witness("dbeta_min", i_bmin);
  witness("dbeta_max", i_bmax);
  return rep;
}

MetricFamily product_extension(const MetricFamily& base) {
  const int n = base.fiber_dim();
  if (n + 2 > kMaxDim) fail(ErrorCode::InvalidParams, "extension would exceed dimension 4");
  std::vector<Axis> axes = base.axes();
  axes.push_back({0.0, 2.0 * kPi, true});

  auto enlarge = [n](const Mat& m, double corner) {
    Mat out = Mat::Zero(n + 1, n + 1);
    out.topLeftCorner(n, n) = m;
    out(n, n) = corner;
    return out;
  };
  MetricFamily::Evaluators ev;
  ev.beta = [base, n](double t, const Vec& x) { return base.beta(t, x.head(n)); };
  ev.g = [base, n, enlarge](double t, const Vec& x) { return enlarge(base.g(t, x.head(n)), 1.0); };
  ev.dbeta_dt = [base, n](double t, const Vec& x) { return base.dbeta_dt(t, x.head(n)); };
  ev.dg_dt = [base, n, enlarge](double t, const Vec& x) {
    return enlarge(base.dg_dt(t, x.head(n)), 0.0);
  };
  ev.dbeta_dx = [base, n](double t, const Vec& x, int axis) {
    return axis < n ? base.dbeta_dx(t, x.head(n), axis) : 0.0;
  };
  ev.dg_dx = [base, n, enlarge](double t, const Vec& x, int axis) {
    return axis < n ? enlarge(base.dg_dx(t, x.head(n), axis), 0.0) : Mat(Mat::Zero(n + 1, n + 1));
  };
  MetricStructure st;
  st.pole_at_lower = base.structure().pole_at_lower;
  // Derivatives of the base are already resolved (analytic or differenced)
  // by the base family itself.
  return MetricFamily(base.name() + "_x_S1", base.t_interval(), axes, ev,
                      DerivativeMode::Analytic, st)
      .with_collar(base.collar());
}

Vec ConformalFactor::grad(const Vec& p) const {
  if (gradient) return gradient(p);
  Vec gr(p.size());
  for (int k = 0; k < p.size(); ++k) {
    Vec a = p, b = p;
    a[k] += fd_step;
    b[k] -= fd_step;
    gr[k] = (value(a) - value(b)) / (2.0 * fd_step);
  }
  return gr;
}

MetricFamily conformal_family(const MetricFamily& base, const ConformalFactor& alpha) {
  if (!alpha.value) fail(ErrorCode::InvalidParams, "conformal factor needs a value function");
  const int n = base.fiber_dim();
  auto point = [n](double t, const Vec& x) {
    Vec p(n + 1);
    p << t, x;
    return p;
  };
  MetricFamily::Evaluators ev;
  ev.beta = [=](double t, const Vec& x) {
    return std::exp(2.0 * alpha.value(point(t, x))) * base.beta(t, x);
  };
  ev.g = [=](double t, const Vec& x) -> Mat {
    return std::exp(2.0 * alpha.value(point(t, x))) * base.g(t, x);
  };
  ev.dbeta_dt = [=](double t, const Vec& x) {
    const Vec p = point(t, x);
    const double e = std::exp(2.0 * alpha.value(p));
    return e * (base.dbeta_dt(t, x) + 2.0 * alpha.grad(p)[0] * base.beta(t, x));
  };
  ev.dg_dt = [=](double t, const Vec& x) -> Mat {
    const Vec p = point(t, x);
    const double e = std::exp(2.0 * alpha.value(p));
    return e * (base.dg_dt(t, x) + 2.0 * alpha.grad(p)[0] * base.g(t, x));
  };
  ev.dbeta_dx = [=](double t, const Vec& x, int axis) {
    const Vec p = point(t, x);
    const double e = std::exp(2.0 * alpha.value(p));
    return e * (base.dbeta_dx(t, x, axis) + 2.0 * alpha.grad(p)[axis + 1] * base.beta(t, x));
  };
  ev.dg_dx = [=](double t, const Vec& x, int axis) -> Mat {
    const Vec p = point(t, x);
    const double e = std::exp(2.0 * alpha.value(p));
    return e * (base.dg_dx(t, x, axis) + 2.0 * alpha.grad(p)[axis + 1] * base.g(t, x));
  };
  return MetricFamily("conformal(" + base.name() + ")", base.t_interval(), base.axes(), ev,
                      DerivativeMode::Analytic)
      .with_collar(base.collar());
}

}  // namespace minsub
