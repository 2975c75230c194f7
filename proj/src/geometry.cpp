#include "minsub/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace minsub {

Christoffel christoffel(const MetricFamily& family, const Vec& p_in) {
  const int d = family.dim();
  const Vec p = family.wrap(p_in);
  const Mat G = family.ambient(p);
  Eigen::LLT<Mat> llt(G);
  if (llt.info() != Eigen::Success)
    fail(ErrorCode::DegenerateMetric, "metric not invertible at " + format_point(p));
  const Mat Ginv = llt.solve(Mat::Identity(d, d));
  std::array<Mat, kMaxDim> D;
  for (int k = 0; k < d; ++k) D[k] = family.ambient_partial(p, k);

  Christoffel c;
  c.dim = d;
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      Vec lower(d);
      for (int l = 0; l < d; ++l) lower[l] = 0.5 * (D[i](l, j) + D[j](l, i) - D[l](i, j));
      const Vec upper = Ginv * lower;
      for (int k = 0; k < d; ++k) c(k, i, j) = c(k, j, i) = upper[k];
    }
  return c;
}

namespace {

Vec acceleration(const MetricFamily& family, const Vec& x, const Vec& v) {
  const Christoffel c = christoffel(family, x);
  const int d = family.dim();
  Vec a = Vec::Zero(d);
  for (int k = 0; k < d; ++k) {
    double s = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) s += c(k, i, j) * v[i] * v[j];
    a[k] = -s;
  }
  return a;
}

double norm_at(const MetricFamily& family, const Vec& p, const Vec& v) {
  return std::sqrt(std::max(0.0, v.dot(family.ambient(family.wrap(p)) * v)));
}

void require_inside(const MetricFamily& family, const Vec& x, const Vec& last) {
  if (!family.contains(family.wrap(x)))
    throw LeftDomainError("LeftDomain: geodesic left the chart of " + family.name() +
                              " after " + format_point(last),
                          last);
}

}  // namespace

GeodesicPath geodesic_shoot(const MetricFamily& family, const Vec& start, const Vec& velocity,
                            double length, int steps) {
  const int d = family.dim();
  if (start.size() != d || velocity.size() != d)
    fail(ErrorCode::InvalidParams, "start and velocity must have the ambient dimension");
  if (steps < 16) fail(ErrorCode::InvalidParams, "geodesic_shoot needs at least 16 steps");
  if (!(length > 0.0) || !std::isfinite(length))
    fail(ErrorCode::InvalidParams, "geodesic length must be positive");
  if (!family.contains(family.wrap(start)))
    fail(ErrorCode::DomainError, "geodesic start " + format_point(start) + " outside the chart");
  const double speed = norm_at(family, start, velocity);
  if (!(speed > 0.0)) fail(ErrorCode::InvalidParams, "zero initial velocity");

  GeodesicPath path;
  Vec x = start;
  Vec v = velocity / speed;
  const double h = length / steps;
  path.points.push_back(family.wrap(x));
  path.velocities.push_back(v);
  path.arc_params.push_back(0.0);
  double energy = 0.0;
  double prev_sq = 1.0;
  for (int s = 0; s < steps; ++s) {
    const Vec last = family.wrap(x);
    const Vec k1x = v;
    const Vec k1v = acceleration(family, x, v);
    Vec x2 = x + 0.5 * h * k1x;
    require_inside(family, x2, last);
    const Vec k2x = v + 0.5 * h * k1v;
    const Vec k2v = acceleration(family, x2, k2x);
    Vec x3 = x + 0.5 * h * k2x;
    require_inside(family, x3, last);
    const Vec k3x = v + 0.5 * h * k2v;
    const Vec k3v = acceleration(family, x3, k3x);
    Vec x4 = x + h * k3x;
    require_inside(family, x4, last);
    const Vec k4x = v + h * k3v;
    const Vec k4v = acceleration(family, x4, k4x);
    x += (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    v += (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    require_inside(family, x, last);
    const double sq = std::pow(norm_at(family, x, v), 2);
    energy += 0.25 * h * (prev_sq + sq);
    prev_sq = sq;
    path.points.push_back(family.wrap(x));
    path.velocities.push_back(v);
    path.arc_params.push_back(h * (s + 1));
  }
  path.arc_params.back() = length;
  path.energy = energy;
  return path;
}

Vec exp_map(const MetricFamily& family, const Vec& start, const Vec& v, int steps) {
  const double len = norm_at(family, start, v);
  if (len == 0.0) return family.wrap(start);
  return geodesic_shoot(family, start, v, len, steps).points.back();
}

std::vector<Vec> orthonormal_frame(const Mat& G, const Vec& first) {
  const int d = static_cast<int>(G.rows());
  std::vector<Vec> out;
  std::vector<Vec> candidates;
  if (first.size() == d) candidates.push_back(first);
  for (int i = 0; i < d; ++i) candidates.push_back(Vec::Unit(d, i));
  for (const Vec& c : candidates) {
    if (static_cast<int>(out.size()) == d) break;
    const double n0 = std::sqrt(c.dot(G * c));
    Vec w = c;
    for (const Vec& e : out) w -= e.dot(G * w) * e;
    const double n = std::sqrt(std::max(0.0, w.dot(G * w)));
    if (n > 1e-8 * n0) out.push_back(w / n);
  }
  return out;
}

double geodesic_distance(const MetricFamily& family, const Vec& p, const Vec& q,
                         const DistanceOptions& opts) {
  const int d = family.dim();
  if (p.size() != d || q.size() != d) fail(ErrorCode::InvalidParams, "points need ambient dimension");
  const Vec delta = family.difference(q, p);
  const Mat G = family.ambient(family.wrap(p));
  const double m = std::sqrt(delta.dot(G * delta));
  if (m == 0.0) return 0.0;
  const std::vector<Vec> frame = orthonormal_frame(G, delta);

  auto residual = [&](const Vec& v) { return family.difference(exp_map(family, p, v, opts.steps), q); };
  auto safe_residual = [&](const Vec& v, Vec& r) {
    try {
      r = residual(v);
      return r.allFinite();
    } catch (const Error&) {
      return false;
    }
  };

  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < opts.starts; ++k) {
    const double a = 2.0 * kPi * k / opts.starts;
    const Vec partner = frame[1 + (k % (d - 1))];
    Vec v = m * (std::cos(a) * frame[0] + std::sin(a) * partner);
    Vec r;
    if (!safe_residual(v, r)) continue;
    bool converged = r.cwiseAbs().maxCoeff() <= opts.tolerance;
    for (int it = 0; it < opts.max_iterations && !converged; ++it) {
      Mat J(d, d);
      bool ok = true;
      for (int j = 0; j < d && ok; ++j) {
        const double h = 1e-7 * std::max(1.0, v.norm());
        Vec vp = v;
        vp[j] += h;
        Vec rp;
        ok = safe_residual(vp, rp);
        if (ok) J.col(j) = family.difference(rp, r) / h;
      }
      if (!ok) break;
      const Vec step = J.colPivHouseholderQr().solve(-r);
      if (!step.allFinite()) break;
      double lambda = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 30; ++ls, lambda *= 0.5) {
        const Vec trial = v + lambda * step;
        Vec rt;
        if (safe_residual(trial, rt) && rt.norm() < r.norm()) {
          v = trial;
          r = rt;
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      converged = r.cwiseAbs().maxCoeff() <= opts.tolerance;
    }
    if (converged) best = std::min(best, std::sqrt(v.dot(G * v)));
  }
  if (!std::isfinite(best))
    fail(ErrorCode::NoConvergence, "shooting failed from " + format_point(p) + " to " +
                                       format_point(q) + " after " +
                                       std::to_string(opts.starts) + " starts");
  return best;
}

GrowthProbe normal_growth_probe(const MetricFamily& family, const Vec& center,
                                const Vec& direction, const std::vector<double>& radii, bool pole,
                                double delta) {
  const int d = family.dim();
  if (center.size() != d || direction.size() != d)
    fail(ErrorCode::InvalidParams, "center and direction need the ambient dimension");
  if (radii.empty()) fail(ErrorCode::InvalidParams, "no radii given");
  for (std::size_t i = 0; i < radii.size(); ++i)
    if (!(radii[i] > 0.0) || (i > 0 && !(radii[i] > radii[i - 1])))
      fail(ErrorCode::InvalidParams, "radii must be positive and increasing");

  GrowthProbe out;
  out.radii = radii;
  for (double r : radii) {
    Vec p_plus, p_minus, p_mid;
    if (pole) {
      // Rays are t-lines leaving the collapsed end; they start on the collar.
      const double t0 = family.t_interval().lo + family.collar();
      if (!(r > family.collar())) fail(ErrorCode::InvalidParams, "radius inside the collar");
      Vec u = direction;
      u[0] = 0.0;
      if (u.norm() == 0.0) fail(ErrorCode::InvalidParams, "pole probe needs a fiber direction");
      u /= u.norm();
      auto ray = [&](double s) {
        Vec start = center;
        start[0] = t0;
        start += s * u;
        Vec vel = Vec::Zero(d);
        vel[0] = 1.0;
        return geodesic_shoot(family, start, vel, r - family.collar(), 64).points.back();
      };
      p_plus = ray(delta);
      p_minus = ray(-delta);
      p_mid = ray(0.0);
    } else {
      const Mat G = family.ambient(family.wrap(center));
      const std::vector<Vec> frame = orthonormal_frame(G, direction);
      const Vec& v = frame[0];
      const Vec& u = frame[1];
      p_plus = exp_map(family, center, r * (std::cos(delta) * v + std::sin(delta) * u));
      p_minus = exp_map(family, center, r * (std::cos(delta) * v - std::sin(delta) * u));
      p_mid = exp_map(family, center, r * v);
    }
    const Vec D = family.difference(p_plus, p_minus) / (2.0 * delta);
    const double h = D.dot(family.ambient(p_mid) * D);
    if (!std::isfinite(h) || h < 1e-10 * r * r)
      fail(ErrorCode::RadiusTooLarge, "angular differencing degenerate at r=" + format_double(r));
    out.h.push_back(h);
  }
  std::size_t last = 0;
  while (last + 1 < out.h.size() && out.h[last + 1] > out.h[last]) ++last;
  out.strictly_increasing = last + 1 == out.h.size() && out.h.size() > 1;
  // With a single sample nothing can be compared; report no growth.
  out.monotone_until = out.h.size() > 1 && last > 0 ? radii[last] : 0.0;
  return out;
}

}  // namespace minsub
