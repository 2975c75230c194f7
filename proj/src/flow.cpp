#include "minsub/flow.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

#include "minsub/errors.hpp"
#include "minsub/geometry.hpp"
#include "minsub/submanifold.hpp"

namespace minsub {

const char* verdict_name(FlowVerdict v) {
  switch (v) {
    case FlowVerdict::ConvergedMinimal: return "converged_minimal";
    case FlowVerdict::Collapsed: return "collapsed";
    case FlowVerdict::LeftDomain: return "left_domain";
    case FlowVerdict::BudgetExhausted: return "budget_exhausted";
  }
  return "?";
}

double ball_distance(const MetricFamily& family, const Ball& ball, const Vec& p) {
  if (ball.pole) return p[0] - family.t_interval().lo;
  return geodesic_distance(family, ball.center, p);
}

namespace {

bool admissible(const MetricFamily& family, const std::vector<Vec>& verts) {
  for (const Vec& v : verts)
    if (!family.contains(family.wrap(v))) return false;
  return true;
}

// Solve (M + sigma K) d = -grad on a curve, coordinatewise, with fixed
// boundary vertices.
std::vector<Vec> sobolev_direction(const DiscreteImmersion& imm, const MetricFamily& family,
                                   const VolumeGradient& vg, double weight) {
  const int n = imm.size(), d = family.dim();
  const InducedMetric im = induced_metric(imm, family);
  const bool closed = imm.topology() == Topology::ClosedCurve;
  const double scale = vg.volume / (closed ? 2.0 * kPi : kPi);
  const double sigma = weight * scale * scale;
  std::vector<int> unknown(n, -1);
  int m = 0;
  for (int i = 0; i < n; ++i)
    if (!imm.is_boundary()[i]) unknown[i] = m++;
  std::vector<Eigen::Triplet<double>> trip;
  for (int i = 0; i < n; ++i)
    if (unknown[i] >= 0) trip.emplace_back(unknown[i], unknown[i], vg.dual[i]);
  const auto edges = imm.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [a, b] = edges[e];
    const double w = sigma / im.edge_lengths[e];
    const int ua = unknown[a], ub = unknown[b];
    if (ua >= 0) trip.emplace_back(ua, ua, w);
    if (ub >= 0) trip.emplace_back(ub, ub, w);
    if (ua >= 0 && ub >= 0) {
      trip.emplace_back(ua, ub, -w);
      trip.emplace_back(ub, ua, -w);
    }
  }
  Eigen::SparseMatrix<double> P(m, m);
  P.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(P);
  if (solver.info() != Eigen::Success)
    fail(ErrorCode::DegenerateElement, "Sobolev operator not factorisable");
  Eigen::MatrixXd rhs(m, d);
  for (int i = 0; i < n; ++i)
    if (unknown[i] >= 0) rhs.row(unknown[i]) = -vg.gradient[i].transpose();
  const Eigen::MatrixXd sol = solver.solve(rhs);
  std::vector<Vec> dir(n, Vec::Zero(d));
  for (int i = 0; i < n; ++i)
    if (unknown[i] >= 0) dir[i] = sol.row(unknown[i]).transpose();
  return dir;
}

}  // namespace

DiscreteImmersion redistribute(const DiscreteImmersion& imm, const MetricFamily& family,
                               double ratio) {
  if (imm.topology() == Topology::GridPatch) return imm;
  const InducedMetric im = induced_metric(imm, family);
  const auto [mn, mx] = std::minmax_element(im.edge_lengths.begin(), im.edge_lengths.end());
  if (*mx <= ratio * *mn) return imm;
  const int n = imm.size();
  const bool closed = imm.topology() == Topology::ClosedCurve;
  std::vector<double> cum(im.edge_lengths.size() + 1, 0.0);
  for (std::size_t e = 0; e < im.edge_lengths.size(); ++e) cum[e + 1] = cum[e] + im.edge_lengths[e];
  const double total = cum.back();
  const auto edges = imm.edges();
  std::vector<Vec> out(n);
  out[0] = imm.vertex(0);
  if (!closed) out[n - 1] = imm.vertex(n - 1);
  const int last = closed ? n : n - 1;
  std::size_t e = 0;
  for (int j = 1; j < last; ++j) {
    const double s = total * j / (closed ? n : n - 1);
    while (e + 1 < edges.size() && cum[e + 1] < s) ++e;
    const double lambda = std::clamp((s - cum[e]) / im.edge_lengths[e], 0.0, 1.0);
    const Vec& a = imm.vertex(edges[e].first);
    out[j] = a + lambda * family.difference(imm.vertex(edges[e].second), a);
  }
  try {
    DiscreteImmersion res = imm.with_vertices(std::move(out));
    if (volume(res, family) <= im.total) return res;
  } catch (const Error&) {
  }
  return imm;
}

StepResult descent_step(const DiscreteImmersion& imm, const MetricFamily& family, double dt,
                        Preconditioner pre, double sobolev_weight, double redistribute_ratio) {
  if (!(dt >= 0.0) || !std::isfinite(dt)) fail(ErrorCode::InvalidParams, "dt must be >= 0");
  StepResult res;
  res.immersion = imm;
  const VolumeGradient vg = volume_gradient(imm, family);
  res.length_before = res.length_after = vg.volume;
  const int n = imm.size();
  // Only the normal part of the gradient moves the vertices; spacing is
  // handled by redistribution.
  const std::vector<Vec> l2 = mean_curvature(imm, family);
  std::vector<Vec> dir = l2;
  auto slope_of = [&](const std::vector<Vec>& d) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += vg.gradient[i].dot(d[i]);
    return s;
  };
  if (pre == Preconditioner::Sobolev && imm.topology() != Topology::GridPatch) {
    VolumeGradient normal = vg;
    for (int i = 0; i < n; ++i) {
      if (imm.is_boundary()[i]) continue;
      const Mat G = family.ambient(family.wrap(imm.vertex(i)));
      normal.gradient[i] = -G * dir[i] * (imm.intrinsic_dim() * vg.dual[i]);
    }
    std::vector<Vec> sob = sobolev_direction(imm, family, normal, sobolev_weight);
    for (int i = 0; i < n; ++i)
      if (!imm.is_boundary()[i]) sob[i] = normal_part(imm, family, i, sob[i]);
    if (slope_of(sob) < 0.0) dir = std::move(sob);
  }
  double slope = slope_of(dir);
  if (!(slope < 0.0)) {
    res.stationary = true;
    return res;
  }
  if (dt == 0.0) return res;
  // Length change summed edge by edge: near a critical point the decrease
  // is far below the rounding noise of the total.
  const InducedMetric before = induced_metric(imm, family);
  auto change = [&](const DiscreteImmersion& cand) {
    const InducedMetric after = induced_metric(cand, family);
    const auto& a = imm.intrinsic_dim() == 1 ? after.edge_lengths : after.cell_areas;
    const auto& b = imm.intrinsic_dim() == 1 ? before.edge_lengths : before.cell_areas;
    double d = 0.0;
    for (std::size_t e = 0; e < a.size(); ++e) d += a[e] - b[e];
    return d;
  };
  // No vertex moves further than a quarter of the curve's extent, so a
  // shrinking curve cannot jump over its limit point in one step.
  const double extent = imm.intrinsic_dim() == 1 ? vg.volume / kPi : std::sqrt(vg.volume);
  auto search = [&](const std::vector<Vec>& d, double s) {
    double reach = 0.0;
    for (int i = 0; i < n; ++i) {
      if (imm.is_boundary()[i]) continue;
      const Mat G = family.ambient(family.wrap(imm.vertex(i)));
      reach = std::max(reach, std::sqrt(d[i].dot(G * d[i])));
    }
    double alpha = reach > 0.0 ? std::min(dt, 0.25 * extent / reach) : dt;
    for (int k = 0; k < 60; ++k, alpha *= 0.5) {
      std::vector<Vec> trial(n);
      for (int i = 0; i < n; ++i) trial[i] = imm.vertex(i) + alpha * d[i];
      if (!admissible(family, trial)) continue;
      try {
        DiscreteImmersion cand = imm.with_vertices(std::move(trial));
        const double dl = change(cand);
        if (dl <= 0.5 * alpha * s && dl < 0.0) {
          res.accepted = true;
          res.dt_used = alpha;
          res.length_after = volume(cand, family);
          res.immersion = std::move(cand);
          return;
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateElement) throw;
      }
    }
  };
  search(dir, slope);
  if (!res.accepted && l2 != dir) search(l2, slope_of(l2));
  if (res.accepted && redistribute_ratio > 0.0) {
    DiscreteImmersion r = redistribute(res.immersion, family, redistribute_ratio);
    if (r.vertices() != res.immersion.vertices()) {
      res.redistributed = true;
      res.length_after = volume(r, family);
      res.immersion = std::move(r);
    }
  }
  return res;
}

DiscreteImmersion flow_step(const DiscreteImmersion& imm, const MetricFamily& family, double dt,
                            double collapse_length) {
  if (!(dt >= 0.0)) fail(ErrorCode::InvalidParams, "dt must be >= 0");
  if (dt == 0.0) return imm;
  const StepResult r = descent_step(imm, family, dt);
  if (r.stationary) return imm;
  // A critical curve admits no resolvable decrease; it stays put.
  if (!r.accepted && max_mean_curvature(imm, family) <= 1e-8) return imm;
  if (!r.accepted) fail(ErrorCode::LeftDomain, "no admissible step keeps the curve in the chart");
  if (r.length_after < collapse_length)
    fail(ErrorCode::CollapseDetected, "length " + format_double(r.length_after) +
                                          " below collapse threshold");
  return r.immersion;
}

void FlowTrace::write_csv(std::ostream& os) const {
  os << "time,length,tau_min,tau_max,theta_max,residual\n";
  char buf[256];
  for (std::size_t i = 0; i < times.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", times[i], lengths[i],
                  tau_min[i], tau_max[i], theta_max[i], residual[i]);
    os << buf;
  }
}

namespace {

DiscreteImmersion perturbed_seed(const DiscreteImmersion& seed, const MetricFamily& family,
                                 std::mt19937_64& rng) {
  const int d = family.dim();
  // Shift by 5% of the seed's extent, measured in the ambient metric so
  // that angular chart coordinates do not inflate it.
  const double vol = volume(seed, family);
  const double extent = seed.intrinsic_dim() == 1 ? vol / kPi : std::sqrt(vol);
  const Mat G0 = family.ambient(family.wrap(seed.vertex(0)));
  for (int attempt = 0; attempt < 20; ++attempt) {
    Vec shift(d);
    for (int k = 0; k < d; ++k) shift[k] = normal_draw(rng);
    shift *= 0.05 * extent / std::sqrt(shift.dot(G0 * shift));
    std::vector<Vec> verts = seed.vertices();
    const int n = seed.size();
    for (int i = 0; i < n; ++i) {
      if (seed.is_boundary()[i]) continue;
      const double w = seed.topology() == Topology::OpenCurve ? std::sin(kPi * i / (n - 1)) : 1.0;
      verts[i] += w * shift;
    }
    bool ok = true;
    for (const Vec& v : verts) {
      const Vec q = family.wrap(v);
      if (!family.contains(q) || family.in_collar(q)) ok = false;
    }
    if (ok) return seed.with_vertices(std::move(verts));
  }
  return seed;
}

struct Stats {
  double length, tau_min, tau_max, theta_max, residual;
};

Stats measure(const DiscreteImmersion& imm, const MetricFamily& family) {
  Stats s;
  s.length = volume(imm, family);
  const TauTheta tt = tau_theta(imm, family);
  s.tau_min = *std::min_element(tt.tau.begin(), tt.tau.end());
  s.tau_max = *std::max_element(tt.tau.begin(), tt.tau.end());
  s.theta_max = *std::max_element(tt.theta.begin(), tt.theta.end());
  s.residual = max_mean_curvature(imm, family);
  return s;
}

// Newton iterations on normal offsets of a curve for the discrete equation
// H = 0. Used once descent stalls next to a critical point, where the
// remaining length decrease is below rounding. Returns nothing if the
// residual does not drop below `tol` without lengthening the curve.
std::optional<DiscreteImmersion> polish(const DiscreteImmersion& start, const MetricFamily& family,
                                        double tol) {
  if (start.topology() == Topology::GridPatch) return std::nullopt;
  const int n = start.size(), d = family.dim(), k = d - 1;
  const bool closed = start.topology() == Topology::ClosedCurve;
  const double len0 = volume(start, family);
  auto residual = [&](const DiscreteImmersion& imm, const std::vector<std::vector<Vec>>& frames) {
    const std::vector<Vec> H = mean_curvature(imm, family);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n * k);
    for (int i = 0; i < n; ++i) {
      if (imm.is_boundary()[i]) continue;
      const Mat G = family.ambient(family.wrap(imm.vertex(i)));
      for (int a = 0; a < k; ++a) r[i * k + a] = H[i].dot(G * frames[i][a]);
    }
    return r;
  };
  // Columns of vertices three or more apart never touch the same rows.
  std::vector<int> colour(n, -1);
  int colours = 0;
  for (int i = 0; i < n; ++i) {
    std::vector<char> used(8, 0);
    for (int o = -2; o <= 2; ++o) {
      int j = i + o;
      if (closed) j = (j + n) % n;
      if (o == 0 || j < 0 || j >= n || colour[j] < 0) continue;
      used[colour[j]] = 1;
    }
    int c = 0;
    while (used[c]) ++c;
    colour[i] = c;
    colours = std::max(colours, c + 1);
  }
  DiscreteImmersion cur = start;
  try {
    for (int it = 0; it < 12; ++it) {
      std::vector<std::vector<Vec>> frames(n);
      double mean_edge = volume(cur, family) / std::max(1, n - (closed ? 0 : 1));
      for (int i = 0; i < n; ++i)
        if (!cur.is_boundary()[i]) frames[i] = normal_frame(cur, family, i);
      const Eigen::VectorXd r0 = residual(cur, frames);
      const double norm0 = r0.lpNorm<Eigen::Infinity>();
      if (norm0 <= 0.5 * tol) break;
      const double h = 1.5e-8 * mean_edge;
      std::vector<Eigen::Triplet<double>> trip;
      for (int c = 0; c < colours; ++c)
        for (int a = 0; a < k; ++a) {
          std::vector<Vec> v = cur.vertices();
          bool any = false;
          for (int j = 0; j < n; ++j)
            if (colour[j] == c && !cur.is_boundary()[j]) {
              v[j] += h * frames[j][a];
              any = true;
            }
          if (!any) continue;
          const Eigen::VectorXd r1 = residual(cur.with_vertices(v), frames);
          for (int j = 0; j < n; ++j) {
            if (colour[j] != c || cur.is_boundary()[j]) continue;
            for (int o = -1; o <= 1; ++o) {
              int i = j + o;
              if (closed) i = (i + n) % n;
              if (i < 0 || i >= n || cur.is_boundary()[i]) continue;
              for (int b = 0; b < k; ++b)
                trip.emplace_back(i * k + b, j * k + a, (r1[i * k + b] - r0[i * k + b]) / h);
            }
          }
        }
      for (int i = 0; i < n; ++i)
        if (cur.is_boundary()[i])
          for (int a = 0; a < k; ++a) trip.emplace_back(i * k + a, i * k + a, 1.0);
      Eigen::SparseMatrix<double> J(n * k, n * k);
      J.setFromTriplets(trip.begin(), trip.end());
      Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
      lu.compute(J);
      if (lu.info() != Eigen::Success) return std::nullopt;
      const Eigen::VectorXd step = lu.solve(-r0);
      if (lu.info() != Eigen::Success || !step.allFinite()) return std::nullopt;
      bool moved = false;
      for (double lam = 1.0; lam > 1e-3 && !moved; lam *= 0.5) {
        std::vector<Vec> v = cur.vertices();
        for (int i = 0; i < n; ++i)
          if (!cur.is_boundary()[i])
            for (int a = 0; a < k; ++a) v[i] += lam * step[i * k + a] * frames[i][a];
        if (!admissible(family, v)) continue;
        DiscreteImmersion cand = cur.with_vertices(std::move(v));
        if (residual(cand, frames).lpNorm<Eigen::Infinity>() < norm0) {
          cur = std::move(cand);
          moved = true;
        }
      }
      if (!moved) break;
    }
  } catch (const Error&) {
    return std::nullopt;
  }
  if (max_mean_curvature(cur, family) > tol) return std::nullopt;
  if (!(volume(cur, family) <= len0 * (1.0 + 1e-10))) return std::nullopt;
  return cur;
}

bool outside_ball(const MetricFamily& family, const Ball& ball, const DiscreteImmersion& imm) {
  const int n = imm.size();
  const int stride = ball.pole ? 1 : std::max(1, n / 8);
  for (int i = 0; i < n; i += stride) {
    double dist;
    try {
      dist = ball_distance(family, ball, imm.vertex(i));
    } catch (const Error&) {
      return true;
    }
    if (dist >= ball.radius) return true;
  }
  return false;
}

// Fraction of the initial length below which a curve counts as shrinking.
constexpr double kShrunk = 0.5;

// Closed curve whose chart displacements sum to zero, i.e. one that does
// not wind around a periodic axis.
bool closes_in_chart(const DiscreteImmersion& imm, const MetricFamily& family) {
  if (imm.topology() != Topology::ClosedCurve) return false;
  Vec sum = Vec::Zero(family.dim());
  const int n = imm.size();
  for (int i = 0; i < n; ++i) sum += family.difference(imm.vertex((i + 1) % n), imm.vertex(i));
  return sum.norm() < 1e-6;
}

}  // namespace

FlowTrace run_flow(const DiscreteImmersion& seed, const MetricFamily& family,
                   const FlowPolicy& policy) {
  if (policy.max_steps < 1) fail(ErrorCode::InvalidParams, "max_steps must be >= 1");
  if (!(policy.residual_tolerance > 0.0)) fail(ErrorCode::InvalidParams, "residual tolerance must be > 0");
  if (policy.record_every < 1) fail(ErrorCode::InvalidParams, "record_every must be >= 1");
  if (seed.ambient_dim() != family.dim())
    fail(ErrorCode::InvalidParams, "seed and metric dimensions differ");
  for (const Vec& v : seed.vertices())
    if (!family.contains(family.wrap(v)))
      fail(ErrorCode::DomainError, "seed vertex " + format_point(v) + " outside the domain");

  std::mt19937_64 rng(policy.seed);
  FlowTrace tr;
  DiscreteImmersion cur = seed;
  double time = 0.0;
  auto record = [&](const Stats& s) {
    tr.times.push_back(time);
    tr.lengths.push_back(s.length);
    tr.tau_min.push_back(s.tau_min);
    tr.tau_max.push_back(s.tau_max);
    tr.theta_max.push_back(s.theta_max);
    tr.residual.push_back(s.residual);
  };
  Stats st = measure(cur, family);
  tr.initial_length = st.length;
  double L0 = st.length;
  record(st);
  double min_edge = kInf;
  for (double l : induced_metric(cur, family).edge_lengths) min_edge = std::min(min_edge, l);
  if (cur.topology() == Topology::GridPatch) min_edge = std::sqrt(st.length / cur.size());
  double dt = policy.dt0 > 0.0 ? policy.dt0 : 0.5 * min_edge * min_edge;
  const double dt_start = dt;

  bool done = false;
  bool last_recorded = true;
  if (st.residual <= policy.residual_tolerance) {
    tr.verdict = FlowVerdict::ConvergedMinimal;
    done = true;
  }
  const bool contractible = closes_in_chart(seed, family);
  int step = 0;
  while (!done && step < policy.max_steps) {
    ++step;
    // Smoothing the coordinates of a loop shrinking to a point damps its
    // radial motion more than its eccentricity and folds it into a needle;
    // plain descent keeps it round.
    const Preconditioner pre = contractible && st.length < kShrunk * L0 ? Preconditioner::L2
                                                                         : policy.preconditioner;
    const StepResult r = descent_step(cur, family, dt, pre, policy.sobolev_weight,
                                      policy.redistribute_ratio);
    if (r.stationary) {
      st = measure(cur, family);
      tr.verdict = st.residual <= policy.residual_tolerance ? FlowVerdict::ConvergedMinimal
                                                            : FlowVerdict::BudgetExhausted;
      tr.exit_reason = tr.verdict == FlowVerdict::ConvergedMinimal ? "" : "stalled";
      done = true;
      break;
    }
    if (!r.accepted) {
      if (auto p = polish(cur, family, policy.residual_tolerance)) {
        cur = std::move(*p);
        st = measure(cur, family);
        record(st);
        last_recorded = true;
        tr.verdict = FlowVerdict::ConvergedMinimal;
        done = true;
        break;
      }
      tr.verdict = FlowVerdict::BudgetExhausted;
      tr.exit_reason = "stalled";
      done = true;
      break;
    }
    if (!(r.length_after <= r.length_before * (1.0 + 1e-10)))
      fail(ErrorCode::NoConvergence, "descent step increased length");
    cur = r.immersion;
    time += r.dt_used;
    dt = 2.0 * r.dt_used;

    bool collar = false;
    for (const Vec& v : cur.vertices())
      if (family.in_collar(family.wrap(v))) collar = true;
    if (collar) {
      if (tr.restarts >= policy.max_restarts) {
        st = measure(cur, family);
        record(st);
        tr.verdict = FlowVerdict::LeftDomain;
        tr.exit_reason = "collar";
        done = true;
        last_recorded = true;
        break;
      }
      ++tr.restarts;
      cur = perturbed_seed(seed, family, rng);
      st = measure(cur, family);
      L0 = st.length;
      dt = dt_start;
      record(st);
      continue;
    }
    if (policy.ball && (policy.ball->pole || step % policy.ball_check_every == 0) &&
        outside_ball(family, *policy.ball, cur)) {
      st = measure(cur, family);
      record(st);
      tr.verdict = FlowVerdict::LeftDomain;
      tr.exit_reason = "region";
      done = true;
      last_recorded = true;
      break;
    }
    st = measure(cur, family);
    last_recorded = false;
    if (step % policy.record_every == 0) {
      record(st);
      last_recorded = true;
    }
    if (st.residual <= policy.residual_tolerance) {
      tr.verdict = FlowVerdict::ConvergedMinimal;
      done = true;
    } else if (st.length < policy.collapse_fraction * L0 &&
               st.tau_max - st.tau_min < policy.collapse_spread) {
      tr.verdict = FlowVerdict::Collapsed;
      done = true;
    }
  }
  if (!done) {
    tr.verdict = FlowVerdict::BudgetExhausted;
    tr.exit_reason = "steps";
  }
  if (tr.verdict == FlowVerdict::ConvergedMinimal && policy.ball &&
      outside_ball(family, *policy.ball, cur)) {
    tr.verdict = FlowVerdict::LeftDomain;
    tr.exit_reason = "region";
  }
  if (!last_recorded) record(st);
  tr.steps = step;
  tr.final_immersion = cur;
  return tr;
}

MaxPrincipleReport max_principle_probe(const DiscreteImmersion& imm, double tolerance) {
  MaxPrincipleReport rep;
  for (int i = 0; i < imm.size(); ++i)
    if (rep.vertex < 0 || imm.vertex(i)[0] > rep.tau_max) {
      rep.vertex = i;
      rep.tau_max = imm.vertex(i)[0];
    }
  double nb = -kInf;
  for (int j : imm.neighbours(rep.vertex)) nb = std::max(nb, imm.vertex(j)[0]);
  rep.margin = rep.tau_max - nb;
  rep.at_boundary = imm.is_boundary()[rep.vertex] != 0;
  rep.strict = !rep.at_boundary && rep.margin > tolerance * (1.0 + std::abs(rep.tau_max));
  return rep;
}

MaxPrincipleReport max_principle_probe(const FlowTrace& trace, double tolerance) {
  return max_principle_probe(trace.final_immersion, tolerance);
}

DiscreteImmersion make_seed(const MetricFamily& family, const SeedSpec& spec) {
  const int d = family.dim();
  if (spec.center.size() != d) fail(ErrorCode::InvalidParams, "seed center needs ambient dimension");
  if (spec.vertices < 8) fail(ErrorCode::InvalidParams, "closed seeds need at least 8 vertices");
  std::vector<Vec> frame;
  if (!spec.pole) frame = orthonormal_frame(family.ambient(family.wrap(spec.center)), Vec::Unit(d, 0));
  std::vector<Vec> verts;
  for (int j = 0; j < spec.vertices; ++j) {
    const double phi = 2.0 * kPi * j / spec.vertices;
    double rad = spec.level;
    for (const auto& [k, a, ph] : spec.modes) rad += spec.amplitude * a * std::cos(k * phi + ph);
    if (!(rad > 0.0)) fail(ErrorCode::InvalidParams, "seed radius not positive");
    if (spec.pole) {
      Vec p = spec.center;
      p[0] = family.t_interval().lo + rad;
      p[1] = spec.center[1] + phi;
      verts.push_back(p);
    } else {
      verts.push_back(exp_map(family, spec.center,
                              rad * (std::cos(phi) * frame[0] + std::sin(phi) * frame[1])));
    }
  }
  return DiscreteImmersion::closed_curve(std::move(verts));
}

namespace {

enum class Side { Inward, Outward, Success };

double mean_distance(const MetricFamily& family, const Ball& ball, const DiscreteImmersion& imm) {
  const int n = imm.size();
  const int stride = ball.pole ? 1 : std::max(1, n / 8);
  double s = 0.0;
  int c = 0;
  for (int i = 0; i < n; i += stride, ++c) {
    try {
      s += ball_distance(family, ball, imm.vertex(i));
    } catch (const Error&) {
      s += ball.radius;
    }
  }
  return s / c;
}

}  // namespace

BallThresholdResult ball_threshold_experiment(const MetricFamily& family, const Ball& center,
                                              const std::vector<double>& radii,
                                              const BallThresholdOptions& opts) {
  if (radii.empty()) fail(ErrorCode::InvalidParams, "no radii given");
  for (std::size_t i = 0; i < radii.size(); ++i)
    if (!(radii[i] > 0.0) || (i && !(radii[i] > radii[i - 1])))
      fail(ErrorCode::InvalidParams, "radii must be positive and increasing");
  if (opts.seeds_per_radius < 1 || opts.levels < 1)
    fail(ErrorCode::InvalidParams, "need at least one seed and one level");
  if (center.pole && family.fiber_dim() != 1)
    fail(ErrorCode::InvalidParams, "pole-centred balls need a one-dimensional fiber");

  // Seed shapes are shared by all radii: even Fourier modes keep the
  // point-reflection symmetry through the center.
  std::vector<std::vector<std::tuple<int, double, double>>> shapes;
  for (int s = 0; s < opts.seeds_per_radius; ++s) {
    std::vector<std::tuple<int, double, double>> modes;
    if (s > 0) {
      std::seed_seq sq{static_cast<std::uint64_t>(opts.seed), static_cast<std::uint64_t>(s)};
      std::mt19937_64 rng(sq);
      double total = 0.0;
      for (int k : {2, 4, 6}) {
        const double a = 2.0 * unit_draw(rng) - 1.0;
        modes.emplace_back(k, a, 2.0 * kPi * unit_draw(rng));
        total += std::abs(a);
      }
      for (auto& m : modes) std::get<1>(m) /= total;
    }
    shapes.push_back(std::move(modes));
  }

  BallThresholdResult res;
  res.seed_count = opts.seeds_per_radius;

  auto run_radius = [&](double R, std::vector<SeedOutcome>& outs) {
    Ball ball = center;
    ball.radius = R;
    FlowPolicy pol = opts.flow;
    pol.ball = ball;
    bool any = false;
    for (int s = 0; s < opts.seeds_per_radius; ++s) {
      SeedOutcome out;
      out.radius = R;
      out.seed_id = s;
      auto flow_at = [&](double rho, bool validate) {
        SeedSpec spec;
        spec.center = center.center;
        spec.pole = center.pole;
        spec.level = rho;
        spec.amplitude = std::min(0.1 * rho, 0.5 * (R - rho));
        spec.modes = shapes[s];
        spec.vertices = opts.vertices;
        const DiscreteImmersion seed = make_seed(family, spec);
        if (validate && outside_ball(family, ball, seed))
          fail(ErrorCode::SeedOutsideBall, "seed at level " + format_double(rho) +
                                               " leaves the ball of radius " + format_double(R));
        FlowPolicy p = pol;
        p.seed = opts.seed * 1000003u + static_cast<std::uint64_t>(s);
        const FlowTrace tr = run_flow(seed, family, p);
        ++out.flows;
        out.level = rho;
        out.verdict = verdict_name(tr.verdict);
        if (tr.verdict == FlowVerdict::ConvergedMinimal) return Side::Success;
        if (tr.verdict == FlowVerdict::Collapsed) return Side::Inward;
        if (tr.exit_reason == "region") return Side::Outward;
        // A polar chart cannot follow a curve across its pole; reaching
        // the pole collar means the curve shrank onto the center.
        if (tr.exit_reason == "collar" && center.pole) return Side::Inward;
        return mean_distance(family, ball, tr.final_immersion) < rho ? Side::Inward
                                                                      : Side::Outward;
      };
      double lo = -1.0, hi = -1.0;
      for (int l = 1; l <= opts.levels; ++l) {
        const double rho = R * (1.0 - std::ldexp(1.0, -l));
        const Side side = flow_at(rho, true);
        if (side == Side::Success) {
          out.success = true;
          break;
        }
        if (side == Side::Inward) {
          lo = rho;
        } else {
          hi = rho;
          break;
        }
      }
      if (!out.success && lo > 0.0 && hi > 0.0) {
        for (int b = 0; b < opts.bisection_steps && hi - lo > 1e-14 * R; ++b) {
          const double mid = 0.5 * (lo + hi);
          const Side side = flow_at(mid, false);
          if (side == Side::Success) {
            out.success = true;
            break;
          }
          (side == Side::Inward ? lo : hi) = mid;
        }
      }
      any = any || out.success;
      outs.push_back(out);
    }
    return any;
  };

  std::size_t hit = radii.size();
  for (std::size_t i = 0; i < radii.size(); ++i) {
    res.radii.push_back(radii[i]);
    if (run_radius(radii[i], res.outcomes)) {
      hit = i;
      break;
    }
  }
  if (hit < radii.size()) {
    res.found = true;
    res.threshold = radii[hit];
    if (opts.refine_steps > 0 && hit > 0) {
      double lo = radii[hit - 1], hi = radii[hit];
      for (int k = 0; k < opts.refine_steps; ++k) {
        const double mid = 0.5 * (lo + hi);
        res.radii.push_back(mid);
        (run_radius(mid, res.outcomes) ? hi : lo) = mid;
      }
      res.threshold = hi;
    }
    if (family.structure().diameter > 0.0)
      res.normalized = res.threshold / family.structure().diameter;
  }
  return res;
}

}  // namespace minsub
