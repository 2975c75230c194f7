#include "minsub/verify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <thread>

#include <json.hpp>

#include "minsub/errors.hpp"
#include "minsub/flow.hpp"
#include "minsub/geometry.hpp"
#include "minsub/graph_pde.hpp"
#include "minsub/submanifold.hpp"

namespace minsub {

namespace {

// Fixed seeds so that every run of a battery sees the same inputs.
constexpr std::uint64_t kSeedFormulas = 20240611;
constexpr std::uint64_t kSeedConformal = 77;
constexpr std::uint64_t kSeedResidual = 4242;
constexpr std::uint64_t kSeedConfined = 515;
constexpr std::uint64_t kSeedStrict = 9001;
constexpr std::uint64_t kSeedSphere = 1;
constexpr std::uint64_t kSeedHyperbolic = 3141;

class Stream {
 public:
  explicit Stream(std::uint64_t seed) : g_(seed) {}
  double unit() { return unit_draw(g_); }
  double uniform(double a, double b) { return a + (b - a) * unit(); }

 private:
  std::mt19937_64 g_;
};

Vec point(std::initializer_list<double> xs) {
  Vec v(static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

VerifyRow row(int c, std::string name, double measured, const char* rel, double tol,
              std::string detail = {}) {
  VerifyRow r;
  r.criterion = c;
  r.name = std::move(name);
  r.measured = measured;
  r.relation = rel;
  r.tolerance = tol;
  r.pass = std::isfinite(measured) &&
           (r.relation == "<=" ? measured <= tol : measured >= tol);
  r.detail = std::move(detail);
  return r;
}

// Failing row for a battery that threw.
VerifyRow broken(int c, const std::string& name, const char* rel, double tol, const std::exception& e) {
  VerifyRow r = row(c, name, std::nan(""), rel, tol, std::string("error: ") + e.what());
  r.pass = false;
  return r;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Runs jobs[0..n) on up to `workers` threads; each job writes only its slot.
void parallel_for(int n, int workers, const std::function<void(int)>& job) {
  std::atomic<int> next{0};
  auto run = [&]() {
    for (int i = next++; i < n; i = next++) job(i);
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < std::min(workers, n); ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
}

FlowPolicy sobolev_policy(double tol = 1e-6) {
  FlowPolicy p;
  p.preconditioner = Preconditioner::Sobolev;
  p.residual_tolerance = tol;
  p.max_steps = 5000;
  return p;
}

// Laplacian of tau on flowed open curves against the discrete
// Laplace-Beltrami operator.
std::vector<VerifyRow> criterion1(const VerifyOptions& opts) {
  struct Model {
    const char* name;
    MetricFamily family;
    double t_shift;
  };
  const std::vector<Model> models = {{"sphere_polar", models::sphere_polar(1.0), 0.0},
                                     {"hyperbolic_polar", models::hyperbolic_polar(1.0), 0.0},
                                     {"euclidean_polar", models::euclidean_polar(), 0.0},
                                     {"warped_cosh", models::warped(ScalarFunction::cosh()), -1.0}};
  const int curves = 5;
  const std::vector<int> sizes = {128, 256, 512};
  struct Curve {
    double t0, t1, x0, x1, bow;
  };
  Stream rng(kSeedFormulas);
  std::vector<Curve> shapes;
  for (std::size_t m = 0; m < models.size(); ++m)
    for (int c = 0; c < curves; ++c) {
      Curve k;
      k.t0 = 0.6 + 0.8 * rng.unit() + models[m].t_shift;
      k.t1 = 0.6 + 0.8 * rng.unit() + models[m].t_shift;
      k.x0 = rng.unit();
      k.x1 = k.x0 + 0.8 + 0.6 * rng.unit();
      k.bow = 0.15 * (rng.unit() - 0.5);
      shapes.push_back(k);
    }
  const int jobs = static_cast<int>(shapes.size() * sizes.size());
  std::vector<double> err(jobs, std::nan("")), res(jobs, std::nan(""));
  std::vector<std::string> errors(jobs);
  parallel_for(jobs, opts.workers, [&](int j) {
    const int curve = j / static_cast<int>(sizes.size());
    const int n = sizes[j % sizes.size()];
    const MetricFamily& fam = models[curve / curves].family;
    const Curve& k = shapes[curve];
    try {
      std::vector<Vec> v;
      for (int i = 0; i < n; ++i) {
        const double s = double(i) / (n - 1);
        v.push_back(point({k.t0 + (k.t1 - k.t0) * s + k.bow * std::sin(kPi * s), k.x0 + (k.x1 - k.x0) * s}));
      }
      const FlowTrace tr = run_flow(DiscreteImmersion::open_curve(v), fam, sobolev_policy(1e-7));
      const DiscreteImmersion& imm = tr.final_immersion;
      const LaplacianTau lt = laplacian_tau(imm, fam);
      const std::vector<double> lb = discrete_laplace_beltrami(imm, fam, tau_theta(imm, fam).tau);
      double num = 0.0, den = 0.0;
      for (int i = 1; i < n - 1; ++i) {
        num = std::max(num, std::abs(lt.laplacian[i] - lb[i]));
        den = std::max(den, std::abs(lb[i]));
      }
      err[j] = den > 0.0 ? num / den : num;
      res[j] = lt.max_mean_curvature;
    } catch (const std::exception& e) {
      errors[j] = e.what();
    }
  });
  std::vector<double> worst(sizes.size(), 0.0);
  double worst_h = 0.0;
  int reached = 0;
  std::string failure;
  for (int j = 0; j < jobs; ++j) {
    const std::size_t s = j % sizes.size();
    worst[s] = std::isnan(err[j]) ? err[j] : std::max(worst[s], err[j]);
    if (!errors[j].empty() && failure.empty()) failure = errors[j];
    if (res[j] <= 1e-6) ++reached;
    if (!std::isnan(res[j])) worst_h = std::max(worst_h, res[j]);
  }
  const std::string per_size = "errors " + fmt("%.3e", worst[0]) + " / " + fmt("%.3e", worst[1]) +
                               " / " + fmt("%.3e", worst[2]) + " at 128/256/512 vertices";
  std::vector<VerifyRow> rows;
  rows.push_back(row(1, "curves driven to |H| <= 1e-6", reached, ">=", jobs,
                     failure.empty() ? "max |H| " + fmt("%.3e", worst_h) : "error: " + failure));
  rows.push_back(row(1, "laplacian of tau, max relative error at 512 vertices", worst[2], "<=", 0.05,
                     "20 curves in 4 models"));
  rows.push_back(row(1, "laplacian of tau, refinement order", std::log2(worst[0] / worst[2]) / 2.0,
                     ">=", 1.0, per_size));
  return rows;
}

// Conformal change of a flat metric on the unit circle.
std::vector<VerifyRow> criterion2() {
  const MetricFamily flat = models::flat(1);
  const int n = 256;
  std::vector<Vec> v;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * kPi * i / n;
    v.push_back(point({std::cos(a), std::sin(a)}));
  }
  const DiscreteImmersion circle = DiscreteImmersion::closed_curve(v);
  auto worst = [&](const ConformalFactor& a) {
    const auto r = conformal_mc_check(circle, flat, a);
    return *std::max_element(r.begin(), r.end());
  };
  std::vector<VerifyRow> rows;
  try {
    ConformalFactor c;
    c.value = [](const Vec&) { return 0.7; };
    c.gradient = [](const Vec&) { return Vec(Vec::Zero(2)); };
    rows.push_back(row(2, "conformal identity, constant factor", worst(c), "<=", 5e-3, "alpha = 0.7"));
  } catch (const std::exception& e) {
    rows.push_back(broken(2, "conformal identity, constant factor", "<=", 5e-3, e));
  }
  try {
    ConformalFactor l;
    l.value = [](const Vec& p) { return 0.5 * p[0] - 0.3 * p[1]; };
    l.gradient = [](const Vec&) { return point({0.5, -0.3}); };
    rows.push_back(row(2, "conformal identity, linear factor", worst(l), "<=", 5e-3,
                       "alpha = 0.5 t - 0.3 x"));
  } catch (const std::exception& e) {
    rows.push_back(broken(2, "conformal identity, linear factor", "<=", 5e-3, e));
  }
  try {
    Stream rng(kSeedConformal);
    double w = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      struct Wave {
        double a, bt, bx, c;
      };
      std::vector<Wave> waves;
      for (int k = 0; k < 3; ++k)
        waves.push_back({rng.uniform(-0.3, 0.3), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5),
                         rng.uniform(0.0, 2.0 * kPi)});
      ConformalFactor r;
      r.value = [waves](const Vec& p) {
        double s = 0.0;
        for (const auto& q : waves) s += q.a * std::sin(q.bt * p[0] + q.bx * p[1] + q.c);
        return s;
      };
      r.gradient = [waves](const Vec& p) {
        Vec g = Vec::Zero(2);
        for (const auto& q : waves) {
          const double c = q.a * std::cos(q.bt * p[0] + q.bx * p[1] + q.c);
          g[0] += c * q.bt;
          g[1] += c * q.bx;
        }
        return g;
      };
      w = std::max(w, worst(r));
    }
    rows.push_back(row(2, "conformal identity, random smooth factor", w, "<=", 1e-2,
                       "5 factors, 3 plane waves each"));
  } catch (const std::exception& e) {
    rows.push_back(broken(2, "conformal identity, random smooth factor", "<=", 1e-2, e));
  }
  return rows;
}

ManufacturedField sine_field(double mean, double amp, int dim) {
  ManufacturedField m;
  m.value = [=](const Vec& x) {
    double p = amp;
    for (int i = 0; i < dim; ++i) p *= std::sin(x[i] + 0.3 * i);
    return mean + p;
  };
  m.gradient = [=](const Vec& x) {
    Vec g(dim);
    for (int i = 0; i < dim; ++i) {
      double p = amp * std::cos(x[i] + 0.3 * i);
      for (int j = 0; j < dim; ++j)
        if (j != i) p *= std::sin(x[j] + 0.3 * j);
      g[i] = p;
    }
    return g;
  };
  m.hessian = [=](const Vec& x) {
    Mat h(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) {
        double p = amp;
        for (int k = 0; k < dim; ++k) {
          const double s = std::sin(x[k] + 0.3 * k), c = std::cos(x[k] + 0.3 * k);
          if (k == i && k == j) p *= -s;
          else if (k == i || k == j) p *= c;
          else p *= s;
        }
        h(i, j) = p;
      }
    return h;
  };
  return m;
}

std::vector<VerifyRow> criterion3() {
  struct Case {
    const char* label;
    MetricFamily family;
    Specialization which;
    int dim;
    double mean, amp;
  };
  const std::vector<Case> cases = {
      {"euclidean", models::flat(2, {Axis{0.0, 2.0 * kPi, true}, Axis{0.0, 2.0 * kPi, true}}),
       Specialization::Euclidean, 2, 0.2, 0.5},
      {"warped, 1 fiber dimension", models::warped(ScalarFunction::cosh()), Specialization::Warped, 1,
       0.0, 0.3},
      {"warped, 2 fiber dimensions", models::warped(ScalarFunction::cosh(), 2), Specialization::Warped,
       2, 0.1, 0.3},
      {"killing", models::killing({ScalarFunction::sin(0.3, 1.0, 0.0, 1.2),
                                   ScalarFunction::sin(0.2, 1.0, 0.5 * kPi, 1.0)}),
       Specialization::Killing, 2, 0.5, 0.4},
      {"doubly warped", models::doubly_warped(ScalarFunction::cosh(), ScalarFunction::exp(1.0, 0.5)),
       Specialization::DoublyWarped, 2, 0.2, 0.3},
  };
  std::vector<VerifyRow> rows;
  for (const Case& c : cases) {
    const std::string name = std::string("specialization cross-check order, ") + c.label;
    try {
      std::vector<double> gaps;
      std::string detail = "gaps";
      for (int n : {48, 96, 192, 384}) {
        Grid g;
        for (int i = 0; i < c.dim; ++i) g.axes.push_back(GridAxis{n, 0.0, 2.0 * kPi, true, 0.0});
        gaps.push_back(specialization_crosscheck(c.family, g, sine_field(c.mean, c.amp, c.dim), c.which));
        detail += " " + fmt("%.3e", gaps.back());
      }
      double order = kInf;
      for (std::size_t i = 1; i < gaps.size(); ++i) order = std::min(order, std::log2(gaps[i - 1] / gaps[i]));
      rows.push_back(row(3, name, order, ">=", 1.9, detail + " at n = 48..384"));
    } catch (const std::exception& e) {
      rows.push_back(broken(3, name, ">=", 1.9, e));
    }
  }
  return rows;
}

std::vector<VerifyRow> criterion4() {
  struct Case {
    const char* label;
    ScalarFunction f;
    int n;
    double lo, hi;
  };
  const std::vector<Case> cases = {
      {"cosh, n = 1", ScalarFunction::cosh(), 1, -3.0, 3.0},
      {"exp(0.7 t), n = 2", ScalarFunction::exp(1.0, 0.7), 2, -3.0, 3.0},
      {"2 + 0.5 sin t, n = 1", ScalarFunction::sin(0.5, 1.0, 0.0, 2.0), 1, -4.0, 4.0},
      {"sinh, n = 2", ScalarFunction::sinh(), 2, 0.3, 3.0},
  };
  Stream rng(kSeedResidual);
  std::vector<VerifyRow> rows;
  for (const Case& c : cases) {
    const std::string name = std::string("constant-residual law, ") + c.label;
    try {
      const MetricFamily fam = models::warped(c.f, c.n);
      Grid g;
      for (int i = 0; i < c.n; ++i) g.axes.push_back(GridAxis{8, 0.0, 2.0 * kPi, true, 0.0});
      double worst = 0.0;
      for (int k = 0; k < 20; ++k) {
        const double value = rng.uniform(c.lo, c.hi);
        GraphField u;
        u.grid = g;
        u.u.assign(g.size(), value);
        const auto h = graph_mean_curvature(fam, u);
        const double expected = c.n * std::abs(c.f.d1(value)) / c.f.value(value);
        for (double r : h) worst = std::max(worst, std::abs(std::abs(r) - expected));
      }
      rows.push_back(row(4, name, worst, "<=", 1e-8, "20 random constants"));
    } catch (const std::exception& e) {
      rows.push_back(broken(4, name, "<=", 1e-8, e));
    }
  }
  return rows;
}

// Closed curve winding once around the first fiber axis,
// t = level + sum_k a_k cos(k x + phase_k), remaining fiber coordinates
// wobbling around `rest`.
DiscreteImmersion winding_curve(const MetricFamily& fam, double level, Stream& rng, double amp,
                                int n = 64) {
  struct Mode {
    int k;
    double a, ph;
  };
  std::vector<Mode> modes, side;
  for (int k = 1; k <= 3; ++k) modes.push_back({k, amp * rng.uniform(-1.0, 1.0) / k, rng.uniform(0.0, 2.0 * kPi)});
  for (int k = 1; k <= 2; ++k) side.push_back({k, 0.3 * rng.uniform(-1.0, 1.0), rng.uniform(0.0, 2.0 * kPi)});
  const Axis ax = fam.axes()[0];
  std::vector<Vec> v;
  for (int i = 0; i < n; ++i) {
    const double s = 2.0 * kPi * i / n;
    Vec p(fam.dim());
    p[0] = level;
    for (const auto& m : modes) p[0] += m.a * std::cos(m.k * s + m.ph);
    p[1] = ax.lo + (ax.hi - ax.lo) * i / n;
    for (int j = 2; j < fam.dim(); ++j) {
      p[j] = 1.0;
      for (const auto& m : side) p[j] += m.a * std::cos(m.k * s + m.ph);
    }
    v.push_back(p);
  }
  return DiscreteImmersion::closed_curve(v);
}

// Contractible seed around a random interior point of a polar chart.
DiscreteImmersion polar_blob(const MetricFamily& fam, Stream& rng) {
  SeedSpec s;
  s.center = point({rng.uniform(0.8, 2.0), rng.uniform(0.0, 2.0 * kPi)});
  s.level = rng.uniform(0.15, 0.5);
  s.amplitude = 0.1 * s.level;
  for (int k = 2; k <= 4; ++k) s.modes.emplace_back(k, rng.uniform(-1.0, 1.0) / 3.0, rng.uniform(0.0, 2.0 * kPi));
  s.vertices = 64;
  return make_seed(fam, s);
}

struct FlowBatch {
  std::vector<FlowTrace> traces;
  std::vector<std::string> errors;
};

FlowBatch run_all(const std::vector<DiscreteImmersion>& seeds, const MetricFamily& fam,
                  const VerifyOptions& opts, std::uint64_t seed, int max_steps = 5000) {
  FlowBatch b;
  b.traces.resize(seeds.size());
  b.errors.resize(seeds.size());
  parallel_for(static_cast<int>(seeds.size()), opts.workers, [&](int i) {
    try {
      FlowPolicy p = sobolev_policy();
      p.max_steps = max_steps;
      p.seed = seed + static_cast<std::uint64_t>(i);
      b.traces[i] = run_flow(seeds[i], fam, p);
    } catch (const std::exception& e) {
      b.errors[i] = e.what();
    }
  });
  return b;
}

std::string first_error(const FlowBatch& b) {
  for (const auto& e : b.errors)
    if (!e.empty()) return e;
  return {};
}

std::vector<VerifyRow> criterion5(const VerifyOptions& opts) {
  struct Case {
    const char* label;
    MetricFamily family;
    double lo, hi;
  };
  const std::vector<Case> cases = {
      {"flat cylinder", models::flat(1, {Axis{0.0, 2.0 * kPi, true}}), -1.0, 1.0},
      {"killing", models::killing({ScalarFunction::sin(0.3, 1.0, 0.0, 1.2)}), -1.0, 1.0},
      {"warped 1 + max(t, 0)^3", models::warped(ScalarFunction::power(1.0, 3.0, 0.0, 1.0)), -1.0, 0.5},
  };
  Stream rng(kSeedConfined);
  int converged = 0, monotone = 0;
  double spread = 0.0, theta = 0.0;
  std::string failure;
  for (const Case& c : cases) {
    try {
      Region reg;
      reg.ranges.emplace_back(c.lo - 1.0, c.hi + 1.0);
      reg.ranges.emplace_back(0.0, 2.0 * kPi);
      const auto rep = classify_monotonicity(c.family, reg, 9);
      if (rep.flags.non_shrinking || rep.flags.non_expanding) ++monotone;
      std::vector<DiscreteImmersion> seeds;
      for (int s = 0; s < 10; ++s) seeds.push_back(winding_curve(c.family, rng.uniform(c.lo, c.hi), rng, 0.3));
      const FlowBatch b = run_all(seeds, c.family, opts, kSeedConfined);
      if (failure.empty() && !first_error(b).empty()) failure = first_error(b);
      for (std::size_t i = 0; i < seeds.size(); ++i) {
        const FlowTrace& tr = b.traces[i];
        if (!b.errors[i].empty() || tr.verdict != FlowVerdict::ConvergedMinimal) continue;
        ++converged;
        spread = std::max(spread, tr.tau_max.back() - tr.tau_min.back());
        theta = std::max(theta, tr.theta_max.back());
      }
    } catch (const std::exception& e) {
      if (failure.empty()) failure = e.what();
    }
  }
  std::vector<VerifyRow> rows;
  rows.push_back(row(5, "monotone models classified monotone", monotone, ">=", 3,
                     failure.empty() ? "flat cylinder, killing, warped 1 + max(t,0)^3" : "error: " + failure));
  rows.push_back(row(5, "converged flows examined", converged, ">=", 1, "30 winding seeds"));
  rows.push_back(row(5, "tau spread of converged flows", spread, "<=", 1e-3));
  rows.push_back(row(5, "theta max of converged flows", theta, "<=", 1e-2));
  return rows;
}

std::vector<VerifyRow> criterion6(const VerifyOptions& opts) {
  struct Case {
    const char* label;
    MetricFamily family;
    bool polar;
  };
  const std::vector<Case> cases = {
      {"warped exp(t)", models::warped(ScalarFunction::exp()), false},
      {"euclidean_polar", models::euclidean_polar(), true},
      {"hyperbolic_polar", models::hyperbolic_polar(1.0), true},
      {"warped exp(t) x S1", product_extension(models::warped(ScalarFunction::exp())), false},
  };
  Stream rng(kSeedStrict);
  std::vector<VerifyRow> rows;
  for (const Case& c : cases) {
    const std::string name = std::string("converged_minimal verdicts, ") + c.label;
    try {
      std::vector<DiscreteImmersion> seeds;
      for (int s = 0; s < 50; ++s)
        seeds.push_back(c.polar ? polar_blob(c.family, rng)
                                : winding_curve(c.family, rng.uniform(-1.0, 1.0), rng, 0.3));
      // Winding curves slide down an end whose circles shrink like e^t;
      // reaching a hundredth of the initial length takes long.
      const FlowBatch b = run_all(seeds, c.family, opts, kSeedStrict, 20000);
      int conv = 0, collapsed = 0, exited = 0;
      for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (!b.errors[i].empty()) continue;
        switch (b.traces[i].verdict) {
          case FlowVerdict::ConvergedMinimal: ++conv; break;
          case FlowVerdict::Collapsed: ++collapsed; break;
          case FlowVerdict::LeftDomain: ++exited; break;
          case FlowVerdict::BudgetExhausted: break;
        }
      }
      const int settled = collapsed + exited;
      std::string detail = std::to_string(collapsed) + " collapsed, " + std::to_string(exited) +
                           " left the domain of 50";
      const std::string err = first_error(b);
      if (!err.empty()) detail += "; error: " + err;
      VerifyRow r = row(6, name, conv, "<=", 0, detail);
      r.pass = r.pass && settled == 50;
      rows.push_back(r);
    } catch (const std::exception& e) {
      rows.push_back(broken(6, name, "<=", 0, e));
    }
  }
  return rows;
}

std::vector<VerifyRow> criterion7(const VerifyOptions&) {
  std::vector<VerifyRow> rows;
  try {
    const MetricFamily sphere = models::sphere_polar(1.0);
    Ball c;
    c.center = Vec::Zero(2);
    c.pole = true;
    std::vector<double> radii;
    for (int i = 0; i <= 8; ++i) radii.push_back(0.5 + 0.25 * i);
    BallThresholdOptions o;
    o.seeds_per_radius = 5;
    o.seed = kSeedSphere;
    o.refine_steps = 4;
    o.flow.preconditioner = Preconditioner::Sobolev;
    const BallThresholdResult r = ball_threshold_experiment(sphere, c, radii, o);
    const double thr = r.found ? r.threshold : std::nan("");
    const double norm = r.found ? r.normalized : std::nan("");
    const std::string detail = r.found ? "threshold " + fmt("%.6f", thr) + " from " +
                                             std::to_string(r.outcomes.size()) + " seed outcomes"
                                       : "no radius admitted a minimal curve";
    rows.push_back(row(7, "sphere threshold |R - pi/2|", std::abs(thr - 0.5 * kPi), "<=", 0.05, detail));
    rows.push_back(row(7, "sphere threshold / diameter, |d - 1/2|", std::abs(norm - 0.5), "<=", 0.02,
                       "normalized " + fmt("%.6f", norm)));
    rows.push_back(row(7, "seeds per radius", r.seed_count, ">=", 5));
  } catch (const std::exception& e) {
    rows.push_back(broken(7, "sphere threshold |R - pi/2|", "<=", 0.05, e));
  }
  return rows;
}

std::vector<VerifyRow> criterion8(const VerifyOptions& opts) {
  std::vector<VerifyRow> rows;
  const MetricFamily hyp = models::hyperbolic_polar(1.0);
  try {
    Stream rng(kSeedHyperbolic);
    std::vector<DiscreteImmersion> seeds;
    for (int s = 0; s < 30; ++s) seeds.push_back(polar_blob(hyp, rng));
    const FlowBatch b = run_all(seeds, hyp, opts, kSeedHyperbolic);
    int collapsed = 0;
    for (std::size_t i = 0; i < seeds.size(); ++i)
      if (b.errors[i].empty() && b.traces[i].verdict == FlowVerdict::Collapsed) ++collapsed;
    const std::string err = first_error(b);
    rows.push_back(row(8, "hyperbolic seeds collapsed", collapsed, ">=", 30,
                       err.empty() ? "30 random closed curves" : "error: " + err));
  } catch (const std::exception& e) {
    rows.push_back(broken(8, "hyperbolic seeds collapsed", ">=", 30, e));
  }
  try {
    int rays = 0, increasing = 0;
    std::vector<double> radii;
    for (int i = 1; i <= 12; ++i) radii.push_back(0.25 * i);
    for (int k = 0; k < 4; ++k) {
      const GrowthProbe g = normal_growth_probe(hyp, point({0.0, 0.5 * kPi * k}), point({0.0, 1.0}), radii, true);
      ++rays;
      increasing += g.strictly_increasing;
    }
    std::vector<double> short_radii;
    for (int i = 1; i <= 10; ++i) short_radii.push_back(0.1 * i);
    for (const Vec& dir : {point({1.0, 0.0}), point({0.0, 1.0}), point({0.0, -1.0}), point({-0.5, 0.4})}) {
      const GrowthProbe g = normal_growth_probe(hyp, point({1.5, 1.0}), dir, short_radii, false);
      ++rays;
      increasing += g.strictly_increasing;
    }
    rows.push_back(row(8, "rays with strictly increasing h_r", increasing, ">=", rays,
                       "4 rays from the pole, 4 from (1.5, 1.0)"));
  } catch (const std::exception& e) {
    rows.push_back(broken(8, "rays with strictly increasing h_r", ">=", 8, e));
  }
  return rows;
}

std::vector<VerifyRow> criterion9() {
  std::vector<VerifyRow> rows;
  for (int n : {1, 2}) {
    Grid g;
    for (int i = 0; i < n; ++i) g.axes.push_back(GridAxis{n == 1 ? 41 : 21, 0.0, kPi, false, 0.0});
    const std::string dims = ", n = " + std::to_string(n);
    try {
      const SolveResult r = dirichlet_solve(models::warped(ScalarFunction::cosh(), n), g, 0.0,
                                            SignConstraint::AtLeast);
      const double sup = std::max(std::abs(r.report.u_min), std::abs(r.report.u_max));
      rows.push_back(row(9, "cosh Dirichlet, sup |u|" + dims, sup, "<=", 1e-8,
                         std::string("verdict ") + solver_verdict_name(r.report.verdict)));
    } catch (const std::exception& e) {
      rows.push_back(broken(9, "cosh Dirichlet, sup |u|" + dims, "<=", 1e-8, e));
    }
    try {
      const SolveResult r = dirichlet_solve(models::warped(ScalarFunction::exp(), n), g, 0.0,
                                            SignConstraint::AtLeast);
      VerifyRow a = row(9, "exp Dirichlet, residual floor" + dims, r.report.final_infnorm_residual,
                        ">=", 0.9 * n, "floor / n = " + fmt("%.6f", r.report.final_infnorm_residual / n));
      rows.push_back(a);
      VerifyRow b = row(9, "exp Dirichlet, verdict no_convergence" + dims,
                        r.report.verdict == SolverVerdict::NoConvergence ? 1.0 : 0.0, ">=", 1.0,
                        std::string("verdict ") + solver_verdict_name(r.report.verdict));
      rows.push_back(b);
    } catch (const std::exception& e) {
      rows.push_back(broken(9, "exp Dirichlet, residual floor" + dims, ">=", 0.9 * n, e));
    }
  }
  return rows;
}

}  // namespace

bool VerifyReport::all_pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const VerifyRow& r) { return r.pass; });
}

std::string VerifyReport::to_text() const {
  std::string out = "suite " + suite + "\n";
  int passed = 0;
  for (const auto& r : rows) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "[%s] %d  %-58s measured %-12.6g %s %-8.3g %s\n",
                  r.pass ? "PASS" : "FAIL", r.criterion, r.name.c_str(), r.measured,
                  r.relation.c_str(), r.tolerance, r.detail.c_str());
    out += buf;
    passed += r.pass;
  }
  out += std::to_string(passed) + "/" + std::to_string(rows.size()) + " passed\n";
  return out;
}

std::string VerifyReport::to_json() const {
  nlohmann::ordered_json rs = nlohmann::ordered_json::array();
  int passed = 0;
  for (const auto& r : rows) {
    nlohmann::ordered_json j = {{"criterion", r.criterion}, {"name", r.name}};
    j["measured"] = std::isfinite(r.measured) ? nlohmann::ordered_json(r.measured) : nlohmann::ordered_json(nullptr);
    j["relation"] = r.relation;
    j["tolerance"] = r.tolerance;
    j["pass"] = r.pass;
    j["detail"] = r.detail;
    rs.push_back(j);
    passed += r.pass;
  }
  nlohmann::ordered_json doc = {{"suite", suite}, {"passed", passed}, {"total", rows.size()}, {"rows", rs}};
  return doc.dump(2) + "\n";
}

const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names = {"formulas", "theorems", "solvers", "all"};
  return names;
}

std::vector<VerifyRow> verify_criterion(int c, const VerifyOptions& opts) {
  switch (c) {
    case 1: return criterion1(opts);
    case 2: return criterion2();
    case 3: return criterion3();
    case 4: return criterion4();
    case 5: return criterion5(opts);
    case 6: return criterion6(opts);
    case 7: return criterion7(opts);
    case 8: return criterion8(opts);
    case 9: return criterion9();
    default: fail(ErrorCode::InvalidArgument, "no criterion " + std::to_string(c));
  }
}

VerifyReport verify_suite(const std::string& suite, const VerifyOptions& opts) {
  std::vector<int> which;
  if (suite == "formulas") which = {1, 2, 3, 4};
  else if (suite == "theorems") which = {5, 6, 7, 8};
  else if (suite == "solvers") which = {9};
  else if (suite == "all") which = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  else fail(ErrorCode::InvalidArgument, "unknown suite '" + suite + "' (formulas, theorems, solvers, all)");
  VerifyReport rep;
  rep.suite = suite;
  for (int c : which) {
    auto rows = verify_criterion(c, opts);
    rep.rows.insert(rep.rows.end(), rows.begin(), rows.end());
  }
  return rep;
}

}  // namespace minsub
