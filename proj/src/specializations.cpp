// Closed-form graph equations for the model families. Each is written as
// source - div(flux) so that it equals nH with the upward normal, and the
// divergence is taken exactly by pushing a dual number through the flux.
#include <array>
#include <cmath>

#include "minsub/errors.hpp"
#include "minsub/graph_pde.hpp"

namespace minsub {

namespace {

struct Dual {
  double v = 0.0, d = 0.0;
};

Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
Dual operator/(Dual a, Dual b) { return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)}; }
Dual operator+(double s, Dual a) { return {s + a.v, a.d}; }
Dual sqrt(Dual a) {
  const double r = std::sqrt(a.v);
  return {r, 0.5 * a.d / r};
}
Dual apply(const ScalarFunction& f, Dual a) { return {f.value(a.v), f.d1(a.v) * a.d}; }

struct Point {
  Dual u;
  std::array<Dual, 2> du;
  std::array<Dual, 2> x;
};

const std::vector<ScalarFunction>& functions(const MetricFamily& fam) {
  return fam.structure().functions;
}

Dual killing_h(const MetricFamily& fam, const Point& p, int n) {
  Dual h{1.0, 0.0};
  for (int i = 0; i < n; ++i) h = h * apply(functions(fam)[i], p.x[i]);
  return h;
}

Dual flux(const MetricFamily& fam, Specialization which, const Point& p, int n, int a) {
  Dual du2{0.0, 0.0};
  for (int i = 0; i < n; ++i) du2 = du2 + p.du[i] * p.du[i];
  switch (which) {
    case Specialization::Euclidean:
      return p.du[a] / sqrt(1.0 + du2);
    case Specialization::Warped: {
      const Dual f = apply(functions(fam)[0], p.u);
      return p.du[a] / (f * sqrt(f * f + du2));
    }
    case Specialization::Killing: {
      const Dual h = killing_h(fam, p, n);
      return h * p.du[a] / sqrt(1.0 + h * h * du2);
    }
    case Specialization::DoublyWarped: {
      Dual s{1.0, 0.0};
      std::array<Dual, 2> f;
      for (int i = 0; i < 2; ++i) {
        f[i] = apply(functions(fam)[i], p.u);
        s = s + p.du[i] * p.du[i] / (f[i] * f[i]);
      }
      return p.du[a] / (f[a] * f[a] * sqrt(s));
    }
  }
  return {};
}

double source(const MetricFamily& fam, Specialization which, const Vec& x, double u,
              const Vec& du) {
  const int n = static_cast<int>(du.size());
  const double du2 = du.squaredNorm();
  switch (which) {
    case Specialization::Euclidean:
      return 0.0;
    case Specialization::Warped: {
      const auto& f = functions(fam)[0];
      const double fv = f.value(u);
      return f.d1(u) / std::sqrt(fv * fv + du2) * (n - du2 / (fv * fv));
    }
    case Specialization::Killing: {
      double h = 1.0;
      for (int i = 0; i < n; ++i) h *= functions(fam)[i].value(x[i]);
      double dot = 0.0;
      for (int i = 0; i < n; ++i) {
        const auto& hi = functions(fam)[i];
        dot += du[i] * h * hi.d1(x[i]) / hi.value(x[i]);
      }
      return -dot / std::sqrt(1.0 + h * h * du2);
    }
    case Specialization::DoublyWarped: {
      double s = 1.0, rate = 0.0, weighted = 0.0;
      for (int i = 0; i < 2; ++i) {
        const auto& f = functions(fam)[i];
        const double fv = f.value(u), l = f.d1(u) / fv;
        s += du[i] * du[i] / (fv * fv);
        rate += l;
        weighted += l * du[i] * du[i] / (fv * fv);
      }
      return (rate - weighted) / std::sqrt(s);
    }
  }
  return 0.0;
}

bool unit_killing(const MetricFamily& fam) {
  if (fam.structure().kind != MetricStructure::Kind::Killing) return false;
  for (const auto& h : functions(fam))
    if (h.kind() != ScalarFunction::Kind::Constant || h.value(0.0) != 1.0) return false;
  return true;
}

void check_structure(const MetricFamily& fam, Specialization which) {
  using K = MetricStructure::Kind;
  const K k = fam.structure().kind;
  bool ok = false;
  switch (which) {
    case Specialization::Euclidean: ok = k == K::Flat || unit_killing(fam); break;
    case Specialization::Warped: ok = k == K::Warped; break;
    case Specialization::Killing: ok = k == K::Killing; break;
    case Specialization::DoublyWarped: ok = k == K::DoublyWarped; break;
  }
  if (fam.fiber_dim() > 2) ok = false;
  if (!ok)
    fail(ErrorCode::StructureMismatch, std::string("family '") + fam.name() +
                                           "' does not have the " + specialization_name(which) +
                                           " structure");
}

}  // namespace

const char* specialization_name(Specialization s) {
  switch (s) {
    case Specialization::Euclidean: return "euclidean";
    case Specialization::Warped: return "warped";
    case Specialization::Killing: return "killing";
    case Specialization::DoublyWarped: return "doubly_warped";
  }
  return "?";
}

double closed_form_residual(const MetricFamily& family, Specialization which, const Vec& x,
                            double u, const Vec& du, const Mat& hess) {
  check_structure(family, which);
  const int n = static_cast<int>(du.size());
  double div = 0.0;
  for (int a = 0; a < n; ++a) {
    Point p;
    p.u = {u, du[a]};
    for (int i = 0; i < n; ++i) {
      p.du[i] = {du[i], hess(i, a)};
      p.x[i] = {x[i], i == a ? 1.0 : 0.0};
    }
    div += flux(family, which, p, n, a).d;
  }
  return source(family, which, x, u, du) - div;
}

double specialization_crosscheck(const MetricFamily& family, const Grid& grid,
                                 const ManufacturedField& u, Specialization which) {
  check_structure(family, which);
  GraphField f;
  f.grid = grid;
  f.family_id = family.name();
  for (int p = 0; p < grid.size(); ++p) f.u.push_back(u.value(grid.coords(p)));
  const auto r = graph_mean_curvature(family, f);
  double worst = 0.0;
  for (int p = 0; p < grid.size(); ++p) {
    if (grid.is_boundary(p)) continue;
    const Vec x = grid.coords(p);
    const double c = closed_form_residual(family, which, x, f.u[p], u.gradient(x), u.hessian(x));
    worst = std::max(worst, std::abs(r[p] - c));
  }
  return worst;
}

double specialization_crosscheck(const MetricFamily& family, const GraphField& u,
                                 Specialization which) {
  check_structure(family, which);
  const auto r = graph_mean_curvature(family, u);
  const Grid& g = u.grid;
  const int n = g.dim();
  // Centered second differences, read through a shifted copy of the field.
  auto at = [&](int node, int da, int db) {
    auto idx = g.multi(node);
    double shift = 0.0;
    const int d[2] = {da, db};
    for (int a = 0; a < n; ++a) {
      const GridAxis& ax = g.axes[a];
      idx[a] += d[a];
      if (ax.periodic) {
        if (idx[a] < 0) idx[a] += ax.n, shift -= ax.drift * (ax.hi - ax.lo);
        if (idx[a] >= ax.n) idx[a] -= ax.n, shift += ax.drift * (ax.hi - ax.lo);
      }
    }
    return u.u[g.node(idx)] + shift;
  };
  double worst = 0.0;
  for (int p = 0; p < g.size(); ++p) {
    if (g.is_boundary(p)) continue;
    const Vec x = g.coords(p);
    Vec du(n);
    Mat hess(n, n);
    for (int a = 0; a < n; ++a) {
      const double h = g.axes[a].spacing();
      int e[2] = {0, 0};
      e[a] = 1;
      du[a] = (at(p, e[0], e[1]) - at(p, -e[0], -e[1])) / (2.0 * h);
      hess(a, a) = (at(p, e[0], e[1]) - 2.0 * u.u[p] + at(p, -e[0], -e[1])) / (h * h);
    }
    if (n == 2) {
      const double h0 = g.axes[0].spacing(), h1 = g.axes[1].spacing();
      hess(0, 1) = hess(1, 0) =
          (at(p, 1, 1) - at(p, 1, -1) - at(p, -1, 1) + at(p, -1, -1)) / (4.0 * h0 * h1);
    }
    const double c = closed_form_residual(family, which, x, u.u[p], du, hess);
    worst = std::max(worst, std::abs(r[p] - c));
  }
  return worst;
}

}  // namespace minsub
