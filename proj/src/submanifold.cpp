#include "minsub/submanifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "minsub/errors.hpp"
#include "minsub/geometry.hpp"

namespace minsub {

namespace {

struct EdgeEval {
  double length;
  Vec grad_a, grad_b;
};

EdgeEval edge_eval(const MetricFamily& family, const Vec& a, const Vec& b, bool with_grad) {
  const int d = family.dim();
  const Vec e = family.difference(b, a);
  const Vec m = family.wrap(a + 0.5 * e);
  const Mat G = family.ambient(m);
  const double l2 = e.dot(G * e);
  if (!(l2 > 0.0) || !std::isfinite(l2))
    fail(ErrorCode::DegenerateElement, "edge of zero length near " + format_point(m));
  EdgeEval out;
  out.length = std::sqrt(l2);
  if (with_grad) {
    const Vec Ge = G * e;
    Vec half(d);
    for (int k = 0; k < d; ++k) half[k] = 0.5 * e.dot(family.ambient_partial(m, k) * e);
    out.grad_b = (2.0 * Ge + half) / (2.0 * out.length);
    out.grad_a = (-2.0 * Ge + half) / (2.0 * out.length);
  }
  return out;
}

struct Cell {
  int idx[4];  // (i,j), (i+1,j), (i+1,j+1), (i,j+1)
};

std::vector<Cell> grid_cells(const DiscreteImmersion& imm) {
  const GridShape& s = imm.grid();
  const int cu = s.periodic_u ? s.nu : s.nu - 1;
  const int cv = s.periodic_v ? s.nv : s.nv - 1;
  std::vector<Cell> cells;
  for (int j = 0; j < cv; ++j)
    for (int i = 0; i < cu; ++i) {
      const int i1 = (i + 1) % s.nu, j1 = (j + 1) % s.nv;
      cells.push_back({{j * s.nu + i, j * s.nu + i1, j1 * s.nu + i1, j1 * s.nu + i}});
    }
  return cells;
}

struct CellEval {
  double area;
  Eigen::Matrix2d form;
  Vec grad[4];
};

// Bilinear cell: a and b are the averaged side vectors, metric at the centroid.
CellEval cell_eval(const MetricFamily& family, const DiscreteImmersion& imm, const Cell& c,
                   bool with_grad) {
  const int d = family.dim();
  const Vec& v00 = imm.vertex(c.idx[0]);
  const Vec w10 = family.difference(imm.vertex(c.idx[1]), v00);
  const Vec w11 = family.difference(imm.vertex(c.idx[2]), v00);
  const Vec w01 = family.difference(imm.vertex(c.idx[3]), v00);
  const Vec a = 0.5 * (w10 + w11 - w01);
  const Vec b = 0.5 * (w01 + w11 - w10);
  const Vec m = family.wrap(v00 + 0.25 * (w10 + w11 + w01));
  const Mat G = family.ambient(m);
  const Vec Ga = G * a, Gb = G * b;
  const double M11 = a.dot(Ga), M22 = b.dot(Gb), M12 = a.dot(Gb);
  const double det = M11 * M22 - M12 * M12;
  if (!(det > 0.0) || !std::isfinite(det))
    fail(ErrorCode::DegenerateElement, "collapsed cell near " + format_point(m));
  CellEval out;
  out.area = std::sqrt(det);
  out.form << M11, M12, M12, M22;
  if (with_grad) {
    // d a / d corner and d b / d corner for corners 00, 10, 11, 01.
    const double ca[4] = {-0.5, 0.5, 0.5, -0.5};
    const double cb[4] = {-0.5, -0.5, 0.5, 0.5};
    Vec aDa(d), bDb(d), aDb(d);
    for (int k = 0; k < d; ++k) {
      const Mat Dk = family.ambient_partial(m, k);
      aDa[k] = a.dot(Dk * a);
      bDb[k] = b.dot(Dk * b);
      aDb[k] = a.dot(Dk * b);
    }
    for (int q = 0; q < 4; ++q) {
      const Vec dM11 = 2.0 * ca[q] * Ga + 0.25 * aDa;
      const Vec dM22 = 2.0 * cb[q] * Gb + 0.25 * bDb;
      const Vec dM12 = ca[q] * Gb + cb[q] * Ga + 0.25 * aDb;
      out.grad[q] = (M22 * dM11 + M11 * dM22 - 2.0 * M12 * dM12) / (2.0 * out.area);
    }
  }
  return out;
}

Mat checked_ambient(const MetricFamily& family, const Vec& p) {
  const Vec q = family.wrap(p);
  if (!family.contains(q))
    fail(ErrorCode::DomainError, "vertex " + format_point(p) + " outside the domain");
  return family.ambient(q);
}

}  // namespace

InducedMetric induced_metric(const DiscreteImmersion& imm, const MetricFamily& family) {
  if (imm.ambient_dim() != family.dim())
    fail(ErrorCode::InvalidParams, "immersion and metric dimensions differ");
  for (const Vec& v : imm.vertices())
    if (!family.contains(family.wrap(v)))
      fail(ErrorCode::DomainError, "vertex " + format_point(v) + " outside the domain");
  InducedMetric out;
  if (imm.topology() == Topology::GridPatch) {
    for (const Cell& c : grid_cells(imm)) {
      const CellEval ce = cell_eval(family, imm, c, false);
      out.cell_forms.push_back(ce.form);
      out.cell_areas.push_back(ce.area);
      out.total += ce.area;
    }
  } else {
    for (const auto& [a, b] : imm.edges()) {
      const double l = edge_eval(family, imm.vertex(a), imm.vertex(b), false).length;
      out.edge_lengths.push_back(l);
      out.total += l;
    }
  }
  return out;
}

double volume(const DiscreteImmersion& imm, const MetricFamily& family) {
  double total = 0.0;
  if (imm.topology() == Topology::GridPatch) {
    for (const Cell& c : grid_cells(imm)) total += cell_eval(family, imm, c, false).area;
  } else {
    for (const auto& [a, b] : imm.edges())
      total += edge_eval(family, imm.vertex(a), imm.vertex(b), false).length;
  }
  return total;
}

VolumeGradient volume_gradient(const DiscreteImmersion& imm, const MetricFamily& family) {
  const int n = imm.size(), d = family.dim();
  VolumeGradient out;
  out.gradient.assign(n, Vec::Zero(d));
  out.dual.assign(n, 0.0);
  if (imm.topology() == Topology::GridPatch) {
    for (const Cell& c : grid_cells(imm)) {
      const CellEval ce = cell_eval(family, imm, c, true);
      out.volume += ce.area;
      for (int q = 0; q < 4; ++q) {
        out.gradient[c.idx[q]] += ce.grad[q];
        out.dual[c.idx[q]] += 0.25 * ce.area;
      }
    }
  } else {
    for (const auto& [a, b] : imm.edges()) {
      const EdgeEval ee = edge_eval(family, imm.vertex(a), imm.vertex(b), true);
      out.volume += ee.length;
      out.gradient[a] += ee.grad_a;
      out.gradient[b] += ee.grad_b;
      out.dual[a] += 0.5 * ee.length;
      out.dual[b] += 0.5 * ee.length;
    }
  }
  return out;
}

namespace {

// Removes the component of v along the discrete tangent space. The
// variational gradient carries a small tangential part wherever vertex
// spacing is uneven; it moves vertices along the curve without changing it.
Vec project_normal(const Mat& G, const std::vector<Vec>& tangents, const Vec& v) {
  std::vector<Vec> frame;
  for (const Vec& t : tangents) {
    Vec w = t;
    for (const Vec& e : frame) w -= e.dot(G * w) * e;
    const double n = std::sqrt(std::max(0.0, w.dot(G * w)));
    if (n > 0.0) frame.push_back(w / n);
  }
  Vec out = v;
  for (const Vec& e : frame) out -= e.dot(G * out) * e;
  return out;
}

}  // namespace

Vec normal_part(const DiscreteImmersion& imm, const MetricFamily& family, int i, const Vec& v) {
  return project_normal(family.ambient(family.wrap(imm.vertex(i))), tangent_vectors(imm, family, i),
                        v);
}

std::vector<Vec> mean_curvature(const DiscreteImmersion& imm, const MetricFamily& family) {
  const VolumeGradient vg = volume_gradient(imm, family);
  const int dim_s = imm.intrinsic_dim();
  std::vector<Vec> H(imm.size(), Vec::Zero(family.dim()));
  for (int i = 0; i < imm.size(); ++i) {
    if (imm.is_boundary()[i]) continue;
    const Mat G = family.ambient(family.wrap(imm.vertex(i)));
    H[i] = project_normal(G, tangent_vectors(imm, family, i),
                          -G.llt().solve(vg.gradient[i]) / (dim_s * vg.dual[i]));
  }
  return H;
}

double max_mean_curvature(const DiscreteImmersion& imm, const MetricFamily& family) {
  const std::vector<Vec> H = mean_curvature(imm, family);
  double m = 0.0;
  for (int i = 0; i < imm.size(); ++i) {
    if (imm.is_boundary()[i]) continue;
    const Mat G = family.ambient(family.wrap(imm.vertex(i)));
    m = std::max(m, std::sqrt(H[i].dot(G * H[i])));
  }
  return m;
}

std::vector<Vec> tangent_vectors(const DiscreteImmersion& imm, const MetricFamily& family, int i) {
  const int n = imm.size();
  auto span = [&](int lo, int hi) { return family.difference(imm.vertex(hi), imm.vertex(lo)); };
  if (imm.topology() == Topology::ClosedCurve) return {span((i + n - 1) % n, (i + 1) % n)};
  if (imm.topology() == Topology::OpenCurve) {
    if (i == 0) return {span(0, 1)};
    if (i == n - 1) return {span(n - 2, n - 1)};
    return {span(i - 1, i + 1)};
  }
  const GridShape& s = imm.grid();
  const int a = i % s.nu, b = i / s.nu;
  auto along = [&](int cnt, bool periodic, int pos, auto index) {
    int lo = pos - 1, hi = pos + 1;
    if (periodic) {
      lo = (lo + cnt) % cnt;
      hi = hi % cnt;
    } else {
      lo = std::max(lo, 0);
      hi = std::min(hi, cnt - 1);
    }
    return span(index(lo), index(hi));
  };
  const Vec tu = along(s.nu, s.periodic_u, a, [&](int u) { return b * s.nu + u; });
  const Vec tv = along(s.nv, s.periodic_v, b, [&](int v) { return v * s.nu + a; });
  return {tu, tv};
}

std::vector<Vec> normal_frame(const DiscreteImmersion& imm, const MetricFamily& family, int i) {
  const Mat G = checked_ambient(family, imm.vertex(i));
  const int d = family.dim();
  const std::vector<Vec> tangents = tangent_vectors(imm, family, i);
  std::vector<Vec> basis;
  auto absorb = [&](const Vec& c) {
    const double n0 = std::sqrt(c.dot(G * c));
    if (!(n0 > 0.0)) return false;
    Vec w = c;
    for (int pass = 0; pass < 2; ++pass)
      for (const Vec& e : basis) w -= e.dot(G * w) * e;
    const double n = std::sqrt(std::max(0.0, w.dot(G * w)));
    if (n <= 1e-8 * n0) return false;
    basis.push_back(w / n);
    return true;
  };
  for (const Vec& t : tangents)
    if (!absorb(t)) fail(ErrorCode::FrameFailure, "degenerate tangent space at vertex " + std::to_string(i));
  const std::size_t k = basis.size();
  for (int c = 0; c < d && static_cast<int>(basis.size()) < d; ++c) absorb(Vec::Unit(d, c));
  if (static_cast<int>(basis.size()) != d)
    fail(ErrorCode::FrameFailure, "normal frame incomplete at vertex " + std::to_string(i));
  return std::vector<Vec>(basis.begin() + k, basis.end());
}

namespace {

double sin2_at(const DiscreteImmersion& imm, const MetricFamily& family, int i) {
  const Mat G = checked_ambient(family, imm.vertex(i));
  const double beta = G(0, 0);
  const std::vector<Vec> t = tangent_vectors(imm, family, i);
  if (t.size() == 1) {
    const double len2 = t[0].dot(G * t[0]);
    if (!(len2 > 0.0)) fail(ErrorCode::DegenerateElement, "zero tangent at vertex " + std::to_string(i));
    return beta * t[0][0] * t[0][0] / len2;
  }
  Eigen::Matrix2d I;
  I << t[0].dot(G * t[0]), t[0].dot(G * t[1]), t[0].dot(G * t[1]), t[1].dot(G * t[1]);
  const Eigen::Vector2d dtau(t[0][0], t[1][0]);
  return beta * dtau.dot(I.ldlt().solve(dtau));
}

}  // namespace

TauTheta tau_theta(const DiscreteImmersion& imm, const MetricFamily& family) {
  TauTheta out;
  for (int i = 0; i < imm.size(); ++i) {
    const double s2 = sin2_at(imm, family, i);
    out.tau.push_back(imm.vertex(i)[0]);
    out.sin2.push_back(s2);
    out.theta.push_back(std::asin(std::sqrt(std::clamp(s2, 0.0, 1.0))));
  }
  return out;
}

namespace {

struct VertexTerms {
  double beta, dbeta_t, dbeta_tangent, eta, trace_normal, cos2;
  Vec dt_tangent;  // d_t^T
};

VertexTerms vertex_terms(const DiscreteImmersion& imm, const MetricFamily& family, int i) {
  const int d = family.dim();
  const Vec p = family.wrap(imm.vertex(i));
  const Mat G = checked_ambient(family, p);
  const std::vector<Vec> normals = normal_frame(imm, family, i);
  const Vec x = p.tail(d - 1);
  VertexTerms vt;
  vt.beta = G(0, 0);
  const Mat g = G.bottomRightCorner(d - 1, d - 1);
  const Mat dg = family.dg_dt(p[0], x);
  vt.dbeta_t = family.dbeta_dt(p[0], x);
  vt.eta = g.llt().solve(dg).trace();
  vt.dt_tangent = Vec::Unit(d, 0);
  vt.trace_normal = 0.0;
  vt.cos2 = 0.0;
  for (const Vec& N : normals) {
    const double gn = vt.beta * N[0];  // g(N, d_t)
    vt.dt_tangent -= gn * N;
    vt.cos2 += gn * gn / vt.beta;
    const Vec NF = N.tail(d - 1);
    vt.trace_normal += NF.dot(dg * NF);
  }
  vt.dbeta_tangent = 0.0;
  for (int k = 0; k < d; ++k) {
    const double dk = k == 0 ? vt.dbeta_t : family.dbeta_dx(p[0], x, k - 1);
    vt.dbeta_tangent += dk * vt.dt_tangent[k];
  }
  return vt;
}

}  // namespace

LaplacianTau laplacian_tau(const DiscreteImmersion& imm, const MetricFamily& family,
                           double mean_curvature_tolerance) {
  LaplacianTau out;
  const int n = imm.intrinsic_dim();
  for (int i = 0; i < imm.size(); ++i) {
    const VertexTerms vt = vertex_terms(imm, family, i);
    const double bracket_tail = vt.eta - vt.trace_normal;
    const double lap = -vt.dbeta_tangent / (vt.beta * vt.beta) +
                       (0.5 / vt.beta) * ((1.0 - vt.cos2) * vt.dbeta_t / vt.beta + bracket_tail);
    const double sin2 = std::clamp(sin2_at(imm, family, i), 0.0, 1.0);
    const double conf = 0.5 * std::pow(vt.beta, -0.5 * n) *
                        (sin2 * vt.dbeta_t / vt.beta + bracket_tail);
    out.laplacian.push_back(lap);
    out.conformal.push_back(conf);
    out.cos2.push_back(vt.cos2);
  }
  out.max_mean_curvature = max_mean_curvature(imm, family);
  out.non_minimal = out.max_mean_curvature > mean_curvature_tolerance;
  return out;
}

std::vector<double> discrete_laplace_beltrami(const DiscreteImmersion& imm,
                                              const MetricFamily& family,
                                              const std::vector<double>& f) {
  if (static_cast<int>(f.size()) != imm.size())
    fail(ErrorCode::InvalidParams, "one value per vertex required");
  const int n = imm.size();
  std::vector<double> out(n, 0.0);
  if (imm.topology() != Topology::GridPatch) {
    const InducedMetric im = induced_metric(imm, family);
    const auto edges = imm.edges();
    std::vector<double> flux(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e)
      flux[e] = (f[edges[e].second] - f[edges[e].first]) / im.edge_lengths[e];
    for (int i = 0; i < n; ++i) {
      if (imm.is_boundary()[i]) continue;
      const int ein = imm.topology() == Topology::ClosedCurve ? (i + n - 1) % n : i - 1;
      const int eout = i;
      out[i] = (flux[eout] - flux[ein]) / (0.5 * (im.edge_lengths[ein] + im.edge_lengths[eout]));
    }
    return out;
  }
  // Structured finite volumes in index space: (1/sqrt|I|) d_a(sqrt|I| I^{ab} d_b f).
  const GridShape& s = imm.grid();
  auto id = [&](int u, int v) {
    if (s.periodic_u) u = (u + s.nu) % s.nu;
    if (s.periodic_v) v = (v + s.nv) % s.nv;
    return v * s.nu + u;
  };
  auto node_tangent = [&](int u, int v) { return tangent_vectors(imm, family, id(u, v)); };
  auto node_df = [&](int u, int v) {
    auto clampu = [&](int w) { return s.periodic_u ? w : std::clamp(w, 0, s.nu - 1); };
    auto clampv = [&](int w) { return s.periodic_v ? w : std::clamp(w, 0, s.nv - 1); };
    const int u0 = clampu(u - 1), u1 = clampu(u + 1), v0 = clampv(v - 1), v1 = clampv(v + 1);
    return Eigen::Vector2d((f[id(u1, v)] - f[id(u0, v)]) / (u1 - u0) * 1.0,
                           (f[id(u, v1)] - f[id(u, v0)]) / (v1 - v0) * 1.0);
  };
  auto tangent_scale = [&](int u, int v) {
    auto clampu = [&](int w) { return s.periodic_u ? w : std::clamp(w, 0, s.nu - 1); };
    auto clampv = [&](int w) { return s.periodic_v ? w : std::clamp(w, 0, s.nv - 1); };
    return Eigen::Vector2d(clampu(u + 1) - clampu(u - 1), clampv(v + 1) - clampv(v - 1));
  };
  // Flux through the face between (u,v) and the neighbour along axis ax.
  auto face_flux = [&](int u, int v, int ax) {
    const int u2 = ax == 0 ? u + 1 : u, v2 = ax == 1 ? v + 1 : v;
    const Vec& A = imm.vertex(id(u, v));
    const Vec step = family.difference(imm.vertex(id(u2, v2)), A);
    const Vec mid = family.wrap(A + 0.5 * step);
    const Mat G = family.ambient(mid);
    const auto t1 = node_tangent(u, v), t2 = node_tangent(u2, v2);
    const Eigen::Vector2d sc1 = tangent_scale(u, v), sc2 = tangent_scale(u2, v2);
    const int other = 1 - ax;
    const Vec cross = 0.5 * (t1[other] / sc1[other] + t2[other] / sc2[other]);
    const Vec ta = ax == 0 ? step : cross;
    const Vec tb = ax == 0 ? cross : step;
    Eigen::Matrix2d I;
    I << ta.dot(G * ta), ta.dot(G * tb), ta.dot(G * tb), tb.dot(G * tb);
    const double sq = std::sqrt(I.determinant());
    const Eigen::Matrix2d Iinv = I.inverse();
    const Eigen::Vector2d df1 = node_df(u, v), df2 = node_df(u2, v2);
    Eigen::Vector2d df;
    df[ax] = f[id(u2, v2)] - f[id(u, v)];
    df[other] = 0.5 * (df1[other] + df2[other]);
    return sq * (Iinv.row(ax).dot(df));
  };
  for (int v = 0; v < s.nv; ++v)
    for (int u = 0; u < s.nu; ++u) {
      const int i = id(u, v);
      if (imm.is_boundary()[i]) continue;
      const Mat G = family.ambient(family.wrap(imm.vertex(i)));
      const auto t = node_tangent(u, v);
      const Eigen::Vector2d sc = tangent_scale(u, v);
      const Vec a = t[0] / sc[0], b = t[1] / sc[1];
      Eigen::Matrix2d I;
      I << a.dot(G * a), a.dot(G * b), a.dot(G * b), b.dot(G * b);
      const double sq = std::sqrt(I.determinant());
      const double div = face_flux(u, v, 0) - face_flux(u - 1, v, 0) + face_flux(u, v, 1) -
                         face_flux(u, v - 1, 1);
      out[i] = div / sq;
    }
  return out;
}

double eta_at(const MetricFamily& family, const Vec& p) {
  const int n = family.fiber_dim();
  const Vec q = family.wrap(p);
  const Vec x = q.tail(n);
  return family.g(q[0], x).llt().solve(family.dg_dt(q[0], x)).trace();
}

namespace {

Vec eta_gradient(const MetricFamily& family, const Vec& p) {
  const int d = family.dim();
  Vec gr(d);
  for (int k = 0; k < d; ++k) {
    const double h = k == 0 ? family.fd_step_t() : family.fd_step_x(k - 1);
    Vec a = p, b = p;
    a[k] += h;
    b[k] -= h;
    gr[k] = (eta_at(family, a) - eta_at(family, b)) / (2.0 * h);
  }
  return gr;
}

}  // namespace

EtaDivY eta_and_divY(const DiscreteImmersion& imm, const MetricFamily& family) {
  EtaDivY out;
  const LaplacianTau lt = laplacian_tau(imm, family);
  const int d = family.dim();
  for (int i = 0; i < imm.size(); ++i) {
    const Vec p = family.wrap(imm.vertex(i));
    const VertexTerms vt = vertex_terms(imm, family, i);
    const Vec deta = eta_gradient(family, p);
    // div(d_t^T) = div(beta grad tau) = beta Lap tau + d beta(d_t^T) / beta
    const double div_dt = vt.beta * lt.laplacian[i] + vt.dbeta_tangent / vt.beta;
    out.eta.push_back(vt.eta);
    out.div_y_direct.push_back(deta.dot(vt.dt_tangent) + vt.eta * div_dt);
    // d_t^T = sin^2(theta) d_t + sqrt(beta) sin(theta) cos(theta) u with u a
    // unit vector orthogonal to d_t.
    const double s2 = std::clamp(1.0 - vt.cos2, 0.0, 1.0);
    const double sc = std::sqrt(vt.beta * s2 * (1.0 - s2));
    double u_eta = 0.0;
    if (sc > 1e-14) {
      Vec u = (vt.dt_tangent - s2 * Vec::Unit(d, 0)) / sc;
      u[0] = 0.0;
      u_eta = deta.dot(u);
    }
    out.div_y.push_back(s2 * deta[0] + sc * u_eta + vt.eta * div_dt);
  }
  return out;
}

TanThetaProbe tan_theta_probe(const DiscreteImmersion& imm, const MetricFamily& family,
                              const Region& region, int samples_per_axis) {
  const int d = family.dim();
  if (static_cast<int>(region.ranges.size()) != d || samples_per_axis < 2)
    fail(ErrorCode::InvalidParams, "bad sampling region");
  TanThetaProbe out;
  out.sigma = std::numeric_limits<double>::infinity();
  out.semidefinite = true;
  std::vector<int> idx(d, 0);
  for (;;) {
    Vec p(d);
    for (int k = 0; k < d; ++k) {
      const auto [lo, hi] = region.ranges[k];
      p[k] = lo + (hi - lo) * idx[k] / double(samples_per_axis - 1);
    }
    const Vec x = p.tail(d - 1);
    const MetricValue mv = family.eval(p[0], x);
    const Vec ev = generalized_eigenvalues(family.dg_dt(p[0], x), mv.g);
    const double tol = 1e-9 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    if (!(ev.minCoeff() >= -tol || ev.maxCoeff() <= tol)) out.semidefinite = false;
    const Vec de = eta_gradient(family, p);
    const Vec dF = de.tail(d - 1);
    const double gradF = std::sqrt(std::max(0.0, dF.dot(mv.g.llt().solve(dF))));
    if (de[0] < 0.0)
      out.sigma = std::min(out.sigma, gradF > 0.0 ? de[0] / gradF : -kInf);
    else if (gradF > 0.0)
      out.sigma = std::min(out.sigma, de[0] / gradF);
    int k = d - 1;
    while (k >= 0 && ++idx[k] == samples_per_axis) idx[k--] = 0;
    if (k < 0) break;
  }
  const TauTheta tt = tau_theta(imm, family);
  out.min_tan_theta = std::numeric_limits<double>::infinity();
  for (double th : tt.theta) out.min_tan_theta = std::min(out.min_tan_theta, std::tan(th));
  out.hypothesis_met =
      out.semidefinite && out.sigma > 0.0 && out.min_tan_theta >= 1.0 / out.sigma;
  return out;
}

std::vector<double> conformal_mc_check(const DiscreteImmersion& imm, const MetricFamily& family,
                                       const ConformalFactor& alpha) {
  const MetricFamily scaled = conformal_family(family, alpha);
  const std::vector<Vec> H = mean_curvature(imm, family);
  const std::vector<Vec> Ht = mean_curvature(imm, scaled);
  std::vector<double> out(imm.size(), 0.0);
  for (int i = 0; i < imm.size(); ++i) {
    if (imm.is_boundary()[i]) continue;
    const Vec p = family.wrap(imm.vertex(i));
    const Mat G = checked_ambient(family, p);
    const double a = alpha.value(p);
    const Vec da = alpha.grad(p);
    double worst = 0.0;
    for (const Vec& N : normal_frame(imm, family, i)) {
      const double h = -H[i].dot(G * N);
      const double ht = -std::exp(a) * Ht[i].dot(G * N);
      worst = std::max(worst, std::abs(std::exp(a) * ht - h - da.dot(N)));
    }
    out[i] = worst;
  }
  return out;
}

namespace {

// C-infinity cutoff: 1 on [0, 1/2], 0 from 1 on.
double cutoff(double r) {
  r = std::abs(r);
  if (r <= 0.5) return 1.0;
  if (r >= 1.0) return 0.0;
  auto psi = [](double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; };
  const double s = (r - 0.5) * 2.0;
  return psi(1.0 - s) / (psi(1.0 - s) + psi(s));
}

struct Tube {
  MetricFamily family;
  std::vector<Vec> points, normals;
  std::vector<double> h;
  bool closed;
  double width;

  Vec interp(const std::vector<Vec>& arr, int i, double s) const {
    const int n = static_cast<int>(arr.size());
    const Vec& a = arr[(i + n - 1) % n];
    const Vec& c = arr[(i + 1) % n];
    const Vec& b = arr[i];
    const Vec dm = family.difference(a, b), dp = family.difference(c, b);
    return b + 0.5 * s * (dp - dm) + 0.5 * s * s * (dp + dm);
  }
  double interp_h(int i, double s) const {
    const int n = static_cast<int>(h.size());
    const double a = h[(i + n - 1) % n], b = h[i], c = h[(i + 1) % n];
    return b + 0.5 * s * (c - a) + 0.5 * s * s * (c - 2.0 * b + a);
  }
  Vec normal(int i, double s, const Vec& base) const {
    const int n = static_cast<int>(normals.size());
    const Vec& a = normals[(i + n - 1) % n];
    const Vec& b = normals[i];
    const Vec& c = normals[(i + 1) % n];
    Vec N = b + 0.5 * s * (c - a) + 0.5 * s * s * (c - 2.0 * b + a);
    const Mat G = family.ambient(family.wrap(base));
    return N / std::sqrt(N.dot(G * N));
  }
  Vec map(int i, double s, double r) const {
    const Vec c = interp(points, i, s);
    if (r == 0.0) return c;
    return exp_map(family, c, r * normal(i, s, c), 16);
  }

  double value(const Vec& q) const {
    const int n = static_cast<int>(points.size());
    int best = 0;
    double bd = kInf;
    for (int i = 0; i < n; ++i) {
      const double dd = family.difference(q, points[i]).norm();
      if (dd < bd) {
        bd = dd;
        best = i;
      }
    }
    const int lo = closed ? 0 : 1, hi = closed ? n - 1 : n - 2;
    int i = std::clamp(best, lo, hi);
    const Mat G0 = family.ambient(family.wrap(points[i]));
    double s = 0.0;
    double r = family.difference(q, points[i]).dot(G0 * normals[i]);
    if (std::abs(r) > 2.0 * width) return 0.0;
    for (int recentre = 0; recentre < 4; ++recentre) {
      bool ok = false;
      for (int it = 0; it < 30; ++it) {
        const Vec F = family.difference(map(i, s, r), q);
        if (F.cwiseAbs().maxCoeff() < 1e-13) {
          ok = true;
          break;
        }
        const double e = 1e-7;
        Eigen::Matrix2d J;
        J.col(0) = family.difference(map(i, s + e, r), map(i, s - e, r)) / (2.0 * e);
        J.col(1) = family.difference(map(i, s, r + e), map(i, s, r - e)) / (2.0 * e);
        const Eigen::Vector2d step = J.fullPivLu().solve(-Eigen::Vector2d(F[0], F[1]));
        if (!step.allFinite()) break;
        s += step[0];
        r += step[1];
        if (std::abs(step[0]) + std::abs(step[1]) < 1e-15) {
          ok = true;
          break;
        }
      }
      if (!ok) return 0.0;
      if (std::abs(s) <= 0.5 || (!closed && ((i == lo && s < 0) || (i == hi && s > 0)))) break;
      const int shift = s > 0 ? 1 : -1;
      const int ni = closed ? (i + shift + n) % n : std::clamp(i + shift, lo, hi);
      if (ni == i) break;
      i = ni;
      s -= shift;
    }
    return r * interp_h(i, s) * cutoff(r / width);
  }
};

}  // namespace

ConformalFactor tube_extension(const DiscreteImmersion& imm, const MetricFamily& family,
                               const std::vector<double>& h, double half_width) {
  if (imm.topology() == Topology::GridPatch || family.dim() != 2)
    fail(ErrorCode::InvalidParams, "tube extension supports curves in a 2-dimensional ambient");
  if (static_cast<int>(h.size()) != imm.size())
    fail(ErrorCode::InvalidParams, "one normal derivative per vertex required");
  if (!(half_width > 0.0)) fail(ErrorCode::InvalidParams, "tube half width must be positive");
  auto tube = std::make_shared<Tube>(Tube{family, imm.vertices(), {}, h,
                                          imm.topology() == Topology::ClosedCurve, half_width});
  for (int i = 0; i < imm.size(); ++i) {
    Vec N = normal_frame(imm, family, i).front();
    if (i > 0) {
      const Mat G = family.ambient(family.wrap(imm.vertex(i)));
      if (N.dot(G * tube->normals.back()) < 0.0) N = -N;
    }
    tube->normals.push_back(N);
  }
  ConformalFactor cf;
  cf.value = [tube](const Vec& q) { return tube->value(q); };
  cf.fd_step = 1e-5 * half_width;
  return cf;
}

double slice_shape_operator_defect(const DiscreteImmersion& imm, const MetricFamily& family) {
  const int d = family.dim();
  double worst = 0.0;
  for (int i = 0; i < imm.size(); ++i) {
    const Vec p = family.wrap(imm.vertex(i));
    const Mat G = checked_ambient(family, p);
    const Vec X = tangent_vectors(imm, family, i).front();
    const double beta = G(0, 0);
    const Christoffel c = christoffel(family, p);
    double dbeta_X = 0.0;
    for (int k = 0; k < d; ++k) dbeta_X += family.ambient_partial(p, k)(0, 0) * X[k];
    Vec nabla = Vec::Zero(d);
    nabla[0] = -0.5 * std::pow(beta, -1.5) * dbeta_X;
    for (int k = 0; k < d; ++k)
      for (int a = 0; a < d; ++a) nabla[k] += c(k, a, 0) * X[a] / std::sqrt(beta);
    const Vec XF = X.tail(d - 1);
    const Mat dg = family.dg_dt(p[0], p.tail(d - 1));
    const double lhs = X.dot(G * nabla);
    const double rhs = XF.dot(dg * XF) / (2.0 * std::sqrt(beta));
    worst = std::max(worst, std::abs(lhs - rhs) / X.dot(G * X));
  }
  return worst;
}

}  // namespace minsub
