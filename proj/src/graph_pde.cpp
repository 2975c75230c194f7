#include "minsub/graph_pde.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <limits>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "minsub/errors.hpp"

namespace minsub {

int Grid::size() const {
  int n = 1;
  for (const auto& a : axes) n *= a.n;
  return n;
}

std::vector<int> Grid::multi(int node) const {
  std::vector<int> idx(axes.size());
  for (size_t a = 0; a < axes.size(); ++a) {
    idx[a] = node % axes[a].n;
    node /= axes[a].n;
  }
  return idx;
}

int Grid::node(const std::vector<int>& idx) const {
  int node = 0, stride = 1;
  for (size_t a = 0; a < axes.size(); ++a) {
    node += idx[a] * stride;
    stride *= axes[a].n;
  }
  return node;
}

Vec Grid::coords(int node) const {
  const auto idx = multi(node);
  Vec x(dim());
  for (int a = 0; a < dim(); ++a) x[a] = axes[a].coord(idx[a]);
  return x;
}

bool Grid::is_boundary(int node) const {
  const auto idx = multi(node);
  for (int a = 0; a < dim(); ++a)
    if (!axes[a].periodic && (idx[a] == 0 || idx[a] == axes[a].n - 1)) return true;
  return false;
}

bool Grid::has_boundary() const {
  for (const auto& a : axes)
    if (!a.periodic) return true;
  return false;
}

void Grid::validate() const {
  if (axes.empty() || axes.size() > 2) fail(ErrorCode::InvalidParams, "grid must be 1D or 2D");
  for (const auto& a : axes) {
    if (a.n < 3) fail(ErrorCode::InvalidParams, "grid axes need at least 3 nodes");
    if (!(a.hi > a.lo) || !std::isfinite(a.lo) || !std::isfinite(a.hi))
      fail(ErrorCode::InvalidParams, "grid axis needs finite lo < hi");
    if (!a.periodic && a.drift != 0.0)
      fail(ErrorCode::InvalidParams, "drift only applies to periodic axes");
  }
}

void GraphField::write_csv(std::ostream& os) const {
  os << "# family " << (family_id.empty() ? "-" : family_id) << '\n';
  for (const auto& a : grid.axes)
    os << "# axis " << a.n << ' ' << format_double(a.lo) << ' ' << format_double(a.hi) << ' '
       << (a.periodic ? 1 : 0) << ' ' << format_double(a.drift) << '\n';
  for (int a = 0; a < grid.dim(); ++a) os << 'x' << a << ',';
  os << "u\n";
  for (int p = 0; p < grid.size(); ++p) {
    const Vec x = grid.coords(p);
    for (int a = 0; a < grid.dim(); ++a) os << format_double(x[a]) << ',';
    os << format_double(u[p]) << '\n';
  }
}

GraphField GraphField::read_csv(std::istream& is) {
  GraphField f;
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("# family ", 0) == 0) {
      f.family_id = line.substr(9);
      if (f.family_id == "-") f.family_id.clear();
    } else if (line.rfind("# axis ", 0) == 0) {
      std::istringstream ss(line.substr(7));
      GridAxis a;
      int periodic = 0;
      if (!(ss >> a.n >> a.lo >> a.hi >> periodic >> a.drift))
        fail(ErrorCode::IoError, "bad grid axis line: " + line);
      a.periodic = periodic != 0;
      f.grid.axes.push_back(a);
    } else if (!line.empty() && line[0] != '#') {
      break;  // column header
    }
  }
  f.grid.validate();
  f.u.reserve(f.grid.size());
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    try {
      f.u.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      fail(ErrorCode::IoError, "bad value line: " + line);
    }
  }
  if (static_cast<int>(f.u.size()) != f.grid.size())
    fail(ErrorCode::IoError, "node count does not match grid");
  return f;
}

namespace {

using Idx = std::array<int, 2>;

Idx to_idx(const Grid& g, int node) {
  Idx idx{0, 0};
  for (int a = 0; a < g.dim(); ++a) {
    idx[a] = node % g.axes[a].n;
    node /= g.axes[a].n;
  }
  return idx;
}

// u at a possibly out-of-range index; periodic axes wrap and add drift.
double fetch(const GraphField& f, Idx idx) {
  double shift = 0.0;
  int node = 0, stride = 1;
  for (int a = 0; a < f.grid.dim(); ++a) {
    const GridAxis& ax = f.grid.axes[a];
    int i = idx[a];
    if (ax.periodic) {
      const double jump = ax.drift * (ax.hi - ax.lo);
      while (i < 0) i += ax.n, shift -= jump;
      while (i >= ax.n) i -= ax.n, shift += jump;
    } else if (i < 0 || i >= ax.n) {
      fail(ErrorCode::DomainError, "stencil leaves a Dirichlet grid");
    }
    node += i * stride;
    stride *= ax.n;
  }
  return f.u[node] + shift;
}

Vec coords_at(const Grid& g, const std::array<double, 2>& idx) {
  Vec x(g.dim());
  for (int a = 0; a < g.dim(); ++a) x[a] = g.axes[a].lo + idx[a] * g.axes[a].spacing();
  return x;
}

double centered(const GraphField& f, Idx idx, int b) {
  const GridAxis& ax = f.grid.axes[b];
  const double h = ax.spacing();
  Idx p = idx, m = idx;
  if (!ax.periodic && idx[b] == 0) {
    Idx q1 = idx, q2 = idx;
    q1[b] += 1;
    q2[b] += 2;
    return (-3.0 * fetch(f, idx) + 4.0 * fetch(f, q1) - fetch(f, q2)) / (2.0 * h);
  }
  if (!ax.periodic && idx[b] == ax.n - 1) {
    Idx q1 = idx, q2 = idx;
    q1[b] -= 1;
    q2[b] -= 2;
    return (3.0 * fetch(f, idx) - 4.0 * fetch(f, q1) + fetch(f, q2)) / (2.0 * h);
  }
  p[b] += 1;
  m[b] -= 1;
  return (fetch(f, p) - fetch(f, m)) / (2.0 * h);
}

Vec gradient_at(const GraphField& f, Idx idx) {
  Vec du(f.grid.dim());
  for (int b = 0; b < f.grid.dim(); ++b) du[b] = centered(f, idx, b);
  return du;
}

MetricValue eval_at(const MetricFamily& family, double t, const Vec& x) {
  Vec p(x.size() + 1);
  p << t, x;
  p = family.wrap(p);
  return family.eval(p[0], p.tail(x.size()));
}

// Flux sqrt(det g) beta (g^-1 Du)_a / sqrt(1 + beta |Du|^2_g) through the
// face between idx and idx + e_a.
double face_flux(const MetricFamily& family, const GraphField& f, Idx idx, int a) {
  Idx q = idx;
  q[a] += 1;
  const double u0 = fetch(f, idx), u1 = fetch(f, q);
  const double h = f.grid.axes[a].spacing();
  Vec du(f.grid.dim());
  for (int b = 0; b < f.grid.dim(); ++b)
    du[b] = (b == a) ? (u1 - u0) / h : 0.5 * (centered(f, idx, b) + centered(f, q, b));
  std::array<double, 2> mid{static_cast<double>(idx[0]), static_cast<double>(idx[1])};
  mid[a] += 0.5;
  const MetricValue m = eval_at(family, 0.5 * (u0 + u1), coords_at(f.grid, mid));
  const Vec w = m.g.llt().solve(du);
  const double P = 1.0 + m.beta * du.dot(w);
  return std::sqrt(m.g.determinant()) * m.beta * w[a] / std::sqrt(P);
}

double node_residual(const MetricFamily& family, const GraphField& f, Idx idx) {
  const double u = fetch(f, idx);
  const Vec du = gradient_at(f, idx);
  const Vec x = coords_at(f.grid, {static_cast<double>(idx[0]), static_cast<double>(idx[1])});
  const MetricValue m = eval_at(family, u, x);
  Vec p(x.size() + 1);
  p << u, x;
  p = family.wrap(p);
  const Vec xw = p.tail(x.size());
  const double dbeta = family.dbeta_dt(u, xw);
  const Mat dg = family.dg_dt(u, xw);
  const Mat ginv = m.g.inverse();
  const double detg = m.g.determinant();
  const Vec w = ginv * du;
  const double q = du.dot(w);
  const double P = 1.0 + m.beta * q;
  const double eta = (ginv * dg).trace();
  const double dP = dbeta * q - m.beta * w.dot(dg * w);
  const double dL = std::sqrt(detg) * (0.5 * eta * std::sqrt(P) + 0.5 * dP / std::sqrt(P));
  double div = 0.0;
  for (int a = 0; a < f.grid.dim(); ++a) {
    Idx back = idx;
    back[a] -= 1;
    div += (face_flux(family, f, idx, a) - face_flux(family, f, back, a)) /
           f.grid.axes[a].spacing();
  }
  return (dL - div) / std::sqrt(m.beta * detg);
}

void check_field(const MetricFamily& family, const GraphField& f) {
  f.grid.validate();
  if (f.grid.dim() != family.fiber_dim())
    fail(ErrorCode::InvalidParams, "grid dimension differs from the fiber dimension");
  if (static_cast<int>(f.u.size()) != f.grid.size())
    fail(ErrorCode::InvalidParams, "field size does not match grid");
  for (double v : f.u)
    if (!std::isfinite(v)) fail(ErrorCode::InvalidParams, "field has non-finite values");
}

}  // namespace

Vec graph_gradient(const GraphField& f, int node) { return gradient_at(f, to_idx(f.grid, node)); }

Vec graph_normal(const MetricFamily& family, const GraphField& f, int node) {
  check_field(family, f);
  if (node < 0 || node >= f.grid.size()) fail(ErrorCode::DomainError, "node out of range");
  if (f.grid.is_boundary(node)) fail(ErrorCode::DomainError, "normal needs an interior node");
  const Idx idx = to_idx(f.grid, node);
  const Vec du = gradient_at(f, idx);
  const MetricValue m = eval_at(family, f.u[node], f.grid.coords(node));
  const Vec grad = m.g.llt().solve(du);
  const double W = std::sqrt(1.0 / m.beta + du.dot(grad));
  Vec n(du.size() + 1);
  n << 1.0 / m.beta, -grad;
  return n / W;
}

std::vector<double> graph_mean_curvature(const MetricFamily& family, const GraphField& f) {
  check_field(family, f);
  std::vector<double> r(f.grid.size(), 0.0);
  for (int p = 0; p < f.grid.size(); ++p)
    if (!f.grid.is_boundary(p)) r[p] = node_residual(family, f, to_idx(f.grid, p));
  return r;
}

const char* solver_verdict_name(SolverVerdict v) {
  switch (v) {
    case SolverVerdict::ConstantSolution: return "constant_solution";
    case SolverVerdict::NonconstantSolution: return "nonconstant_solution";
    case SolverVerdict::NoConvergence: return "no_convergence";
    case SolverVerdict::ResidualFloor: return "residual_floor";
  }
  return "?";
}

std::string SolverReport::to_json() const {
  nlohmann::ordered_json j;
  j["converged"] = converged;
  j["iterations"] = iterations;
  j["residual_norm_history"] = residual_norm_history;
  j["final_infnorm_residual"] = final_infnorm_residual;
  j["u_range"] = {u_min, u_max};
  j["verdict"] = solver_verdict_name(verdict);
  j["constraint_active"] = constraint_active;
  j["message"] = message;
  return j.dump(2);
}

namespace {

class NewtonProblem {
 public:
  NewtonProblem(const MetricFamily& family, const GraphField& f, int pin)
      : family_(family), grid_(f.grid), n_(f.grid.size()) {
    unknown_.assign(n_, -1);
    for (int p = 0; p < n_; ++p) {
      if (grid_.is_boundary(p) || p == pin) continue;
      unknown_[p] = static_cast<int>(nodes_.size());
      nodes_.push_back(p);
    }
    colour_nodes();
  }

  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<int>& nodes() const { return nodes_; }

  Eigen::VectorXd residual(const GraphField& f) const {
    Eigen::VectorXd r(size());
    for (int k = 0; k < size(); ++k) r[k] = node_residual(family_, f, to_idx(grid_, nodes_[k]));
    return r;
  }

  Eigen::SparseMatrix<double> jacobian(const GraphField& f, const Eigen::VectorXd& r0) const {
    std::vector<Eigen::Triplet<double>> trip;
    GraphField work = f;
    const double root_eps = std::sqrt(std::numeric_limits<double>::epsilon());
    for (const auto& group : colours_) {
      std::vector<double> step(group.size());
      for (size_t k = 0; k < group.size(); ++k) {
        const int p = nodes_[group[k]];
        step[k] = root_eps * (1.0 + std::abs(f.u[p]));
        work.u[p] = f.u[p] + step[k];
      }
      for (size_t k = 0; k < group.size(); ++k) {
        const int col = group[k];
        for (int p : neighbourhood(nodes_[col], 1)) {
          const int row = unknown_[p];
          if (row < 0) continue;
          const double v = node_residual(family_, work, to_idx(grid_, p));
          trip.emplace_back(row, col, (v - r0[row]) / step[k]);
        }
      }
      for (int k : group) work.u[nodes_[k]] = f.u[nodes_[k]];
    }
    Eigen::SparseMatrix<double> J(size(), size());
    J.setFromTriplets(trip.begin(), trip.end());
    return J;
  }

 private:
  // Nodes within Chebyshev distance `reach`, without duplicates.
  std::vector<int> neighbourhood(int node, int reach) const {
    const Idx c = to_idx(grid_, node);
    std::vector<int> out;
    const int r1 = grid_.dim() > 1 ? reach : 0;
    for (int dj = -r1; dj <= r1; ++dj)
      for (int di = -reach; di <= reach; ++di) {
        Idx q{c[0] + di, c[1] + dj};
        bool ok = true;
        for (int a = 0; a < grid_.dim(); ++a) {
          const GridAxis& ax = grid_.axes[a];
          if (ax.periodic) q[a] = ((q[a] % ax.n) + ax.n) % ax.n;
          else if (q[a] < 0 || q[a] >= ax.n) ok = false;
        }
        if (!ok) continue;
        const int p = q[0] + (grid_.dim() > 1 ? q[1] * grid_.axes[0].n : 0);
        if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
      }
    return out;
  }

  // Greedy colouring so that columns sharing a group never touch the same
  // residual row (stencils are 3x3 boxes).
  void colour_nodes() {
    std::vector<int> colour(size(), -1);
    for (int k = 0; k < size(); ++k) {
      std::vector<bool> used;
      for (int p : neighbourhood(nodes_[k], 2)) {
        const int j = unknown_[p];
        if (j < 0 || colour[j] < 0) continue;
        if (static_cast<int>(used.size()) <= colour[j]) used.resize(colour[j] + 1, false);
        used[colour[j]] = true;
      }
      int c = 0;
      while (c < static_cast<int>(used.size()) && used[c]) ++c;
      colour[k] = c;
      if (static_cast<int>(colours_.size()) <= c) colours_.resize(c + 1);
      colours_[c].push_back(k);
    }
  }

  const MetricFamily& family_;
  const Grid& grid_;
  int n_;
  std::vector<int> unknown_;
  std::vector<int> nodes_;
  std::vector<std::vector<int>> colours_;
};

double clip(double v, const NewtonOptions& o) {
  if (o.sign == SignConstraint::AtLeast) return std::max(v, o.bound);
  if (o.sign == SignConstraint::AtMost) return std::min(v, o.bound);
  return v;
}

void finish_report(SolverReport& rep, const GraphField& f, const NewtonOptions& o) {
  const auto [lo, hi] = std::minmax_element(f.u.begin(), f.u.end());
  rep.u_min = *lo;
  rep.u_max = *hi;
  rep.constraint_active = 0;
  if (o.sign != SignConstraint::Free)
    for (int p = 0; p < f.grid.size(); ++p)
      if (!f.grid.is_boundary(p) && f.u[p] == o.bound) ++rep.constraint_active;
  // Drifting periodic fields are never flat.
  bool drift = false;
  for (const auto& a : f.grid.axes) drift = drift || a.drift != 0.0;
  const double scale = 1.0 + std::max(std::abs(rep.u_min), std::abs(rep.u_max));
  const bool flat = !drift && rep.u_max - rep.u_min <= o.flatness * scale;
  if (rep.converged)
    rep.verdict = flat ? SolverVerdict::ConstantSolution : SolverVerdict::NonconstantSolution;
}

}  // namespace

SolveResult newton_solve(const MetricFamily& family, const GraphField& u0,
                         const NewtonOptions& opts) {
  check_field(family, u0);
  for (int a = 0; a < u0.grid.dim(); ++a) {
    const Axis& fa = family.axes()[a];
    const GridAxis& ga = u0.grid.axes[a];
    if (ga.periodic && fa.periodic &&
        std::abs((fa.hi - fa.lo) - (ga.hi - ga.lo)) > 1e-12 * (fa.hi - fa.lo))
      fail(ErrorCode::InvalidParams, "periodic grid length differs from the fiber period");
  }
  if (opts.pin_node >= u0.grid.size())
    fail(ErrorCode::InvalidParams, "pin_node out of range");

  SolveResult out{u0, {}};
  GraphField& f = out.field;
  SolverReport& rep = out.report;
  for (int p = 0; p < f.grid.size(); ++p)
    if (!f.grid.is_boundary(p) && p != opts.pin_node) f.u[p] = clip(f.u[p], opts);

  NewtonProblem prob(family, f, opts.pin_node);
  auto full_norm = [&](const GraphField& g) {
    const auto r = graph_mean_curvature(family, g);
    double m = 0.0;
    for (double v : r) m = std::max(m, std::abs(v));
    return m;
  };

  Eigen::VectorXd r = prob.residual(f);
  double norm = full_norm(f);
  rep.residual_norm_history.push_back(norm);
  bool stalled = false;
  while (true) {
    if (norm <= opts.tolerance) {
      rep.converged = true;
      break;
    }
    if (rep.iterations >= opts.max_iterations) {
      rep.message = "iteration budget exhausted";
      break;
    }
    if (prob.size() == 0) {
      rep.message = "no free nodes";
      break;
    }
    Eigen::SparseMatrix<double> J = prob.jacobian(f, r);
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(J);
    lu.factorize(J);
    Eigen::VectorXd delta;
    if (lu.info() == Eigen::Success) delta = lu.solve(-r);
    if (lu.info() != Eigen::Success || !delta.allFinite()) {
      rep.message = error_code_name(ErrorCode::SingularJacobian) + std::string(": ") +
                    lu.lastErrorMessage();
      break;
    }
    const double phi0 = 0.5 * r.squaredNorm();
    double alpha = 1.0;
    bool accepted = false, any_inside = false;
    GraphField trial = f;
    Eigen::VectorXd rt;
    for (int k = 0; k < 40; ++k, alpha *= 0.5) {
      for (int j = 0; j < prob.size(); ++j) {
        const int p = prob.nodes()[j];
        trial.u[p] = clip(f.u[p] + alpha * delta[j], opts);
      }
      try {
        rt = prob.residual(trial);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DomainError && e.code() != ErrorCode::DegenerateMetric) throw;
        continue;
      }
      any_inside = true;
      if (0.5 * rt.squaredNorm() <= (1.0 - 2e-4 * alpha) * phi0) {
        accepted = true;
        break;
      }
    }
    if (!any_inside)
      fail(ErrorCode::DomainEscape, "every damped Newton step leaves the ambient t-interval");
    if (!accepted) {
      stalled = true;
      rep.message = "line search stalled";
      break;
    }
    f = trial;
    r = rt;
    norm = full_norm(f);
    ++rep.iterations;
    rep.residual_norm_history.push_back(norm);
  }
  rep.final_infnorm_residual = norm;
  finish_report(rep, f, opts);
  if (!rep.converged)
    rep.verdict = (stalled && opts.sign == SignConstraint::Free) ? SolverVerdict::ResidualFloor
                                                                : SolverVerdict::NoConvergence;
  return out;
}

SolveResult dirichlet_solve(const MetricFamily& family, const Grid& domain, double t0,
                            SignConstraint sign, const DirichletOptions& opts) {
  domain.validate();
  if (!domain.has_boundary())
    fail(ErrorCode::InvalidParams, "Dirichlet domain needs a non-periodic axis");
  GraphField f;
  f.grid = domain;
  f.family_id = family.name();
  f.u.assign(domain.size(), t0);
  const double s = sign == SignConstraint::AtMost ? -1.0 : 1.0;
  for (int p = 0; p < domain.size(); ++p) {
    if (domain.is_boundary(p)) continue;
    const auto idx = domain.multi(p);
    double bump = opts.initial_bump;
    for (int a = 0; a < domain.dim(); ++a) {
      const GridAxis& ax = domain.axes[a];
      if (!ax.periodic) bump *= std::sin(kPi * idx[a] / (ax.n - 1));
    }
    f.u[p] = t0 + s * bump;
  }
  NewtonOptions no = opts.newton;
  no.sign = sign;
  no.bound = t0;
  no.pin_node = -1;
  return newton_solve(family, f, no);
}

}  // namespace minsub
