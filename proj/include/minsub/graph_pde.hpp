#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "minsub/metric.hpp"

namespace minsub {

struct GridAxis {
  int n = 0;
  double lo = 0.0, hi = 1.0;
  bool periodic = false;
  // Periodic axes only: u(x + L) = u(x) + drift * L, so affine fields fit.
  double drift = 0.0;

  double spacing() const { return periodic ? (hi - lo) / n : (hi - lo) / (n - 1); }
  double coord(int i) const { return lo + i * spacing(); }
};

// One- or two-dimensional node grid over an F-domain. Node (i, j) has index
// i + n0 * j. Non-periodic axes include both end nodes (Dirichlet boundary).
struct Grid {
  std::vector<GridAxis> axes;

  int dim() const { return static_cast<int>(axes.size()); }
  int size() const;
  std::vector<int> multi(int node) const;
  int node(const std::vector<int>& idx) const;
  Vec coords(int node) const;
  bool is_boundary(int node) const;
  bool has_boundary() const;
  void validate() const;
};

struct GraphField {
  Grid grid;
  std::vector<double> u;
  std::string family_id;

  void write_csv(std::ostream& os) const;
  static GraphField read_csv(std::istream& is);
};

// Centered-difference gradient at a node (one-sided on Dirichlet edges).
Vec graph_gradient(const GraphField& f, int node);

// Unit normal with positive d_t component: (beta^-1 d_t - grad^F u) / W.
Vec graph_normal(const MetricFamily& family, const GraphField& f, int node);

// nH at every node (zero on Dirichlet boundary nodes): the first variation
// of the graph area in conservative flux form, normalised by sqrt(beta det g).
std::vector<double> graph_mean_curvature(const MetricFamily& family, const GraphField& f);

enum class Specialization { Euclidean, Warped, Killing, DoublyWarped };
const char* specialization_name(Specialization s);

// Smooth field with analytic first and second derivatives.
struct ManufacturedField {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
  std::function<Mat(const Vec&)> hessian;
};

// Closed-form equation value at a fiber point from u, Du and D^2u.
double closed_form_residual(const MetricFamily& family, Specialization which, const Vec& x,
                            double u, const Vec& du, const Mat& hess);

// Max-norm gap between graph_mean_curvature of the sampled field and the
// closed-form equation evaluated analytically. StructureMismatch if the
// family does not have the requested structure.
double specialization_crosscheck(const MetricFamily& family, const Grid& grid,
                                 const ManufacturedField& u, Specialization which);
// Same with derivatives of a stored field taken by centered differences.
double specialization_crosscheck(const MetricFamily& family, const GraphField& u,
                                 Specialization which);

enum class SignConstraint { Free, AtLeast, AtMost };
enum class SolverVerdict { ConstantSolution, NonconstantSolution, NoConvergence, ResidualFloor };
const char* solver_verdict_name(SolverVerdict v);

struct NewtonOptions {
  double tolerance = 1e-10;
  int max_iterations = 200;
  int pin_node = -1;  // keeps this node at its initial value
  SignConstraint sign = SignConstraint::Free;
  double bound = 0.0;  // clipping level for sign constraints
  double flatness = 1e-8;
};

struct SolverReport {
  bool converged = false;
  int iterations = 0;
  std::vector<double> residual_norm_history;
  double final_infnorm_residual = 0.0;
  double u_min = 0.0, u_max = 0.0;
  SolverVerdict verdict = SolverVerdict::NoConvergence;
  int constraint_active = 0;  // nodes sitting on the clipping level
  std::string message;

  std::string to_json() const;
};

struct SolveResult {
  GraphField field;
  SolverReport report;
};

SolveResult newton_solve(const MetricFamily& family, const GraphField& u0,
                         const NewtonOptions& opts = {});

struct DirichletOptions {
  NewtonOptions newton;
  double initial_bump = 0.25;
};

// Boundary nodes held at t0; interior starts from a bump of the given
// height on the feasible side.
SolveResult dirichlet_solve(const MetricFamily& family, const Grid& domain, double t0,
                            SignConstraint sign, const DirichletOptions& opts = {});

}  // namespace minsub
