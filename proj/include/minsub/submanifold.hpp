#pragma once

#include <vector>

#include "minsub/immersion.hpp"
#include "minsub/metric.hpp"

namespace minsub {

struct InducedMetric {
  std::vector<double> edge_lengths;           // curves, in edge order
  std::vector<Eigen::Matrix2d> cell_forms;    // patches, one per cell
  std::vector<double> cell_areas;
  double total = 0.0;                         // length or area
};

InducedMetric induced_metric(const DiscreteImmersion& imm, const MetricFamily& family);

// Total length (curves) or area (patches).
double volume(const DiscreteImmersion& imm, const MetricFamily& family);

struct VolumeGradient {
  double volume = 0.0;
  std::vector<Vec> gradient;  // d(volume)/d(vertex), chart covector
  std::vector<double> dual;   // dual measure per vertex
};

VolumeGradient volume_gradient(const DiscreteImmersion& imm, const MetricFamily& family);

// Mean curvature vector per vertex: the part of -G^{-1} grad / (n * dual)
// normal to the discrete tangent space. Zero on boundary vertices.
std::vector<Vec> mean_curvature(const DiscreteImmersion& imm, const MetricFamily& family);

// v with its component along the discrete tangent space at vertex i removed.
Vec normal_part(const DiscreteImmersion& imm, const MetricFamily& family, int i, const Vec& v);

// ambient-metric norm of each mean curvature vector, max over free vertices
double max_mean_curvature(const DiscreteImmersion& imm, const MetricFamily& family);

// Discrete tangent vectors at a vertex (one for curves, two for patches).
std::vector<Vec> tangent_vectors(const DiscreteImmersion& imm, const MetricFamily& family, int i);

// Orthonormal normal frame at a vertex (Gram-Schmidt of coordinate vectors
// against the tangent space). FrameFailure if it cannot be completed.
std::vector<Vec> normal_frame(const DiscreteImmersion& imm, const MetricFamily& family, int i);

struct TauTheta {
  std::vector<double> tau;
  std::vector<double> theta;
  std::vector<double> sin2;  // beta |grad tau|^2 before clamping
};

TauTheta tau_theta(const DiscreteImmersion& imm, const MetricFamily& family);

struct LaplacianTau {
  std::vector<double> laplacian;
  std::vector<double> conformal;
  std::vector<double> cos2;  // sum_i beta^{-1} g(N_i, d_t)^2
  double max_mean_curvature = 0.0;
  bool non_minimal = false;
};

LaplacianTau laplacian_tau(const DiscreteImmersion& imm, const MetricFamily& family,
                           double mean_curvature_tolerance = 1e-6);

// Discrete Laplace-Beltrami of vertex values: second difference over arc
// length on curves, finite-volume form on patches. Zero on the boundary.
std::vector<double> discrete_laplace_beltrami(const DiscreteImmersion& imm,
                                              const MetricFamily& family,
                                              const std::vector<double>& values);

struct EtaDivY {
  std::vector<double> eta;
  std::vector<double> div_y;        // from theta, u and grad eta
  std::vector<double> div_y_direct; // d eta(d_t^T) + eta div(d_t^T)
};

// eta = d_t log det g_t.
double eta_at(const MetricFamily& family, const Vec& p);
EtaDivY eta_and_divY(const DiscreteImmersion& imm, const MetricFamily& family);

struct TanThetaProbe {
  double sigma = 0.0;         // largest s with d_t eta >= s |grad^F eta| on the samples
  bool semidefinite = false;  // d_t g semidefinite at every sample
  double min_tan_theta = 0.0;
  bool hypothesis_met = false;
};

TanThetaProbe tan_theta_probe(const DiscreteImmersion& imm, const MetricFamily& family,
                              const Region& region, int samples_per_axis);

// Per-vertex |e^a H~ - H - g(grad a, N)| maximised over the normal frame.
std::vector<double> conformal_mc_check(const DiscreteImmersion& imm, const MetricFamily& family,
                                       const ConformalFactor& alpha);

// Extension a of a normal derivative h given on a curve in a 2-dimensional
// ambient: a(exp_c(s N)) = s h(c) inside a tube of the given half width,
// smoothly cut off towards its rim.
ConformalFactor tube_extension(const DiscreteImmersion& imm, const MetricFamily& family,
                               const std::vector<double>& h, double half_width);

// For a curve inside a slice t = const: max over vertices of
// |g(D_X (d_t/sqrt(beta)), X) - (2 sqrt(beta))^{-1} (d_t g)(X, X)| / |X|^2.
double slice_shape_operator_defect(const DiscreteImmersion& imm, const MetricFamily& family);

}  // namespace minsub
