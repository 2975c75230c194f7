#pragma once

#include <array>
#include <vector>

#include "minsub/errors.hpp"
#include "minsub/metric.hpp"

namespace minsub {

// Gamma^k_{ij} at one point.
struct Christoffel {
  int dim = 0;
  std::array<double, kMaxDim * kMaxDim * kMaxDim> data{};
  double& operator()(int k, int i, int j) { return data[(k * kMaxDim + i) * kMaxDim + j]; }
  double operator()(int k, int i, int j) const { return data[(k * kMaxDim + i) * kMaxDim + j]; }
};

Christoffel christoffel(const MetricFamily& family, const Vec& p);

struct GeodesicPath {
  std::vector<Vec> points;
  std::vector<Vec> velocities;
  std::vector<double> arc_params;
  double energy = 0.0;
};

// Carries the last point that was still inside the chart.
class LeftDomainError : public Error {
 public:
  LeftDomainError(const std::string& msg, Vec last_valid)
      : Error(ErrorCode::LeftDomain, msg), last_valid_(std::move(last_valid)) {}
  const Vec& last_valid() const { return last_valid_; }

 private:
  Vec last_valid_;
};

// Unit-speed geodesic from start in the direction of velocity, integrated
// with classical RK4 over arc length [0, length] in `steps` equal steps.
GeodesicPath geodesic_shoot(const MetricFamily& family, const Vec& start, const Vec& velocity,
                            double length, int steps = 64);

// Endpoint of the geodesic with initial velocity v at parameter 1.
Vec exp_map(const MetricFamily& family, const Vec& start, const Vec& v, int steps = 64);

struct DistanceOptions {
  int steps = 64;
  int starts = 8;
  int max_iterations = 60;
  double tolerance = 1e-10;
};

double geodesic_distance(const MetricFamily& family, const Vec& p, const Vec& q,
                         const DistanceOptions& opts = {});

struct GrowthProbe {
  std::vector<double> radii;
  std::vector<double> h;
  // Largest probed radius up to which h is strictly increasing (0 if the
  // very first step already fails).
  double monotone_until = 0.0;
  bool strictly_increasing = false;
};

// h_r(u,u) along the radial geodesic exp_c(r v). With pole = true the center
// is the collapsed lower end of a polar chart: rays are the t-lines through
// the fiber point of `center`, shot from the collar.
GrowthProbe normal_growth_probe(const MetricFamily& family, const Vec& center,
                                const Vec& direction, const std::vector<double>& radii,
                                bool pole = false, double delta = 1e-3);

// Orthonormal basis of the tangent space at p (Gram-Schmidt on coordinate
// vectors, first vector along `first` when given).
std::vector<Vec> orthonormal_frame(const Mat& G, const Vec& first = Vec());

}  // namespace minsub
