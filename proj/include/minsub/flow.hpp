#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "minsub/immersion.hpp"
#include "minsub/metric.hpp"

namespace minsub {

enum class FlowVerdict { ConvergedMinimal, Collapsed, LeftDomain, BudgetExhausted };
const char* verdict_name(FlowVerdict v);

enum class Preconditioner { L2, Sobolev };

// Geodesic ball used as a containment region. With pole = true the center
// is the collapsed lower end of a polar chart and distance is t - t_lo.
struct Ball {
  Vec center;
  double radius = 0.0;
  bool pole = false;
};

double ball_distance(const MetricFamily& family, const Ball& ball, const Vec& p);

struct FlowPolicy {
  double dt0 = 0.0;  // 0 picks a step from the initial edge lengths
  int max_steps = 20000;
  double residual_tolerance = 1e-6;
  double collapse_fraction = 1e-2;
  double collapse_spread = 1e-3;
  Preconditioner preconditioner = Preconditioner::L2;
  double sobolev_weight = 1.0;
  int max_restarts = 3;
  std::uint64_t seed = 0;
  double redistribute_ratio = 1.5;
  int record_every = 1;
  std::optional<Ball> ball;
  int ball_check_every = 25;
};

struct FlowTrace {
  std::vector<double> times, lengths, tau_min, tau_max, theta_max, residual;
  FlowVerdict verdict = FlowVerdict::BudgetExhausted;
  std::string exit_reason;  // collar, domain, region, stalled, steps
  int steps = 0;
  int restarts = 0;
  double initial_length = 0.0;
  DiscreteImmersion final_immersion;

  void write_csv(std::ostream& os) const;
};

struct StepResult {
  DiscreteImmersion immersion;
  double dt_used = 0.0;
  double length_before = 0.0;
  double length_after = 0.0;
  bool accepted = false;
  bool stationary = false;  // zero descent direction
  bool redistributed = false;
};

// One Armijo-backtracked descent step starting from trial step dt.
StepResult descent_step(const DiscreteImmersion& imm, const MetricFamily& family, double dt,
                        Preconditioner pre = Preconditioner::L2, double sobolev_weight = 1.0,
                        double redistribute_ratio = 1.5);

// Vertices moved by dt * mean curvature with halving until length drops,
// then redistributed. dt = 0 is the identity. CollapseDetected when the new
// length is below collapse_length; LeftDomain when no admissible step exists.
DiscreteImmersion flow_step(const DiscreteImmersion& imm, const MetricFamily& family, double dt,
                            double collapse_length = 0.0);

// Uniform arc-length resampling along the polygon when the edge ratio
// exceeds `ratio`; never increases length. Returns the input otherwise.
DiscreteImmersion redistribute(const DiscreteImmersion& imm, const MetricFamily& family,
                               double ratio = 1.5);

FlowTrace run_flow(const DiscreteImmersion& seed, const MetricFamily& family,
                   const FlowPolicy& policy);

struct MaxPrincipleReport {
  int vertex = -1;
  double tau_max = 0.0;
  double margin = 0.0;  // tau at the vertex minus the largest neighbour value
  bool at_boundary = false;
  bool strict = false;
};

MaxPrincipleReport max_principle_probe(const DiscreteImmersion& imm, double tolerance = 1e-9);
MaxPrincipleReport max_principle_probe(const FlowTrace& trace, double tolerance = 1e-9);

// Closed curve around `center` at distance level + amplitude * P(phi),
// P = sum of a_k cos(k phi + phase_k), built with the exponential map (or
// the polar structure when pole is set).
struct SeedSpec {
  Vec center;
  bool pole = false;
  double level = 0.0;
  double amplitude = 0.0;
  std::vector<std::tuple<int, double, double>> modes;  // (k, a_k, phase_k)
  int vertices = 64;
};

DiscreteImmersion make_seed(const MetricFamily& family, const SeedSpec& spec);

struct BallThresholdOptions {
  int seeds_per_radius = 5;
  int vertices = 64;
  std::uint64_t seed = 1;
  int levels = 7;           // seed levels R (1 - 2^-l), l = 1..levels
  int bisection_steps = 60;
  int refine_steps = 0;     // bisection on the radius after the first hit
  FlowPolicy flow;
};

struct SeedOutcome {
  double radius = 0.0;
  int seed_id = 0;
  double level = 0.0;    // last level flowed for this seed
  std::string verdict;   // verdict of that flow
  bool success = false;  // converged inside the ball
  int flows = 0;
};

struct BallThresholdResult {
  std::vector<double> radii;  // radii actually examined
  std::vector<SeedOutcome> outcomes;
  bool found = false;
  double threshold = 0.0;
  double normalized = 0.0;  // threshold / diameter when the diameter is known
  int seed_count = 0;
};

BallThresholdResult ball_threshold_experiment(const MetricFamily& family, const Ball& center,
                                              const std::vector<double>& radii,
                                              const BallThresholdOptions& opts);

}  // namespace minsub
