#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <string>

namespace minsub {

// Ambient dimension never exceeds 4 (three fiber axes plus t), so all small
// vectors and forms live on the stack.
constexpr int kMaxDim = 4;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

// Uniform draw in [0, 1) from the top 53 bits. The standard distributions
// are implementation-defined, which would make outputs library-dependent.
inline double unit_draw(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

// Standard normal draw (Box-Muller).
inline double normal_draw(std::mt19937_64& g) {
  const double u = 1.0 - unit_draw(g), v = unit_draw(g);
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * 3.141592653589793 * v);
}

// Text for a vector, used in error messages.
std::string format_point(const Vec& p);

// Shortest printed form that reads back to the same double.
std::string format_double(double v);

}  // namespace minsub
