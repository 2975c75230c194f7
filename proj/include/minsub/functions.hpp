#pragma once

#include <memory>
#include <string>
#include <vector>

namespace minsub {

// Smooth real function of one variable with two derivatives. Used for
// warping functions, Killing factors and user-tabulated profiles.
class ScalarFunction {
 public:
  enum class Kind { Constant, Affine, Power, Exp, Cosh, Sinh, Sin, Spline, Sum };

  ScalarFunction();  // constant 1

  static ScalarFunction constant(double c);
  // slope * t + intercept
  static ScalarFunction affine(double slope, double intercept);
  // offset + scale * max(t - shift, 0)^exponent
  static ScalarFunction power(double scale, double exponent, double shift = 0.0,
                              double offset = 0.0);
  // scale * exp(rate * t)
  static ScalarFunction exp(double scale = 1.0, double rate = 1.0);
  // scale * cosh(rate * (t - shift))
  static ScalarFunction cosh(double scale = 1.0, double rate = 1.0, double shift = 0.0);
  // scale * sinh(rate * t)
  static ScalarFunction sinh(double scale = 1.0, double rate = 1.0);
  // offset + scale * sin(rate * t + phase)
  static ScalarFunction sin(double scale = 1.0, double rate = 1.0, double phase = 0.0,
                            double offset = 0.0);
  // Natural cubic spline through (knots, values); needs at least 3 knots.
  static ScalarFunction spline(std::vector<double> knots, std::vector<double> values);
  static ScalarFunction sum(std::vector<ScalarFunction> terms);

  double value(double t) const;
  double d1(double t) const;
  double d2(double t) const;

  Kind kind() const { return kind_; }
  std::string describe() const;
  // Smallest and largest t where the function is defined (splines only).
  double lower_bound() const;
  double upper_bound() const;

 private:
  struct SplineData;

  Kind kind_ = Kind::Constant;
  double a_ = 1.0, b_ = 0.0, c_ = 0.0, d_ = 0.0;
  std::shared_ptr<const SplineData> spline_;
  std::vector<ScalarFunction> terms_;
};

}  // namespace minsub
