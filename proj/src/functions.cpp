#include "minsub/functions.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_interp.h>

#include <cmath>
#include <limits>

#include "minsub/errors.hpp"
#include "minsub/types.hpp"

namespace minsub {

struct ScalarFunction::SplineData {
  std::vector<double> x, y;
  gsl_interp* interp = nullptr;
  ~SplineData() {
    if (interp) gsl_interp_free(interp);
  }
};

namespace {

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) fail(ErrorCode::InvalidParams, std::string(what) + " must be finite");
}

// GSL aborts on errors by default; the library reports through return codes.
void disable_gsl_abort() {
  static const bool once = [] {
    gsl_set_error_handler_off();
    return true;
  }();
  (void)once;
}

}  // namespace

ScalarFunction::ScalarFunction() = default;

ScalarFunction ScalarFunction::constant(double c) {
  check_finite(c, "constant");
  ScalarFunction f;
  f.kind_ = Kind::Constant;
  f.a_ = c;
  return f;
}

ScalarFunction ScalarFunction::affine(double slope, double intercept) {
  check_finite(slope, "slope");
  check_finite(intercept, "intercept");
  ScalarFunction f;
  f.kind_ = Kind::Affine;
  f.a_ = slope;
  f.b_ = intercept;
  return f;
}

ScalarFunction ScalarFunction::power(double scale, double exponent, double shift, double offset) {
  check_finite(scale, "scale");
  check_finite(exponent, "exponent");
  check_finite(shift, "shift");
  check_finite(offset, "offset");
  if (exponent < 0.0) fail(ErrorCode::InvalidParams, "power exponent must be >= 0");
  ScalarFunction f;
  f.kind_ = Kind::Power;
  f.a_ = scale;
  f.b_ = exponent;
  f.c_ = shift;
  f.d_ = offset;
  return f;
}

ScalarFunction ScalarFunction::exp(double scale, double rate) {
  check_finite(scale, "scale");
  check_finite(rate, "rate");
  ScalarFunction f;
  f.kind_ = Kind::Exp;
  f.a_ = scale;
  f.b_ = rate;
  return f;
}

ScalarFunction ScalarFunction::cosh(double scale, double rate, double shift) {
  check_finite(scale, "scale");
  check_finite(rate, "rate");
  check_finite(shift, "shift");
  ScalarFunction f;
  f.kind_ = Kind::Cosh;
  f.a_ = scale;
  f.b_ = rate;
  f.c_ = shift;
  return f;
}

ScalarFunction ScalarFunction::sinh(double scale, double rate) {
  check_finite(scale, "scale");
  check_finite(rate, "rate");
  ScalarFunction f;
  f.kind_ = Kind::Sinh;
  f.a_ = scale;
  f.b_ = rate;
  return f;
}

ScalarFunction ScalarFunction::sin(double scale, double rate, double phase, double offset) {
  check_finite(scale, "scale");
  check_finite(rate, "rate");
  check_finite(phase, "phase");
  check_finite(offset, "offset");
  ScalarFunction f;
  f.kind_ = Kind::Sin;
  f.a_ = scale;
  f.b_ = rate;
  f.c_ = phase;
  f.d_ = offset;
  return f;
}

ScalarFunction ScalarFunction::spline(std::vector<double> knots, std::vector<double> values) {
  disable_gsl_abort();
  if (knots.size() != values.size())
    fail(ErrorCode::InvalidParams, "spline knots and values differ in length");
  if (knots.size() < 3) fail(ErrorCode::InvalidParams, "spline needs at least 3 knots");
  for (std::size_t i = 0; i < knots.size(); ++i) {
    check_finite(knots[i], "spline knot");
    check_finite(values[i], "spline value");
    if (i > 0 && !(knots[i] > knots[i - 1]))
      fail(ErrorCode::InvalidParams, "spline knots must be strictly increasing");
  }
  auto data = std::make_shared<SplineData>();
  data->x = std::move(knots);
  data->y = std::move(values);
  data->interp = gsl_interp_alloc(gsl_interp_cspline, data->x.size());
  if (!data->interp ||
      gsl_interp_init(data->interp, data->x.data(), data->y.data(), data->x.size()) != GSL_SUCCESS)
    fail(ErrorCode::InvalidParams, "spline initialisation failed");
  ScalarFunction f;
  f.kind_ = Kind::Spline;
  f.spline_ = std::move(data);
  return f;
}

ScalarFunction ScalarFunction::sum(std::vector<ScalarFunction> terms) {
  if (terms.empty()) fail(ErrorCode::InvalidParams, "sum needs at least one term");
  ScalarFunction f;
  f.kind_ = Kind::Sum;
  f.terms_ = std::move(terms);
  return f;
}

namespace {

// max(s, 0)^p and its derivatives, with the convention 0^0 = 1.
double pos_pow(double s, double p, int order) {
  if (s <= 0.0) {
    if (order == 0 && p == 0.0) return 1.0;
    if (order == 1 && p == 1.0) return 1.0;
    if (order == 2 && p == 2.0) return 2.0;
    return 0.0;
  }
  switch (order) {
    case 0: return std::pow(s, p);
    case 1: return p == 0.0 ? 0.0 : p * std::pow(s, p - 1.0);
    default: return (p == 0.0 || p == 1.0) ? 0.0 : p * (p - 1.0) * std::pow(s, p - 2.0);
  }
}

}  // namespace

double ScalarFunction::value(double t) const {
  switch (kind_) {
    case Kind::Constant: return a_;
    case Kind::Affine: return a_ * t + b_;
    case Kind::Power: return d_ + a_ * pos_pow(t - c_, b_, 0);
    case Kind::Exp: return a_ * std::exp(b_ * t);
    case Kind::Cosh: return a_ * std::cosh(b_ * (t - c_));
    case Kind::Sinh: return a_ * std::sinh(b_ * t);
    case Kind::Sin: return d_ + a_ * std::sin(b_ * t + c_);
    case Kind::Spline: {
      double y = 0.0;
      if (gsl_interp_eval_e(spline_->interp, spline_->x.data(), spline_->y.data(), t, nullptr,
                            &y) != GSL_SUCCESS)
        fail(ErrorCode::DomainError, "spline evaluated outside its knots at t=" + format_double(t));
      return y;
    }
    case Kind::Sum: {
      double s = 0.0;
      for (const auto& term : terms_) s += term.value(t);
      return s;
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double ScalarFunction::d1(double t) const {
  switch (kind_) {
    case Kind::Constant: return 0.0;
    case Kind::Affine: return a_;
    case Kind::Power: return a_ * pos_pow(t - c_, b_, 1);
    case Kind::Exp: return a_ * b_ * std::exp(b_ * t);
    case Kind::Cosh: return a_ * b_ * std::sinh(b_ * (t - c_));
    case Kind::Sinh: return a_ * b_ * std::cosh(b_ * t);
    case Kind::Sin: return a_ * b_ * std::cos(b_ * t + c_);
    case Kind::Spline: {
      double y = 0.0;
      if (gsl_interp_eval_deriv_e(spline_->interp, spline_->x.data(), spline_->y.data(), t,
                                  nullptr, &y) != GSL_SUCCESS)
        fail(ErrorCode::DomainError, "spline evaluated outside its knots at t=" + format_double(t));
      return y;
    }
    case Kind::Sum: {
      double s = 0.0;
      for (const auto& term : terms_) s += term.d1(t);
      return s;
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double ScalarFunction::d2(double t) const {
  switch (kind_) {
    case Kind::Constant:
    case Kind::Affine: return 0.0;
    case Kind::Power: return a_ * pos_pow(t - c_, b_, 2);
    case Kind::Exp: return a_ * b_ * b_ * std::exp(b_ * t);
    case Kind::Cosh: return a_ * b_ * b_ * std::cosh(b_ * (t - c_));
    case Kind::Sinh: return a_ * b_ * b_ * std::sinh(b_ * t);
    case Kind::Sin: return -a_ * b_ * b_ * std::sin(b_ * t + c_);
    case Kind::Spline: {
      double y = 0.0;
      if (gsl_interp_eval_deriv2_e(spline_->interp, spline_->x.data(), spline_->y.data(), t,
                                   nullptr, &y) != GSL_SUCCESS)
        fail(ErrorCode::DomainError, "spline evaluated outside its knots at t=" + format_double(t));
      return y;
    }
    case Kind::Sum: {
      double s = 0.0;
      for (const auto& term : terms_) s += term.d2(t);
      return s;
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double ScalarFunction::lower_bound() const {
  if (kind_ == Kind::Spline) return spline_->x.front();
  double lo = -std::numeric_limits<double>::infinity();
  for (const auto& term : terms_) lo = std::max(lo, term.lower_bound());
  return lo;
}

double ScalarFunction::upper_bound() const {
  if (kind_ == Kind::Spline) return spline_->x.back();
  double hi = std::numeric_limits<double>::infinity();
  for (const auto& term : terms_) hi = std::min(hi, term.upper_bound());
  return hi;
}

std::string ScalarFunction::describe() const {
  auto f = [](double v) { return format_double(v); };
  switch (kind_) {
    case Kind::Constant: return "constant(" + f(a_) + ")";
    case Kind::Affine: return "affine(" + f(a_) + "," + f(b_) + ")";
    case Kind::Power:
      return "power(" + f(a_) + "," + f(b_) + "," + f(c_) + "," + f(d_) + ")";
    case Kind::Exp: return "exp(" + f(a_) + "," + f(b_) + ")";
    case Kind::Cosh: return "cosh(" + f(a_) + "," + f(b_) + "," + f(c_) + ")";
    case Kind::Sinh: return "sinh(" + f(a_) + "," + f(b_) + ")";
    case Kind::Sin: return "sin(" + f(a_) + "," + f(b_) + "," + f(c_) + "," + f(d_) + ")";
    case Kind::Spline: return "spline(" + std::to_string(spline_->x.size()) + " knots)";
    case Kind::Sum: {
      std::string s = "sum(";
      for (std::size_t i = 0; i < terms_.size(); ++i) s += (i ? "," : "") + terms_[i].describe();
      return s + ")";
    }
  }
  return "?";
}

}  // namespace minsub
