#pragma once

// One-dimensional quadrature on top of Boost.Math, with convergence checks
// that raise NumericError instead of returning a silently poor estimate, plus
// integration over the unit sphere for d <= 3.

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/quadrature/trapezoidal.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

#include "levylab/errors.hpp"
#include "levylab/state.hpp"

namespace levylab {

/// Acceptance rule for an integral: |error| <= abs + rel * |value|.
struct Tolerance {
  double abs = 1e-9;
  double rel = 1e-7;

  bool accepts(double value, double error) const { return error <= abs + rel * std::abs(value); }
  Tolerance scaled(double factor) const { return {abs * factor, rel * factor}; }
};

namespace detail {

[[noreturn]] inline void quadrature_failure(const char* where, double value, double error, const Tolerance& tol) {
  std::ostringstream msg;
  msg << where << ": quadrature did not converge (estimate " << value << ", error estimate " << error
      << ", tolerance " << tol.abs << " abs + " << tol.rel << " rel)";
  throw NumericError(msg.str(), value, error);
}

inline void check_finite(const char* where, double value, double error) {
  if (!std::isfinite(value)) {
    throw NumericError(std::string(where) + ": integral is not finite", value, error);
  }
}

}  // namespace detail

/// Adaptive Gauss-Kronrod (15/31) on a finite interval. Its error estimate is
/// the Gauss/Kronrod difference, which overstates the error badly near
/// integrable endpoint singularities; those cases are retried with tanh-sinh.
inline double integrate(const std::function<double(double)>& f, double lo, double hi, const Tolerance& tol = {}) {
  if (lo == hi) return 0.0;
  double error = 0.0;
  double l1 = 0.0;
  // Refine only as far as the caller's tolerance needs, with a safety factor.
  const double goal = std::max(0.01 * tol.rel, 1e-15);
  const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 18, goal, &error, &l1);
  detail::check_finite("integrate", value, error);
  if (tol.accepts(value, error)) return value;

  thread_local boost::math::quadrature::tanh_sinh<double> fallback(18);
  double ts_error = 0.0;
  double ts_l1 = 0.0;
  const double ts_value = fallback.integrate(f, lo, hi, goal, &ts_error, &ts_l1);
  if (std::isfinite(ts_value) && tol.accepts(ts_value, ts_error)) return ts_value;
  detail::quadrature_failure("integrate", value, std::min(error, ts_error), tol);
}

/// Integral over [0, inf) of a function decaying at least exponentially
/// (as produced by the logarithmic substitutions in the measure integrals).
inline double integrate_half_line(const std::function<double(double)>& f, const Tolerance& tol = {}) {
  thread_local boost::math::quadrature::exp_sinh<double> integrator;
  double error = 0.0;
  double l1 = 0.0;
  const double value = integrator.integrate(f, 1e-12, &error, &l1);
  detail::check_finite("integrate_half_line", value, error);
  if (!tol.accepts(value, error)) detail::quadrature_failure("integrate_half_line", value, error, tol);
  return value;
}

/// Trapezoid rule for smooth periodic integrands (spectrally accurate).
inline double integrate_periodic(const std::function<double(double)>& f, double lo, double hi, const Tolerance& tol = {}) {
  double error = 0.0;
  double l1 = 0.0;
  const double value = boost::math::quadrature::trapezoidal(f, lo, hi, 1e-13, 16, &error, &l1);
  detail::check_finite("integrate_periodic", value, error);
  if (!tol.accepts(value, error)) detail::quadrature_failure("integrate_periodic", value, error, tol);
  return value;
}

/// Surface measure S_{d-1} = 2 pi^{d/2} / Gamma(d/2) of the unit sphere in R^d.
/// For d = 1 this is the counting measure of {-1, +1}, i.e. 2.
inline double sphere_area(std::size_t dim) {
  if (dim == 0) throw ValidationError("sphere_area: dimension must be >= 1");
  const double half = 0.5 * static_cast<double>(dim);
  return std::exp(std::log(2.0) + half * std::log(std::numbers::pi) - std::lgamma(half));
}

inline constexpr std::size_t kMaxQuadratureDim = 3;

/// Integral of g over the unit sphere S^{d-1} against surface measure.
inline double sphere_integral(std::size_t dim, const std::function<double(const Point&)>& g, const Tolerance& tol = {}) {
  switch (dim) {
    case 1:
      return g(point1(1.0)) + g(point1(-1.0));
    case 2: {
      Point theta(2);
      return integrate_periodic(
          [&](double phi) {
            theta << std::cos(phi), std::sin(phi);
            return g(theta);
          },
          0.0, 2.0 * std::numbers::pi, tol);
    }
    case 3: {
      Point theta(3);
      return integrate(
          [&](double polar) {
            const double s = std::sin(polar);
            const double c = std::cos(polar);
            return s * integrate_periodic(
                           [&](double phi) {
                             theta << s * std::cos(phi), s * std::sin(phi), c;
                             return g(theta);
                           },
                           0.0, 2.0 * std::numbers::pi, tol);
          },
          0.0, std::numbers::pi, tol);
    }
    default:
      throw ValidationError("sphere_integral: quadrature is implemented for d <= 3 only (got d = " +
                            std::to_string(dim) + ")");
  }
}

}  // namespace levylab
