#pragma once

// Jump measures nu of Levy-type operators and the integrals against them.
//
// Atoms are stored with absolute locations (possibly the cemetery), so the
// jump seen from a base point a is h = b - a. StableLike and UserDensity are
// densities of the jump h itself and are translation covariant.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "levylab/errors.hpp"
#include "levylab/quadrature.hpp"
#include "levylab/rng.hpp"
#include "levylab/state.hpp"

namespace levylab {

struct Atom {
  std::optional<Point> location;  // nullopt: the cemetery
  double mass = 0.0;
};

struct Atoms {
  std::size_t dim = 1;
  std::vector<Atom> atoms;

  /// Atoms at a + h for the given relative jumps.
  static Atoms from_jumps(const Point& base, const std::vector<std::pair<Point, double>>& jumps) {
    Atoms out{static_cast<std::size_t>(base.size()), {}};
    for (const auto& [h, m] : jumps) out.atoms.push_back({Point(base + h), m});
    return out;
  }

  // Relative jumps seen from `base`; nullopt entries are jumps to the cemetery.
  std::vector<std::pair<std::optional<Point>, double>> jumps_from(const Point& base) const {
    std::vector<std::pair<std::optional<Point>, double>> out;
    for (const auto& atom : atoms) {
      out.emplace_back(atom.location ? std::optional<Point>(*atom.location - base) : std::nullopt, atom.mass);
    }
    return out;
  }
};

/// Centered radial density c |h|^{-d-alpha} on {|h| >= inner_radius}, plus an
/// optional killing rate (mass at the cemetery). inner_radius > 0 gives the
/// truncated measures used by the discrete stable scheme.
struct StableLike {
  std::size_t dim = 1;
  double c = 1.0;
  double alpha = 1.0;
  double inner_radius = 0.0;
  double killing = 0.0;
};

/// User-supplied density of the jump h on R^d \ {0}. `tail_sampler(tau, rng)`
/// must draw from the normalised restriction to {|h| > tau}; `tail_mass(r)`
/// is optional and replaces quadrature when given.
struct UserDensity {
  std::size_t dim = 1;
  std::function<double(const Point&)> density;
  std::function<Point(double, Rng&)> tail_sampler;
  std::function<double(double)> tail_mass;
};

class JumpMeasure {
 public:
  using Variant = std::variant<Atoms, StableLike, UserDensity>;

  JumpMeasure(Atoms a) : v_(std::move(a)) {}
  JumpMeasure(StableLike s) : v_(std::move(s)) {}
  JumpMeasure(UserDensity u) : v_(std::move(u)) {}

  static JumpMeasure zero(std::size_t dim) { return Atoms{dim, {}}; }

  const Variant& variant() const { return v_; }
  std::size_t dim() const {
    return std::visit([](const auto& m) { return m.dim; }, v_);
  }
  bool is_zero() const {
    const auto* atoms = std::get_if<Atoms>(&v_);
    return atoms != nullptr && atoms->atoms.empty();
  }
  template <typename T>
  const T* get() const {
    return std::get_if<T>(&v_);
  }

 private:
  Variant v_;
};


namespace detail {

// value * s^power evaluated in log space so that huge powers of tiny s do not
// overflow before they meet a tiny value.
inline double scaled_power(double s, double power, double value) {
  if (value == 0.0) return 0.0;
  return std::copysign(std::exp(power * std::log(s) + std::log(std::abs(value))), value);
}

// Breakpoints that agree up to rounding (relative 1e-9) are merged: a sliver
// a few ulps wide only trips the quadrature's error estimate.
inline std::vector<double> piece_edges(double lo, double hi, std::vector<double> breaks) {
  std::vector<double> edges{lo};
  std::sort(breaks.begin(), breaks.end());
  for (double b : breaks) {
    const double slack = 1e-9 * std::abs(b);
    if (b - edges.back() > slack && hi - b > slack) edges.push_back(b);
  }
  edges.push_back(hi);
  return edges;
}

}  // namespace detail

/// Integral of g(h) over lo < |h| <= hi against the absolutely continuous part
/// of nu (StableLike or UserDensity), split at `breaks` (radii where g is not
/// smooth). Pieces touching 0 or infinity use logarithmic substitutions.
///
/// Near h = 0 the StableLike path assumes g(h) = O(|h|^2) below |h| = 1e-100
/// and extrapolates quadratically there. UserDensity integrands are taken as
/// zero outside 1e-200 <= |h| <= 1e200 and wherever density * g overflows.
inline double integrate_density(const JumpMeasure& nu, const std::function<double(const Point&)>& g, double lo,
                                double hi, std::vector<double> breaks = {}, const Tolerance& tol = {}) {
  const std::size_t d = nu.dim();
  if (const auto* stable = nu.get<StableLike>()) {
    lo = std::max(lo, stable->inner_radius);
    if (!(hi > lo)) return 0.0;
    const double alpha = stable->alpha;
    const double c = stable->c;
    if (c == 0.0) return 0.0;
    auto shell = [&](double s) {
      return sphere_integral(d, [&](const Point& theta) { return g(s * theta); }, tol);
    };
    constexpr double kTiny = 1e-100;
    std::optional<double> tiny_shell;
    // c s^{-alpha} shell(s): the radial integrand after ds = s dy.
    auto y_integrand = [&](double s) -> double {
      if (s > 1e300) return 0.0;
      if (s < kTiny) {
        if (!tiny_shell) tiny_shell = shell(kTiny) / (kTiny * kTiny);
        return c * detail::scaled_power(s, 2.0 - alpha, *tiny_shell);
      }
      return c * detail::scaled_power(s, -alpha, shell(s));
    };
    double total = 0.0;
    const auto edges = detail::piece_edges(lo, hi, std::move(breaks));
    const Tolerance piece_tol = tol.scaled(1.0 / static_cast<double>(edges.size()));
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
      const double u = edges[i];
      const double v = edges[i + 1];
      if (u == 0.0 && std::isinf(v)) {
        total += integrate_half_line([&](double y) { return y_integrand(std::exp(-y)); }, piece_tol);
        total += integrate_half_line([&](double y) { return y_integrand(std::exp(y)); }, piece_tol);
      } else if (u == 0.0) {
        total += integrate_half_line([&](double y) { return y_integrand(v * std::exp(-y)); }, piece_tol);
      } else if (std::isinf(v)) {
        total += integrate_half_line([&](double y) { return y_integrand(u * std::exp(y)); }, piece_tol);
      } else {
        total += integrate([&](double s) { return c * std::pow(s, -1.0 - alpha) * shell(s); }, u, v, piece_tol);
      }
    }
    return total;
  }

  if (const auto* user = nu.get<UserDensity>()) {
    if (!(hi > lo)) return 0.0;
    if (!user->density) throw ValidationError("UserDensity: density callable is missing");
    auto radial = [&](double s) -> double {
      if (s < 1e-200 || s > 1e200) return 0.0;
      const double shell = sphere_integral(
          d,
          [&](const Point& theta) {
            const double v = user->density(s * theta) * g(s * theta);
            return std::isfinite(v) ? v : 0.0;
          },
          tol);
      const double value = std::pow(s, static_cast<double>(d) - 1.0) * shell;
      return std::isfinite(value) ? value : 0.0;
    };
    auto weighted = [&](double s) { return std::isfinite(s) ? s * radial(s) : 0.0; };
    double total = 0.0;
    const auto edges = detail::piece_edges(lo, hi, std::move(breaks));
    const Tolerance piece_tol = tol.scaled(1.0 / static_cast<double>(edges.size()));
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
      const double u = edges[i];
      const double v = edges[i + 1];
      if (u == 0.0 && std::isinf(v)) {
        total += integrate_half_line([&](double y) { return weighted(std::exp(-y)); }, piece_tol);
        total += integrate_half_line([&](double y) { return weighted(std::exp(y)); }, piece_tol);
      } else if (u == 0.0) {
        total += integrate_half_line([&](double y) { return weighted(v * std::exp(-y)); }, piece_tol);
      } else if (std::isinf(v)) {
        total += integrate_half_line([&](double y) { return weighted(u * std::exp(y)); }, piece_tol);
      } else {
        total += integrate(radial, u, v, piece_tol);
      }
    }
    return total;
  }
  return 0.0;
}

/// Integral of g against nu restricted to lo < |b - a| <= hi. `g` receives the
/// relative jump h = b - a; `g_cemetery` is the integrand's value at the
/// cemetery, which counts as infinitely far away (included iff hi is infinite).
inline double integrate_measure(const JumpMeasure& nu, const Point& base, const std::function<double(const Point&)>& g,
                                double g_cemetery, double lo, double hi, std::vector<double> breaks = {},
                                const Tolerance& tol = {}) {
  if (const auto* atoms = nu.get<Atoms>()) {
    double total = 0.0;
    for (const auto& atom : atoms->atoms) {
      if (!atom.location) {
        if (std::isinf(hi)) total += atom.mass * g_cemetery;
        continue;
      }
      const Point h = *atom.location - base;
      const double r = h.norm();
      if (r > lo && r <= hi) total += atom.mass * g(h);
    }
    return total;
  }
  double total = integrate_density(nu, g, lo, hi, std::move(breaks), tol);
  if (const auto* stable = nu.get<StableLike>(); stable && std::isinf(hi)) total += stable->killing * g_cemetery;
  return total;
}

/// nu({b : |b - a| > r}), including any mass at the cemetery.
inline double tail_mass(const JumpMeasure& nu, double r, const Point& base) {
  if (!(r > 0.0)) throw ValidationError("tail_mass: radius must be positive");
  if (const auto* stable = nu.get<StableLike>()) {
    const double radius = std::max(r, stable->inner_radius);
    return stable->c * sphere_area(stable->dim) * std::pow(radius, -stable->alpha) / stable->alpha + stable->killing;
  }
  if (const auto* user = nu.get<UserDensity>(); user && user->tail_mass) return user->tail_mass(r);
  return integrate_measure(nu, base, [](const Point&) { return 1.0; }, 1.0, r, kInfinity, {1.0});
}

inline double tail_mass(const JumpMeasure& nu, double r) { return tail_mass(nu, r, Point::Zero(static_cast<Eigen::Index>(nu.dim()))); }

/// Integral of |b - a|^2 over 0 < |b - a| <= r.
inline double truncated_second_moment(const JumpMeasure& nu, double r, const Point& base) {
  if (!(r > 0.0)) throw ValidationError("truncated_second_moment: radius must be positive");
  if (const auto* stable = nu.get<StableLike>()) {
    if (!(stable->alpha < 2.0)) {
      throw ValidationError("truncated_second_moment: divergent for alpha >= 2 (alpha = " +
                            std::to_string(stable->alpha) + ")");
    }
    if (r <= stable->inner_radius) return 0.0;
    const double p = 2.0 - stable->alpha;
    return stable->c * sphere_area(stable->dim) * (std::pow(r, p) - std::pow(stable->inner_radius, p)) / p;
  }
  return integrate_measure(nu, base, [](const Point& h) { return h.squaredNorm(); }, 0.0, 0.0, r, {1.0});
}

inline double truncated_second_moment(const JumpMeasure& nu, double r) {
  return truncated_second_moment(nu, r, Point::Zero(static_cast<Eigen::Index>(nu.dim())));
}

/// Structural checks that do not depend on a base point: positive finite atom
/// masses, alpha in (0, 2), nonnegative scale, inner radius and killing rate.
inline void check_measure_parameters(const JumpMeasure& nu) {
  const auto d = static_cast<Eigen::Index>(nu.dim());
  if (d < 1) throw ValidationError("jump measure dimension must be >= 1");
  if (const auto* atoms = nu.get<Atoms>()) {
    for (const auto& atom : atoms->atoms) {
      if (!(atom.mass > 0.0) || !std::isfinite(atom.mass)) throw ValidationError("atom masses must be finite and > 0");
      if (atom.location && atom.location->size() != d) throw ValidationError("atom location has the wrong dimension");
    }
    return;
  }
  if (const auto* stable = nu.get<StableLike>()) {
    if (!(stable->c >= 0.0) || !std::isfinite(stable->c)) throw ValidationError("stable-like scale c must be >= 0");
    if (!(stable->alpha > 0.0 && stable->alpha < 2.0)) {
      throw ValidationError("stable-like index alpha must lie in (0, 2), got " + std::to_string(stable->alpha));
    }
    if (!(stable->inner_radius >= 0.0) || !std::isfinite(stable->inner_radius)) {
      throw ValidationError("stable-like inner radius must be finite and >= 0");
    }
    if (!(stable->killing >= 0.0) || !std::isfinite(stable->killing)) throw ValidationError("killing rate must be >= 0");
    return;
  }
  if (!nu.get<UserDensity>()->density) throw ValidationError("UserDensity: density callable is missing");
}

/// Throws ValidationError when nu violates the jump-measure part of (H2(a)) at
/// the base point: bad parameters, an atom at the base point, or a density
/// whose compensated mass does not come out finite.
inline void check_measure(const JumpMeasure& nu, const Point& base) {
  if (static_cast<std::size_t>(base.size()) != nu.dim()) {
    throw ValidationError("jump measure dimension does not match the base point");
  }
  check_measure_parameters(nu);
  if (const auto* atoms = nu.get<Atoms>()) {
    for (const auto& atom : atoms->atoms) {
      if (atom.location && (*atom.location - base).norm() == 0.0) {
        throw ValidationError("jump measure charges the base point");
      }
    }
    return;
  }
  if (!nu.get<UserDensity>()) return;
  double mass = 0.0;
  try {
    mass = truncated_second_moment(nu, 1.0, base) + tail_mass(nu, 1.0, base);
  } catch (const NumericError& e) {
    throw ValidationError(std::string("UserDensity: compensated mass is not finite: ") + e.what());
  }
  if (!std::isfinite(mass) || mass < 0.0) throw ValidationError("UserDensity: compensated mass is not finite");
}

}  // namespace levylab
