#pragma once

// Discrete scheme for symmetric stable-like operators with state-dependent
// scale c(a) and index alpha(a). From a, the chain jumps to
//
//   a + Q * (c(a) S_{d-1} / (n alpha(a) U))^{1 / alpha(a)}
//
// with Q uniform on the sphere and U uniform on (0, 1]. The jump law is the
// stable-like measure (c / n) |h|^{-d-alpha} restricted to |h| >= eps_n(a),
// which has total mass one.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "levylab/errors.hpp"
#include "levylab/measure.hpp"
#include "levylab/operator.hpp"
#include "levylab/quadrature.hpp"
#include "levylab/rng.hpp"
#include "levylab/simulation.hpp"
#include "levylab/state.hpp"
#include "levylab/triplet.hpp"

namespace levylab {

struct StableField {
  std::size_t dim = 1;
  std::function<double(const Point&)> c;
  std::function<double(const Point&)> alpha;

  static StableField constant(std::size_t dim, double c, double alpha) {
    return {dim, [c](const Point&) { return c; }, [alpha](const Point&) { return alpha; }};
  }

  // c(a) and alpha(a), validated.
  std::pair<double, double> at(const Point& a) const {
    const double ca = c(a);
    const double aa = alpha(a);
    if (!(ca >= 0.0) || !std::isfinite(ca)) throw ValidationError("stable field: c(a) must be finite and >= 0");
    if (!(aa > 0.0 && aa < 2.0)) throw ValidationError("stable field: alpha(a) must lie in (0, 2)");
    return {ca, aa};
  }
};

namespace detail {

inline void check_scale(double n) {
  if (!(n >= 1.0) || !std::isfinite(n)) throw ValidationError("stable scheme: scale n must be >= 1");
}

inline Point uniform_on_sphere(std::size_t dim, Rng& rng) {
  return random_direction(static_cast<Eigen::Index>(dim), rng);
}

}  // namespace detail

/// eps_n(a) = (c(a) S_{d-1} / (n alpha(a)))^{1 / alpha(a)}.
inline double stable_threshold(const StableField& field, const Point& a, double n) {
  detail::check_scale(n);
  const auto [c, alpha] = field.at(a);
  if (c == 0.0) throw DegenerateStateError("stable_threshold: c(a) = 0, the jump law has no mass");
  return std::pow(c * sphere_area(field.dim) / (n * alpha), 1.0 / alpha);
}

/// The jump target for given draws U in (0, 1] and unit direction Q.
inline Point stable_jump_from(const StableField& field, const Point& a, double n, double u, const Point& q) {
  if (!(u > 0.0 && u <= 1.0)) throw ValidationError("stable_jump_from: U must lie in (0, 1]");
  const auto [c, alpha] = field.at(a);
  detail::check_scale(n);
  if (c == 0.0) throw DegenerateStateError("stable_jump_from: c(a) = 0, the jump law has no mass");
  return a + q * std::pow(c * sphere_area(field.dim) / (n * alpha * u), 1.0 / alpha);
}

/// One draw of the next state from a (law mu_n(a)).
inline Point stable_jump_sample(const StableField& field, const Point& a, double n, Rng& rng) {
  const Point q = detail::uniform_on_sphere(field.dim, rng);
  return stable_jump_from(field, a, n, rng.uniform_open_closed(), q);
}

/// P(|jump| > r) = min(1, c S_{d-1} / (n alpha r^alpha)).
inline double stable_tail_probability(const StableField& field, const Point& a, double n, double r) {
  if (!(r > 0.0)) throw ValidationError("stable_tail_probability: r must be positive");
  const auto [c, alpha] = field.at(a);
  return std::min(1.0, c * sphere_area(field.dim) / (n * alpha * std::pow(r, alpha)));
}

/// ceil(nT) steps per path, output t -> Z_{floor(nt)}. States with c = 0 hold.
inline PathBatch stable_chain_simulate(const StableField& field, const StartSpec& start, double n, double horizon,
                                       const SimConfig& config) {
  detail::check_scale(n);
  if (start.dim != field.dim) throw ValidationError("stable_chain_simulate: start dimension mismatch");
  return simulate_chain(start, 1.0 / n, horizon, config, [&] {
    return [&field, n](const Point& x, Rng& rng) -> std::optional<Point> {
      const Point q = detail::uniform_on_sphere(field.dim, rng);
      const double u = rng.uniform_open_closed();
      if (field.at(x).first == 0.0) return x;
      return stable_jump_from(field, x, n, u, q);
    };
  });
}

/// The limit operator's field: a -> (0, 0, c(a) |h|^{-d-alpha(a)} dh).
inline TripletField stable_triplet_field(const StableField& field) {
  const auto d = static_cast<Eigen::Index>(field.dim);
  return TripletField(field.dim, [field, d](const Point& a) {
    const auto [c, alpha] = field.at(a);
    return LevyTriplet(Point::Zero(d), Matrix::Zero(d, d), StableLike{field.dim, c, alpha, 0.0, 0.0});
  });
}

/// The scheme rescaled by its step 1/n, as a triplet field: jumps
/// n mu_n(a) = c(a) |h|^{-d-alpha(a)} on |h| >= eps_n(a), drift n int chi d mu_n,
/// no diffusion. Convergence gaps of this field against stable_triplet_field
/// are the discrete-scheme conditions for the chain.
inline TripletField stable_scheme_field(const StableField& field, double n, const CompensationFunction& chi) {
  detail::check_scale(n);
  const auto d = static_cast<Eigen::Index>(field.dim);
  return TripletField(field.dim, [field, n, chi, d](const Point& a) {
    const auto [c, alpha] = field.at(a);
    if (c == 0.0) return LevyTriplet(Point::Zero(d), Matrix::Zero(d, d), JumpMeasure::zero(field.dim));
    const JumpMeasure nu = StableLike{field.dim, c, alpha, stable_threshold(field, a, n), 0.0};
    Point drift = Point::Zero(d);
    if (chi.kind() == CompensationFunction::Kind::Custom) {
      for (Eigen::Index i = 0; i < d; ++i) {
        drift[i] = integrate_measure(
            nu, a, [&](const Point& h) { return chi.of_jump(a, h)[i]; }, 0.0, 0.0, kInfinity, chi.breakpoints());
      }
    }
    // chi1 and chi2 are odd in h, so their integral against a radial law is 0.
    return LevyTriplet(drift, Matrix::Zero(d, d), nu);
  });
}

}  // namespace levylab
