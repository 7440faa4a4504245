#pragma once

// One-dimensional diffusion in a potential V, generator
//   L^V f = 1/2 e^V (e^{-V} f')',
// and its discrete scheme: from a, step to a + psi_up with probability p and
// to a - psi_down otherwise, where
//   phi(a, h) = 2 int_a^{a+h} int_a^b e^{V(b) - V(c)} dc db,
//   phi(a, psi_up) = phi(a, -psi_down) = eps^2,
//   p = int_{a - psi_down}^a e^V / int_{a - psi_down}^{a + psi_up} e^V.
// Exponential integrals are evaluated piece by piece in closed form for
// piecewise-constant and piecewise-linear potentials, with a shift that keeps
// the exponents small.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "levylab/errors.hpp"
#include "levylab/quadrature.hpp"
#include "levylab/rng.hpp"
#include "levylab/simulation.hpp"
#include "levylab/state.hpp"

namespace levylab {

class Potential {
 public:
  struct Constant {
    double value = 0.0;
  };
  /// V = values[j - first_cell] on [j * mesh, (j + 1) * mesh).
  struct PiecewiseConstant {
    double mesh = 1.0;
    long long first_cell = 0;
    std::vector<double> values;
  };
  /// Linear interpolation between strictly increasing knots.
  struct Grid {
    std::vector<double> knots;
    std::vector<double> values;
  };
  struct Callable {
    std::function<double(double)> fn;
    double lo = -kInfinity;
    double hi = kInfinity;
  };
  using Variant = std::variant<Constant, PiecewiseConstant, Grid, Callable>;

  static Potential zero() { return constant(0.0); }
  static Potential constant(double value) {
    if (!std::isfinite(value)) throw ValidationError("constant potential must be finite");
    return Potential(Constant{value});
  }
  static Potential piecewise_constant(double mesh, long long first_cell, std::vector<double> values) {
    if (!(mesh > 0.0) || !std::isfinite(mesh)) throw ValidationError("potential mesh must be positive");
    if (values.empty()) throw ValidationError("piecewise-constant potential needs at least one cell");
    for (double v : values) {
      if (!std::isfinite(v)) throw ValidationError("potential values must be finite");
    }
    return Potential(PiecewiseConstant{mesh, first_cell, std::move(values)});
  }
  static Potential grid(std::vector<double> knots, std::vector<double> values) {
    if (knots.size() < 2 || knots.size() != values.size()) {
      throw ValidationError("grid potential needs at least two knots and one value per knot");
    }
    for (std::size_t i = 0; i < knots.size(); ++i) {
      if (!std::isfinite(knots[i]) || !std::isfinite(values[i])) throw ValidationError("grid potential must be finite");
      if (i > 0 && !(knots[i] > knots[i - 1])) throw ValidationError("grid knots must be strictly increasing");
    }
    return Potential(Grid{std::move(knots), std::move(values)});
  }
  static Potential callable(std::function<double(double)> fn, double lo = -kInfinity, double hi = kInfinity) {
    if (!fn) throw ValidationError("callable potential is empty");
    if (!(hi > lo)) throw ValidationError("callable potential domain is empty");
    return Potential(Callable{std::move(fn), lo, hi});
  }

  const Variant& variant() const { return v_; }
  template <typename T>
  const T* get() const {
    return std::get_if<T>(&v_);
  }

  double domain_lo() const {
    if (const auto* pc = get<PiecewiseConstant>()) return cell_start(pc->first_cell);
    if (const auto* g = get<Grid>()) return g->knots.front();
    if (const auto* c = get<Callable>()) return c->lo;
    return -kInfinity;
  }
  // Piecewise-constant potentials are defined on a half-open window [lo, hi).
  double domain_hi() const {
    if (const auto* pc = get<PiecewiseConstant>()) {
      return cell_start(pc->first_cell + static_cast<long long>(pc->values.size()));
    }
    if (const auto* g = get<Grid>()) return g->knots.back();
    if (const auto* c = get<Callable>()) return c->hi;
    return kInfinity;
  }
  bool contains(double x) const {
    if (get<PiecewiseConstant>() != nullptr) return x >= domain_lo() && x < domain_hi();
    return x >= domain_lo() && x <= domain_hi();
  }

  double operator()(double x) const {
    if (!contains(x)) throw RangeError("potential evaluated outside its domain at x = " + std::to_string(x));
    return std::visit(
        [&](const auto& p) -> double {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, Constant>) {
            return p.value;
          } else if constexpr (std::is_same_v<T, PiecewiseConstant>) {
            return p.values[static_cast<std::size_t>(cell_of(x) - p.first_cell)];
          } else if constexpr (std::is_same_v<T, Grid>) {
            const auto it = std::upper_bound(p.knots.begin(), p.knots.end(), x);
            const std::size_t i = std::min<std::size_t>(
                p.knots.size() - 1, static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - p.knots.begin())));
            const double w = (x - p.knots[i - 1]) / (p.knots[i] - p.knots[i - 1]);
            return p.values[i - 1] + w * (p.values[i] - p.values[i - 1]);
          } else {
            const double v = p.fn(x);
            if (!std::isfinite(v)) throw NumericError("callable potential is not finite at x = " + std::to_string(x), v);
            return v;
          }
        },
        v_);
  }

  /// Cell j with j * mesh <= x < (j + 1) * mesh (piecewise-constant only).
  long long cell_of(double x) const {
    const double mesh = std::get<PiecewiseConstant>(v_).mesh;
    auto j = static_cast<long long>(std::floor(x / mesh));
    if (x < cell_start(j)) --j;
    if (x >= cell_start(j + 1)) ++j;
    return j;
  }
  double cell_start(long long j) const { return static_cast<double>(j) * std::get<PiecewiseConstant>(v_).mesh; }

  /// Points in (lo, hi) where V jumps or has a kink.
  std::vector<double> breakpoints(double lo, double hi) const {
    std::vector<double> out;
    if (const auto* pc = get<PiecewiseConstant>()) {
      const long long first = std::max(pc->first_cell, static_cast<long long>(std::floor(lo / pc->mesh)));
      const long long last = std::min(pc->first_cell + static_cast<long long>(pc->values.size()),
                                      static_cast<long long>(std::ceil(hi / pc->mesh)));
      for (long long j = first; j <= last; ++j) {
        const double b = cell_start(j);
        if (b > lo && b < hi) out.push_back(b);
      }
    } else if (const auto* g = get<Grid>()) {
      for (double k : g->knots) {
        if (k > lo && k < hi) out.push_back(k);
      }
    }
    return out;
  }

 private:
  explicit Potential(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

namespace detail {

/// A piece of the potential along a ray from a: at distance s in
/// [start, start + length] the shifted potential is u0 + slope (s - start).
struct Piece {
  double start;
  double length;
  double u0;
  double slope;
};

/// Pieces covering distances [0, reach] from a in direction dir (+1 or -1),
/// for the non-callable variants. Stops early at the end of the domain, in
/// which case the returned coverage is shorter than `reach`.
inline std::vector<Piece> pieces_along(const Potential& V, double a, int dir, double reach, double shift) {
  std::vector<Piece> out;
  if (!(reach > 0.0)) return out;
  if (const auto* c = V.get<Potential::Constant>()) {
    out.push_back({0.0, reach, c->value - shift, 0.0});
    return out;
  }
  if (const auto* pc = V.get<Potential::PiecewiseConstant>()) {
    const long long lo_cell = pc->first_cell;
    const long long hi_cell = pc->first_cell + static_cast<long long>(pc->values.size()) - 1;
    double s = 0.0;
    if (dir > 0) {
      long long j = V.cell_of(a);
      while (s < reach && j <= hi_cell) {
        const double len = std::min(reach - s, V.cell_start(j + 1) - (a + s));
        if (len > 0.0) out.push_back({s, len, pc->values[static_cast<std::size_t>(j - lo_cell)] - shift, 0.0});
        s += std::max(len, 0.0);
        ++j;
      }
    } else {
      // Left of a the relevant cell is the one containing points just below a.
      long long j = V.cell_of(a);
      if (V.cell_start(j) == a) --j;
      while (s < reach && j >= lo_cell) {
        const double len = std::min(reach - s, (a - s) - V.cell_start(j));
        if (len > 0.0) out.push_back({s, len, pc->values[static_cast<std::size_t>(j - lo_cell)] - shift, 0.0});
        s += std::max(len, 0.0);
        --j;
      }
    }
    return out;
  }
  const auto& g = std::get<Potential::Grid>(V.variant());
  const auto& k = g.knots;
  double s = 0.0;
  double x = a;
  while (s < reach) {
    std::size_t i;  // segment [k[i-1], k[i]] in the direction of travel
    if (dir > 0) {
      if (x >= k.back()) break;
      i = static_cast<std::size_t>(std::upper_bound(k.begin(), k.end(), x) - k.begin());
      const double end = k[i];
      const double len = std::min(reach - s, end - x);
      const double slope = (g.values[i] - g.values[i - 1]) / (k[i] - k[i - 1]);
      out.push_back({s, len, V(x) - shift, slope});
      s += len;
      x = end;
    } else {
      if (x <= k.front()) break;
      i = static_cast<std::size_t>(std::lower_bound(k.begin(), k.end(), x) - k.begin());
      const double end = k[i - 1];
      const double len = std::min(reach - s, x - end);
      const double slope = -(g.values[i] - g.values[i - 1]) / (k[i] - k[i - 1]);
      out.push_back({s, len, V(x) - shift, slope});
      s += len;
      x = end;
    }
  }
  return out;
}

inline double covered(const std::vector<Piece>& pieces) {
  return pieces.empty() ? 0.0 : pieces.back().start + pieces.back().length;
}

// int_0^L e^{k x} dx, stable for small |k L|.
inline double exp_moment0(double k, double L) {
  const double z = k * L;
  if (std::abs(z) < 1e-8) return L * (1.0 + 0.5 * z);
  return L * std::expm1(z) / z;
}

// (e^z - 1 - z) / z^2, stable for small |z|.
inline double phi2(double z) {
  if (std::abs(z) < 1e-3) return 0.5 + z / 6.0 + z * z / 24.0 + z * z * z / 120.0;
  return (std::expm1(z) - z) / (z * z);
}

inline void check_finite_result(double value, const char* what) {
  if (!std::isfinite(value)) throw NumericError(std::string(what) + ": result overflows", value);
}

// phi along pieces up to distance `reach` (pieces must cover it).
inline double phi_from_pieces(const std::vector<Piece>& pieces) {
  double phi = 0.0;
  double inner = 0.0;  // int_0^s e^{-u}
  for (const auto& p : pieces) {
    const double eu = std::exp(p.u0);
    phi += 2.0 * eu * inner * exp_moment0(p.slope, p.length) + 2.0 * p.length * p.length * phi2(p.slope * p.length);
    inner += std::exp(-p.u0) * exp_moment0(-p.slope, p.length);
  }
  return phi;
}

inline double domain_reach(const Potential& V, double a, int dir) {
  return dir > 0 ? V.domain_hi() - a : a - V.domain_lo();
}

}  // namespace detail

/// log int_{a1}^{a2} e^{sign V}.
inline double log_exp_integral(const Potential& V, double a1, double a2, int sign, const Tolerance& tol = {}) {
  if (sign != 1 && sign != -1) throw ValidationError("exp_integral: sign must be +1 or -1");
  if (!(a1 <= a2)) throw ValidationError("exp_integral: need a1 <= a2");
  if (a1 == a2) return -kInfinity;
  if (!V.contains(a1) || a2 > V.domain_hi()) throw RangeError("exp_integral: interval leaves the potential's domain");
  if (const auto* c = V.get<Potential::Callable>()) {
    // Shift by the value at the midpoint; quadrature on the shifted integrand.
    const double m = sign * c->fn(0.5 * (a1 + a2));
    const double value = integrate([&](double x) { return std::exp(sign * V(x) - m); }, a1, a2, tol);
    return m + std::log(value);
  }
  const auto pieces = detail::pieces_along(V, a1, +1, a2 - a1, 0.0);
  double m = -kInfinity;
  for (const auto& p : pieces) m = std::max({m, sign * p.u0, sign * (p.u0 + p.slope * p.length)});
  double sum = 0.0;
  for (const auto& p : pieces) sum += std::exp(sign * p.u0 - m) * detail::exp_moment0(sign * p.slope, p.length);
  return m + std::log(sum);
}

/// int_{a1}^{a2} e^{sign V(b)} db.
inline double exp_integral(const Potential& V, double a1, double a2, int sign, const Tolerance& tol = {}) {
  const double log_value = log_exp_integral(V, a1, a2, sign, tol);
  const double value = std::exp(log_value);
  if (!std::isfinite(value)) {
    throw NumericError("exp_integral: integral overflows (log value " + std::to_string(log_value) + ")", log_value);
  }
  return value;
}

/// phi(a, h) = 2 int_a^{a+h} int_a^b e^{V(b) - V(c)} dc db >= 0 (h of either sign).
inline double phi_eval(const Potential& V, double a, double h, const Tolerance& tol = {}) {
  if (h == 0.0) return 0.0;
  const int dir = h > 0.0 ? 1 : -1;
  const double reach = std::abs(h);
  if (!V.contains(a) || reach > detail::domain_reach(V, a, dir)) {
    throw RangeError("phi_eval: [a, a + h] leaves the potential's domain");
  }
  if (V.get<Potential::Callable>() != nullptr) {
    const double va = V(a);
    auto u = [&](double s) { return V(a + dir * s) - va; };
    const double value = 2.0 * integrate(
                                   [&](double s) {
                                     if (s == 0.0) return 0.0;
                                     const double inner =
                                         integrate([&](double r) { return std::exp(-u(r)); }, 0.0, s, tol.scaled(0.1));
                                     return std::exp(u(s)) * inner;
                                   },
                                   0.0, reach, tol);
    detail::check_finite_result(value, "phi_eval");
    return value;
  }
  const double value = detail::phi_from_pieces(detail::pieces_along(V, a, dir, reach, V(a)));
  detail::check_finite_result(value, "phi_eval");
  return value;
}

enum class Side { Up, Down };

struct PsiOptions {
  double relative_tolerance = 1e-12;  // on psi, relative to eps
  double cap_factor = 1024.0;         // bracket may grow to cap_factor * eps
};

namespace detail {

// Exact solution for pieces of constant potential: on such a piece phi is
// quadratic in the distance travelled.
inline std::optional<double> psi_piecewise_flat(const std::vector<Piece>& pieces, double target) {
  double phi = 0.0;
  double inner = 0.0;
  for (const auto& p : pieces) {
    const double b = std::exp(p.u0) * inner;
    const double end = phi + 2.0 * b * p.length + p.length * p.length;
    if (end >= target) {
      const double r = target - phi;
      return p.start + r / (b + std::sqrt(b * b + r));
    }
    phi = end;
    inner += std::exp(-p.u0) * p.length;
  }
  return std::nullopt;
}

}  // namespace detail

/// The step psi > 0 with phi(a, +psi) = eps^2 (Up) or phi(a, -psi) = eps^2 (Down).
///
/// Constant and piecewise-constant potentials are solved exactly piece by
/// piece. Other potentials use bisection on [0, 2 eps], doubling the bracket
/// up to the cap when phi has not reached eps^2.
inline double psi_solve(const Potential& V, double a, double eps, Side side, const PsiOptions& options = {}) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ValidationError("psi_solve: eps must be positive");
  const int dir = side == Side::Up ? 1 : -1;
  const double target = eps * eps;
  const double cap = options.cap_factor * eps;
  if (V.get<Potential::Constant>() != nullptr) return eps;
  if (!V.contains(a)) throw RangeError("psi_solve: a = " + std::to_string(a) + " is outside the potential's domain");
  if (V.get<Potential::PiecewiseConstant>() != nullptr) {
    const double limit = std::min(cap, detail::domain_reach(V, a, dir));
    for (double reach = std::min(4.0 * eps, limit);; reach = std::min(2.0 * reach, limit)) {
      const auto psi = detail::psi_piecewise_flat(detail::pieces_along(V, a, dir, reach, V(a)), target);
      if (psi) return *psi;
      if (reach >= limit) break;
    }
    if (limit < cap) throw RangeError("psi_solve: the step leaves the potential's domain");
    throw NumericError("psi_solve: bracket exceeded the cap " + std::to_string(cap), cap);
  }

  double lo = 0.0;
  double hi = 2.0 * eps;
  const double limit = detail::domain_reach(V, a, dir);
  for (;;) {
    if (hi > limit) {
      if (phi_eval(V, a, dir * limit) < target) throw RangeError("psi_solve: the step leaves the potential's domain");
      hi = limit;
      break;
    }
    if (phi_eval(V, a, dir * hi) >= target) break;
    lo = hi;
    hi *= 2.0;
    if (hi > cap) {
      throw NumericError("psi_solve: bracket exceeded the cap " + std::to_string(cap) + " at a = " + std::to_string(a),
                         lo);
    }
  }
  const double tol = options.relative_tolerance * eps;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double value = phi_eval(V, a, dir * mid);
    if (value == target) return mid;
    (value < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// p = int_{a - psi_down}^a e^V / int_{a - psi_down}^{a + psi_up} e^V, in (0, 1).
inline double p_eval(const Potential& V, double a, double psi_up, double psi_down, const Tolerance& tol = {}) {
  if (!(psi_up > 0.0) || !(psi_down > 0.0)) throw ValidationError("p_eval: step sizes must be positive");
  if (V.get<Potential::Constant>() != nullptr) return psi_down / (psi_up + psi_down);
  const double down = log_exp_integral(V, a - psi_down, a, +1, tol);
  const double up = log_exp_integral(V, a, a + psi_up, +1, tol);
  return 1.0 / (1.0 + std::exp(up - down));
}

struct PotentialStep {
  double psi_up;
  double psi_down;
  double p;
};

inline PotentialStep potential_step(const Potential& V, double a, double eps, const PsiOptions& options = {}) {
  const double up = psi_solve(V, a, eps, Side::Up, options);
  const double down = psi_solve(V, a, eps, Side::Down, options);
  return {up, down, p_eval(V, a, up, down)};
}

/// ceil(T / eps^2) steps per path, output t -> X_{floor(t / eps^2)}. Leaving
/// the potential's domain sends the path to the cemetery. For piecewise-constant
/// potentials, positions within 1e-9 mesh of a cell boundary are snapped onto it.
inline PathBatch potential_chain_simulate(const Potential& V, const StartSpec& start, double eps, double horizon,
                                          const SimConfig& config, const PsiOptions& options = {}) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ValidationError("potential_chain_simulate: eps must be positive");
  if (start.dim != 1) throw ValidationError("potential_chain_simulate: potentials are one-dimensional");
  return simulate_chain(start, eps * eps, horizon, config, [&] {
    return [&V, eps, options](const Point& x, Rng& rng) -> std::optional<Point> {
      const double a = x[0];
      const double u = rng.uniform();
      PotentialStep s{};
      try {
        s = potential_step(V, a, eps, options);
      } catch (const RangeError&) {
        return std::nullopt;
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (path at x = " + std::to_string(a) + ")", e.estimate(),
                           e.error_estimate());
      }
      double next = u < s.p ? a + s.psi_up : a - s.psi_down;
      if (const auto* pc = V.get<Potential::PiecewiseConstant>()) {
        // Rounding leaves a lattice-started chain a few ulps off the cell
        // boundaries, and each step multiplies that offset by up to e^{|q|}.
        const double cells = next / pc->mesh;
        const double nearest = std::round(cells);
        if (std::abs(cells - nearest) < 1e-9) next = V.cell_start(static_cast<long long>(nearest));
      }
      return point1(next);
    };
  });
}

/// The function f with f(0) = f0 and (e^{-V} f')(0) = s0 solving L^V f = g:
///   f(x) = f0 + int_0^x e^{V(b)} (s0 + 2 int_0^b e^{-V(c)} g(c) dc) db.
/// Evaluation is by nested quadrature split at the potential's breakpoints.
inline std::function<double(double)> transport_test_function(const Potential& V, double f0, double s0,
                                                             std::function<double(double)> g, double lo, double hi,
                                                             const Tolerance& tol = {1e-10, 1e-9}) {
  if (!(lo <= 0.0 && 0.0 <= hi)) throw ValidationError("transport_test_function: the interval must contain 0");
  if (!g) throw ValidationError("transport_test_function: target g is empty");
  if (!V.contains(lo) || hi > V.domain_hi()) throw RangeError("transport_test_function: interval leaves the domain");
  auto piecewise = [V, tol](const std::function<double(double)>& h, double from, double to) {
    const double sign = to >= from ? 1.0 : -1.0;
    const double a = std::min(from, to);
    const double b = std::max(from, to);
    auto edges = V.breakpoints(a, b);
    edges.insert(edges.begin(), a);
    edges.push_back(b);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
      const double m = 0.5 * (edges[i] + edges[i + 1]);
      total += integrate(
          [&](double x) { return h(std::clamp(x, std::nextafter(edges[i], m), std::nextafter(edges[i + 1], m))); },
          edges[i], edges[i + 1], tol);
    }
    return sign * total;
  };
  return [=](double x) {
    if (x < lo || x > hi) throw RangeError("transport_test_function: x outside the interval");
    auto inner = [&](double b) {
      return std::exp(V(b)) * (s0 + 2.0 * piecewise([&](double c) { return std::exp(-V(c)) * g(c); }, 0.0, b));
    };
    return f0 + piecewise(inner, 0.0, x);
  };
}

struct PotentialDistance {
  double window = 0.0;
  double value = 0.0;
};

/// int_{-M}^{M} max(|e^V - e^W|, |e^{-V} - e^{-W}|).
inline PotentialDistance potential_distance(const Potential& V, const Potential& W, double M,
                                            const Tolerance& tol = {}) {
  if (!(M > 0.0)) throw ValidationError("potential_distance: M must be positive");
  auto edges = V.breakpoints(-M, M);
  const auto more = W.breakpoints(-M, M);
  edges.insert(edges.end(), more.begin(), more.end());
  edges.push_back(-M);
  edges.push_back(M);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double m = 0.5 * (edges[i] + edges[i + 1]);
    total += integrate(
        [&](double x) {
          // Evaluate inside the open piece so jumps at its ends do not leak in.
          const double y = std::clamp(x, std::nextafter(edges[i], m), std::nextafter(edges[i + 1], m));
          const double v = V(y);
          const double w = W(y);
          return std::max(std::abs(std::exp(v) - std::exp(w)), std::abs(std::exp(-v) - std::exp(-w)));
        },
        edges[i], edges[i + 1], tol);
  }
  return {M, total};
}

/// Both exponential integrals of V over [lo, hi] are finite (the local
/// integrability requirement on a window).
inline bool locally_integrable(const Potential& V, double lo, double hi) {
  try {
    return std::isfinite(exp_integral(V, lo, hi, +1)) && std::isfinite(exp_integral(V, lo, hi, -1));
  } catch (const NumericError&) {
    return false;
  }
}

}  // namespace levylab
