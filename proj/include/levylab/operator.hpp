#pragma once

// Evaluation of the Levy-type operator
//
//   T f(a) = 1/2 sum gamma_ij d_ij f(a) + drift . grad f(a)
//            + int (f(b) - f(a) - chi(a, b) . grad f(a)) nu(db)
//
// on smooth compactly supported test functions, together with the
// convergence-gap and maximum-principle diagnostics built on it.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "levylab/errors.hpp"
#include "levylab/measure.hpp"
#include "levylab/parallel.hpp"
#include "levylab/quadrature.hpp"
#include "levylab/rng.hpp"
#include "levylab/state.hpp"
#include "levylab/triplet.hpp"

namespace levylab {

/// A C^2 test function with explicit derivatives and a support box outside of
/// which f equals `at_cemetery` (0 for C_0 functions) and grad f vanishes.
class TestFunction {
 public:
  using Scalar = std::function<double(const Point&)>;
  using Vector = std::function<Point(const Point&)>;
  using Hess = std::function<Matrix(const Point&)>;

  TestFunction(std::string name, Scalar f, Vector grad, Hess hess, Box support, double hessian_bound,
               double at_cemetery = 0.0)
      : name_(std::move(name)),
        f_(std::move(f)),
        grad_(std::move(grad)),
        hess_(std::move(hess)),
        support_(std::move(support)),
        hessian_bound_(hessian_bound),
        at_cemetery_(at_cemetery) {
    if (!f_ || !grad_ || !hess_) throw ValidationError("test function needs value, gradient and Hessian");
    if (support_.empty()) throw ValidationError("test function support box is empty");
  }

  /// Smooth bump exp(-u / (1 - u)) with u = sum ((x - center) / radius)^2,
  /// scaled by `amplitude` and shifted by `offset` (the value at infinity and
  /// at the cemetery).
  static TestFunction bump(const Point& center, const Point& radius, double amplitude = 1.0, double offset = 0.0) {
    if (center.size() != radius.size() || !(radius.array() > 0.0).all()) {
      throw ValidationError("bump: radius must be positive in every coordinate");
    }
    const Point inv2 = radius.array().square().inverse();
    auto u_of = [center, inv2](const Point& x) { return ((x - center).array().square() * inv2.array()).sum(); };
    auto f = [=](const Point& x) {
      const double u = u_of(x);
      return u < 1.0 ? offset + amplitude * std::exp(-u / (1.0 - u)) : offset;
    };
    auto grad = [=](const Point& x) -> Point {
      const double u = u_of(x);
      if (u >= 1.0) return Point::Zero(x.size());
      const double v = 1.0 - u;
      const double value = amplitude * std::exp(-u / v);
      const Point du = 2.0 * ((x - center).array() * inv2.array()).matrix();
      return value * (-1.0 / (v * v)) * du;
    };
    auto hess = [=](const Point& x) -> Matrix {
      const auto d = x.size();
      const double u = u_of(x);
      if (u >= 1.0) return Matrix::Zero(d, d);
      const double v = 1.0 - u;
      const double value = amplitude * std::exp(-u / v);
      const double w1 = -1.0 / (v * v);
      const double w2 = -2.0 / (v * v * v);
      const Point du = 2.0 * ((x - center).array() * inv2.array()).matrix();
      Matrix h = (w2 + w1 * w1) * du * du.transpose();
      h.diagonal() += 2.0 * w1 * inv2;
      return value * h;
    };
    // sup |f''| of exp(-t^2/(1-t^2)) on [0, 1) is about 21.066 (near t = 0.78);
    // the tangential curvature f'(t)/t is smaller.
    const double bound = 21.07 * std::abs(amplitude) * inv2.maxCoeff();
    std::string name = "bump(r=" + std::to_string(radius.maxCoeff()) + ")";
    return TestFunction(std::move(name), f, grad, hess, Box{center - radius, center + radius}, bound, offset);
  }

  const std::string& name() const { return name_; }
  std::size_t dim() const { return support_.dim(); }
  const Box& support() const { return support_; }
  double hessian_bound() const { return hessian_bound_; }
  double at_cemetery() const { return at_cemetery_; }
  // Smallest half-width of the support box: the length scale of the function.
  double scale() const { return 0.5 * (support_.hi - support_.lo).minCoeff(); }

  double operator()(const Point& x) const { return f_(x); }
  double operator()(const State& s) const { return s.is_cemetery() ? at_cemetery_ : f_(s.point()); }
  Point gradient(const Point& x) const { return grad_(x); }
  Matrix hessian(const Point& x) const { return hess_(x); }

  /// Largest deviation of the supplied derivatives from central finite
  /// differences over `samples` points drawn from a box 10% wider than the support.
  double derivative_error(std::size_t samples = 200, std::uint64_t seed = 1) const {
    Rng rng(seed, 0);
    const Point pad = 0.1 * (support_.hi - support_.lo);
    const Box wide{support_.lo - pad, support_.hi + pad};
    const auto d = static_cast<Eigen::Index>(dim());
    const double step = 1e-5 * scale();
    double worst = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
      const Point x = detail::uniform_in_box(wide, rng);
      const Point g = gradient(x);
      const Matrix h = hessian(x);
      for (Eigen::Index i = 0; i < d; ++i) {
        Point e = Point::Zero(d);
        e[i] = step;
        worst = std::max(worst, std::abs((f_(x + e) - f_(x - e)) / (2.0 * step) - g[i]));
        const Point dg = (gradient(x + e) - gradient(x - e)) / (2.0 * step);
        worst = std::max(worst, (dg - h.col(i)).cwiseAbs().maxCoeff());
      }
    }
    return worst;
  }

 private:
  std::string name_;
  Scalar f_;
  Vector grad_;
  Hess hess_;
  Box support_;
  double hessian_bound_;
  double at_cemetery_;
};

/// Bumps centred at `center` with radii 2^k for k in `exponents`.
inline std::vector<TestFunction> default_test_functions(const Point& center, std::vector<int> exponents = {-1, 0, 1}) {
  std::vector<TestFunction> out;
  for (int k : exponents) {
    out.push_back(TestFunction::bump(center, Point::Constant(center.size(), std::ldexp(1.0, k))));
  }
  return out;
}

/// Bumps of radius 2^k placed beyond the +x1 face of K at distance `margin`,
/// so each vanishes on a neighbourhood of every point of K.
inline std::vector<TestFunction> default_jump_probes(const Box& K, double margin = 0.25,
                                                     std::vector<int> exponents = {-1, 0, 1}) {
  std::vector<TestFunction> out;
  const Point mid = 0.5 * (K.lo + K.hi);
  for (int k : exponents) {
    const double r = std::ldexp(1.0, k);
    Point center = mid;
    center[0] = K.hi[0] + margin + r;
    out.push_back(TestFunction::bump(center, Point::Constant(mid.size(), r)));
  }
  return out;
}

struct OperatorValue {
  double value = 0.0;
  double error = 0.0;  // bound implied by the quadrature tolerance
};

namespace detail {

inline void check_operator_inputs(const LevyTriplet& triplet, const TestFunction& f, const Point& a) {
  if (static_cast<std::size_t>(a.size()) != triplet.dim() || f.dim() != triplet.dim()) {
    throw ValidationError("apply_operator: dimension mismatch");
  }
  check_measure_parameters(triplet.nu());
  if (const auto* atoms = triplet.nu().get<Atoms>()) {
    for (const auto& atom : atoms->atoms) {
      if (atom.location && (*atom.location - a).norm() == 0.0) {
        throw ValidationError("apply_operator: jump measure charges the base point");
      }
    }
  }
}

}  // namespace detail

/// Jump part int (f(b) - f(a) - chi(a, b) . grad f(a)) nu(db), with f(cemetery)
/// given by the test function.
///
/// Below the radius 1e-4 * scale(f) the integrand is replaced by its Taylor
/// form 1/2 h^T H h + (h - chi) . grad f, which avoids cancellation; for
/// StableLike with chi1 or chi2 that inner shell is integrated in closed form.
inline double jump_integral(const JumpMeasure& nu, const CompensationFunction& chi, const TestFunction& f,
                            const Point& a, const Tolerance& tol = {}) {
  const double fa = f(a);
  const Point grad = f.gradient(a);
  auto full = [&](const Point& h) { return f(Point(a + h)) - fa - chi.of_jump(a, h).dot(grad); };
  const double at_cemetery = f.at_cemetery() - fa;

  if (nu.get<Atoms>() != nullptr) return integrate_measure(nu, a, full, at_cemetery, 0.0, kInfinity);

  const Matrix hess = f.hessian(a);
  const double inner = 1e-4 * f.scale();
  double total = 0.0;
  const auto* stable = nu.get<StableLike>();
  if (stable != nullptr && chi.kind() != CompensationFunction::Kind::Custom) {
    // Odd terms integrate to zero against a radial density.
    if (inner > stable->inner_radius) {
      const double p = 2.0 - stable->alpha;
      const double shell_moment = stable->c * sphere_area(stable->dim) *
                                  (std::pow(inner, p) - std::pow(stable->inner_radius, p)) / p;
      total += 0.5 * hess.trace() / static_cast<double>(stable->dim) * shell_moment;
    }
  } else {
    auto taylor = [&](const Point& h) { return 0.5 * h.dot(hess * h) + (h - chi.of_jump(a, h)).dot(grad); };
    total += integrate_measure(nu, a, taylor, 0.0, 0.0, inner, {}, tol.scaled(0.5));
  }
  std::vector<double> breaks = chi.breakpoints();
  breaks.push_back(f.support().distance_to(a));
  breaks.push_back(f.support().farthest_distance(a));
  // In 1-D the shell integrand is g(s) + g(-s), so the support edge on the
  // far side is a kink that the nearest/farthest distances miss.
  if (a.size() == 1) {
    for (double face : {f.support().lo[0], f.support().hi[0]}) {
      const double r = std::abs(face - a[0]);
      if (r > 0.0 && std::isfinite(r)) breaks.push_back(r);
    }
  }
  total += integrate_measure(nu, a, full, at_cemetery, inner, kInfinity, std::move(breaks), tol.scaled(0.5));
  return total;
}

/// T f(a) for the triplet at base point a.
inline OperatorValue apply_operator(const LevyTriplet& triplet, const CompensationFunction& chi, const TestFunction& f,
                                    const Point& a, const Tolerance& tol = {}) {
  detail::check_operator_inputs(triplet, f, a);
  const double local = 0.5 * (triplet.gamma().cwiseProduct(f.hessian(a))).sum() + triplet.drift().dot(f.gradient(a));
  if (triplet.nu().is_zero()) return {local, 0.0};
  const double jumps = jump_integral(triplet.nu(), chi, f, a, tol);
  const double value = local + jumps;
  return {value, tol.abs + tol.rel * std::abs(jumps)};
}

/// int (to - from)(a, b) nu(db): the drift change that keeps the operator
/// unchanged when the compensation function is switched from `from` to `to`.
inline Point compensation_drift_shift(const JumpMeasure& nu, const Point& a, const CompensationFunction& from,
                                      const CompensationFunction& to, const Tolerance& tol = {}) {
  Point shift(a.size());
  std::vector<double> breaks = from.breakpoints();
  for (double b : to.breakpoints()) breaks.push_back(b);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    shift[i] = integrate_measure(
        nu, a, [&](const Point& h) { return to.of_jump(a, h)[i] - from.of_jump(a, h)[i]; }, 0.0, 0.0, kInfinity,
        breaks, tol);
  }
  return shift;
}

/// The same triplet written for the compensation function `to`.
inline LevyTriplet switch_compensation(const LevyTriplet& triplet, const Point& a, const CompensationFunction& from,
                                       const CompensationFunction& to, const Tolerance& tol = {}) {
  return LevyTriplet::unchecked(triplet.drift() + compensation_drift_shift(triplet.nu(), a, from, to, tol),
                                triplet.gamma(), triplet.nu());
}

/// gamma_ij + int chi_i chi_j d nu at a.
inline Matrix modified_covariance(const LevyTriplet& triplet, const CompensationFunction& chi, const Point& a,
                                  const Tolerance& tol = {}) {
  const auto d = static_cast<Eigen::Index>(triplet.dim());
  Matrix out = triplet.gamma();
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i; j < d; ++j) {
      const double v = integrate_measure(
          triplet.nu(), a,
          [&](const Point& h) {
            const Point c = chi.of_jump(a, h);
            return c[i] * c[j];
          },
          0.0, 0.0, kInfinity, chi.breakpoints(), tol);
      out(i, j) += v;
      if (i != j) out(j, i) += v;
    }
  }
  return out;
}

/// Deterministic grid on K with `per_axis` points per coordinate (cell
/// midpoints), reduced so that the total stays below `max_points`.
inline std::vector<Point> box_grid(const Box& K, std::size_t per_axis = 64, std::size_t max_points = 100000) {
  const auto d = static_cast<std::size_t>(K.dim());
  while (per_axis > 1 && std::pow(static_cast<double>(per_axis), static_cast<double>(d)) > max_points) --per_axis;
  std::size_t total = 1;
  for (std::size_t i = 0; i < d; ++i) total *= per_axis;
  std::vector<Point> grid;
  grid.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    Point x(static_cast<Eigen::Index>(d));
    std::size_t rest = idx;
    for (std::size_t i = 0; i < d; ++i) {
      const auto k = static_cast<double>(rest % per_axis);
      rest /= per_axis;
      const auto ii = static_cast<Eigen::Index>(i);
      x[ii] = per_axis == 1 ? 0.5 * (K.lo[ii] + K.hi[ii])
                            : K.lo[ii] + (K.hi[ii] - K.lo[ii]) * k / static_cast<double>(per_axis - 1);
    }
    grid.push_back(std::move(x));
  }
  return grid;
}

struct ConvergenceReport {
  double drift_gap = 0.0;
  std::vector<double> jump_gap;  // one entry per test function
  Matrix carre_gap;              // d x d
};

struct GapOptions {
  std::size_t per_axis = 64;
  std::size_t max_points = 100000;
  unsigned threads = 1;
  Tolerance tol{1e-10, 1e-8};
};

/// Gaps between each field of the sequence and the limit, maximised over a
/// grid on K: drift, jump integrals of the test functions, and the modified
/// covariance gamma + int chi chi d nu.
///
/// Every test function must vanish on a neighbourhood of each grid point;
/// otherwise a PreconditionError names the function and the point.
inline std::vector<ConvergenceReport> convergence_gaps(const std::vector<TripletField>& fields,
                                                       const TripletField& limit, const CompensationFunction& chi,
                                                       const Box& K, const std::vector<TestFunction>& testfns,
                                                       const GapOptions& options = {}) {
  if (K.empty()) throw ValidationError("convergence_gaps: compact box is empty");
  const auto grid = box_grid(K, options.per_axis, options.max_points);
  for (const auto& f : testfns) {
    if (f.at_cemetery() != 0.0) {
      throw PreconditionError("convergence_gaps: test function " + f.name() + " does not vanish near the cemetery");
    }
    for (const auto& a : grid) {
      if (!(f.support().distance_to(a) > 0.0)) {
        std::string where;
        for (Eigen::Index i = 0; i < a.size(); ++i) where += (i ? ", " : "") + std::to_string(a[i]);
        throw PreconditionError("convergence_gaps: test function " + f.name() + " does not vanish near a = (" + where +
                                ")");
      }
    }
  }

  const auto d = static_cast<Eigen::Index>(limit.dim());
  struct PointValues {
    Point drift;
    std::vector<double> jumps;
    Matrix carre;
  };
  auto evaluate = [&](const TripletField& field, const Point& a) {
    const LevyTriplet t = field(a);
    PointValues v{t.drift(), {}, modified_covariance(t, chi, a, options.tol)};
    for (const auto& f : testfns) {
      const double near = f.support().distance_to(a);
      v.jumps.push_back(integrate_measure(
          t.nu(), a, [&](const Point& h) { return f(Point(a + h)); }, 0.0, 0.5 * near,
          f.support().farthest_distance(a), {near}, options.tol));
    }
    return v;
  };

  std::vector<PointValues> reference(grid.size());
  parallel_for(grid.size(), options.threads, [&](std::size_t i) { reference[i] = evaluate(limit, grid[i]); });

  std::vector<ConvergenceReport> reports;
  for (const auto& field : fields) {
    std::vector<PointValues> values(grid.size());
    parallel_for(grid.size(), options.threads, [&](std::size_t i) { values[i] = evaluate(field, grid[i]); });
    ConvergenceReport r{0.0, std::vector<double>(testfns.size(), 0.0), Matrix::Zero(d, d)};
    for (std::size_t i = 0; i < grid.size(); ++i) {
      r.drift_gap = std::max(r.drift_gap, (values[i].drift - reference[i].drift).norm());
      for (std::size_t k = 0; k < testfns.size(); ++k) {
        r.jump_gap[k] = std::max(r.jump_gap[k], std::abs(values[i].jumps[k] - reference[i].jumps[k]));
      }
      r.carre_gap = r.carre_gap.cwiseMax((values[i].carre - reference[i].carre).cwiseAbs());
    }
    reports.push_back(std::move(r));
  }
  return reports;
}

struct PmpEntry {
  std::string function;
  Point argmax;
  double max_value = 0.0;
  double operator_value = 0.0;
  bool checked = false;  // false when the maximum is negative
  bool violated = false;
};

struct PmpReport {
  std::vector<PmpEntry> entries;
  std::size_t violations = 0;
  bool passed() const { return violations == 0; }
};

namespace detail {

inline double radical_inverse(std::size_t index, unsigned base) {
  double result = 0.0;
  double scale = 1.0 / base;
  while (index > 0) {
    result += static_cast<double>(index % base) * scale;
    index /= base;
    scale /= base;
  }
  return result;
}

// Gradient ascent with backtracking from `start`, kept inside `box`.
inline Point ascend(const TestFunction& f, Point x, const Box& box) {
  double step = 0.1 * f.scale();
  double fx = f(x);
  for (int it = 0; it < 2000 && step > 1e-14 * f.scale(); ++it) {
    const Point g = f.gradient(x);
    const double gn = g.norm();
    if (gn < 1e-12) break;
    const Point trial = (x + step * g / gn).cwiseMax(box.lo).cwiseMin(box.hi);
    const double ft = f(trial);
    if (ft > fx) {
      x = trial;
      fx = ft;
      step *= 1.5;
    } else {
      step *= 0.5;
    }
  }
  return x;
}

}  // namespace detail

/// Positive maximum principle spot check: for each f, find a global maximiser
/// a0 by multi-start gradient ascent from `starts` Halton points in the
/// support; when f(a0) >= 0 the operator value there must be <= tolerance.
inline PmpReport pmp_spot_check(const TripletField& field, const CompensationFunction& chi,
                                const std::vector<TestFunction>& testfns, std::size_t starts = 32,
                                double tolerance = 1e-8) {
  if (testfns.empty()) throw ValidationError("pmp_spot_check: no test functions");
  static constexpr std::array<unsigned, 6> kPrimes{2, 3, 5, 7, 11, 13};
  PmpReport report;
  for (const auto& f : testfns) {
    const Box& box = f.support();
    const auto d = static_cast<Eigen::Index>(f.dim());
    if (static_cast<std::size_t>(d) > kPrimes.size()) throw ValidationError("pmp_spot_check: dimension too large");
    Point best = 0.5 * (box.lo + box.hi);
    double best_value = f(best);
    for (std::size_t s = 1; s <= starts; ++s) {
      Point x(d);
      for (Eigen::Index i = 0; i < d; ++i) {
        x[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * detail::radical_inverse(s, kPrimes[static_cast<std::size_t>(i)]);
      }
      x = detail::ascend(f, x, box);
      const double v = f(x);
      if (v > best_value) {
        best_value = v;
        best = x;
      }
    }
    PmpEntry entry{f.name(), best, best_value, 0.0, false, false};
    if (best_value >= 0.0) {
      const auto value = apply_operator(field(best), chi, f, best);
      entry.checked = true;
      entry.operator_value = value.value;
      entry.violated = value.value > tolerance + value.error;
      if (entry.violated) ++report.violations;
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace levylab
