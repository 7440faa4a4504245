#pragma once

// Levy triplets (drift, diffusion, jump measure), compensation functions and
// state-dependent coefficient fields, with sampled checks of the standing
// hypotheses on the compensation function and the coefficients.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "levylab/errors.hpp"
#include "levylab/measure.hpp"
#include "levylab/rng.hpp"
#include "levylab/state.hpp"

namespace levylab {

/// Compensation function chi(a, b), with chi(a, cemetery) = 0 for the built-in kinds.
class CompensationFunction {
 public:
  enum class Kind { Chi1, Chi2, Custom };
  // Custom callables receive the cemetery as std::nullopt.
  using Callable = std::function<Point(const Point& a, const std::optional<Point>& b)>;

  static CompensationFunction chi1() { return CompensationFunction(Kind::Chi1, {}); }
  static CompensationFunction chi2() { return CompensationFunction(Kind::Chi2, {}); }
  static CompensationFunction custom(Callable fn, std::string name = "custom") {
    if (!fn) throw ValidationError("custom compensation function is empty");
    CompensationFunction chi(Kind::Custom, std::move(fn));
    chi.name_ = std::move(name);
    return chi;
  }

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }

  /// chi(a, a + h) for a jump h.
  Point of_jump(const Point& a, const Point& h) const {
    switch (kind_) {
      case Kind::Chi1:
        return h / (1.0 + h.squaredNorm());
      case Kind::Chi2:
        return h.norm() < 1.0 ? Point(h) : Point(Point::Zero(h.size()));
      case Kind::Custom:
        break;
    }
    return fn_(a, std::optional<Point>(a + h));
  }

  Point operator()(const Point& a, const State& b) const {
    if (b.is_cemetery()) return kind_ == Kind::Custom ? fn_(a, std::nullopt) : Point(Point::Zero(a.size()));
    return of_jump(a, b.point() - a);
  }

  // Radii at which chi(a, a + h) is not smooth in h; quadrature splits there.
  std::vector<double> breakpoints() const {
    if (kind_ == Kind::Chi2) return {1.0};
    return {};
  }

 private:
  CompensationFunction(Kind kind, Callable fn) : kind_(kind), fn_(std::move(fn)) {
    name_ = kind == Kind::Chi1 ? "chi1" : kind == Kind::Chi2 ? "chi2" : "custom";
  }

  Kind kind_;
  Callable fn_;
  std::string name_;
};

/// A Levy triplet at one base point. The constructor enforces symmetry and
/// positive semi-definiteness of gamma and the structural checks on nu.
class LevyTriplet {
 public:
  LevyTriplet(Point drift, Matrix gamma, JumpMeasure nu)
      : drift_(std::move(drift)), gamma_(std::move(gamma)), nu_(std::move(nu)) {
    check_shapes();
    check_gamma();
    check_measure_parameters(nu_);
  }

  /// Skips the gamma checks; used to build deliberately invalid operators
  /// for maximum-principle diagnostics.
  static LevyTriplet unchecked(Point drift, Matrix gamma, JumpMeasure nu) {
    LevyTriplet t(std::move(drift), std::move(gamma), std::move(nu), Unchecked{});
    t.check_shapes();
    return t;
  }

  static LevyTriplet brownian(std::size_t dim) {
    const auto d = static_cast<Eigen::Index>(dim);
    return {Point::Zero(d), Matrix::Identity(d, d), JumpMeasure::zero(dim)};
  }

  std::size_t dim() const { return static_cast<std::size_t>(drift_.size()); }
  const Point& drift() const { return drift_; }
  const Matrix& gamma() const { return gamma_; }
  const JumpMeasure& nu() const { return nu_; }

 private:
  struct Unchecked {};
  LevyTriplet(Point drift, Matrix gamma, JumpMeasure nu, Unchecked)
      : drift_(std::move(drift)), gamma_(std::move(gamma)), nu_(std::move(nu)) {}

  void check_shapes() const {
    const auto d = drift_.size();
    if (d < 1) throw ValidationError("triplet dimension must be >= 1");
    if (gamma_.rows() != d || gamma_.cols() != d) throw ValidationError("gamma must be a d x d matrix");
    if (nu_.dim() != static_cast<std::size_t>(d)) throw ValidationError("jump measure dimension does not match drift");
    if (!drift_.allFinite() || !gamma_.allFinite()) throw ValidationError("triplet coefficients must be finite");
  }

  void check_gamma() const {
    const double scale = gamma_.cwiseAbs().maxCoeff();
    if (scale == 0.0) return;
    const double asym = (gamma_ - gamma_.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * scale) {
      throw ValidationError("gamma is not symmetric (max asymmetry " + std::to_string(asym) + ")");
    }
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(gamma_, Eigen::EigenvaluesOnly);
    const double norm = eig.eigenvalues().cwiseAbs().maxCoeff();
    const double smallest = eig.eigenvalues().minCoeff();
    if (smallest < -1e-10 * norm) {
      throw ValidationError("gamma is not positive semi-definite (smallest eigenvalue " + std::to_string(smallest) +
                            ")");
    }
  }

  Point drift_;
  Matrix gamma_;
  JumpMeasure nu_;
};

/// a -> LevyTriplet, total on R^d.
class TripletField {
 public:
  using Fn = std::function<LevyTriplet(const Point&)>;

  TripletField(std::size_t dim, Fn fn, bool claimed_continuous = true)
      : dim_(dim), fn_(std::move(fn)), claimed_continuous_(claimed_continuous) {
    if (!fn_) throw ValidationError("triplet field callable is empty");
  }

  static TripletField constant(LevyTriplet triplet) {
    const std::size_t d = triplet.dim();
    TripletField field(d, [t = std::move(triplet)](const Point&) { return t; });
    field.constant_ = true;
    return field;
  }

  std::size_t dim() const { return dim_; }
  bool claimed_continuous() const { return claimed_continuous_; }
  bool is_constant() const { return constant_; }

  LevyTriplet operator()(const Point& a) const {
    if (static_cast<std::size_t>(a.size()) != dim_) throw ValidationError("triplet field evaluated at wrong dimension");
    return fn_(a);
  }

 private:
  std::size_t dim_;
  Fn fn_;
  bool claimed_continuous_;
  bool constant_ = false;
};

struct HypothesisCheck {
  bool passed = true;
  double constant = 0.0;  // H1: estimated C_K; H3: estimated continuity modulus
  std::vector<Point> violations;
  std::vector<std::string> messages;

  void fail(const Point& at, std::string message) {
    passed = false;
    if (violations.size() < kMaxRecorded) {
      violations.push_back(at);
      messages.push_back(std::move(message));
    }
  }
  static constexpr std::size_t kMaxRecorded = 32;
};

struct HypothesisReport {
  HypothesisCheck h1;  // chi bounded and second-order consistent on K
  HypothesisCheck h2;  // triplet valid at every sampled base point
  HypothesisCheck h3;  // chi(a, .) continuous nu(a)-almost everywhere
  double chi_sup = 0.0;
  bool all_passed() const { return h1.passed && h2.passed && h3.passed; }
};

namespace detail {

inline Point uniform_in_box(const Box& box, Rng& rng) {
  Point x(box.lo.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * rng.uniform();
  return x;
}

inline Point random_direction(Eigen::Index d, Rng& rng) {
  Point u(d);
  for (;;) {
    for (Eigen::Index i = 0; i < d; ++i) u[i] = rng.normal();
    const double n = u.norm();
    if (n > 0.0) return u / n;
  }
}

}  // namespace detail

/// Sampled check of the three standing hypotheses over the box K.
///
/// H1 samples pairs (b, c) in K x K at jump scales from 1 down to 1e-6 and
/// estimates C_K = sup |chi(b, c) - (c - b)| / |c - b|^2; it fails when chi is
/// unbounded along far jumps or when the ratio keeps growing at small scales.
/// H2 evaluates the field at sampled points and runs the triplet and measure
/// checks there. H3 probes chi(a, .) around every atom of nu(a); densities
/// cannot charge the lower-dimensional sets where built-in chi jump.
inline HypothesisReport validate_hypotheses(const TripletField& field, const CompensationFunction& chi, const Box& K,
                                            std::size_t samples = 10000, std::uint64_t seed = 0x5eed) {
  if (K.empty()) throw ValidationError("validate_hypotheses: compact box is empty");
  if (samples < 1) throw ValidationError("validate_hypotheses: samples must be >= 1");
  if (K.dim() != field.dim()) throw ValidationError("validate_hypotheses: box dimension does not match the field");
  const auto d = static_cast<Eigen::Index>(field.dim());
  HypothesisReport report;
  Rng rng(seed, 0);

  // H1: bounded and second-order consistent.
  constexpr std::array<double, 7> kScales{1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  std::array<double, kScales.size()> ratio{};
  const std::size_t per_scale = std::max<std::size_t>(1, samples / (2 * kScales.size()));
  for (std::size_t s = 0; s < kScales.size(); ++s) {
    for (std::size_t i = 0; i < per_scale; ++i) {
      const Point b = detail::uniform_in_box(K, rng);
      const Point h = kScales[s] * rng.uniform_open_closed() * detail::random_direction(d, rng);
      const Point value = chi.of_jump(b, h);
      report.chi_sup = std::max(report.chi_sup, value.norm());
      const double r = (value - h).norm() / h.squaredNorm();
      if (!std::isfinite(r)) {
        report.h1.fail(b, "chi is not finite near b");
        continue;
      }
      ratio[s] = std::max(ratio[s], r);
    }
  }
  const double coarse = std::max({ratio[0], ratio[1], ratio[2]});
  report.h1.constant = *std::max_element(ratio.begin(), ratio.end());
  if (ratio.back() > 10.0 * coarse + 1e-6) {
    report.h1.fail(K.lo, "|chi(b,c) - (c-b)| / |c-b|^2 grows as c -> b (estimate " + std::to_string(ratio.back()) +
                             " at scale 1e-6 vs " + std::to_string(coarse) + " at scale >= 1e-2)");
  }
  double near_far = 0.0;
  double far_far = 0.0;
  for (std::size_t i = 0; i < per_scale; ++i) {
    const Point b = detail::uniform_in_box(K, rng);
    const Point u = detail::random_direction(d, rng);
    near_far = std::max(near_far, chi.of_jump(b, 1e2 * u).norm());
    far_far = std::max(far_far, chi.of_jump(b, 1e6 * u).norm());
  }
  report.chi_sup = std::max({report.chi_sup, near_far, far_far});
  if (!std::isfinite(far_far) || far_far > 10.0 * near_far + 1.0) {
    report.h1.fail(K.lo, "chi grows without bound along far jumps");
  }

  // H2 and H3 at sampled base points (the box centre always included).
  for (std::size_t i = 0; i < samples; ++i) {
    const Point a = i == 0 ? Point(0.5 * (K.lo + K.hi)) : detail::uniform_in_box(K, rng);
    std::optional<LevyTriplet> triplet;
    try {
      triplet.emplace(field(a));
      check_measure(triplet->nu(), a);
    } catch (const ValidationError& e) {
      report.h2.fail(a, e.what());
      continue;
    }
    const auto* atoms = triplet->nu().get<Atoms>();
    if (atoms == nullptr) continue;
    for (const auto& atom : atoms->atoms) {
      if (!atom.location) continue;
      const Point h = *atom.location - a;
      const Point at = chi.of_jump(a, h);
      double modulus = 0.0;
      for (double eta : {1e-8, 1e-10}) {
        const Point u = detail::random_direction(d, rng);
        for (double sign : {1.0, -1.0}) {
          const Point radial = h.norm() > 0.0 ? Point(h / h.norm()) : u;
          modulus = std::max(modulus, (chi.of_jump(a, h + sign * eta * radial) - at).norm());
          modulus = std::max(modulus, (chi.of_jump(a, h + sign * eta * u) - at).norm());
        }
      }
      report.h3.constant = std::max(report.h3.constant, modulus);
      if (modulus > 1e-6) {
        report.h3.fail(a, "chi(a, .) is discontinuous at an atom of nu(a) (jump size " + std::to_string(modulus) + ")");
      }
    }
  }
  return report;
}

}  // namespace levylab
