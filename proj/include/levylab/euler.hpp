#pragma once

// Euler scheme with frozen-coefficient Levy increments. From state a the chain
// moves by one increment over time dt of the Levy process whose triplet is the
// field's value at a.
//
// An increment is sampled as
//   drift_eff dt + root(gamma [+ small-jump covariance]) sqrt(dt) Z + sum of N big jumps,
// with N ~ Poisson(lambda dt), lambda = nu(|h| > tau), the big jumps drawn
// from nu restricted to |h| > tau and normalised, and
//   drift_eff = drift - int_{|h| > tau} chi dnu + int_{0 < |h| <= tau} (h - chi) dnu.
// Jumps below tau are dropped (drift-compensate mode) or replaced by a
// Gaussian with their covariance (gaussian-surrogate mode).

#include <Eigen/Eigenvalues>

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "levylab/errors.hpp"
#include "levylab/measure.hpp"
#include "levylab/rng.hpp"
#include "levylab/simulation.hpp"
#include "levylab/state.hpp"
#include "levylab/triplet.hpp"

namespace levylab {

enum class SmallJumpMode { DriftCompensate, GaussianSurrogate };

struct IncrementPlan {
  std::optional<double> tau;  // unset: chosen per triplet (see resolve_tau)
  SmallJumpMode mode = SmallJumpMode::DriftCompensate;
  double max_expected_jumps = 1e6;
};

/// Truncation radius: the plan's tau if set; otherwise 1e-3 times the typical
/// jump scale dt^{1/alpha} for stable-like measures, and 1e-3 for the rest.
inline double resolve_tau(const IncrementPlan& plan, const JumpMeasure& nu, double dt) {
  if (plan.tau) {
    if (!(*plan.tau > 0.0)) throw ValidationError("truncation radius tau must be positive");
    return *plan.tau;
  }
  if (const auto* stable = nu.get<StableLike>()) return 1e-3 * std::pow(dt, 1.0 / stable->alpha);
  return 1e-3;
}

/// Everything needed to draw increments for one triplet, step and base point.
class IncrementSampler {
 public:
  IncrementSampler(const LevyTriplet& triplet, const CompensationFunction& chi, double dt, const IncrementPlan& plan,
                   const Point& base)
      : dim_(triplet.dim()), dt_(dt), nu_(triplet.nu()), base_(base) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("increment time step must be positive");
    check_measure_parameters(nu_);
    const auto d = static_cast<Eigen::Index>(dim_);
    tau_ = resolve_tau(plan, nu_, dt);
    Matrix covariance = triplet.gamma();
    drift_ = triplet.drift();

    if (!nu_.is_zero()) {
      lambda_ = tail_mass(nu_, tau_, base_);
      if (lambda_ * dt > plan.max_expected_jumps) {
        throw NumericError("increment: expected number of big jumps " + std::to_string(lambda_ * dt) +
                               " exceeds the guard; reduce the step or raise tau",
                           lambda_ * dt, plan.max_expected_jumps);
      }
      const auto* stable = nu_.get<StableLike>();
      const bool symmetric = stable != nullptr && chi.kind() != CompensationFunction::Kind::Custom;
      if (!symmetric) {
        std::vector<double> breaks = chi.breakpoints();
        breaks.push_back(tau_);
        for (Eigen::Index i = 0; i < d; ++i) {
          drift_[i] -= integrate_measure(
              nu_, base_, [&](const Point& h) { return chi.of_jump(base_, h)[i]; }, 0.0, tau_, kInfinity, breaks);
          drift_[i] += integrate_measure(
              nu_, base_, [&](const Point& h) { return h[i] - chi.of_jump(base_, h)[i]; }, 0.0, 0.0, tau_, breaks);
        }
      }
      if (plan.mode == SmallJumpMode::GaussianSurrogate) {
        if (stable != nullptr) {
          covariance += truncated_second_moment(nu_, tau_, base_) / static_cast<double>(dim_) * Matrix::Identity(d, d);
        } else {
          for (Eigen::Index i = 0; i < d; ++i) {
            for (Eigen::Index j = i; j < d; ++j) {
              const double v = integrate_measure(
                  nu_, base_, [&](const Point& h) { return h[i] * h[j]; }, 0.0, 0.0, tau_, {});
              covariance(i, j) += v;
              if (i != j) covariance(j, i) += v;
            }
          }
        }
      }
      prepare_tail();
    }
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance);
    root_ = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    gaussian_ = covariance.cwiseAbs().maxCoeff() > 0.0;
  }

  double tau() const { return tau_; }
  double lambda() const { return lambda_; }
  const Point& effective_drift() const { return drift_; }
  const Matrix& gaussian_root() const { return root_; }

  /// One increment; nullopt when a big jump goes to the cemetery.
  std::optional<Point> sample(Rng& rng) const {
    const auto d = static_cast<Eigen::Index>(dim_);
    Point inc = drift_ * dt_;
    if (gaussian_) {
      Point z(d);
      for (Eigen::Index i = 0; i < d; ++i) z[i] = rng.normal();
      inc += std::sqrt(dt_) * (root_ * z);
    }
    if (lambda_ > 0.0) {
      const std::uint64_t count = rng.poisson(lambda_ * dt_);
      for (std::uint64_t k = 0; k < count; ++k) {
        std::optional<Point> h = big_jump(rng);
        if (!h) return std::nullopt;
        inc += *h;
      }
    }
    return inc;
  }

 private:
  void prepare_tail() {
    if (const auto* atoms = nu_.get<Atoms>()) {
      double acc = 0.0;
      for (const auto& atom : atoms->atoms) {
        std::optional<Point> h;
        if (atom.location) {
          h = *atom.location - base_;
          if (!(h->norm() > tau_)) continue;
        }
        acc += atom.mass;
        atom_jumps_.push_back(std::move(h));
        atom_cdf_.push_back(acc);
      }
      for (double& c : atom_cdf_) c /= acc;
      return;
    }
    if (const auto* user = nu_.get<UserDensity>()) {
      if (!user->tail_sampler) throw ValidationError("UserDensity: a tail sampler is required for increments");
    }
  }

  std::optional<Point> big_jump(Rng& rng) const {
    if (nu_.get<Atoms>() != nullptr) {
      const double u = rng.uniform();
      std::size_t k = 0;
      while (k + 1 < atom_cdf_.size() && atom_cdf_[k] <= u) ++k;
      return atom_jumps_[k];
    }
    if (const auto* stable = nu_.get<StableLike>()) {
      if (stable->killing > 0.0 && rng.uniform() * lambda_ < stable->killing) return std::nullopt;
      const double r = std::max(tau_, stable->inner_radius) * std::pow(rng.uniform_open_closed(), -1.0 / stable->alpha);
      return Point(r * detail::random_direction(static_cast<Eigen::Index>(dim_), rng));
    }
    return nu_.get<UserDensity>()->tail_sampler(tau_, rng);
  }

  std::size_t dim_;
  double dt_;
  JumpMeasure nu_;
  Point base_;
  double tau_ = 0.0;
  double lambda_ = 0.0;
  Point drift_;
  Matrix root_;
  bool gaussian_ = false;
  std::vector<std::optional<Point>> atom_jumps_;
  std::vector<double> atom_cdf_;
};

/// One increment of the Levy process with the given triplet over time dt,
/// seen from base point a (which locates absolute atoms).
inline std::optional<Point> levy_increment_sample(const LevyTriplet& triplet, const CompensationFunction& chi,
                                                  double dt, const IncrementPlan& plan, Rng& rng,
                                                  const std::optional<Point>& base = std::nullopt) {
  const Point a = base ? *base : Point(Point::Zero(static_cast<Eigen::Index>(triplet.dim())));
  return IncrementSampler(triplet, chi, dt, plan, a).sample(rng);
}

/// Iterates x <- x + increment(field(x)) with step eps; output t -> X_{floor(t / eps)}.
/// Constant fields are prepared once; other fields at every step.
inline PathBatch euler_chain_simulate(const TripletField& field, const CompensationFunction& chi,
                                      const StartSpec& start, double eps, double horizon, const IncrementPlan& plan,
                                      const SimConfig& config) {
  if (!(eps > 0.0)) throw ValidationError("euler_chain_simulate: step eps must be positive");
  if (start.dim != field.dim()) throw ValidationError("euler_chain_simulate: start dimension mismatch");
  // Constant fields with absolute atoms still depend on the state through b - a.
  std::shared_ptr<const IncrementSampler> shared;
  if (field.is_constant()) {
    const Point origin = Point::Zero(static_cast<Eigen::Index>(field.dim()));
    const LevyTriplet t = field(origin);
    if (t.nu().get<Atoms>() == nullptr || t.nu().is_zero()) {
      shared = std::make_shared<const IncrementSampler>(t, chi, eps, plan, origin);
    }
  }
  return simulate_chain(start, eps, horizon, config, [&] {
    return [&, shared](const Point& x, Rng& rng) -> std::optional<Point> {
      const std::optional<Point> inc =
          shared ? shared->sample(rng) : IncrementSampler(field(x), chi, eps, plan, x).sample(rng);
      if (!inc) return std::nullopt;
      return Point(x + *inc);
    };
  });
}

}  // namespace levylab
