#pragma once

// Reference computations that share no code with the library: closed forms,
// series, and brute-force quadrature. Tests freeze the values these produce
// and also re-check the frozen literals against them.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

// Surface area of the unit sphere in R^d for d = 1..4 from the textbook table.
inline double sphere_area(int d) {
  switch (d) {
    case 1: return 2.0;
    case 2: return 2.0 * std::numbers::pi;
    case 3: return 4.0 * std::numbers::pi;
    case 4: return 2.0 * std::numbers::pi * std::numbers::pi;
    default: return std::nan("");
  }
}

// nu(|h| > r) for c |h|^{-d-alpha}: integrate c S r'^{-1-alpha} dr' from r to infinity.
inline double stable_tail(double c, double alpha, int d, double r) {
  return c * sphere_area(d) * std::pow(r, -alpha) / alpha;
}

// int_{|h| <= r} |h|^2 c |h|^{-d-alpha} dh.
inline double stable_second_moment(double c, double alpha, int d, double r) {
  return c * sphere_area(d) * std::pow(r, 2.0 - alpha) / (2.0 - alpha);
}

// int_R chi1(h)^2 c |h|^{-1-alpha} dh = c (pi alpha / 2) / sin(pi alpha / 2), via a Beta integral.
inline double stable_chi1_square_integral(double c, double alpha) {
  const double x = 0.5 * std::numbers::pi * alpha;
  return c * x / std::sin(x);
}

// P(sup_{s <= t} |B_s| >= a) from the eigenfunction series of the exit time
// of (-a, a): P(sup < a) = (4/pi) sum_k (-1)^k/(2k+1) exp(-(2k+1)^2 pi^2 t / (8 a^2)).
inline double brownian_exit_probability(double a, double t) {
  double stay = 0.0;
  for (int k = 0; k < 200; ++k) {
    const double m = 2.0 * k + 1.0;
    stay += (k % 2 == 0 ? 1.0 : -1.0) / m * std::exp(-m * m * std::numbers::pi * std::numbers::pi * t / (8.0 * a * a));
  }
  return 1.0 - 4.0 / std::numbers::pi * stay;
}

inline double normal_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)); }

// Composite Simpson rule with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double lo, double hi, int n = 20000) {
  if (n % 2 == 1) ++n;
  const double h = (hi - lo) / n;
  double sum = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) sum += (i % 2 == 1 ? 4.0 : 2.0) * f(lo + i * h);
  return sum * h / 3.0;
}

// 2 int_0^h int_0^b e^{V(a+b) - V(a+c)} dc db for h > 0 by a midpoint grid.
inline double phi_brute_force(const std::function<double(double)>& V, double a, double h, int n = 2000) {
  const double step = h / n;
  double total = 0.0;
  double inner = 0.0;  // int_0^b e^{-V(a+c)} dc, accumulated on the fly
  for (int i = 0; i < n; ++i) {
    const double b = (i + 0.5) * step;
    const double inner_mid = inner + 0.5 * step * std::exp(-V(a + b));
    total += std::exp(V(a + b)) * inner_mid * step;
    inner += step * std::exp(-V(a + b));
  }
  return 2.0 * total;
}

// Two-sample KS statistic by evaluating both empirical CDFs at every sample point.
inline double ks_brute_force(const std::vector<double>& a, const std::vector<double>& b) {
  auto cdf = [](const std::vector<double>& s, double x) {
    return static_cast<double>(std::count_if(s.begin(), s.end(), [x](double v) { return v <= x; })) /
           static_cast<double>(s.size());
  };
  double d = 0.0;
  for (double x : a) d = std::max(d, std::abs(cdf(a, x) - cdf(b, x)));
  for (double x : b) d = std::max(d, std::abs(cdf(a, x) - cdf(b, x)));
  return d;
}

// c(level) = sqrt(-ln(level / 2) / 2), the asymptotic Kolmogorov quantile.
inline double kolmogorov_quantile(double level) { return std::sqrt(-0.5 * std::log(level / 2.0)); }

// Standard error of a binomial proportion.
inline double binomial_se(double p, double n) { return std::sqrt(p * (1.0 - p) / n); }

// The bump exp(-u / (1 - u)), u = ((x - center) / radius)^2, and its first two derivatives in 1-D.
struct Bump1 {
  double center;
  double radius;
  double operator()(double x) const {
    const double u = (x - center) * (x - center) / (radius * radius);
    return u < 1.0 ? std::exp(-u / (1.0 - u)) : 0.0;
  }
  double d1(double x, double h = 1e-4) const { return ((*this)(x + h) - (*this)(x - h)) / (2.0 * h); }
  double d2(double x, double h = 1e-4) const {
    return ((*this)(x + h) - 2.0 * (*this)(x) + (*this)(x - h)) / (h * h);
  }
};

// Left-endpoint bias allowance for Brownian paths from 0 and a rate function g
// supported in [lo, hi]: the Riemann rule errs by about (ds / 2) int_0^t
// E[(1/2) g''(B_r)] dr, so C = (t / 2) sup_r |E[(1/2) g''(B_r)]|. Moving both
// derivatives onto the heat kernel, E[g''(B_r)] = int g(x) phi_r(x) (x^2 - r) / r^2 dx.
inline double brownian_residual_allowance(const std::function<double(double)>& g, double lo, double hi,
                                          double horizon) {
  double sup = 0.0;
  for (double r = 1e-3; r <= horizon + 1e-12; r += 1e-3) {
    const double moment = simpson(
        [&](double x) {
          const double kernel = std::exp(-x * x / (2.0 * r)) / std::sqrt(2.0 * std::numbers::pi * r);
          return g(x) * kernel * (x * x - r) / (r * r);
        },
        lo, hi, 4000);
    sup = std::max(sup, std::abs(0.5 * moment));
  }
  return 0.5 * horizon * sup;
}

}  // namespace oracle
