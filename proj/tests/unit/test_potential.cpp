#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "levylab/diagnostics.hpp"
#include "levylab/environment.hpp"
#include "levylab/potential.hpp"
#include "support/oracles.hpp"

using namespace levylab;

namespace {

std::vector<double> random_q(std::size_t count, double scale, std::uint64_t seed) {
  Rng rng(seed, 0);
  std::vector<double> q(count);
  for (auto& v : q) v = scale * rng.normal();
  return q;
}

// A smooth potential on a window, as a Grid and as a Callable.
double smooth_v(double x) { return std::sin(2.0 * x) + 0.3 * x; }

Potential fine_grid(double lo, double hi, std::size_t knots) {
  std::vector<double> k(knots);
  std::vector<double> v(knots);
  for (std::size_t i = 0; i < knots; ++i) {
    k[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(knots - 1);
    v[i] = smooth_v(k[i]);
  }
  return Potential::grid(std::move(k), std::move(v));
}

}  // namespace

TEST(ExpIntegral, Examples) {
  EXPECT_DOUBLE_EQ(exp_integral(Potential::zero(), 0.0, 1.0, +1), 1.0);
  const auto pc = Potential::piecewise_constant(1.0, 0, {0.0, std::log(2.0)});
  EXPECT_NEAR(exp_integral(pc, 1.0, 2.0, +1), 2.0, 1e-15);
  const auto affine = Potential::grid({0.0, 1.0}, {0.0, 1.0});
  EXPECT_NEAR(exp_integral(affine, 0.0, 1.0, +1), std::numbers::e - 1.0, 1e-15);
  EXPECT_NEAR(exp_integral(affine, 0.0, 1.0, -1), 1.0 - std::exp(-1.0), 1e-15);
}

TEST(ExpIntegral, CallableAgreesWithSimpson) {
  const auto V = Potential::callable(smooth_v);
  for (int sign : {+1, -1}) {
    const double expected = oracle::simpson([&](double x) { return std::exp(sign * smooth_v(x)); }, -1.0, 2.5);
    EXPECT_NEAR(exp_integral(V, -1.0, 2.5, sign), expected, 1e-9 * expected);
  }
}

TEST(ExpIntegral, LogSpaceSurvivesHugePotentials) {
  const auto V = Potential::grid({0.0, 1.0, 2.0}, {800.0, 900.0, 800.0});
  // int_0^1 e^{800 + 100 x} dx = e^800 (e^100 - 1) / 100.
  const double expected = 800.0 + std::log(std::expm1(100.0) / 100.0);
  EXPECT_NEAR(log_exp_integral(V, 0.0, 1.0, +1), expected, 1e-12 * expected);
  EXPECT_THROW(exp_integral(V, 0.0, 1.0, +1), NumericError);
  EXPECT_NEAR(log_exp_integral(V, 0.0, 2.0, -1), -800.0 + std::log(2.0 * -std::expm1(-100.0) / 100.0), 1e-9);
}

TEST(ExpIntegral, RejectsBadIntervals) {
  const auto V = Potential::grid({0.0, 1.0}, {0.0, 1.0});
  EXPECT_THROW(exp_integral(V, 0.5, 0.2, +1), ValidationError);
  EXPECT_THROW(exp_integral(V, 0.5, 1.5, +1), RangeError);
  EXPECT_THROW(exp_integral(V, 0.0, 1.0, 2), ValidationError);
  EXPECT_EQ(exp_integral(V, 0.5, 0.5, +1), 0.0);
}

TEST(Phi, ConstantPotentialGivesSquare) {
  for (double c : {0.0, -3.0, 7.5}) {
    const auto V = Potential::constant(c);
    for (double h : {-0.4, 0.3, 2.0}) EXPECT_NEAR(phi_eval(V, 1.1, h), h * h, 1e-15);
  }
  EXPECT_NEAR(phi_eval(Potential::zero(), 0.0, 0.3), 0.09, 1e-16);
  EXPECT_EQ(phi_eval(Potential::zero(), 0.0, 0.0), 0.0);
  // A piecewise-constant potential that happens to be flat also gives h^2.
  EXPECT_NEAR(phi_eval(Potential::piecewise_constant(0.1, -10, std::vector<double>(20, 1.5)), 0.03, 0.5), 0.25, 1e-15);
}

TEST(Phi, MatchesBruteForceForEveryRepresentation) {
  const auto pc = potential_from_q(random_q(41, 0.8, 3), -20, 0.05);
  const auto grid = fine_grid(-3.0, 3.0, 61);
  const auto callable = Potential::callable(smooth_v);
  for (double a : {-0.37, 0.0, 0.21}) {
    for (double h : {-0.6, -0.13, 0.08, 0.55}) {
      for (const Potential* V : {&pc, &grid, &callable}) {
        const double expected = oracle::phi_brute_force([&](double x) { return (*V)(x); }, a, h, 40000);
        EXPECT_NEAR(phi_eval(*V, a, h), expected, 2e-4 * expected) << "a=" << a << " h=" << h;
      }
    }
  }
}

TEST(Phi, IncreasingInDistance) {
  const auto pc = potential_from_q(random_q(41, 1.5, 4), -20, 0.05);
  const auto grid = fine_grid(-3.0, 3.0, 31);
  for (const Potential* V : {&pc, &grid}) {
    for (int dir : {+1, -1}) {
      double prev = 0.0;
      for (int i = 1; i <= 200; ++i) {
        const double value = phi_eval(*V, 0.013, dir * 0.004 * i);
        EXPECT_GT(value, prev);
        prev = value;
      }
    }
  }
}

TEST(Psi, ConstantPotential) {
  for (auto side : {Side::Up, Side::Down}) EXPECT_DOUBLE_EQ(psi_solve(Potential::constant(2.0), 0.7, 0.1, side), 0.1);
}

TEST(Psi, LatticePointsOfLatticePotential) {
  const double eps = 0.05;
  const auto q = random_q(81, 1.0, 5);
  const auto V = potential_from_q(q, -40, eps);
  for (long long k = -30; k <= 30; ++k) {
    const double a = eps * static_cast<double>(k);
    const auto step = potential_step(V, a, eps);
    EXPECT_NEAR(step.psi_up, eps, 1e-12 * eps) << "k=" << k;
    EXPECT_NEAR(step.psi_down, eps, 1e-12 * eps) << "k=" << k;
    const double qk = q[static_cast<std::size_t>(k + 40)];
    EXPECT_NEAR(step.p, 1.0 / (1.0 + std::exp(qk)), 1e-12) << "k=" << k;
  }
}

TEST(Psi, RoundTripThroughPhi) {
  const double eps = 0.03;
  const auto pc = potential_from_q(random_q(201, 0.4, 6), -100, 0.01);
  const auto grid = fine_grid(-3.0, 3.0, 301);
  const auto callable = Potential::callable(smooth_v);
  Rng rng(7, 0);
  for (int i = 0; i < 25; ++i) {
    const double a = rng.uniform() - 0.5;
    for (const Potential* V : {&pc, &grid, &callable}) {
      for (auto side : {Side::Up, Side::Down}) {
        const double psi = psi_solve(*V, a, eps, side);
        EXPECT_GT(psi, 0.0);
        const double back = phi_eval(*V, a, side == Side::Up ? psi : -psi);
        EXPECT_NEAR(back, eps * eps, 1e-10 * eps * eps) << "a=" << a;
      }
    }
  }
}

TEST(Psi, ShrinksWithEps) {
  const auto grid = fine_grid(-3.0, 3.0, 301);
  for (auto side : {Side::Up, Side::Down}) {
    double prev = kInfinity;
    for (double eps = 0.5; eps > 1e-4; eps *= 0.5) {
      const double psi = psi_solve(grid, 0.4, eps, side);
      EXPECT_LT(psi, prev);
      prev = psi;
    }
    EXPECT_LT(prev, 1e-3);
  }
}

TEST(Psi, BracketCapAndDomain) {
  // A potential falling by 10^7 per unit: phi grows like 2 h / 10^7, so psi
  // would have to be far beyond the cap of 1024 eps.
  const auto steep = Potential::grid({-1e4, 1e4}, {1e11, -1e11});
  EXPECT_THROW(psi_solve(steep, 0.0, 0.01, Side::Up), NumericError);
  const auto small = Potential::grid({0.0, 0.05}, {0.0, 0.0});
  EXPECT_THROW(psi_solve(small, 0.02, 0.1, Side::Up), RangeError);
  EXPECT_THROW(psi_solve(small, 0.5, 0.01, Side::Up), RangeError);
  EXPECT_THROW(psi_solve(Potential::zero(), 0.0, 0.0, Side::Up), ValidationError);
}

TEST(TransitionProbability, Examples) {
  EXPECT_DOUBLE_EQ(p_eval(Potential::zero(), 0.3, 0.2, 0.2), 0.5);
  EXPECT_DOUBLE_EQ(p_eval(Potential::constant(4.0), 0.3, 0.1, 0.1), 0.5);
  double prev = 1.0;
  for (double q : {0.0, 5.0, 50.0, 500.0}) {
    const auto V = potential_from_q({q, q}, 0, 0.1);
    const double p = p_eval(V, 0.1, 0.1, 0.1);
    EXPECT_GT(p, 0.0);
    EXPECT_LE(p, prev);
    prev = p;
  }
  EXPECT_LT(prev, 1e-200);
  EXPECT_THROW(p_eval(Potential::zero(), 0.0, 0.0, 0.1), ValidationError);
}

TEST(PotentialChain, FlatPotentialConvergesToBrownianMotion) {
  SimConfig config;
  config.paths = 100000;
  config.seed = 8;
  config.threads = 0;
  config.grid = make_grid({0.0, 1.0});
  const double eps = 0.01;
  const auto batch = potential_chain_simulate(Potential::zero(), StartSpec::at(0.0), eps, 1.0, config);
  // The walk lives on a lattice of spacing 2 eps; spreading each value over its cell makes KS meaningful.
  const auto x = dequantize(batch.marginal(1), 2.0 * eps, 8, 1);
  const auto ks = ks_against_cdf(x, [](double v) { return normal_cdf(v); });
  EXPECT_LT(ks.statistic, ks_critical_value_one_sample(x.size(), 0.01));
}

TEST(PotentialChain, LatticeReductionMatchesNearestNeighbourWalk) {
  const double eps = 0.05;
  const auto q = random_q(401, 1.0, 9);
  const auto V = potential_from_q(q, -200, eps);
  SimConfig config;
  config.paths = 50;
  config.seed = 10;
  const double horizon = 0.5;
  const auto batch = potential_chain_simulate(V, StartSpec::at(0.0), eps, horizon, config);
  // Same stream, same draws: the nearest-neighbour walk with p = 1 / (1 + e^{q_k}).
  for (std::size_t p = 0; p < config.paths; ++p) {
    Rng rng(config.seed, p);
    long long k = 0;
    std::vector<long long> walk{0};
    for (int step = 0; step < 200; ++step) {
      const double u = rng.uniform();
      k += u < 1.0 / (1.0 + std::exp(q[static_cast<std::size_t>(k + 200)])) ? 1 : -1;
      walk.push_back(k);
    }
    const auto& times = *batch.grid;
    for (std::size_t i = 0; i < times.size(); ++i) {
      const std::size_t n = floor_index(times[i], eps * eps);
      EXPECT_NEAR(batch.paths[p].coord(i, 0), eps * static_cast<double>(walk[n]), 1e-9) << "path " << p;
    }
  }
}

TEST(PotentialChain, LeavingTheDomainKills) {
  const auto V = potential_from_q(random_q(11, 0.3, 11), -5, 0.1);
  SimConfig config;
  config.paths = 200;
  const auto batch = potential_chain_simulate(V, StartSpec::at(0.0), 0.1, 2.0, config);
  std::size_t dead = 0;
  for (const auto& path : batch.paths) {
    EXPECT_TRUE(path.absorption_holds());
    if (std::isfinite(path.explosion_time())) ++dead;
  }
  EXPECT_GT(dead, 150u);
}

TEST(PotentialChain, ReproducibleAndPropagatesNumericErrors) {
  const auto grid = fine_grid(-5.0, 5.0, 101);
  SimConfig config;
  config.paths = 64;
  config.seed = 12;
  const auto a = potential_chain_simulate(grid, StartSpec::at(0.0), 0.05, 1.0, config);
  config.threads = 4;
  const auto b = potential_chain_simulate(grid, StartSpec::at(0.0), 0.05, 1.0, config);
  for (std::size_t p = 0; p < config.paths; ++p) {
    for (std::size_t i = 0; i < a.paths[p].size(); ++i) EXPECT_EQ(a.paths[p].coord(i, 0), b.paths[p].coord(i, 0));
  }
  const auto steep = Potential::grid({-1e4, 1e4}, {1e11, -1e11});
  try {
    potential_chain_simulate(steep, StartSpec::at(0.0), 0.01, 1.0, config);
    FAIL() << "expected a numeric error";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("path at x"), std::string::npos);
  }
}

TEST(TransportTestFunction, FlatPotentialExamples) {
  const auto line = transport_test_function(Potential::zero(), 1.0, 2.0, [](double) { return 0.0; }, -2.0, 2.0);
  const auto square = transport_test_function(Potential::zero(), 0.0, 0.0, [](double) { return 1.0; }, -2.0, 2.0);
  for (double x : {-1.5, -0.2, 0.0, 0.7, 2.0}) {
    EXPECT_NEAR(line(x), 1.0 + 2.0 * x, 1e-12);
    EXPECT_NEAR(square(x), x * x, 1e-9);
  }
}

TEST(TransportTestFunction, ConstantsAreHarmonic) {
  const auto V = potential_from_q(random_q(41, 1.0, 13), -20, 0.1);
  const auto f = transport_test_function(V, 3.5, 0.0, [](double) { return 0.0; }, -1.5, 1.5);
  for (double x : {-1.5, -0.33, 0.0, 1.21}) EXPECT_EQ(f(x), 3.5);
}

TEST(TransportTestFunction, SolvesTheGeneratorEquation) {
  // 1/2 e^V (e^{-V} f')' = 1/2 (f'' - V' f') = g for smooth V.
  const auto V = Potential::callable(smooth_v);
  auto g = [](double x) { return std::cos(x) + 0.5; };
  const auto f = transport_test_function(V, 0.2, -0.4, g, -2.0, 2.0);
  const double h = 1e-2;
  for (double x : {-1.2, -0.3, 0.4, 1.1}) {
    const double d1 = (f(x + h) - f(x - h)) / (2.0 * h);
    const double d2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
    const double dv = 2.0 * std::cos(2.0 * x) + 0.3;
    EXPECT_NEAR(0.5 * (d2 - dv * d1), g(x), 1e-3) << "x=" << x;
  }
  EXPECT_THROW(f(2.5), RangeError);
}

TEST(PotentialDistance, Examples) {
  const auto V = potential_from_q(random_q(41, 1.0, 14), -20, 0.1);
  EXPECT_EQ(potential_distance(V, V, 1.0).value, 0.0);
  EXPECT_NEAR(potential_distance(Potential::zero(), Potential::constant(std::log(2.0)), 1.0).value, 2.0, 1e-12);
  double prev = kInfinity;
  for (double n : {1.0, 10.0, 100.0, 1000.0}) {
    const auto W = Potential::callable([n](double x) { return smooth_v(x) + 1.0 / n; });
    const double d = potential_distance(Potential::callable(smooth_v), W, 2.0).value;
    EXPECT_LT(d, prev);
    prev = d;
  }
  EXPECT_LT(prev, 1e-2);
  EXPECT_THROW(potential_distance(V, V, 0.0), ValidationError);
}

TEST(PotentialConstruction, Validation) {
  EXPECT_THROW(Potential::piecewise_constant(0.0, 0, {1.0}), ValidationError);
  EXPECT_THROW(Potential::piecewise_constant(1.0, 0, {}), ValidationError);
  EXPECT_THROW(Potential::grid({0.0, 0.0}, {1.0, 2.0}), ValidationError);
  EXPECT_THROW(Potential::grid({0.0}, {1.0}), ValidationError);
  EXPECT_THROW(Potential::constant(kInfinity), ValidationError);
  EXPECT_THROW(Potential::callable({}), ValidationError);
  EXPECT_THROW(Potential::callable([](double x) { return 1.0 / x; })(0.0), NumericError);
  EXPECT_TRUE(locally_integrable(fine_grid(-3.0, 3.0, 11), -3.0, 3.0));
  EXPECT_FALSE(locally_integrable(Potential::grid({0.0, 1.0}, {0.0, 1e6}), 0.0, 1.0));
}

TEST(PotentialFromQ, SumsFromTheOrigin) {
  const std::vector<double> q{0.5, -1.0, 2.0, 0.25};  // k = -1, 0, 1, 2
  const auto V = potential_from_q(q, -1, 0.5);
  EXPECT_EQ(V(0.0), 0.0);
  EXPECT_EQ(V(0.49), 0.0);
  EXPECT_EQ(V(0.5), 2.0);
  EXPECT_EQ(V(1.0), 2.25);
  EXPECT_EQ(V(-0.1), 1.0);   // -q_0
  EXPECT_EQ(V(-0.6), 0.5);   // -q_0 - q_{-1}
  EXPECT_THROW(V(1.5), RangeError);
  EXPECT_THROW(potential_from_q({1.0}, 2, 0.5), ValidationError);
}
