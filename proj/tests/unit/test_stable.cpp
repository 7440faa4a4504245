#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "levylab/diagnostics.hpp"
#include "levylab/operator.hpp"
#include "levylab/stable.hpp"
#include "support/oracles.hpp"

using namespace levylab;

namespace {

Point p1(double x) { return point1(x); }

}  // namespace

TEST(StableThreshold, ClosedForms) {
  const auto one = StableField::constant(1, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(stable_threshold(one, p1(0.0), 2.0), 1.0);
  EXPECT_DOUBLE_EQ(stable_threshold(one, p1(3.0), 200.0), 0.01);
  const auto plane = StableField::constant(2, 1.0, 1.0);
  for (double n : {1.0, 7.0, 1e4}) {
    EXPECT_NEAR(stable_threshold(plane, Point::Zero(2), n), 2.0 * std::numbers::pi / n, 1e-15 * 2.0 * std::numbers::pi / n);
  }
}

TEST(StableThreshold, MakesJumpLawAProbability) {
  for (std::size_t d : {1u, 2u, 3u}) {
    for (double alpha : {0.4, 1.0, 1.7}) {
      const double c = 1.3;
      const double n = 50.0;
      const auto field = StableField::constant(d, c, alpha);
      const double eps = stable_threshold(field, Point::Zero(static_cast<Eigen::Index>(d)), n);
      EXPECT_NEAR(oracle::stable_tail(c / n, alpha, static_cast<int>(d), eps), 1.0, 1e-12);
    }
  }
}

TEST(StableThreshold, RejectsDegenerateAndInvalidInput) {
  const StableField zero = StableField::constant(1, 0.0, 1.0);
  EXPECT_THROW(stable_threshold(zero, p1(0.0), 10.0), DegenerateStateError);
  EXPECT_THROW(stable_threshold(StableField::constant(1, 1.0, 2.0), p1(0.0), 10.0), ValidationError);
  EXPECT_THROW(stable_threshold(StableField::constant(1, 1.0, 0.0), p1(0.0), 10.0), ValidationError);
  EXPECT_THROW(stable_threshold(StableField::constant(1, 1.0, 1.0), p1(0.0), 0.5), ValidationError);
}

TEST(StableJump, ClosedFormExamples) {
  const auto field = StableField::constant(1, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(stable_jump_from(field, p1(0.0), 4.0, 0.5, p1(1.0))[0], 1.0);
  // U = 1 gives the smallest jump, eps_n itself.
  EXPECT_DOUBLE_EQ(stable_jump_from(field, p1(2.0), 4.0, 1.0, p1(-1.0))[0], 2.0 - stable_threshold(field, p1(2.0), 4.0));
  EXPECT_THROW(stable_jump_from(field, p1(0.0), 4.0, 0.0, p1(1.0)), ValidationError);
}

TEST(StableJump, TailProbabilityFormula) {
  const auto field = StableField::constant(1, 1.0, 1.0);
  const double n = 1e3;
  EXPECT_DOUBLE_EQ(stable_tail_probability(field, p1(0.0), n, 1e-4), 1.0);
  EXPECT_NEAR(stable_tail_probability(field, p1(0.0), n, 0.1), 0.02, 1e-15);
  // Equals the measure's tail mass divided by n beyond eps_n.
  const JumpMeasure nu = StableLike{1, 1.0, 1.0};
  EXPECT_NEAR(stable_tail_probability(field, p1(0.0), n, 0.5), tail_mass(nu, 0.5) / n, 1e-15);
}

TEST(StableJump, EmpiricalTailWithinThreeStandardErrors) {
  const auto field = StableField::constant(1, 1.0, 1.0);
  const double n = 1e3;
  const std::size_t draws = 100000;
  Rng rng(2024, 0);
  std::vector<double> sizes(draws);
  for (auto& s : sizes) s = std::abs(stable_jump_sample(field, p1(0.0), n, rng)[0]);
  for (double r : {0.01, 0.1, 1.0}) {
    const double expected = std::min(1.0, 2.0 / (n * r));
    const double freq = static_cast<double>(std::count_if(sizes.begin(), sizes.end(), [r](double s) { return s > r; })) /
                        static_cast<double>(draws);
    EXPECT_NEAR(freq, expected, 3.0 * oracle::binomial_se(expected, draws)) << "r=" << r;
  }
}

TEST(StableJump, MagnitudeLawPassesKolmogorovSmirnov) {
  for (std::size_t d : {1u, 3u}) {
    const auto field = StableField::constant(d, 0.7, 1.4);
    const double n = 100.0;
    const Point a = Point::Zero(static_cast<Eigen::Index>(d));
    const double eps = stable_threshold(field, a, n);
    Rng rng(99, d);
    std::vector<double> sizes(100000);
    for (auto& s : sizes) s = (stable_jump_sample(field, a, n, rng) - a).norm();
    const auto ks = ks_against_cdf(sizes, [&](double r) { return r < eps ? 0.0 : 1.0 - std::pow(eps / r, 1.4); });
    EXPECT_LT(ks.statistic, ks_critical_value_one_sample(sizes.size(), 0.01)) << "d=" << d;
  }
}

TEST(StableJump, IsotropicMean) {
  const auto field = StableField::constant(2, 1.0, 1.5);
  Rng rng(7, 3);
  std::vector<double> x(100000);
  std::vector<double> y(100000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Point b = stable_jump_sample(field, Point::Zero(2), 10.0, rng);
    x[i] = b[0];
    y[i] = b[1];
  }
  for (const auto* comp : {&x, &y}) {
    const auto est = mean_with_error(*comp);
    EXPECT_LT(std::abs(est.mean), 4.0 * est.standard_error);
  }
}

TEST(StableJump, DiscreteGeneratorMatchesOperator) {
  const StableField field{1, [](const Point& a) { return 1.0 + 0.5 * std::cos(a[0]); },
                          [](const Point& a) { return 1.0 + 0.3 * std::sin(a[0]); }};
  const Point a = p1(0.3);
  const double n = 1e4;
  const auto limit = stable_triplet_field(field)(a);
  Rng rng(31337, 0);
  std::vector<Point> next(1000000);
  for (auto& b : next) b = stable_jump_sample(field, a, n, rng);
  for (const auto& f : default_test_functions(a)) {
    std::vector<double> diffs(next.size());
    const double fa = f(a);
    for (std::size_t i = 0; i < next.size(); ++i) diffs[i] = n * (f(next[i]) - fa);
    const auto est = mean_with_error(diffs);
    const double target = apply_operator(limit, CompensationFunction::chi1(), f, a).value;
    EXPECT_NEAR(est.mean, target, 4.0 * est.standard_error) << f.name();
  }
}

TEST(StableChain, StepsFollowTheFloorEmbedding) {
  const auto field = StableField::constant(1, 1.0, 1.2);
  const double n = 10.0;
  SimConfig config;
  config.paths = 3;
  config.seed = 5;
  config.grid = make_grid({0.0, 0.05, 0.1, 0.35, 0.99, 1.0});
  const auto batch = stable_chain_simulate(field, StartSpec::at(0.5), n, 1.0, config);
  for (std::size_t p = 0; p < config.paths; ++p) {
    Rng rng(config.seed, p);
    std::vector<double> chain{0.5};
    for (int k = 0; k < 10; ++k) {
      const Point q = detail::random_direction(1, rng);
      const double u = rng.uniform_open_closed();
      chain.push_back(stable_jump_from(field, p1(chain.back()), n, u, q)[0]);
    }
    const std::vector<std::size_t> expected_index{0, 0, 1, 3, 9, 10};
    for (std::size_t i = 0; i < expected_index.size(); ++i) {
      EXPECT_EQ(batch.paths[p].coord(i, 0), chain[expected_index[i]]) << "path " << p << " grid " << i;
    }
  }
}

TEST(StableChain, DegenerateScaleHoldsPosition) {
  const StableField field{1, [](const Point& a) { return std::max(0.0, std::abs(a[0]) - 1.0); },
                          [](const Point&) { return 1.0; }};
  SimConfig config;
  config.paths = 20;
  const auto batch = stable_chain_simulate(field, StartSpec::at(0.25), 100.0, 1.0, config);
  for (const auto& path : batch.paths) {
    for (std::size_t i = 0; i < path.size(); ++i) EXPECT_EQ(path.coord(i, 0), 0.25);
  }
}

TEST(StableChain, DeterministicAcrossRunsAndThreadCounts) {
  const auto field = StableField::constant(2, 1.0, 0.9);
  Point start(2);
  start << 0.1, -0.2;
  SimConfig config;
  config.paths = 400;
  config.seed = 77;
  const auto a = stable_chain_simulate(field, StartSpec::at(start), 50.0, 1.0, config);
  const auto b = stable_chain_simulate(field, StartSpec::at(start), 50.0, 1.0, config);
  config.threads = 4;
  const auto c = stable_chain_simulate(field, StartSpec::at(start), 50.0, 1.0, config);
  for (std::size_t p = 0; p < config.paths; ++p) {
    EXPECT_EQ(a.paths[p].explosion_time(), b.paths[p].explosion_time());
    EXPECT_EQ(a.paths[p].explosion_time(), c.paths[p].explosion_time());
    for (std::size_t i = 0; i < a.paths[p].size(); ++i) {
      if (!a.paths[p].alive(i)) continue;
      for (std::size_t j = 0; j < 2; ++j) {
        EXPECT_EQ(a.paths[p].coord(i, j), b.paths[p].coord(i, j));
        EXPECT_EQ(a.paths[p].coord(i, j), c.paths[p].coord(i, j));
      }
    }
  }
}

TEST(StableChain, EscapeRadiusSendsToCemetery) {
  const auto field = StableField::constant(1, 1.0, 0.5);
  SimConfig config;
  config.paths = 200;
  config.escape_radius = 5.0;
  const auto batch = stable_chain_simulate(field, StartSpec::at(0.0), 10.0, 2.0, config);
  std::size_t exploded = 0;
  for (const auto& path : batch.paths) {
    EXPECT_TRUE(path.absorption_holds());
    if (std::isfinite(path.explosion_time())) {
      ++exploded;
      // Explosions happen at step times k / n.
      const double k = path.explosion_time() * 10.0;
      EXPECT_NEAR(k, std::round(k), 1e-9);
      EXPECT_GT(path.explosion_time(), 0.0);
    }
    for (std::size_t i = 0; i < path.size(); ++i) {
      if (path.alive(i)) EXPECT_LE(std::abs(path.coord(i, 0)), 5.0);
    }
  }
  EXPECT_GT(exploded, 0u);
}

TEST(StableChain, RejectsBadConfiguration) {
  const auto field = StableField::constant(1, 1.0, 1.0);
  SimConfig config;
  EXPECT_THROW(stable_chain_simulate(field, StartSpec::at(0.0), 10.0, 0.0, config), ValidationError);
  EXPECT_THROW(stable_chain_simulate(field, StartSpec::at(Point::Zero(2)), 10.0, 1.0, config), ValidationError);
  config.paths = 0;
  EXPECT_THROW(stable_chain_simulate(field, StartSpec::at(0.0), 10.0, 1.0, config), ValidationError);
}
