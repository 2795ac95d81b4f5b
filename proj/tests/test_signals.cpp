#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "subdyn/signals.hpp"

using namespace subdyn;

TEST(PerlinTable, PermutationIsValid) {
  for (std::uint64_t seed : {0ULL, 1ULL, 12345ULL}) {
    const PerlinTable table(seed);
    std::set<int> seen(table.perm().begin(), table.perm().begin() + 256);
    EXPECT_EQ(seen.size(), 256u);
    for (std::size_t i = 0; i < 256; ++i) EXPECT_EQ(table.perm()[i], table.perm()[i + 256]);
  }
  EXPECT_NE(PerlinTable(1).perm(), PerlinTable(2).perm());
  EXPECT_THROW(PerlinTable(0, 0.0), DomainError);
}

TEST(PerlinSample, ZeroOnLattice) {
  const PerlinTable table(7);
  for (int i = -600; i <= 600; ++i) EXPECT_EQ(perlin_sample(table, static_cast<double>(i)), 0.0);
}

TEST(PerlinSample, DeterministicAndBounded) {
  const PerlinTable a(11);
  const PerlinTable b(11);
  double peak = 0.0;
  for (int k = 0; k < 1000000; ++k) {
    const double t = -300.0 + 600.0 * k / 1e6;
    const double v = perlin_sample(a, t);
    ASSERT_EQ(v, perlin_sample(b, t));
    peak = std::max(peak, std::abs(v));
  }
  EXPECT_LE(peak, 1.0);
  EXPECT_GT(peak, 0.5);
}

TEST(PerlinSample, ContinuousAcrossCells) {
  const PerlinTable table(13);
  for (int i = -20; i < 20; ++i) {
    const double x = static_cast<double>(i);
    EXPECT_NEAR(perlin_sample(table, x - 1e-9), perlin_sample(table, x + 1e-9), 1e-8);
    // Slope is continuous too: one-sided difference quotients agree.
    const double h = 1e-6;
    const double left = (perlin_sample(table, x) - perlin_sample(table, x - h)) / h;
    const double right = (perlin_sample(table, x + h) - perlin_sample(table, x)) / h;
    EXPECT_NEAR(left, right, 1e-4);
  }
}

TEST(PerlinSample, MatchesReferenceFormula) {
  // Independent evaluation from the definition: gradients g0, g1 at the cell
  // ends, fade 6u^5 − 15u^4 + 10u^3, output scaled by 2.
  const PerlinTable table(17);
  for (double t : {0.25, 3.5, 17.75, -2.3, 255.9, 256.1}) {
    const double cell = std::floor(t);
    const double u = t - cell;
    auto grad = [&](double c) {
      const auto i = static_cast<long long>(c);
      const auto w = static_cast<std::size_t>(((i % 256) + 256) % 256);
      return (table.perm()[table.perm()[w]] & 1U) ? 1.0 : -1.0;
    };
    const double s = 6 * std::pow(u, 5) - 15 * std::pow(u, 4) + 10 * std::pow(u, 3);
    const double expected = 2.0 * ((1 - s) * grad(cell) * u + s * grad(cell + 1) * (u - 1));
    EXPECT_NEAR(perlin_sample(table, t), expected, 1e-14) << t;
  }
}

TEST(RegulationSignal, Examples) {
  const PerlinTable noise(3, 0.01);
  RegulationSignalConfig cfg;
  cfg.noise_scale = 0.0;
  EXPECT_NEAR(regulation_signal(cfg.period / 2.0, cfg, noise), 0.0, 1e-12);
  cfg.amplitude = 10.0;
  cfg.decay = 0.0;
  EXPECT_NEAR(regulation_signal(cfg.period / 4.0, cfg, noise), 10.0, 1e-12);

  RegulationSignalConfig fast;
  fast.decay = 1e6;
  fast.noise_scale = 2.0;
  for (double t = 1.0; t < 50.0; t += 1.0) {
    EXPECT_EQ(regulation_signal(t, fast, noise), 2.0 * perlin_sample(noise, t * noise.grid_step()));
  }
}

TEST(RegulationSignal, EnvelopeAndOffset) {
  const PerlinTable noise(5, 0.01);
  RegulationSignalConfig cfg;
  cfg.noise_scale = 0.0;
  cfg.offset = 7.0;
  for (int t = 0; t < 3000; ++t) {
    const double r = regulation_signal(t, cfg, noise);
    ASSERT_LE(std::abs(r - cfg.offset), cfg.amplitude * std::exp(-cfg.decay * t) + 1e-12);
  }
}

TEST(RegulationSignal, RerunIsBitIdentical) {
  RegulationSignalConfig cfg;
  auto trace = [&] {
    const PerlinTable noise(99, 0.005);
    std::vector<double> out;
    for (int t = 1; t <= 3000; ++t) out.push_back(regulation_signal(t, cfg, noise));
    return out;
  };
  EXPECT_EQ(trace(), trace());
}

TEST(RegulationSignal, RejectsBadParameters) {
  const PerlinTable noise;
  RegulationSignalConfig cfg;
  cfg.period = 0.0;
  EXPECT_THROW(regulation_signal(1.0, cfg, noise), DomainError);
  cfg = {};
  cfg.decay = -1.0;
  EXPECT_THROW(regulation_signal(1.0, cfg, noise), DomainError);
  cfg = {};
  cfg.amplitude = -1.0;
  EXPECT_THROW(regulation_signal(1.0, cfg, noise), DomainError);
}
