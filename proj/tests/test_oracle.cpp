#include <gtest/gtest.h>

#include <cmath>

#include "subdyn/lovasz.hpp"
#include "subdyn/oracle.hpp"
#include "support.hpp"

using namespace subdyn;

namespace {

// Lattice form of submodularity, checked over all pairs: f(A)+f(B) >= f(A∪B)+f(A∩B).
bool lattice_submodular(const SetFunction& f, double tol) {
  const auto table = tabulate(f);
  for (std::uint64_t a = 0; a < table.size(); ++a) {
    for (std::uint64_t b = 0; b < table.size(); ++b) {
      if (table[a] + table[b] < table[a | b] + table[a & b] - tol) return false;
    }
  }
  return true;
}

SetFunction square_of_card(std::size_t n) {
  return SetFunction(GroundSet(n), [](const SubsetMask& s) {
    const double c = static_cast<double>(s.count());
    return c * c;
  }, static_cast<double>(n * n), true);
}

}  // namespace

TEST(BruteForceMin, Examples) {
  const auto r = brute_force_min(modular_function({1.0, -2.0, 3.0}));
  EXPECT_EQ(r.mask, SubsetMask::from_indices(3, {1}));
  EXPECT_EQ(r.value, -2.0);
  const SetFunction zero(GroundSet(4), [](const SubsetMask&) { return 0.0; }, 1.0, true);
  const auto z = brute_force_min(zero);
  EXPECT_EQ(z.mask, SubsetMask(4));
  EXPECT_EQ(z.value, 0.0);
}

TEST(BruteForceMin, SmallestMaskOnTies) {
  // f = |count − 2|: every 2-set ties; the smallest is {0,1}.
  const SetFunction f(GroundSet(4), [](const SubsetMask& s) { return std::abs(static_cast<double>(s.count()) - 2.0); }, 3.0);
  EXPECT_EQ(brute_force_min(f).mask, SubsetMask::from_bits(4, 0b0011));
  EXPECT_EQ(brute_force_min(f, cardinality_exactly(GroundSet(4), 3)).mask, SubsetMask::from_bits(4, 0b0111));
}

TEST(BruteForceMin, Errors) {
  const SetFunction big(GroundSet(25), [](const SubsetMask&) { return 0.0; }, 1.0);
  EXPECT_THROW(brute_force_min(big), CapacityError);
  FeasibleFamily empty{GroundSet(3), [](const SubsetMask&) { return false; }, [](const FeasibleFamily::Visitor&) {}, {}, false};
  EXPECT_THROW(brute_force_min(modular_function({1.0, 1.0, 1.0}), empty), DomainError);
  FeasibleFamily opaque{GroundSet(3), [](const SubsetMask&) { return true; }, {}, {}, false};
  EXPECT_THROW(brute_force_min(modular_function({1.0, 1.0, 1.0}), opaque), ConfigError);
}

TEST(CheckSubmodular, Examples) {
  const auto cut = check_submodular(cut_function(5, {{0, 1, 1.0}, {1, 2, 0.5}, {3, 4, 2.0}, {0, 4, 1.5}}));
  EXPECT_TRUE(cut.holds);
  EXPECT_GE(cut.margin, 0.0);
  const auto mod = check_submodular(modular_function({1.0, -2.0, 0.5, 4.0}));
  EXPECT_TRUE(mod.holds);
  EXPECT_EQ(mod.margin, 0.0);

  const auto sq = check_submodular(square_of_card(4));
  EXPECT_FALSE(sq.holds);
  ASSERT_TRUE(sq.counterexample.has_value());
  const auto& ce = *sq.counterexample;
  const auto f = square_of_card(4);
  EXPECT_TRUE(ce.A.is_subset_of(ce.B));
  EXPECT_FALSE(ce.B.test(ce.element));
  auto a_plus = ce.A;
  auto b_plus = ce.B;
  a_plus.set(ce.element);
  b_plus.set(ce.element);
  EXPECT_LT(f(a_plus) - f(ce.A), f(b_plus) - f(ce.B));
}

TEST(CheckSubmodular, AgreesWithLatticeForm) {
  SeededRng rng(31);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 1 + rng.below(6);
    std::vector<double> table(std::size_t{1} << n);
    table[0] = 0.0;
    for (std::size_t k = 1; k < table.size(); ++k) table[k] = std::round(8.0 * rng.uniform()) / 4.0;
    const auto f = testkit::from_table(n, table, true);
    EXPECT_EQ(check_submodular(f).holds, lattice_submodular(f, 1e-9)) << "rep " << rep;
  }
}

TEST(CheckSubmodular, GeneratedFunctionsPassAndAreConvex) {
  SeededRng rng(32);
  for (int rep = 0; rep < 20; ++rep) {
    const auto f = testkit::random_submodular(1 + rng.below(8), rng);
    ASSERT_TRUE(check_submodular(f).holds);
    ASSERT_TRUE(lattice_submodular(f, 1e-9));
    for (int k = 0; k < 50; ++k) {
      const auto x = testkit::random_point(f.n(), rng);
      const auto y = testkit::random_point(f.n(), rng);
      std::vector<double> mid(f.n());
      for (std::size_t i = 0; i < f.n(); ++i) mid[i] = 0.5 * (x[i] + y[i]);
      ASSERT_LE(lovasz_value(f, RelaxedPoint(mid)), 0.5 * (lovasz_value(f, x) + lovasz_value(f, y)) + 1e-9);
    }
  }
}

TEST(CheckSubmodular, CapacityLimit) {
  const SetFunction f(GroundSet(17), [](const SubsetMask&) { return 0.0; }, 1.0);
  EXPECT_THROW(check_submodular(f), CapacityError);
  EXPECT_THROW(exact_lipschitz_modulus(f), CapacityError);
  EXPECT_THROW(audit_beta_sandwich(f, f, 1.0), CapacityError);
}

TEST(Sandwich, Examples) {
  SeededRng rng(33);
  const auto f = testkit::random_submodular(5, rng);
  const SetFunction pos(GroundSet(5), [f = f](const SubsetMask& s) { return 1.0 + std::abs(f(s)); }, f.bound() + 1.0);
  const auto same = audit_beta_sandwich(pos, pos, 1.0);
  EXPECT_TRUE(same.passes);
  EXPECT_EQ(same.worst_ratio, 1.0);
  const SetFunction twice(GroundSet(5), [pos](const SubsetMask& s) { return 2.0 * pos(s); }, 2.0 * pos.bound());
  const auto doubled = audit_beta_sandwich(pos, twice, 2.0);
  EXPECT_TRUE(doubled.passes);
  EXPECT_EQ(doubled.worst_ratio, 2.0);
  EXPECT_FALSE(audit_beta_sandwich(pos, twice, 1.9).passes);
}

TEST(Sandwich, SubadditiveLossVersusSingletonSum) {
  // h = sqrt of a positive modular function: submodular and subadditive, so
  // Σ_{i∈S} h({i}) sits between h and |S|·h. On a 5-element ground set β = 5 suffices.
  const std::vector<double> w{1.0, 2.0, 0.5, 3.0, 1.5};
  const SetFunction h(GroundSet(5), [w](const SubsetMask& s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) acc += s.test(i) ? w[i] : 0.0;
    return std::sqrt(acc);
  }, 10.0, true);
  const SetFunction single(GroundSet(5), [w](const SubsetMask& s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) acc += s.test(i) ? std::sqrt(w[i]) : 0.0;
    return acc;
  }, 10.0, true);
  const auto rep = audit_beta_sandwich(h, single, 5.0);
  EXPECT_TRUE(rep.passes);
  EXPECT_EQ(rep.flagged.size(), 1u);  // only ∅ has h = 0
  // Worst ratio is attained on the full set: Σ sqrt(w) / sqrt(Σ w).
  double sum_sqrt = 0.0, sum = 0.0;
  for (double x : w) {
    sum_sqrt += std::sqrt(x);
    sum += x;
  }
  EXPECT_NEAR(rep.worst_ratio, sum_sqrt / std::sqrt(sum), 1e-12);
}

TEST(Sandwich, MonotoneInBeta) {
  SeededRng rng(34);
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<double> base(32), approx(32);
    for (std::size_t k = 0; k < 32; ++k) {
      base[k] = 0.5 + rng.uniform();
      approx[k] = base[k] * (1.0 + 0.8 * rng.uniform());
    }
    const auto f = testkit::from_table(5, base);
    const auto g = testkit::from_table(5, approx);
    bool passed = false;
    for (double beta = 1.0; beta <= 2.0; beta += 0.05) {
      const bool now = audit_beta_sandwich(f, g, beta).passes;
      if (passed) {
        ASSERT_TRUE(now);
      }
      passed = passed || now;
    }
    EXPECT_TRUE(passed);
  }
}

TEST(GenericSandwich, SqrtOfModularIsTight) {
  const std::vector<double> c{1.0, 4.0, 2.0};
  const SetFunction f(GroundSet(3), [c](const SubsetMask& s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) acc += s.test(i) ? c[i] : 0.0;
    return std::sqrt(acc);
  }, 10.0, true);
  const auto rep = audit_generic_sandwich(f, c, 1.0, power_set(GroundSet(3)));
  EXPECT_TRUE(rep.passes);
  EXPECT_NEAR(rep.worst_gamma, 1.0, 1e-12);
  const std::vector<double> loose{2.0, 8.0, 4.0};
  EXPECT_FALSE(audit_generic_sandwich(f, loose, 5.0, power_set(GroundSet(3))).passes);
}

TEST(Lipschitz, Examples) {
  EXPECT_EQ(exact_lipschitz_modulus(modular_function({0.5, -3.0, 2.0})), 3.0);
  const SetFunction flat(GroundSet(4), [](const SubsetMask&) { return 0.0; }, 1.0, true);
  EXPECT_EQ(exact_lipschitz_modulus(flat), 0.0);
}

TEST(Lipschitz, BoundsEveryPair) {
  SeededRng rng(35);
  for (int rep = 0; rep < 10; ++rep) {
    const auto f = testkit::random_submodular(6, rng);
    const double L = exact_lipschitz_modulus(f);
    const auto t = tabulate(f);
    bool tight = false;
    for (std::uint64_t a = 0; a < t.size(); ++a) {
      for (std::uint64_t b = 0; b < t.size(); ++b) {
        if (a == b) continue;
        const double d = static_cast<double>(std::popcount(a ^ b));
        ASSERT_LE(std::abs(t[a] - t[b]), L * d * (1.0 + 1e-15));
        tight = tight || std::abs(std::abs(t[a] - t[b]) - L * d) <= 1e-12 * L * d;
      }
    }
    EXPECT_TRUE(tight);
  }
}

TEST(ExactBound, MaxAbsoluteValue) {
  EXPECT_EQ(exact_bound(modular_function({1.0, -4.0, 2.0})), 4.0);
}
