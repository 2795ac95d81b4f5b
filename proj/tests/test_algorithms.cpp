#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "subdyn/algorithms.hpp"
#include "support.hpp"

using namespace subdyn;

namespace {

// Wraps an algorithm and records which round, if any, is currently being
// decided. Stream functions consult it to catch peeking at f_t before S_t.
struct CausalityProbe {
  std::size_t deciding = 0;
  std::size_t violations = 0;
  std::size_t evaluations = 0;
};

class ProbedAlgorithm : public OnlineAlgorithm {
 public:
  ProbedAlgorithm(OnlineAlgorithm& inner, CausalityProbe& probe) : inner_(inner), probe_(probe) {}
  std::string name() const override { return inner_.name(); }
  void reset(std::uint64_t seed) override { inner_.reset(seed); }
  SubsetMask decide(std::size_t t) override {
    probe_.deciding = t;
    auto s = inner_.decide(t);
    probe_.deciding = 0;
    return s;
  }
  void observe(const Round& r) override { inner_.observe(r); }

 private:
  OnlineAlgorithm& inner_;
  CausalityProbe& probe_;
};

Round instrumented(std::size_t t, const SetFunction& f, CausalityProbe& probe) {
  auto p = &probe;
  const SetFunction g(f.ground(), [f, t, p](const SubsetMask& s) {
    ++p->evaluations;
    if (p->deciding != 0 && t >= p->deciding) ++p->violations;
    return f(s);
  }, f.bound(), f.normalized());
  return Round{t, g, g, std::nullopt};
}

}  // namespace

TEST(OsgaStep, Examples) {
  const auto fam = power_set(GroundSet(3));
  EXPECT_EQ(osga_step({}, modular_function({-1.0, 2.0, -3.0}), fam), SubsetMask::from_indices(3, {0, 2}));
  const SetFunction zero(GroundSet(3), [](const SubsetMask&) { return 0.0; }, 1.0, true);
  EXPECT_EQ(osga_step({}, zero, fam), SubsetMask(3));
}

TEST(OsgaStep, CardinalityConstrainedMatchesEnumeration) {
  SeededRng rng(41);
  const auto fam = cardinality_at_most(GroundSet(8), 3);
  for (int rep = 0; rep < 30; ++rep) {
    const auto f = testkit::random_submodular(8, rng);
    SubsetMask best(8);
    double value = std::numeric_limits<double>::infinity();
    for (std::uint64_t b = 0; b < 256; ++b) {
      if (std::popcount(b) > 3) continue;
      const auto s = SubsetMask::from_bits(8, b);
      if (f(s) < value) {
        value = f(s);
        best = s;
      }
    }
    EXPECT_EQ(osga_step({}, f, fam), best);
  }
}

TEST(OsgaStep, FailingOracleSurfacesAsAlgorithmError) {
  ApproxSpec spec;
  spec.exact_min = [](const SetFunction&, const FeasibleFamily&) -> MinResult { throw CapacityError("too big"); };
  EXPECT_THROW(osga_step(spec, modular_function({1.0}), power_set(GroundSet(1))), AlgorithmError);
  spec.exact_min = [](const SetFunction& f, const FeasibleFamily&) { return MinResult{SubsetMask::full(f.n()), 0.0}; };
  EXPECT_THROW(osga_step(spec, modular_function({1.0, 1.0}), cardinality_at_most(GroundSet(2), 1)), AlgorithmError);
}

TEST(OsgaStep, ModularExactMinUsesLinearOracle) {
  const auto fam = cardinality_exactly(GroundSet(4), 2);
  ApproxSpec spec;
  spec.exact_min = modular_exact_min;
  EXPECT_EQ(osga_step(spec, modular_function({0.5, -1.0, 2.0, -0.5}), fam), SubsetMask::from_indices(4, {1, 3}));
}

TEST(OsgaUnconstrained, Examples) {
  EXPECT_EQ(osga_unconstrained_step(modular_function({1.0, -1.0})), SubsetMask::from_indices(2, {1}));
  EXPECT_EQ(osga_unconstrained_step(cut_function(4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 3.0}})), SubsetMask(4));
  SeededRng rng(42);
  for (int rep = 0; rep < 10; ++rep) {
    const auto f = testkit::random_submodular(10, rng);
    const auto table = tabulate(f);
    const auto best = static_cast<std::uint64_t>(std::min_element(table.begin(), table.end()) - table.begin());
    EXPECT_EQ(osga_unconstrained_step(f), SubsetMask::from_bits(10, best));
  }
}

TEST(OsggaStep, Examples) {
  const GenericApproxSpec spec{{3.0, 0.0, 5.0}, 1.0, 1.0};
  EXPECT_EQ(osgga_step(spec, power_set(GroundSet(3))), SubsetMask(3));
  EXPECT_EQ(osgga_step(spec, cardinality_exactly(GroundSet(3), 1)), SubsetMask::from_indices(3, {1}));
  auto enum_only = cardinality_exactly(GroundSet(3), 1);
  enum_only.linear_min = {};
  EXPECT_EQ(osgga_step(spec, enum_only), SubsetMask::from_indices(3, {1}));
  enum_only.enumerate = {};
  EXPECT_THROW(osgga_step(spec, enum_only), ConfigError);
  EXPECT_THROW(osgga_step(GenericApproxSpec{{1.0}, 1.0, 1.0}, power_set(GroundSet(3))), DimensionError);
}

TEST(BoxProject, Examples) {
  const std::vector<double> v{1.5, -0.2, 0.5};
  EXPECT_EQ(box_project(v), RelaxedPoint({1.0, 0.0, 0.5}));
  SeededRng rng(43);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> u(6), w(6);
    for (std::size_t i = 0; i < 6; ++i) {
      u[i] = 3.0 * rng.uniform() - 1.0;
      w[i] = 3.0 * rng.uniform() - 1.0;
    }
    const auto pu = box_project(u);
    const auto pw = box_project(w);
    EXPECT_EQ(box_project(pu.coords()), pu);
    double d_in = 0.0, d_out = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
      d_in += (u[i] - w[i]) * (u[i] - w[i]);
      d_out += (pu[i] - pw[i]) * (pu[i] - pw[i]);
    }
    EXPECT_LE(d_out, d_in);
  }
}

TEST(OspgdStep, Examples) {
  SeededRng rng(44);
  auto cfg = OspgdConfig::unconstrained(2, 100, 1.0);
  EXPECT_DOUBLE_EQ(cfg.eta(), 0.1);
  const auto cut = cut_function(2, {{0, 1, 1.0}});
  const auto step = ospgd_step(cut, RelaxedPoint({0.7, 0.2}), cfg, rng);
  EXPECT_NEAR(step.x_next[0], 0.6, 1e-15);
  EXPECT_NEAR(step.x_next[1], 0.3, 1e-15);

  const SetFunction flat(GroundSet(2), [](const SubsetMask&) { return 0.0; }, 1.0, true);
  EXPECT_EQ(ospgd_step(flat, RelaxedPoint({0.7, 0.2}), cfg, rng).x_next, RelaxedPoint({0.7, 0.2}));

  const auto mod = modular_function({3.0, -2.0});
  const auto lin = ospgd_step(mod, RelaxedPoint({0.5, 0.9}), cfg, rng).x_next;
  EXPECT_NEAR(lin[0], 0.2, 1e-15);
  EXPECT_EQ(lin[1], 1.0);
}

TEST(OspgdStep, BadProjectorIsCaught) {
  auto cfg = OspgdConfig::unconstrained(2, 4);
  cfg.projector = [](std::span<const double> v) { return std::vector<double>(v.begin(), v.end()); };
  SeededRng rng(45);
  EXPECT_THROW(ospgd_step(modular_function({10.0, 0.0}), RelaxedPoint({0.5, 0.5}), cfg, rng), InvariantViolation);
  EXPECT_THROW(OspgdConfig::unconstrained(2, 0), DomainError);
  EXPECT_THROW(OspgdConfig::unconstrained(2, 4, 0.0), DomainError);
}

TEST(Ospgd, IteratesStayInCube) {
  SeededRng gen(46);
  const std::size_t n = 6, T = 200;
  std::vector<SetFunction> fs;
  for (std::size_t t = 0; t < T; ++t) fs.push_back(testkit::random_submodular(n, gen));
  Ospgd alg(OspgdConfig::unconstrained(n, T, 2.0));
  alg.reset(3);
  EXPECT_EQ(alg.state(), RelaxedPoint::constant(n, 0.5));
  for (std::size_t t = 1; t <= T; ++t) {
    (void)alg.decide(t);
    alg.observe(Round{t, fs[t - 1], std::nullopt, std::nullopt});
    ASSERT_LE(alg.state().norm2(), std::sqrt(static_cast<double>(n)));
  }
}

TEST(RunOnline, SingleRound) {
  const auto f = modular_function({1.0, -2.0});
  FunctionStream stream([&](std::size_t t) -> std::optional<Round> { return Round{t, f, std::nullopt, std::nullopt}; });
  Osga alg(power_set(GroundSet(2)));
  const auto r = run_online(stream, alg, 1, 0, brute_force_round_oracle(power_set(GroundSet(2))));
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_EQ(r.trace[0].mask, SubsetMask(2));
  EXPECT_EQ(*r.regret.cumulative(), 0.0 - (-2.0));
}

TEST(RunOnline, StaticStreamHasZeroRegretAfterFirstRound) {
  SeededRng rng(47);
  const auto f = testkit::random_submodular(7, rng);
  FunctionStream stream([&](std::size_t t) -> std::optional<Round> { return Round{t, f, std::nullopt, std::nullopt}; });
  Osga alg(power_set(GroundSet(7)));
  const auto r = run_online(stream, alg, 20, 0, brute_force_round_oracle(power_set(GroundSet(7))));
  const auto best = brute_force_min(f);
  for (std::size_t t = 2; t <= 20; ++t) {
    EXPECT_EQ(r.trace[t - 1].mask, best.mask);
    EXPECT_EQ(r.trace[t - 1].loss, *r.trace[t - 1].optimum);
  }
  EXPECT_EQ(r.variation.cumulative(), 0.0);
  EXPECT_DOUBLE_EQ(*r.regret.cumulative(), f(SubsetMask(7)) - best.value);
}

TEST(RunOnline, LedgerIsConsistent) {
  SeededRng rng(48);
  const auto s = testkit::slow_stream(6, 40, 1.5, 10, rng);
  testkit::VectorStream stream(s);
  Osga alg(power_set(GroundSet(6)));
  const auto r = run_online(stream, alg, 40, 0, brute_force_round_oracle(power_set(GroundSet(6))), 1.5);
  for (std::size_t t = 1; t <= 40; ++t) {
    EXPECT_NEAR(*r.trace[t - 1].regret_cum, r.regret.cumulative_through(t), 1e-12);
    EXPECT_NEAR(*r.trace[t - 1].regret_avg, r.regret.cumulative_through(t) / static_cast<double>(t), 1e-12);
  }
  EXPECT_EQ(r.regret.alpha(), 1.5);
}

TEST(RunOnline, RegretUnavailableWithoutOracle) {
  const auto f = modular_function({1.0});
  FunctionStream stream([&](std::size_t t) -> std::optional<Round> { return Round{t, f, std::nullopt, std::nullopt}; });
  Osga alg(power_set(GroundSet(1)));
  const auto r = run_online(stream, alg, 3, 0);
  EXPECT_FALSE(r.regret.cumulative().has_value());
  std::ostringstream os;
  write_trace_csv(os, r.trace);
  EXPECT_EQ(os.str(),
            "t,algorithm,loss,optimum,alpha_regret_cum,regret_time_avg,variation_cum,mask_hex\n"
            "1,osga,0,NA,NA,NA,NA,0\n2,osga,0,NA,NA,NA,NA,0\n3,osga,0,NA,NA,NA,NA,0\n");
}

TEST(RunOnline, TruncationAndMisnumberedRounds) {
  const auto f = modular_function({1.0});
  FunctionStream short_stream([&](std::size_t t) -> std::optional<Round> {
    if (t > 2) return std::nullopt;
    return Round{t, f, std::nullopt, std::nullopt};
  });
  Osga alg(power_set(GroundSet(1)));
  EXPECT_THROW(run_online(short_stream, alg, 5, 0), TruncationError);
  FunctionStream ahead([&](std::size_t t) -> std::optional<Round> { return Round{t + 1, f, std::nullopt, std::nullopt}; });
  EXPECT_THROW(run_online(ahead, alg, 2, 0), ContractError);
}

TEST(RunOnline, CausalityAudit) {
  SeededRng gen(49);
  const std::size_t n = 5, T = 30;
  std::vector<SetFunction> fs;
  for (std::size_t t = 0; t < T; ++t) fs.push_back(testkit::random_submodular(n, gen));
  for (int which = 0; which < 2; ++which) {
    CausalityProbe probe;
    FunctionStream stream([&](std::size_t t) -> std::optional<Round> { return instrumented(t, fs[t - 1], probe); });
    Osga osga(power_set(GroundSet(n)));
    Ospgd ospgd(OspgdConfig::unconstrained(n, T));
    OnlineAlgorithm& inner = which == 0 ? static_cast<OnlineAlgorithm&>(osga) : static_cast<OnlineAlgorithm&>(ospgd);
    ProbedAlgorithm alg(inner, probe);
    (void)run_online(stream, alg, T, 5, brute_force_round_oracle(power_set(GroundSet(n))));
    EXPECT_GT(probe.evaluations, T);
    EXPECT_EQ(probe.violations, 0u) << inner.name();
  }
}

TEST(RunOnline, DeterministicTraces) {
  SeededRng gen(50);
  const std::size_t n = 6, T = 50;
  std::vector<SetFunction> fs;
  for (std::size_t t = 0; t < T; ++t) fs.push_back(testkit::random_submodular(n, gen));
  auto run = [&](std::uint64_t seed) {
    FunctionStream stream([&](std::size_t t) -> std::optional<Round> { return Round{t, fs[t - 1], std::nullopt, std::nullopt}; });
    Ospgd alg(OspgdConfig::unconstrained(n, T));
    std::ostringstream os;
    write_trace_csv(os, run_online(stream, alg, T, seed, brute_force_round_oracle(power_set(GroundSet(n)))).trace);
    return os.str();
  };
  EXPECT_EQ(run(9), run(9));
  EXPECT_NE(run(9), run(10));
}

TEST(Theorem1, SlowStreamsRespectBound) {
  SeededRng rng(51);
  for (int rep = 0; rep < 5; ++rep) {
    const double beta = 1.0 + rng.uniform();
    const auto s = testkit::slow_stream(6, 40, beta, 8, rng);
    testkit::VectorStream stream(s);
    Osga alg(power_set(GroundSet(6)), ApproxSpec{beta, default_exact_min, std::nullopt});
    const auto r = run_online(stream, alg, 40, 0, brute_force_round_oracle(power_set(GroundSet(6))), beta);
    double L = 0.0;
    for (const auto& g : s.approx) L = std::max(L, exact_lipschitz_modulus(g));
    VariationLedger approx_var;
    approx_var.append(SubsetMask(6));  // S_1 = ∅ precedes the first approximation minimizer
    for (const auto& m : s.approx_min) approx_var.append(m);
    EXPECT_LE(*r.regret.cumulative(), theorem1_bound(beta, L, beta, approx_var.cumulative()) + 1e-9);
  }
}

TEST(Bounds, Formulas) {
  EXPECT_DOUBLE_EQ(theorem1_bound(2.0, 3.0, 1.5, 4.0), 16.0);
  EXPECT_DOUBLE_EQ(corollary1_bound(2.0, 3.5), 7.0);
  EXPECT_DOUBLE_EQ(corollary2_bound(2.0, 1.5, 3.0, 0.5, 2.0), 72.0);
  EXPECT_DOUBLE_EQ(theorem2_bound(1.0, 4, 1.0, 2.0, 1.0, 100), (2.0 * 2.0 + 10.0 + 4.0) * 10.0);
  EXPECT_DOUBLE_EQ(corollary3_high_probability_bound(4, 1.0, 2.0, 1.0, 100, std::exp(-1.0)),
                   (2.0 * 2.0 + 10.0 + 4.0) * 10.0 + 2.0 * 10.0);
}

TEST(ParallelMap, SeedOrderAndErrors) {
  const std::vector<std::uint64_t> seeds{5, 1, 9, 3};
  const auto out = parallel_map_seeds(std::span<const std::uint64_t>(seeds), [](std::uint64_t s) { return s * 2; }, 3);
  EXPECT_EQ(out, (std::vector<std::uint64_t>{10, 2, 18, 6}));
  EXPECT_THROW(parallel_map_seeds(std::span<const std::uint64_t>(seeds),
                                  [](std::uint64_t s) -> int {
                                    if (s == 9) throw DomainError("boom");
                                    return 0;
                                  }),
               DomainError);
}

TEST(RegretLedger, Validation) {
  EXPECT_THROW(RegretLedger(0.5), DomainError);
  EXPECT_THROW(RegretLedger(1.0, 1.0), DomainError);
  RegretLedger l(2.0);
  l.record(3.0, 1.0);
  l.record(1.0, 1.0);
  EXPECT_EQ(*l.cumulative(), 0.0);
  EXPECT_EQ(*l.time_averaged(), 0.0);
  EXPECT_THROW(l.cumulative_through(3), DomainError);
}
