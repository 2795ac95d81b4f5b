#pragma once

// Online update rules for dynamic submodular minimization and the driver that
// runs them against a problem stream while keeping dynamic α-regret books.
//
//   OSGA   S_t = argmin_{S∈𝒮} f̃_{t−1}(S)              (β-approximation)
//   OSGGA  S_t = argmin_{S∈𝒮} Σ_{i∈S} c_{i,t−1}        (generic approximation)
//   OSPGD  x_{t+1} = Π(x_t − η g_t),  S_{t+1} = Round(x_{t+1}),  η = δ/√T

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "subdyn/core.hpp"
#include "subdyn/lovasz.hpp"
#include "subdyn/oracle.hpp"
#include "subdyn/rng.hpp"
#include "subdyn/rounding.hpp"

namespace subdyn {

using ExactMin = std::function<MinResult(const SetFunction&, const FeasibleFamily&)>;

inline MinResult default_exact_min(const SetFunction& f, const FeasibleFamily& family) {
  return brute_force_min(f, family);
}

// Exact minimizer for modular objectives through the family's linear oracle.
// Per-element weights are read off as f({i}) − f(∅).
inline MinResult modular_exact_min(const SetFunction& f, const FeasibleFamily& family) {
  if (!family.linear_min) throw ConfigError("family has no linear minimization oracle");
  const std::size_t n = f.n();
  const double base = f(SubsetMask(n));
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = f(SubsetMask(n).set(i)) - base;
  auto mask = family.linear_min(w);
  return MinResult{mask, f(mask)};
}

// β-approximation data for OSGA. The per-round f̃_t travels with each Round.
struct ApproxSpec {
  double beta = 1.0;
  ExactMin exact_min = default_exact_min;
  std::optional<double> lipschitz_L;
};

// Generic approximation (f̃^g(S))² = Σ_{i∈S} c_i for OSGGA.
struct GenericApproxSpec {
  std::vector<double> c;
  double gamma = 1.0;
  double nu = 1.0;
};

inline RelaxedPoint box_project(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  for (double& c : out) c = std::clamp(c, 0.0, 1.0);
  return RelaxedPoint(std::move(out));
}

using Projector = std::function<std::vector<double>(std::span<const double>)>;

inline Projector box_projector() {
  return [](std::span<const double> v) {
    std::vector<double> out(v.begin(), v.end());
    for (double& c : out) c = std::clamp(c, 0.0, 1.0);
    return out;
  };
}

struct OspgdConfig {
  double delta = 1.0;
  std::size_t horizon_T = 1;
  RelaxedPoint x_init;
  Projector projector;
  Rounder rounder;

  double eta() const { return delta / std::sqrt(static_cast<double>(horizon_T)); }

  // 𝒮 = 2^V: box projection, threshold rounding, x_1 at the cube center.
  static OspgdConfig unconstrained(std::size_t n, std::size_t horizon_T, double delta = 1.0) {
    if (horizon_T == 0) throw DomainError("horizon must be positive");
    if (!(delta > 0.0)) throw DomainError("delta must be positive");
    return OspgdConfig{delta, horizon_T, RelaxedPoint::constant(n, 0.5), box_projector(),
                       threshold_rounder(GroundSet(n))};
  }
};

class RegretLedger {
 public:
  struct Entry {
    double loss = 0.0;
    std::optional<double> optimum;
  };

  explicit RegretLedger(double alpha = 1.0, double epsilon = 0.1) : alpha_(alpha), epsilon_(epsilon) {
    if (!(alpha_ >= 1.0)) throw DomainError("alpha must be >= 1");
    if (!(epsilon_ > 0.0 && epsilon_ < 1.0)) throw DomainError("epsilon must lie in (0,1)");
  }

  void record(double loss, std::optional<double> optimum) {
    per_round_.push_back({loss, optimum});
    if (optimum) {
      cumulative_ += loss - alpha_ * *optimum;
    } else {
      complete_ = false;
    }
  }

  double alpha() const noexcept { return alpha_; }
  double epsilon() const noexcept { return epsilon_; }
  std::size_t rounds() const noexcept { return per_round_.size(); }
  const std::vector<Entry>& per_round() const noexcept { return per_round_; }
  bool available() const noexcept { return complete_ && !per_round_.empty(); }

  std::optional<double> cumulative() const {
    if (!available()) return std::nullopt;
    return cumulative_;
  }

  std::optional<double> time_averaged() const {
    if (!available()) return std::nullopt;
    return cumulative_ / static_cast<double>(per_round_.size());
  }

  // Σ_{s<=t} (loss_s − α·optimum_s) recomputed from the stored rounds.
  double cumulative_through(std::size_t t) const {
    if (t > per_round_.size()) throw DomainError("round index beyond ledger length");
    double acc = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
      if (!per_round_[i].optimum) throw DomainError("round optimum unavailable");
      acc += per_round_[i].loss - alpha_ * *per_round_[i].optimum;
    }
    return acc;
  }

 private:
  double alpha_;
  double epsilon_;
  std::vector<Entry> per_round_;
  double cumulative_ = 0.0;
  bool complete_ = true;
};

// ---------------------------------------------------------------------------
// Single-round update rules

inline SubsetMask osga_step(const ApproxSpec& spec, const SetFunction& prev_round_f_approx,
                            const FeasibleFamily& family) {
  if (!spec.exact_min) throw ConfigError("OSGA needs an exact minimizer for the approximation");
  MinResult best;
  try {
    best = spec.exact_min(prev_round_f_approx, family);
  } catch (const Error& e) {
    throw AlgorithmError(std::string("OSGA exact minimization failed: ") + e.what());
  }
  if (!family.contains(best.mask)) throw AlgorithmError("OSGA exact minimizer returned an infeasible set");
  return best.mask;
}

using MinOracle = std::function<MinResult(const SetFunction&)>;

// 𝒮 = 2^V, α = β = 1: minimize the previous loss itself.
inline SubsetMask osga_unconstrained_step(const SetFunction& f_prev, const MinOracle& min_oracle = {}) {
  if (min_oracle) return min_oracle(f_prev).mask;
  return brute_force_min(f_prev).mask;
}

inline SubsetMask osgga_step(const GenericApproxSpec& spec, const FeasibleFamily& family) {
  const std::size_t n = family.ground.size();
  if (spec.c.size() != n) throw DimensionError("generic approximation vector length mismatch");
  if (family.linear_min) return family.linear_min(spec.c);
  if (!family.enumerate) throw ConfigError("OSGGA needs a linear oracle or an enumerable family");
  std::optional<MinResult> best;
  family.enumerate([&](const SubsetMask& s) {
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (s.test(i)) v += spec.c[i];
    }
    if (!best || v < best->value || (v == best->value && s < best->mask)) best = MinResult{s, v};
  });
  if (!best) throw DomainError("feasible family is empty");
  return best->mask;
}

struct OspgdStep {
  RelaxedPoint x_next;
  SubsetMask s_next;
  std::vector<double> subgradient;
};

inline OspgdStep ospgd_step(const SetFunction& f_prev, const RelaxedPoint& x_t, const OspgdConfig& cfg,
                            SeededRng& rng) {
  auto g = lovasz_subgradient(f_prev, x_t);
  const double eta = cfg.eta();
  std::vector<double> moved(x_t.size());
  for (std::size_t i = 0; i < moved.size(); ++i) moved[i] = x_t[i] - eta * g[i];
  auto projected = cfg.projector(moved);
  if (projected.size() != x_t.size()) throw InvariantViolation("projector changed the dimension");
  for (double c : projected) {
    if (!(c >= 0.0 && c <= 1.0)) throw InvariantViolation("projector output left [0,1]^n");
  }
  RelaxedPoint x_next(std::move(projected));
  auto s_next = cfg.rounder(x_next, rng);
  if (!cfg.rounder.target().contains(s_next)) throw InvariantViolation("rounder output infeasible");
  return OspgdStep{std::move(x_next), std::move(s_next), std::move(g)};
}

// ---------------------------------------------------------------------------
// Online protocol

// Round t of a problem stream: the loss f_t plus whatever approximation the
// algorithm family needs.
struct Round {
  std::size_t t = 0;
  SetFunction f;
  std::optional<SetFunction> approx;
  std::optional<std::vector<double>> generic_c;
};

class ProblemStream {
 public:
  virtual ~ProblemStream() = default;
  // Called after S_t is committed; environments that react to decisions
  // (dispatch, switching) do so here.
  virtual void on_commit(std::size_t /*t*/, const SubsetMask& /*decision*/) {}
  // f_t, revealed strictly after S_t is committed. nullopt = exhausted.
  virtual std::optional<Round> reveal(std::size_t t) = 0;
};

class FunctionStream : public ProblemStream {
 public:
  using Generator = std::function<std::optional<Round>(std::size_t)>;
  explicit FunctionStream(Generator gen) : gen_(std::move(gen)) {}
  std::optional<Round> reveal(std::size_t t) override { return gen_(t); }

 private:
  Generator gen_;
};

class OnlineAlgorithm {
 public:
  virtual ~OnlineAlgorithm() = default;
  virtual std::string name() const = 0;
  virtual void reset(std::uint64_t seed) = 0;
  virtual SubsetMask decide(std::size_t t) = 0;
  virtual void observe(const Round& revealed) = 0;
};

class Osga : public OnlineAlgorithm {
 public:
  Osga(FeasibleFamily family, ApproxSpec spec = {}, std::optional<SubsetMask> initial = std::nullopt)
      : family_(std::move(family)), spec_(std::move(spec)), initial_(initial.value_or(SubsetMask(family_.ground.size()))) {}

  std::string name() const override { return "osga"; }
  void reset(std::uint64_t) override { prev_.reset(); }

  SubsetMask decide(std::size_t) override {
    if (!prev_) return initial_;
    return osga_step(spec_, *prev_, family_);
  }

  void observe(const Round& r) override { prev_ = r.approx ? *r.approx : r.f; }

 private:
  FeasibleFamily family_;
  ApproxSpec spec_;
  SubsetMask initial_;
  std::optional<SetFunction> prev_;
};

class Osgga : public OnlineAlgorithm {
 public:
  explicit Osgga(FeasibleFamily family, std::optional<SubsetMask> initial = std::nullopt)
      : family_(std::move(family)), initial_(initial.value_or(SubsetMask(family_.ground.size()))) {}

  std::string name() const override { return "osgga"; }
  void reset(std::uint64_t) override { prev_.reset(); }

  SubsetMask decide(std::size_t) override {
    if (!prev_) return initial_;
    return osgga_step(*prev_, family_);
  }

  void observe(const Round& r) override {
    if (!r.generic_c) throw ConfigError("OSGGA needs the generic approximation vector c each round");
    prev_ = GenericApproxSpec{*r.generic_c, 1.0, 1.0};
  }

 private:
  FeasibleFamily family_;
  SubsetMask initial_;
  std::optional<GenericApproxSpec> prev_;
};

class Ospgd : public OnlineAlgorithm {
 public:
  explicit Ospgd(OspgdConfig cfg) : cfg_(std::move(cfg)), x_(cfg_.x_init), next_(x_.size()) {}

  std::string name() const override { return "ospgd"; }

  void reset(std::uint64_t seed) override {
    rng_ = SeededRng(seed);
    x_ = cfg_.x_init;
    next_ = cfg_.rounder(x_, rng_);
  }

  SubsetMask decide(std::size_t) override { return next_; }

  void observe(const Round& r) override {
    auto step = ospgd_step(r.f.normalized() ? r.f : normalize(r.f), x_, cfg_, rng_);
    x_ = std::move(step.x_next);
    next_ = std::move(step.s_next);
  }

  const RelaxedPoint& state() const noexcept { return x_; }
  const OspgdConfig& config() const noexcept { return cfg_; }

 private:
  OspgdConfig cfg_;
  RelaxedPoint x_;
  SubsetMask next_;
  SeededRng rng_;
};

// ---------------------------------------------------------------------------
// Driver

using RoundOracle = std::function<MinResult(const Round&)>;

struct TraceRow {
  std::size_t t = 0;
  std::string algorithm;
  double loss = 0.0;
  std::optional<double> optimum;
  std::optional<double> regret_cum;
  std::optional<double> regret_avg;
  std::optional<double> variation_cum;
  SubsetMask mask;
  std::vector<double> extra;
};

struct RunResult {
  std::vector<TraceRow> trace;
  RegretLedger regret;
  VariationLedger variation;
};

// Runs T rounds. Per round: the algorithm commits S_t, the stream is told,
// f_t is revealed, the loss (and optimum, when an oracle is given) is booked,
// and only then does the algorithm observe f_t.
inline RunResult run_online(ProblemStream& stream, OnlineAlgorithm& algorithm, std::size_t T, std::uint64_t seed,
                            const RoundOracle& oracle = {}, double alpha = 1.0) {
  if (T == 0) throw DomainError("horizon must be positive");
  RunResult out{{}, RegretLedger(alpha), VariationLedger{}};
  out.trace.reserve(T);
  algorithm.reset(seed);
  for (std::size_t t = 1; t <= T; ++t) {
    const SubsetMask committed = algorithm.decide(t);
    stream.on_commit(t, committed);
    auto round = stream.reveal(t);
    if (!round) throw TruncationError("problem stream exhausted at round " + std::to_string(t));
    if (round->t != t) {
      throw ContractError("stream revealed round " + std::to_string(round->t) + " while committing round " +
                          std::to_string(t));
    }
    TraceRow row;
    row.t = t;
    row.algorithm = algorithm.name();
    row.loss = round->f(committed);
    row.mask = committed;
    if (oracle) {
      const auto best = oracle(*round);
      row.optimum = best.value;
      out.variation.append(best.mask);
      row.variation_cum = out.variation.cumulative();
    }
    out.regret.record(row.loss, row.optimum);
    row.regret_cum = out.regret.cumulative();
    row.regret_avg = out.regret.time_averaged();
    out.trace.push_back(std::move(row));
    algorithm.observe(*round);
  }
  return out;
}

inline RoundOracle brute_force_round_oracle(FeasibleFamily family) {
  return [family = std::move(family)](const Round& r) { return brute_force_min(r.f, family); };
}

// ---------------------------------------------------------------------------
// CSV trace

inline std::string format_real(double v) { return fmt::format("{:.17g}", v); }

inline std::string format_optional(const std::optional<double>& v) { return v ? format_real(*v) : "NA"; }

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows,
                            const std::vector<std::string>& extra_headers = {}) {
  os << "t,algorithm,loss,optimum,alpha_regret_cum,regret_time_avg,variation_cum,mask_hex";
  for (const auto& h : extra_headers) os << ',' << h;
  os << '\n';
  for (const auto& r : rows) {
    if (r.extra.size() != extra_headers.size()) throw DimensionError("trace row extra columns mismatch");
    os << r.t << ',' << r.algorithm << ',' << format_real(r.loss) << ',' << format_optional(r.optimum) << ','
       << format_optional(r.regret_cum) << ',' << format_optional(r.regret_avg) << ','
       << format_optional(r.variation_cum) << ',' << r.mask.to_hex();
    for (double e : r.extra) os << ',' << format_real(e);
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Regret bounds

// (αL/β)·Ṽ_T
inline double theorem1_bound(double alpha, double L, double beta, double variation) {
  return alpha * L / beta * variation;
}

// L·V_T, the unconstrained specialization.
inline double corollary1_bound(double L, double variation) { return L * variation; }

// (γ²·L̃^g·L/ν)·Ṽ_T^g
inline double corollary2_bound(double gamma, double L_generic, double L, double nu, double variation) {
  return gamma * gamma * L_generic * L / nu * variation;
}

// α(√n·δ·V_T + 5n/(2δ) + 4Mδ)·√T
inline double theorem2_bound(double alpha, std::size_t n, double delta, double variation, double M, std::size_t T) {
  const double nn = static_cast<double>(n);
  return alpha * (std::sqrt(nn) * delta * variation + 5.0 * nn / (2.0 * delta) + 4.0 * M * delta) *
         std::sqrt(static_cast<double>(T));
}

// √(nT)·δ·V_T + (5n/(2δ) + 4Mδ)·√T
inline double corollary3_expected_bound(std::size_t n, double delta, double variation, double M, std::size_t T) {
  return theorem2_bound(1.0, n, delta, variation, M, T);
}

// √(nT)·δ·V_T + (5n/(2δ) + 4Mδ + 2Mδ·log(1/ε))·√T
inline double corollary3_high_probability_bound(std::size_t n, double delta, double variation, double M,
                                                std::size_t T, double epsilon) {
  return corollary3_expected_bound(n, delta, variation, M, T) +
         2.0 * M * delta * std::log(1.0 / epsilon) * std::sqrt(static_cast<double>(T));
}

// ---------------------------------------------------------------------------
// Seed sweeps

// fn(seed) for every seed on a small worker pool. Results come back in seed
// order; the first exception (by seed position) is rethrown.
template <class Fn>
auto parallel_map_seeds(std::span<const std::uint64_t> seeds, Fn fn, unsigned workers = 0)
    -> std::vector<std::invoke_result_t<Fn&, std::uint64_t>> {
  using R = std::invoke_result_t<Fn&, std::uint64_t>;
  if (workers == 0) workers = std::max(1U, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(1, seeds.size())));
  std::vector<std::optional<R>> slots(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        slots[i].emplace(fn(seeds[i]));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  std::vector<R> out;
  out.reserve(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.push_back(std::move(*slots[i]));
  }
  return out;
}

}  // namespace subdyn
