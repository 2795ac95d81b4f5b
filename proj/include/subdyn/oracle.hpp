#pragma once

// Exhaustive ground-truth machinery. Every routine here enumerates; none
// samples. Size limits keep the full test suite laptop-fast.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "subdyn/core.hpp"

namespace subdyn {

inline constexpr std::size_t kMaxSubmodularCheckN = 16;
inline constexpr std::size_t kMaxSandwichAuditN = 16;
inline constexpr std::size_t kMaxLipschitzN = 12;

struct MinResult {
  SubsetMask mask;
  double value = 0.0;
};

namespace detail {

inline void require_capacity(std::size_t n, std::size_t limit, const char* what) {
  if (n > limit) {
    throw CapacityError(std::string(what) + " refused for n = " + std::to_string(n) + " > " +
                        std::to_string(limit));
  }
}

}  // namespace detail

// f on every mask, indexed by the mask's integer value.
inline std::vector<double> tabulate(const SetFunction& f) {
  detail::require_capacity(f.n(), kMaxBruteForceN, "tabulation");
  const std::size_t n = f.n();
  std::vector<double> table(std::size_t{1} << n);
  for (std::uint64_t bits = 0; bits < table.size(); ++bits) table[bits] = f(SubsetMask::from_bits(n, bits));
  return table;
}

// Exact minimizer over the family; smallest mask wins ties.
inline MinResult brute_force_min(const SetFunction& f, const FeasibleFamily& family) {
  detail::require_capacity(f.n(), kMaxBruteForceN, "brute-force minimization");
  if (family.ground.size() != f.n()) throw DimensionError("family and function ground sets differ");
  if (!family.enumerate) throw ConfigError("brute-force minimization needs an enumerable family");
  std::optional<MinResult> best;
  family.enumerate([&](const SubsetMask& s) {
    const double v = f(s);
    if (!best || v < best->value || (v == best->value && s < best->mask)) best = MinResult{s, v};
  });
  if (!best) throw DomainError("feasible family is empty");
  return *best;
}

// Convenience: argmin over 2^V.
inline MinResult brute_force_min(const SetFunction& f) { return brute_force_min(f, power_set(f.ground())); }

struct SubmodularityCounterexample {
  SubsetMask A;
  SubsetMask B;
  std::size_t element = 0;
};

struct SubmodularityReport {
  bool holds = true;
  std::optional<SubmodularityCounterexample> counterexample;
  double margin = 0.0;  // min over (A ⊆ B, i ∉ B) of [f(A+i) − f(A)] − [f(B+i) − f(B)]
};

// Scans every triple A ⊆ B ⊆ V, i ∉ B. `tolerance` absorbs round-off in the
// marginal differences; a triple is a violation only when its slack is below
// −tolerance. The reported margin is the raw minimum.
inline SubmodularityReport check_submodular(const SetFunction& f, double tolerance = 1e-9) {
  detail::require_capacity(f.n(), kMaxSubmodularCheckN, "submodularity check");
  const std::size_t n = f.n();
  const auto table = tabulate(f);
  const std::uint64_t full = (std::uint64_t{1} << n) - 1;

  SubmodularityReport report;
  report.margin = std::numeric_limits<double>::infinity();
  std::uint64_t worst_a = 0, worst_b = 0;
  std::size_t worst_i = 0;

  for (std::uint64_t b = 0; b <= full; ++b) {
    const std::uint64_t outside = full & ~b;
    if (outside == 0) continue;
    // Enumerate submasks a of b, including b and 0.
    for (std::uint64_t a = b;; a = (a - 1) & b) {
      for (std::uint64_t rest = outside; rest != 0; rest &= rest - 1) {
        const std::uint64_t bit = rest & (~rest + 1);
        const double slack = (table[a | bit] - table[a]) - (table[b | bit] - table[b]);
        if (slack < report.margin) {
          report.margin = slack;
          worst_a = a;
          worst_b = b;
          worst_i = static_cast<std::size_t>(std::countr_zero(bit));
        }
      }
      if (a == 0) break;
    }
  }
  if (report.margin < -tolerance) {
    report.holds = false;
    report.counterexample =
        SubmodularityCounterexample{SubsetMask::from_bits(n, worst_a), SubsetMask::from_bits(n, worst_b), worst_i};
  }
  return report;
}

struct SandwichReport {
  bool passes = true;
  double worst_ratio = 0.0;           // max f̃(S)/f(S) over masks with f(S) > 0
  std::vector<SubsetMask> flagged;    // masks with f(S) <= 0, ratio skipped
  std::optional<SubsetMask> first_violation;
};

// Exhaustive check of f(S) <= f̃(S) <= beta·f(S).
inline SandwichReport audit_beta_sandwich(const SetFunction& f, const SetFunction& approx, double beta,
                                          double rel_tol = 1e-12) {
  detail::require_capacity(f.n(), kMaxSandwichAuditN, "sandwich audit");
  if (approx.n() != f.n()) throw DimensionError("approximation ground set differs");
  if (!(beta >= 1.0)) throw DomainError("beta must be >= 1");
  const std::size_t n = f.n();
  SandwichReport rep;
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
    const auto s = SubsetMask::from_bits(n, bits);
    const double fv = f(s);
    const double av = approx(s);
    const double slack = rel_tol * std::max({1.0, std::abs(fv), std::abs(av)});
    const bool ok = fv <= av + slack && av <= beta * fv + slack;
    if (!ok && rep.passes) {
      rep.passes = false;
      rep.first_violation = s;
    }
    if (fv > 0.0) {
      rep.worst_ratio = std::max(rep.worst_ratio, av / fv);
    } else {
      rep.flagged.push_back(s);
    }
  }
  return rep;
}

struct GenericSandwichReport {
  bool passes = true;
  double worst_gamma = 0.0;  // max f(S)/sqrt(Σc) over feasible masks with Σc > 0
  std::optional<SubsetMask> first_violation;
};

// Exhaustive check of (Σ_{i∈S} c_i) <= f(S)² <= γ²·(Σ_{i∈S} c_i) over a family.
inline GenericSandwichReport audit_generic_sandwich(const SetFunction& f, std::span<const double> c, double gamma,
                                                    const FeasibleFamily& family, double rel_tol = 1e-12) {
  detail::require_capacity(f.n(), kMaxSandwichAuditN, "generic sandwich audit");
  if (c.size() != f.n()) throw DimensionError("generic approximation vector length mismatch");
  GenericSandwichReport rep;
  family.enumerate([&](const SubsetMask& s) {
    double sq = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (s.test(i)) sq += c[i];
    }
    const double fv = f(s);
    const double f2 = fv * fv;
    const double slack = rel_tol * std::max({1.0, f2, sq});
    const bool ok = sq <= f2 + slack && f2 <= gamma * gamma * sq + slack;
    if (!ok && rep.passes) {
      rep.passes = false;
      rep.first_violation = s;
    }
    if (sq > 0.0) rep.worst_gamma = std::max(rep.worst_gamma, std::abs(fv) / std::sqrt(sq));
  });
  return rep;
}

// max over S1 ≠ S2 of |f(S1) − f(S2)| / card(S1 ⊖ S2).
inline double exact_lipschitz_modulus(const SetFunction& f) {
  detail::require_capacity(f.n(), kMaxLipschitzN, "Lipschitz modulus scan");
  const auto table = tabulate(f);
  double best = 0.0;
  for (std::uint64_t a = 0; a < table.size(); ++a) {
    for (std::uint64_t b = a + 1; b < table.size(); ++b) {
      const double d = std::abs(table[a] - table[b]) / static_cast<double>(std::popcount(a ^ b));
      best = std::max(best, d);
    }
  }
  return best;
}

// max |f(S)| over all masks.
inline double exact_bound(const SetFunction& f) {
  const auto table = tabulate(f);
  double m = 0.0;
  for (double v : table) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace subdyn
