#pragma once

#include <functional>
#include <optional>

#include "subdyn/core.hpp"
#include "subdyn/log.hpp"
#include "subdyn/lovasz.hpp"
#include "subdyn/rng.hpp"

namespace subdyn {

// S = {i : x_i >= p} for a single p ~ Uniform(0,1]. One shared threshold per
// call keeps E[f(S)] = f̂(x); vertices of the cube round to themselves.
inline SubsetMask threshold_round(const RelaxedPoint& x, SeededRng& rng) {
  const double p = rng.uniform_open_closed();
  SubsetMask s(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] >= p) s.set(i);
  }
  return s;
}

// Rounding map onto a feasible family with approximation guarantee alpha.
class Rounder {
 public:
  using RoundFn = std::function<SubsetMask(const RelaxedPoint&, SeededRng&)>;

  Rounder(double alpha, FeasibleFamily target, RoundFn round)
      : alpha_(alpha), target_(std::move(target)), round_(std::move(round)) {
    if (!(alpha_ >= 1.0)) throw DomainError("rounder alpha must be >= 1");
    if (!round_) throw ContractError("rounder needs a rounding callable");
  }

  double alpha() const noexcept { return alpha_; }
  const FeasibleFamily& target() const noexcept { return target_; }

  SubsetMask operator()(const RelaxedPoint& x, SeededRng& rng) const { return round_(x, rng); }

 private:
  double alpha_;
  FeasibleFamily target_;
  RoundFn round_;
};

// Unconstrained threshold rounding, alpha = 1 in expectation.
inline Rounder threshold_rounder(const GroundSet& ground) {
  return Rounder(1.0, power_set(ground), [](const RelaxedPoint& x, SeededRng& rng) { return threshold_round(x, rng); });
}

// Maps a binary point to its set; rejects fractional input.
inline Rounder identity_rounder(FeasibleFamily target) {
  return Rounder(1.0, std::move(target), [](const RelaxedPoint& x, SeededRng&) {
    return SubsetMask::from_characteristic(x.coords());
  });
}

struct RoundingOutcome {
  SubsetMask mask;
  std::optional<double> realized_ratio;  // f(S) / f̂(x), only when f̂(x) > 0
};

// Rounds and fails fast if the rounder leaves its target family. When an audit
// function is supplied, the realized ratio f(S)/f̂(x) is reported.
inline RoundingOutcome round_with_guarantee(const Rounder& r, const RelaxedPoint& x, SeededRng& rng,
                                            const SetFunction* audit = nullptr) {
  RoundingOutcome out{r(x, rng), std::nullopt};
  if (out.mask.size() != x.size() || !r.target().contains(out.mask)) {
    throw InvariantViolation("rounder returned a mask outside its feasible family: 0x" + out.mask.to_hex());
  }
  if (audit != nullptr) {
    const double relaxed = lovasz_value(*audit, x);
    if (relaxed > 0.0) {
      out.realized_ratio = (*audit)(out.mask) / relaxed;
      logger().debug("rounding ratio f(S)/f^(x) = {} (alpha = {})", *out.realized_ratio, r.alpha());
    }
  }
  return out;
}

}  // namespace subdyn
