#pragma once

// Lovász extension of a normalized set function and its greedy subgradient.
//
// For x in [0,1]^n let π order the coordinates descending (ties by ascending
// index) and P_i = {π(1), ..., π(i)}. Then
//
//   f̂(x) = Σ_i x_{π(i)} (f(P_i) − f(P_{i−1}))
//        = Σ_i (x_{π(i)} − x_{π(i+1)}) f(P_i),      x_{π(n+1)} := 0,
//
// and g with g_{π(i)} = f(P_i) − f(P_{i−1}) is a subgradient of f̂ at x
// whenever f is submodular. The value is accumulated in the second
// (Abel-summed) form: at a vertex χ_A only one coefficient is nonzero and it
// equals 1, so f̂(χ_A) reproduces f(A) bit for bit.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "subdyn/core.hpp"

namespace subdyn {

class RelaxedPoint {
 public:
  explicit RelaxedPoint(std::vector<double> coords) : coords_(std::move(coords)) {
    if (coords_.empty()) throw DimensionError("relaxed point must have at least one coordinate");
    for (double c : coords_) {
      if (!(c >= 0.0 && c <= 1.0)) throw DomainError("relaxed point coordinate outside [0,1]");
    }
  }

  static RelaxedPoint constant(std::size_t n, double value) {
    return RelaxedPoint(std::vector<double>(n, value));
  }

  static RelaxedPoint characteristic(const SubsetMask& s) { return RelaxedPoint(s.characteristic()); }

  std::size_t size() const noexcept { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }
  std::span<const double> coords() const noexcept { return coords_; }

  double norm2() const {
    double acc = 0.0;
    for (double c : coords_) acc += c * c;
    return std::sqrt(acc);
  }

  friend bool operator==(const RelaxedPoint&, const RelaxedPoint&) = default;

 private:
  std::vector<double> coords_;
};

struct SortPermutation {
  std::vector<std::size_t> order;  // 0-based element indices, largest coordinate first
};

inline SortPermutation sort_descending(const RelaxedPoint& x) {
  SortPermutation p;
  p.order.resize(x.size());
  std::iota(p.order.begin(), p.order.end(), 0);
  std::stable_sort(p.order.begin(), p.order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });
  return p;
}

struct LovaszEvaluation {
  double value = 0.0;
  std::vector<double> subgradient;
};

namespace detail {

inline void require_lovasz_input(const SetFunction& f, const RelaxedPoint& x) {
  if (!f.normalized()) throw ContractError("Lovász extension needs a normalized set function");
  if (x.size() != f.n()) throw DimensionError("relaxed point length does not match ground set");
}

// f(P_0), ..., f(P_n): exactly n + 1 evaluations.
inline std::vector<double> prefix_values(const SetFunction& f, const SortPermutation& perm) {
  std::vector<double> values(perm.order.size() + 1);
  SubsetMask prefix(f.n());
  values[0] = f(prefix);
  for (std::size_t i = 0; i < perm.order.size(); ++i) {
    prefix.set(perm.order[i]);
    values[i + 1] = f(prefix);
  }
  return values;
}

inline double abel_sum(const RelaxedPoint& x, const SortPermutation& perm, std::span<const double> prefix) {
  const std::size_t n = perm.order.size();
  double value = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double here = x[perm.order[i]];
    const double next = i + 1 < n ? x[perm.order[i + 1]] : 0.0;
    const double coef = here - next;
    if (coef != 0.0) value += coef * prefix[i + 1];
  }
  return value;
}

}  // namespace detail

// Fused sweep: one set of n + 1 evaluations yields both f̂(x) and g.
inline LovaszEvaluation lovasz_evaluate(const SetFunction& f, const RelaxedPoint& x) {
  detail::require_lovasz_input(f, x);
  const auto perm = sort_descending(x);
  const auto prefix = detail::prefix_values(f, perm);
  LovaszEvaluation out;
  out.value = detail::abel_sum(x, perm, prefix);
  out.subgradient.assign(x.size(), 0.0);
  for (std::size_t i = 0; i < perm.order.size(); ++i) {
    out.subgradient[perm.order[i]] = prefix[i + 1] - prefix[i];
  }
  return out;
}

inline double lovasz_value(const SetFunction& f, const RelaxedPoint& x) {
  detail::require_lovasz_input(f, x);
  const auto perm = sort_descending(x);
  const auto prefix = detail::prefix_values(f, perm);
  return detail::abel_sum(x, perm, prefix);
}

inline std::vector<double> lovasz_subgradient(const SetFunction& f, const RelaxedPoint& x) {
  return lovasz_evaluate(f, x).subgradient;
}

}  // namespace subdyn
