#pragma once

// Ground sets, subset masks, set-function handles, feasible families and the
// cumulative-variation ledger shared by every online algorithm.

#include <algorithm>
#include <bit>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "subdyn/errors.hpp"

namespace subdyn {

// Largest ground set the exhaustive oracles will enumerate.
inline constexpr std::size_t kMaxBruteForceN = 24;

class GroundSet {
 public:
  explicit GroundSet(std::size_t n) : n_(n) {
    if (n_ == 0) throw DomainError("ground set must have at least one element");
  }

  GroundSet(std::size_t n, std::vector<std::string> labels) : GroundSet(n) {
    if (labels.size() != n_) throw DimensionError("ground set labels must have exactly n entries");
    std::unordered_set<std::string> seen(labels.begin(), labels.end());
    if (seen.size() != labels.size()) throw DomainError("ground set labels must be distinct");
    labels_ = std::move(labels);
  }

  std::size_t size() const noexcept { return n_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  std::string label(std::size_t i) const {
    return labels_.empty() ? std::to_string(i + 1) : labels_.at(i);
  }

  friend bool operator==(const GroundSet& a, const GroundSet& b) { return a.n_ == b.n_; }

 private:
  std::size_t n_;
  std::vector<std::string> labels_;
};

// A subset S of {0, ..., n-1} stored as a little-endian array of 64-bit words.
// Bit i of the mask is element i. Ordering is the unsigned-integer order of the
// whole bit string, which is the tie-break used by every argmin in the library.
class SubsetMask {
 public:
  SubsetMask() = default;

  explicit SubsetMask(std::size_t n) : n_(n), words_(word_count(n), 0) {}

  static SubsetMask from_bits(std::size_t n, std::uint64_t bits) {
    SubsetMask m(n);
    if (n < 64 && (bits >> n) != 0) throw DimensionError("mask bits beyond ground set size");
    if (!m.words_.empty()) m.words_[0] = bits;
    return m;
  }

  static SubsetMask from_indices(std::size_t n, std::span<const std::size_t> idx) {
    SubsetMask m(n);
    for (std::size_t i : idx) m.set(i);
    return m;
  }

  static SubsetMask from_indices(std::size_t n, std::initializer_list<std::size_t> idx) {
    return from_indices(n, std::span<const std::size_t>(idx.begin(), idx.size()));
  }

  static SubsetMask full(std::size_t n) {
    SubsetMask m(n);
    for (std::size_t i = 0; i < n; ++i) m.set(i);
    return m;
  }

  // Inverse of characteristic(); every entry must be exactly 0 or 1.
  static SubsetMask from_characteristic(std::span<const double> chi) {
    SubsetMask m(chi.size());
    for (std::size_t i = 0; i < chi.size(); ++i) {
      if (chi[i] == 1.0) {
        m.set(i);
      } else if (chi[i] != 0.0) {
        throw DomainError("characteristic vector entries must be 0 or 1");
      }
    }
    return m;
  }

  std::size_t size() const noexcept { return n_; }

  bool test(std::size_t i) const {
    check_index(i);
    return (words_[i / 64] >> (i % 64)) & 1U;
  }

  SubsetMask& set(std::size_t i, bool value = true) {
    check_index(i);
    const std::uint64_t bit = std::uint64_t{1} << (i % 64);
    if (value) {
      words_[i / 64] |= bit;
    } else {
      words_[i / 64] &= ~bit;
    }
    return *this;
  }

  SubsetMask& reset(std::size_t i) { return set(i, false); }

  std::size_t count() const noexcept {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }

  bool none() const noexcept {
    return std::all_of(words_.begin(), words_.end(), [](auto w) { return w == 0; });
  }

  // Only valid for n <= 64.
  std::uint64_t to_u64() const {
    if (n_ > 64) throw CapacityError("mask wider than 64 bits has no single-word value");
    return words_.empty() ? 0 : words_[0];
  }

  std::span<const std::uint64_t> words() const noexcept { return words_; }

  std::vector<double> characteristic() const {
    std::vector<double> chi(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) chi[i] = test(i) ? 1.0 : 0.0;
    return chi;
  }

  std::vector<std::size_t> elements() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n_; ++i) {
      if (test(i)) out.push_back(i);
    }
    return out;
  }

  bool is_subset_of(const SubsetMask& other) const {
    same_ground(other);
    for (std::size_t w = 0; w < words_.size(); ++w) {
      if ((words_[w] & ~other.words_[w]) != 0) return false;
    }
    return true;
  }

  // Fixed-width lowercase hex, most significant digit first, ceil(n/4) digits.
  std::string to_hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    const std::size_t digits = std::max<std::size_t>(1, (n_ + 3) / 4);
    std::string out(digits, '0');
    for (std::size_t d = 0; d < digits; ++d) {
      const std::size_t bit = 4 * d;
      unsigned nibble = 0;
      for (std::size_t b = 0; b < 4 && bit + b < n_; ++b) {
        nibble |= static_cast<unsigned>(test(bit + b)) << b;
      }
      out[digits - 1 - d] = kDigits[nibble];
    }
    return out;
  }

  SubsetMask& operator|=(const SubsetMask& o) { return combine(o, [](auto a, auto b) { return a | b; }); }
  SubsetMask& operator&=(const SubsetMask& o) { return combine(o, [](auto a, auto b) { return a & b; }); }
  SubsetMask& operator^=(const SubsetMask& o) { return combine(o, [](auto a, auto b) { return a ^ b; }); }

  friend SubsetMask operator|(SubsetMask a, const SubsetMask& b) { return a |= b; }
  friend SubsetMask operator&(SubsetMask a, const SubsetMask& b) { return a &= b; }
  friend SubsetMask operator^(SubsetMask a, const SubsetMask& b) { return a ^= b; }

  friend bool operator==(const SubsetMask& a, const SubsetMask& b) = default;

  friend std::strong_ordering operator<=>(const SubsetMask& a, const SubsetMask& b) {
    if (a.n_ != b.n_) return a.n_ <=> b.n_;
    for (std::size_t w = a.words_.size(); w-- > 0;) {
      if (a.words_[w] != b.words_[w]) return a.words_[w] <=> b.words_[w];
    }
    return std::strong_ordering::equal;
  }

  void same_ground(const SubsetMask& other) const {
    if (n_ != other.n_) throw DimensionError("subset masks over different ground sets");
  }

 private:
  static std::size_t word_count(std::size_t n) { return (n + 63) / 64; }

  void check_index(std::size_t i) const {
    if (i >= n_) throw DimensionError("element index outside ground set");
  }

  template <class Op>
  SubsetMask& combine(const SubsetMask& o, Op op) {
    same_ground(o);
    for (std::size_t w = 0; w < words_.size(); ++w) words_[w] = op(words_[w], o.words_[w]);
    return *this;
  }

  std::size_t n_ = 0;
  std::vector<std::uint64_t> words_;
};

struct SubsetMaskHash {
  std::size_t operator()(const SubsetMask& m) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ m.size();
    for (auto w : m.words()) {
      h ^= w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

// card(a ⊖ b).
inline std::size_t symmetric_difference_card(const SubsetMask& a, const SubsetMask& b) {
  a.same_ground(b);
  std::size_t c = 0;
  for (std::size_t w = 0; w < a.words().size(); ++w) {
    c += static_cast<std::size_t>(std::popcount(a.words()[w] ^ b.words()[w]));
  }
  return c;
}

// Evaluatable set function f: 2^V -> R with a declared bound M on |f|.
// Every call checks the mask dimension and the bound; the wrapped callable
// must be reentrant for the handle to be shared across threads.
class SetFunction {
 public:
  using Eval = std::function<double(const SubsetMask&)>;

  SetFunction(GroundSet ground, Eval eval, double bound_M = std::numeric_limits<double>::infinity(),
              bool normalized = false)
      : ground_(std::move(ground)), eval_(std::move(eval)), bound_(bound_M), normalized_(normalized) {
    if (!eval_) throw ContractError("set function needs a callable");
    if (!(bound_ > 0.0)) throw DomainError("bound M must be positive");
    if (normalized_) {
      const double at_empty = (*this)(SubsetMask(ground_.size()));
      if (at_empty != 0.0) throw ContractError("function flagged normalized but f(empty) != 0");
    }
  }

  double operator()(const SubsetMask& s) const {
    if (s.size() != ground_.size()) throw DimensionError("mask does not match set function ground set");
    const double v = eval_(s);
    if (!(std::abs(v) <= bound_)) {
      throw BoundViolation("|f(S)| = " + std::to_string(std::abs(v)) + " exceeds bound M = " +
                           std::to_string(bound_) + " at S = 0x" + s.to_hex());
    }
    return v;
  }

  const GroundSet& ground() const noexcept { return ground_; }
  std::size_t n() const noexcept { return ground_.size(); }
  double bound() const noexcept { return bound_; }
  bool normalized() const noexcept { return normalized_; }
  const Eval& callable() const noexcept { return eval_; }

 private:
  GroundSet ground_;
  Eval eval_;
  double bound_;
  bool normalized_;
};

// S -> f(S) - f(empty). f(empty) is evaluated once, at construction.
inline SetFunction normalize(const SetFunction& f) {
  if (f.normalized()) return f;
  const double offset = f(SubsetMask(f.n()));
  auto inner = f;
  double bound = f.bound() + std::abs(offset);
  return SetFunction(
      f.ground(), [inner, offset](const SubsetMask& s) { return inner(s) - offset; }, bound, true);
}

// Opt-in memoization keyed by mask bits. The cache is guarded by a mutex so the
// returned handle stays safe for concurrent readers.
inline SetFunction memoize(const SetFunction& f) {
  struct Cache {
    std::mutex mu;
    std::unordered_map<SubsetMask, double, SubsetMaskHash> values;
  };
  auto cache = std::make_shared<Cache>();
  auto inner = f;
  return SetFunction(
      f.ground(),
      [inner, cache](const SubsetMask& s) {
        {
          std::lock_guard lock(cache->mu);
          if (auto it = cache->values.find(s); it != cache->values.end()) return it->second;
        }
        const double v = inner(s);
        std::lock_guard lock(cache->mu);
        cache->values.emplace(s, v);
        return v;
      },
      f.bound(), f.normalized());
}

// f(S) = sum_{i in S} w_i.
inline SetFunction modular_function(std::vector<double> weights, double bound_M = 0.0) {
  if (weights.empty()) throw DomainError("modular function needs at least one weight");
  if (bound_M <= 0.0) {
    double pos = 0.0;
    double neg = 0.0;
    for (double w : weights) (w > 0 ? pos : neg) += w;
    bound_M = std::max({pos, -neg, 1e-300});
  }
  const std::size_t n = weights.size();
  return SetFunction(
      GroundSet(n),
      [w = std::move(weights)](const SubsetMask& s) {
        double acc = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
          if (s.test(i)) acc += w[i];
        }
        return acc;
      },
      bound_M, true);
}

struct WeightedEdge {
  std::size_t u;
  std::size_t v;
  double weight;
};

// Weighted graph cut: f(S) = sum of weights of edges with exactly one endpoint in S.
inline SetFunction cut_function(std::size_t n, std::vector<WeightedEdge> edges) {
  double total = 0.0;
  for (const auto& e : edges) {
    if (e.u >= n || e.v >= n) throw DimensionError("cut edge endpoint outside ground set");
    if (e.weight < 0.0) throw DomainError("cut weights must be nonnegative");
    total += e.weight;
  }
  return SetFunction(
      GroundSet(n),
      [edges = std::move(edges)](const SubsetMask& s) {
        double acc = 0.0;
        for (const auto& e : edges) {
          if (s.test(e.u) != s.test(e.v)) acc += e.weight;
        }
        return acc;
      },
      std::max(total, 1e-300), true);
}

// Membership predicate over 2^V with optional exhaustive enumeration and an
// optional exact minimizer for modular objectives (weights per element).
struct FeasibleFamily {
  using Visitor = std::function<void(const SubsetMask&)>;
  using Enumerate = std::function<void(const Visitor&)>;
  using LinearMin = std::function<SubsetMask(std::span<const double>)>;

  GroundSet ground;
  std::function<bool(const SubsetMask&)> contains;
  Enumerate enumerate;   // may be empty
  LinearMin linear_min;  // may be empty
  bool unconstrained = false;
};

namespace detail {

inline void require_enumerable(std::size_t n) {
  if (n > kMaxBruteForceN) {
    throw CapacityError("exhaustive enumeration refused for n = " + std::to_string(n) + " > " +
                        std::to_string(kMaxBruteForceN));
  }
}

inline void enumerate_all(std::size_t n, const FeasibleFamily::Visitor& visit) {
  require_enumerable(n);
  const std::uint64_t count = std::uint64_t{1} << n;
  for (std::uint64_t bits = 0; bits < count; ++bits) visit(SubsetMask::from_bits(n, bits));
}

// Indices sorted by ascending weight, ties by ascending index.
inline std::vector<std::size_t> ascending_order(std::span<const double> w) {
  std::vector<std::size_t> idx(w.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return w[a] < w[b]; });
  return idx;
}

}  // namespace detail

// S = 2^V.
inline FeasibleFamily power_set(const GroundSet& ground) {
  const std::size_t n = ground.size();
  FeasibleFamily fam{ground, [n](const SubsetMask& s) { return s.size() == n; },
                     [n](const FeasibleFamily::Visitor& v) { detail::enumerate_all(n, v); },
                     [n](std::span<const double> w) {
                       if (w.size() != n) throw DimensionError("weight vector length mismatch");
                       SubsetMask s(n);
                       for (std::size_t i = 0; i < n; ++i) {
                         if (w[i] < 0.0) s.set(i);
                       }
                       return s;
                     },
                     true};
  return fam;
}

// {S : |S| <= k}.
inline FeasibleFamily cardinality_at_most(const GroundSet& ground, std::size_t k) {
  const std::size_t n = ground.size();
  FeasibleFamily fam{ground,
                     [n, k](const SubsetMask& s) { return s.size() == n && s.count() <= k; },
                     [n, k](const FeasibleFamily::Visitor& v) {
                       detail::enumerate_all(n, [&](const SubsetMask& s) {
                         if (s.count() <= k) v(s);
                       });
                     },
                     [n, k](std::span<const double> w) {
                       if (w.size() != n) throw DimensionError("weight vector length mismatch");
                       SubsetMask s(n);
                       std::size_t taken = 0;
                       for (std::size_t i : detail::ascending_order(w)) {
                         if (taken == k || !(w[i] < 0.0)) break;
                         s.set(i);
                         ++taken;
                       }
                       return s;
                     },
                     false};
  return fam;
}

// {S : |S| = k}.
inline FeasibleFamily cardinality_exactly(const GroundSet& ground, std::size_t k) {
  const std::size_t n = ground.size();
  if (k > n) throw DomainError("cardinality exceeds ground set size");
  FeasibleFamily fam{ground,
                     [n, k](const SubsetMask& s) { return s.size() == n && s.count() == k; },
                     [n, k](const FeasibleFamily::Visitor& v) {
                       detail::enumerate_all(n, [&](const SubsetMask& s) {
                         if (s.count() == k) v(s);
                       });
                     },
                     [n, k](std::span<const double> w) {
                       if (w.size() != n) throw DimensionError("weight vector length mismatch");
                       SubsetMask s(n);
                       auto order = detail::ascending_order(w);
                       for (std::size_t j = 0; j < k; ++j) s.set(order[j]);
                       return s;
                     },
                     false};
  return fam;
}

// Running sum of sqrt(card(S_t ⊖ S_{t-1})) over a comparator sequence.
class VariationLedger {
 public:
  void append(const SubsetMask& next) {
    if (!history_.empty()) {
      cumulative_ += std::sqrt(static_cast<double>(symmetric_difference_card(history_.back(), next)));
    }
    history_.push_back(next);
  }

  double cumulative() const noexcept { return cumulative_; }
  const std::vector<SubsetMask>& history() const noexcept { return history_; }
  bool empty() const noexcept { return history_.empty(); }

 private:
  std::vector<SubsetMask> history_;
  double cumulative_ = 0.0;
};

// Value-returning form of VariationLedger::append.
inline VariationLedger append_variation(VariationLedger ledger, const SubsetMask& next) {
  ledger.append(next);
  return ledger;
}

}  // namespace subdyn
