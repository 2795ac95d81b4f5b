#pragma once

// Instance generators shared by the unit tests and the acceptance binary.

#include <cmath>
#include <string>
#include <vector>

#include "subdyn/algorithms.hpp"
#include "subdyn/core.hpp"
#include "subdyn/lovasz.hpp"
#include "subdyn/oracle.hpp"
#include "subdyn/rng.hpp"

namespace subdyn::testkit {

inline std::string source_path(const std::string& rel) { return std::string(SUBDYN_SOURCE_DIR) + "/" + rel; }

// Exact max |f| over 2^V, nudged up so the bound check never trips on the
// extreme mask itself.
inline double tight_bound(const SetFunction::Eval& eval, std::size_t n) {
  double m = 0.0;
  for (std::uint64_t b = 0; b < (std::uint64_t{1} << n); ++b) m = std::max(m, std::abs(eval(SubsetMask::from_bits(n, b))));
  return m > 0.0 ? m * (1.0 + 1e-12) : 1.0;
}

// Normalized submodular function: concave-of-modular terms plus a cut plus a
// signed modular part. Each piece is submodular and zero at ∅.
inline SetFunction random_submodular(std::size_t n, SeededRng& rng) {
  const std::size_t terms = 1 + rng.below(3);
  std::vector<double> a(terms);
  std::vector<std::vector<double>> w(terms, std::vector<double>(n));
  for (std::size_t j = 0; j < terms; ++j) {
    a[j] = 0.5 + 2.0 * rng.uniform();
    for (auto& x : w[j]) x = rng.uniform() < 0.3 ? 0.0 : 3.0 * rng.uniform();
  }
  std::vector<WeightedEdge> edges;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      if (rng.uniform() < 0.3) edges.push_back({u, v, rng.uniform()});
    }
  }
  std::vector<double> m(n);
  for (auto& x : m) x = 2.0 * rng.uniform() - 1.0;

  SetFunction::Eval eval = [a, w, edges, m](const SubsetMask& s) {
    double v = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.test(i)) acc += w[j][i];
      }
      v += a[j] * std::sqrt(acc);
    }
    for (const auto& e : edges) {
      if (s.test(e.u) != s.test(e.v)) v += e.weight;
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s.test(i)) v += m[i];
    }
    return v;
  };
  return SetFunction(GroundSet(n), eval, tight_bound(eval, n), true);
}

inline RelaxedPoint random_point(std::size_t n, SeededRng& rng) {
  std::vector<double> x(n);
  for (auto& c : x) c = rng.uniform();
  return RelaxedPoint(std::move(x));
}

inline SetFunction from_table(std::size_t n, std::vector<double> table, bool normalized = false) {
  SetFunction::Eval eval = [table](const SubsetMask& s) { return table[s.to_u64()]; };
  return SetFunction(GroundSet(n), eval, tight_bound(eval, n), normalized);
}

// Stream of β-approximated losses whose approximation minimizers move by at
// most one element per round and change at most `max_changes` times overall.
// f̃_t = fixed submodular part + drifting modular part, shifted so min f̃_t = floor;
// f_t = f̃_t / (1 + (β − 1)·h_t) with h_t ∈ [0,1] drawn per mask, so
// f_t <= f̃_t <= β·f_t holds by construction.
struct SlowStream {
  std::vector<SetFunction> f;
  std::vector<SetFunction> approx;
  std::vector<SubsetMask> approx_min;
  double beta = 1.0;
};

inline SlowStream slow_stream(std::size_t n, std::size_t T, double beta, std::size_t max_changes, SeededRng& rng,
                              double drift = 0.15, double floor = 0.1) {
  const auto base = tabulate(random_submodular(n, rng));
  const std::size_t count = base.size();
  std::vector<double> m(n);
  for (auto& x : m) x = 2.0 * rng.uniform() - 1.0;

  auto table_for = [&](const std::vector<double>& w) {
    std::vector<double> t(count);
    for (std::size_t b = 0; b < count; ++b) {
      double v = base[b];
      for (std::size_t i = 0; i < n; ++i) v += ((b >> i) & 1U) ? w[i] : 0.0;
      t[b] = v;
    }
    const double lo = *std::min_element(t.begin(), t.end());
    for (auto& v : t) v += floor - lo;
    return t;
  };
  auto argmin = [](const std::vector<double>& t) {
    return static_cast<std::uint64_t>(std::min_element(t.begin(), t.end()) - t.begin());
  };

  SlowStream out;
  out.beta = beta;
  std::size_t changes = 0;
  auto table = table_for(m);
  std::uint64_t prev = argmin(table);
  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0) {
      double step = drift;
      for (int attempt = 0; attempt < 60; ++attempt, step *= 0.8) {
        auto w = m;
        for (auto& x : w) x += step * (2.0 * rng.uniform() - 1.0);
        auto cand = table_for(w);
        const auto best = argmin(cand);
        const int moved = std::popcount(best ^ prev);
        if (moved == 0 || (moved == 1 && changes < max_changes)) {
          changes += moved;
          m = w;
          table = std::move(cand);
          prev = best;
          break;
        }
      }
    }
    std::vector<double> ft(count);
    for (std::size_t b = 0; b < count; ++b) ft[b] = table[b] / (1.0 + (beta - 1.0) * rng.uniform());
    out.approx.push_back(from_table(n, table));
    out.f.push_back(from_table(n, ft));
    out.approx_min.push_back(SubsetMask::from_bits(n, prev));
  }
  return out;
}

class VectorStream : public ProblemStream {
 public:
  explicit VectorStream(const SlowStream& s) : s_(s) {}
  std::optional<Round> reveal(std::size_t t) override {
    if (t == 0 || t > s_.f.size()) return std::nullopt;
    return Round{t, s_.f[t - 1], s_.approx[t - 1], std::nullopt};
  }

 private:
  const SlowStream& s_;
};

}  // namespace subdyn::testkit
