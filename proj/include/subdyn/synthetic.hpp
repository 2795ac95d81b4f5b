#pragma once

// Slowly drifting synthetic stream for end-to-end runs:
//   f_t(S) = Σ_j w_j·√(Σ_{i∈S} a_{j,i}(t)) + Σ_{i∈S} m_i(t)
// a_{j,i}(t) = a_{j,i}·(1 + ½·noise) ≥ 0 and m_i(t) = scale·(noise − bias), so
// every f_t is normalized and submodular (concave of modular plus modular).

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "subdyn/algorithms.hpp"
#include "subdyn/core.hpp"
#include "subdyn/rng.hpp"
#include "subdyn/signals.hpp"

namespace subdyn {

struct SyntheticConfig {
  std::size_t n = 8;
  std::size_t terms = 3;
  double modular_scale = 3.0;
  double modular_bias = 0.5;
  double drift = 0.02;  // noise lattice cells per round
  std::uint64_t seed = 0;

  void validate() const {
    if (n == 0 || n > kMaxBruteForceN) throw ConfigError("synthetic n must be in 1..24");
    if (terms == 0) throw ConfigError("synthetic stream needs at least one concave term");
    if (modular_scale < 0.0) throw ConfigError("synthetic modular_scale must be >= 0");
    if (!(drift > 0.0)) throw ConfigError("synthetic drift must be positive");
  }
  // Single concave term and no modular part: f_t is its own generic approximation.
  bool monotone_single_term() const { return terms == 1 && modular_scale == 0.0; }
};

class SyntheticStream : public ProblemStream {
 public:
  explicit SyntheticStream(SyntheticConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    SeededRng rng(cfg_.seed, 0x53594e5448ULL);
    for (std::size_t j = 0; j < cfg_.terms; ++j) {
      weight_.push_back(0.5 + rng.uniform());
      std::vector<double> row(cfg_.n);
      for (auto& a : row) a = 0.2 + rng.uniform();
      base_.push_back(std::move(row));
    }
    for (std::size_t k = 0; k < cfg_.n * (cfg_.terms + 1); ++k) {
      noise_.emplace_back(rng.next_u64(), cfg_.drift);
      phase_.push_back(256.0 * rng.uniform());
    }
    // |noise| ≤ 1 bounds every term.
    bound_ = 0.0;
    for (std::size_t j = 0; j < cfg_.terms; ++j) {
      double s = 0.0;
      for (double a : base_[j]) s += 1.5 * a;
      bound_ += weight_[j] * std::sqrt(s);
    }
    bound_ += static_cast<double>(cfg_.n) * cfg_.modular_scale * (1.0 + std::abs(cfg_.modular_bias));
  }

  std::optional<Round> reveal(std::size_t t) override {
    const auto [a, m] = coefficients(t);
    const auto w = weight_;
    SetFunction f(GroundSet(cfg_.n),
                  [a = a, m = m, w](const SubsetMask& s) {
                    double v = 0.0;
                    for (std::size_t j = 0; j < w.size(); ++j) {
                      double inner = 0.0;
                      for (std::size_t i = 0; i < s.size(); ++i) {
                        if (s.test(i)) inner += a[j][i];
                      }
                      v += w[j] * std::sqrt(inner);
                    }
                    for (std::size_t i = 0; i < s.size(); ++i) {
                      if (s.test(i)) v += m[i];
                    }
                    return v;
                  },
                  bound_, true);
    Round r{t, f, std::nullopt, std::nullopt};
    if (cfg_.monotone_single_term()) {
      std::vector<double> c(cfg_.n);
      for (std::size_t i = 0; i < cfg_.n; ++i) c[i] = w[0] * w[0] * a[0][i];
      r.generic_c = std::move(c);
    }
    return r;
  }

  double bound() const noexcept { return bound_; }
  const SyntheticConfig& config() const noexcept { return cfg_; }

 private:
  std::pair<std::vector<std::vector<double>>, std::vector<double>> coefficients(std::size_t t) const {
    auto sample = [&](std::size_t k) {
      return perlin_sample(noise_[k], phase_[k] + static_cast<double>(t) * noise_[k].grid_step());
    };
    std::vector<std::vector<double>> a = base_;
    for (std::size_t j = 0; j < cfg_.terms; ++j) {
      for (std::size_t i = 0; i < cfg_.n; ++i) a[j][i] *= 1.0 + 0.5 * sample(j * cfg_.n + i);
    }
    std::vector<double> m(cfg_.n);
    for (std::size_t i = 0; i < cfg_.n; ++i) {
      m[i] = cfg_.modular_scale * (sample(cfg_.terms * cfg_.n + i) - cfg_.modular_bias);
    }
    return {std::move(a), std::move(m)};
  }

  SyntheticConfig cfg_;
  std::vector<double> weight_;
  std::vector<std::vector<double>> base_;
  std::vector<PerlinTable> noise_;
  std::vector<double> phase_;
  double bound_ = 0.0;
};

}  // namespace subdyn
