#pragma once

// One-octave 1-D gradient noise and the decaying sinusoidal regulation signal
// built on it. Sampling uses only +, −, ×, floor and a table lookup; build with
// -ffp-contract=off so every platform rounds the same way.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "subdyn/errors.hpp"
#include "subdyn/rng.hpp"

namespace subdyn {

class PerlinTable {
 public:
  explicit PerlinTable(std::uint64_t seed = 0, double grid_step = 1.0) : seed_(seed), grid_step_(grid_step) {
    if (!(grid_step_ > 0.0)) throw DomainError("Perlin grid step must be positive");
    std::array<std::uint8_t, 256> p{};
    for (std::size_t i = 0; i < 256; ++i) p[i] = static_cast<std::uint8_t>(i);
    // Fisher–Yates with the portable generator.
    SeededRng rng(seed, 0x5045524cULL);
    for (std::size_t i = 255; i > 0; --i) {
      const auto j = static_cast<std::size_t>(rng.below(i + 1));
      std::swap(p[i], p[j]);
    }
    for (std::size_t i = 0; i < 512; ++i) perm_[i] = p[i & 255];
  }

  std::uint64_t seed() const noexcept { return seed_; }
  double grid_step() const noexcept { return grid_step_; }
  const std::array<std::uint8_t, 512>& perm() const noexcept { return perm_; }

 private:
  std::uint64_t seed_;
  double grid_step_;
  std::array<std::uint8_t, 512> perm_{};
};

namespace detail {

inline double fade(double u) { return u * u * u * (u * (u * 6.0 - 15.0) + 10.0); }

// Gradient ±1 at lattice point i, picked by the permutation.
inline double lattice_gradient(const PerlinTable& table, std::int64_t i) {
  const auto wrapped = static_cast<std::size_t>(((i % 256) + 256) % 256);
  return (table.perm()[table.perm()[wrapped]] & 1U) ? 1.0 : -1.0;
}

}  // namespace detail

// Value in [−1, 1]; zero at every integer t.
inline double perlin_sample(const PerlinTable& table, double t) {
  const double cell = std::floor(t);
  const double u = t - cell;
  const auto i = static_cast<std::int64_t>(cell);
  const double g0 = detail::lattice_gradient(table, i);
  const double g1 = detail::lattice_gradient(table, i + 1);
  const double n0 = g0 * u;
  const double n1 = g1 * (u - 1.0);
  const double s = detail::fade(u);
  // Raw 1-D gradient noise lies in [−1/2, 1/2]; rescale to [−1, 1].
  return 2.0 * (n0 + s * (n1 - n0));
}

struct RegulationSignalConfig {
  double amplitude = 20.0;   // kW
  double decay = 0.005;      // 1/rounds
  double period = 300.0;     // rounds
  double noise_scale = 1.0;  // kW
  double offset = 0.0;       // kW, level the oscillation is centered on
};

// r_t = offset + A·exp(−decay·t)·sin(2πt/period) + noise_scale·perlin(t·grid_step).
// Clamping to the fleet's available power is the dispatcher's job.
inline double regulation_signal(double t, const RegulationSignalConfig& cfg, const PerlinTable& noise) {
  if (!(cfg.amplitude >= 0.0)) throw DomainError("signal amplitude must be nonnegative");
  if (!(cfg.period > 0.0)) throw DomainError("signal period must be positive");
  if (!(cfg.decay >= 0.0)) throw DomainError("signal decay must be nonnegative");
  const double rate = t == 0.0 ? 0.0 : cfg.decay * t;
  const double envelope = cfg.amplitude * std::exp(-rate);
  const double wave = envelope == 0.0 ? 0.0 : envelope * std::sin(2.0 * std::numbers::pi * t / cfg.period);
  double r = cfg.offset + wave;
  if (cfg.noise_scale != 0.0) r += cfg.noise_scale * perlin_sample(noise, t * noise.grid_step());
  return r;
}

}  // namespace subdyn
