#pragma once

// Demand response with thermostatically controlled loads (air conditioners).
//
// Each round the aggregator picks a set S of loads to run so that their
// aggregate power covers the regulation setpoint r_t with as little power as
// possible. The round objective, summed over all A ⊆ V,
//
//   f(S) = Σ_A [(Σ_{n∈A} u_n)² − (Σ_{n∈V} u_n)²] · max{0, |S∩A| − |S∪A| + 1} · 𝟙[Σ_{n∈A} u_n ≥ r_t]
//
// collapses to a single term because max{0, |S∩A| − |S∪A| + 1} is 1 exactly
// when A = S:
//
//   f(S) = [(Σ_{n∈S} u_n)² − (Σ_{n∈V} u_n)²] · 𝟙[Σ_{n∈S} u_n ≥ r_t].
//
// Both forms are provided; the literal one exists to check the other.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "subdyn/algorithms.hpp"
#include "subdyn/core.hpp"
#include "subdyn/oracle.hpp"
#include "subdyn/rng.hpp"
#include "subdyn/signals.hpp"

namespace subdyn::dr {

struct TclParams {
  double thermal_resistance = 2.0;     // °C/kW
  double thermal_capacitance = 10.0;   // kWh/°C
  double rated_power = 5.6;            // kW, electrical
  double cop = 2.5;
  double setpoint = 20.0;              // °C
  double deadband_halfwidth = 0.5;     // °C
  double ambient = 32.0;               // °C
  // When set, a load the backup controller has seized stays seized until its
  // temperature crosses the setpoint, instead of being released at the band edge.
  bool release_at_setpoint = false;

  void validate() const {
    if (!(thermal_resistance > 0 && thermal_capacitance > 0 && rated_power > 0 && cop > 0 && setpoint > 0 &&
          deadband_halfwidth > 0 && ambient > 0)) {
      throw DomainError("TCL parameters must all be positive");
    }
  }
};

struct TclState {
  double temperature = 20.0;       // °C
  bool is_on = false;
  bool is_flexible = true;         // false while the backup thermostat holds the load
  double power_flexible = 0.0;     // kW, p_{n,t}
  double power_inflexible = 0.0;   // kW, p̃_{n,t}
};

struct TclUnit {
  TclParams params;
  TclState state;
};

enum class BackupAction { none, force_on, force_off };

// Cooling load: too warm forces the compressor on, too cold forces it off.
inline BackupAction backup_override(const TclParams& p, double temperature) {
  if (temperature > p.setpoint + p.deadband_halfwidth) return BackupAction::force_on;
  if (temperature < p.setpoint - p.deadband_halfwidth) return BackupAction::force_off;
  return BackupAction::none;
}

inline BackupAction backup_override(const TclParams& p, const TclState& s) {
  const auto edge = backup_override(p, s.temperature);
  if (edge != BackupAction::none || !p.release_at_setpoint || s.is_flexible) return edge;
  if (s.is_on && s.temperature > p.setpoint) return BackupAction::force_on;
  if (!s.is_on && s.temperature < p.setpoint) return BackupAction::force_off;
  return BackupAction::none;
}

// One step of the equivalent-thermal-parameter model:
//   θ⁺ = a·θ + (1 − a)·(θ_amb − m·R·P·cop),   a = exp(−dt/(R·C)),
// with m the compressor state after the backup override.
inline TclState tcl_step(const TclParams& params, const TclState& state, bool on_command, double dt_hours) {
  if (!(dt_hours > 0.0)) throw DomainError("TCL step needs a positive dt");
  const auto action = backup_override(params, state);
  TclState next = state;
  next.is_flexible = action == BackupAction::none;
  next.is_on = action == BackupAction::force_on ? true : action == BackupAction::force_off ? false : on_command;
  const double m = next.is_on ? 1.0 : 0.0;
  const double a = std::exp(-dt_hours / (params.thermal_resistance * params.thermal_capacitance));
  const double driven = params.ambient - m * params.thermal_resistance * params.rated_power * params.cop;
  next.temperature = a * state.temperature + (1.0 - a) * driven;
  next.power_flexible = next.is_flexible && next.is_on ? params.rated_power : 0.0;
  next.power_inflexible = !next.is_flexible && next.is_on ? params.rated_power : 0.0;
  return next;
}

// Log-uniform spread around nominal residential AC values:
//   R ∈ 2·[1/1.2, 1.2] °C/kW, C ∈ 10·[1/1.2, 1.2] kWh/°C, P ∈ 5.6·[1/1.2, 1.2] kW,
//   cop = 2.5, setpoint ∈ [19.5, 20.5] °C, deadband ±0.5 °C, ambient ∈ [30, 34] °C,
//   θ₀ uniform in the deadband, initial compressor state a fair coin.
inline std::vector<TclUnit> random_fleet(std::size_t size, std::uint64_t seed) {
  if (size == 0) throw DomainError("fleet must not be empty");
  SeededRng rng(seed, 0x46'4c'45'45'54ULL);
  const double spread = std::log(1.2);
  auto log_uniform = [&](double nominal) { return nominal * std::exp(spread * (2.0 * rng.uniform() - 1.0)); };
  std::vector<TclUnit> fleet(size);
  for (auto& unit : fleet) {
    auto& p = unit.params;
    p.thermal_resistance = log_uniform(2.0);
    p.thermal_capacitance = log_uniform(10.0);
    p.rated_power = log_uniform(5.6);
    p.cop = 2.5;
    p.setpoint = 19.5 + rng.uniform();
    p.deadband_halfwidth = 0.5;
    p.ambient = 30.0 + 4.0 * rng.uniform();
    unit.state.temperature = p.setpoint + p.deadband_halfwidth * (2.0 * rng.uniform() - 1.0);
    unit.state.is_on = rng.uniform() < 0.5;
    unit.state.is_flexible = true;
  }
  return fleet;
}

// Fleet file: array of {R, C, P, cop, setpoint, deadband, ambient, theta0},
// optionally with "on" for the initial compressor state (default off).
inline std::vector<TclUnit> fleet_from_json(const nlohmann::json& doc) {
  if (!doc.is_array() || doc.empty()) throw ConfigError("fleet must be a nonempty JSON array");
  std::vector<TclUnit> fleet;
  fleet.reserve(doc.size());
  for (const auto& item : doc) {
    try {
      TclUnit unit;
      auto& p = unit.params;
      p.thermal_resistance = item.at("R").get<double>();
      p.thermal_capacitance = item.at("C").get<double>();
      p.rated_power = item.at("P").get<double>();
      p.cop = item.at("cop").get<double>();
      p.setpoint = item.at("setpoint").get<double>();
      p.deadband_halfwidth = item.at("deadband").get<double>();
      p.ambient = item.at("ambient").get<double>();
      unit.state.temperature = item.at("theta0").get<double>();
      unit.state.is_on = item.value("on", false);
      p.validate();
      fleet.push_back(unit);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad fleet entry: ") + e.what());
    } catch (const DomainError& e) {
      throw ConfigError(std::string("bad fleet entry: ") + e.what());
    }
  }
  return fleet;
}

inline nlohmann::json fleet_to_json(const std::vector<TclUnit>& fleet) {
  auto doc = nlohmann::json::array();
  for (const auto& unit : fleet) {
    const auto& p = unit.params;
    doc.push_back({{"R", p.thermal_resistance},
                   {"C", p.thermal_capacitance},
                   {"P", p.rated_power},
                   {"cop", p.cop},
                   {"setpoint", p.setpoint},
                   {"deadband", p.deadband_halfwidth},
                   {"ambient", p.ambient},
                   {"theta0", unit.state.temperature},
                   {"on", unit.state.is_on}});
  }
  return doc;
}

// One dispatch round. `inflexible` is power drawn by loads the backup
// controller holds on; it is part of every set's aggregate, so Σ_S u below
// always includes it. r_t is clamped into [0, Σ_V u] on construction so the
// feasible family {S : Σ_S u ≥ r_t} always contains V.
class DrRound {
 public:
  DrRound(double r_raw, std::vector<double> u, double inflexible = 0.0) : u_(std::move(u)), inflexible_(inflexible) {
    if (u_.empty()) throw DomainError("demand-response round needs at least one load");
    for (double x : u_) {
      if (!(x >= 0.0)) throw DomainError("load powers must be nonnegative");
    }
    if (!(inflexible_ >= 0.0)) throw DomainError("inflexible power must be nonnegative");
    total_ = inflexible_;
    for (double x : u_) total_ += x;
    r_ = std::clamp(r_raw, 0.0, total_);
  }

  double r() const noexcept { return r_; }
  double total() const noexcept { return total_; }
  double inflexible() const noexcept { return inflexible_; }
  const std::vector<double>& u() const noexcept { return u_; }
  std::size_t size() const noexcept { return u_.size(); }

  // Inflexible power plus Σ_{n∈S} u_n, accumulated in ascending index order.
  double power_of(const SubsetMask& s) const {
    double acc = inflexible_;
    for (std::size_t i = 0; i < u_.size(); ++i) {
      if (s.test(i)) acc += u_[i];
    }
    return acc;
  }

  double bracket(double set_power) const { return set_power * set_power - total_ * total_; }

  // Bound on |f|: (Σ_V u)², kept positive for an all-zero fleet.
  double bound() const { return std::max(total_ * total_, std::numeric_limits<double>::min()); }

  // Σ_S u for every mask of the ground set, indexed by mask value. Entry
  // `mask` extends `mask` without its top bit, so each sum is accumulated in
  // ascending index order like power_of().
  std::vector<double> subset_powers() const {
    detail::require_enumerable(u_.size());
    std::vector<double> sums(std::size_t{1} << u_.size(), inflexible_);
    for (std::size_t mask = 1; mask < sums.size(); ++mask) {
      const auto top = static_cast<std::size_t>(std::bit_width(mask) - 1);
      sums[mask] = sums[mask & ~(std::size_t{1} << top)] + u_[top];
    }
    return sums;
  }

 private:
  std::vector<double> u_;
  double inflexible_ = 0.0;
  double r_ = 0.0;
  double total_ = 0.0;
};

// Closed form of the round objective.
inline SetFunction dr_objective(const DrRound& round) {
  return SetFunction(
      GroundSet(round.size()),
      [round](const SubsetMask& s) {
        const double power = round.power_of(s);
        return power >= round.r() ? round.bracket(power) : 0.0;
      },
      round.bound());
}

inline constexpr std::size_t kMaxLiteralDrN = 15;

// The 2^n-term sum over A ⊆ V, evaluated term by term.
inline SetFunction dr_objective_literal(const DrRound& round) {
  const std::size_t n = round.size();
  if (n > kMaxLiteralDrN) throw CapacityError("literal demand-response objective limited to n <= 15");
  std::vector<double> sums(std::size_t{1} << n);
  for (std::uint64_t a = 0; a < sums.size(); ++a) sums[a] = round.power_of(SubsetMask::from_bits(n, a));
  return SetFunction(
      GroundSet(n),
      [round, sums = std::move(sums)](const SubsetMask& s) {
        const std::uint64_t sb = s.to_u64();
        double acc = 0.0;
        for (std::uint64_t a = 0; a < sums.size(); ++a) {
          const auto inter = static_cast<long>(std::popcount(sb & a));
          const auto uni = static_cast<long>(std::popcount(sb | a));
          const long selector = std::max(0L, inter - uni + 1);
          const double feasible = sums[a] >= round.r() ? 1.0 : 0.0;
          const double term = round.bracket(sums[a]) * static_cast<double>(selector) * feasible;
          acc += term;
        }
        return acc;
      },
      round.bound());
}

// Exact round minimizer by enumerating subset sums; smallest mask wins ties.
inline MinResult dr_round_optimum(const DrRound& round, const std::vector<double>& powers) {
  const std::size_t n = round.size();
  std::size_t best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (std::size_t mask = 0; mask < powers.size(); ++mask) {
    const double v = powers[mask] >= round.r() ? round.bracket(powers[mask]) : 0.0;
    if (v < best_value) {
      best_value = v;
      best = mask;
    }
  }
  return MinResult{SubsetMask::from_bits(n, best), best_value};
}

inline MinResult dr_round_optimum(const DrRound& round) { return dr_round_optimum(round, round.subset_powers()); }

// Uniform draw from {S : Σ_S u ≥ r_t}.
inline SubsetMask random_feasible_dispatch(const DrRound& round, const std::vector<double>& powers, SeededRng& rng) {
  std::uint64_t feasible = 0;
  for (double p : powers) feasible += p >= round.r() ? 1 : 0;
  std::uint64_t pick = rng.below(feasible);
  for (std::size_t mask = 0; mask < powers.size(); ++mask) {
    if (powers[mask] >= round.r() && pick-- == 0) return SubsetMask::from_bits(round.size(), mask);
  }
  throw InvariantViolation("feasible dispatch enumeration fell through");
}

enum class DrPolicy { ospgd, round_optimal, random_feasible };

inline std::string to_string(DrPolicy p) {
  switch (p) {
    case DrPolicy::ospgd: return "ospgd";
    case DrPolicy::round_optimal: return "round_optimal";
    case DrPolicy::random_feasible: return "random_feasible";
  }
  return "unknown";
}

struct DrExperimentConfig {
  std::size_t T = 3000;
  double delta = 1.0;
  std::uint64_t seed = 0;  // rounding / random-dispatch stream
  RegulationSignalConfig signal;
  std::uint64_t noise_seed = 0;
  double noise_grid_step = 0.005;
  double dt_hours = 4.0 / 3600.0;
  DrPolicy policy = DrPolicy::ospgd;
  bool audit_regret = true;  // brute-force round optima (n <= 24)
};

struct DrResult {
  std::vector<TraceRow> trace;
  double rmse = 0.0;  // kW
  RegretLedger regret;
  VariationLedger variation;
  double max_band_excursion = 0.0;  // °C beyond setpoint ± deadband, worst over loads and rounds
  std::vector<TclUnit> final_fleet;
};

inline const std::vector<std::string>& dr_extra_headers() {
  static const std::vector<std::string> headers{"r_t", "dispatched_kw", "tracking_error"};
  return headers;
}

// Closed-loop run. Round t: read the fleet (backup overrides fix which loads
// are flexible and u_{n,t}), form r_t, commit S_t, dispatch
// (S_t ∩ flexible) ∪ held-on, advance every TCL, then reveal f_t.
inline DrResult run_dr_experiment(std::vector<TclUnit> fleet, const DrExperimentConfig& cfg) {
  if (fleet.empty()) throw DomainError("fleet must not be empty");
  if (cfg.T == 0) throw DomainError("experiment needs at least one round");
  for (const auto& unit : fleet) unit.params.validate();
  const std::size_t n = fleet.size();
  if (cfg.audit_regret || cfg.policy != DrPolicy::ospgd) detail::require_enumerable(n);

  PerlinTable noise(cfg.noise_seed, cfg.noise_grid_step);
  std::optional<Ospgd> ospgd;
  if (cfg.policy == DrPolicy::ospgd) {
    ospgd.emplace(OspgdConfig::unconstrained(n, cfg.T, cfg.delta));
    ospgd->reset(cfg.seed);
  }
  SeededRng dispatch_rng(cfg.seed, 0x44495350ULL);

  DrResult out{{}, 0.0, RegretLedger(1.0), VariationLedger{}, 0.0, {}};
  out.trace.reserve(cfg.T);
  double sq_err = 0.0;

  for (std::size_t t = 1; t <= cfg.T; ++t) {
    // Loads under backup control are not decision variables this round: their
    // u is zero and held-on power enters as the inflexible baseline.
    std::vector<double> u(n, 0.0);
    double inflexible = 0.0;
    SubsetMask held_on(n);
    SubsetMask flexible(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto action = backup_override(fleet[i].params, fleet[i].state);
      if (action == BackupAction::force_on) {
        held_on.set(i);
        inflexible += fleet[i].params.rated_power;
      } else if (action == BackupAction::none) {
        flexible.set(i);
        u[i] = fleet[i].params.rated_power;
      }
    }
    const DrRound round(regulation_signal(static_cast<double>(t), cfg.signal, noise), u, inflexible);
    std::vector<double> powers;
    if (cfg.audit_regret || cfg.policy != DrPolicy::ospgd) powers = round.subset_powers();
    std::optional<MinResult> best;
    if (!powers.empty()) best = dr_round_optimum(round, powers);

    SubsetMask decision(n);
    switch (cfg.policy) {
      case DrPolicy::ospgd: decision = ospgd->decide(t); break;
      case DrPolicy::round_optimal: decision = best->mask; break;
      case DrPolicy::random_feasible: decision = random_feasible_dispatch(round, powers, dispatch_rng); break;
    }

    const SubsetMask dispatched = (decision & flexible) | held_on;
    const double dispatched_kw = round.power_of(decision);
    const double error = dispatched_kw - round.r();
    sq_err += error * error;

    for (std::size_t i = 0; i < n; ++i) {
      fleet[i].state = tcl_step(fleet[i].params, fleet[i].state, dispatched.test(i), cfg.dt_hours);
      const auto& p = fleet[i].params;
      const double dev = std::abs(fleet[i].state.temperature - p.setpoint) - p.deadband_halfwidth;
      out.max_band_excursion = std::max(out.max_band_excursion, dev);
    }

    const auto f = dr_objective(round);
    TraceRow row;
    row.t = t;
    row.algorithm = to_string(cfg.policy);
    row.loss = f(decision);
    row.mask = decision;
    if (best) {
      row.optimum = best->value;
      out.variation.append(best->mask);
      row.variation_cum = out.variation.cumulative();
    }
    out.regret.record(row.loss, row.optimum);
    row.regret_cum = out.regret.cumulative();
    row.regret_avg = out.regret.time_averaged();
    row.extra = {round.r(), dispatched_kw, error};
    out.trace.push_back(std::move(row));

    if (ospgd) ospgd->observe(Round{t, f, std::nullopt, std::nullopt});
  }
  out.rmse = std::sqrt(sq_err / static_cast<double>(cfg.T));
  out.final_fleet = std::move(fleet);
  return out;
}

}  // namespace subdyn::dr
