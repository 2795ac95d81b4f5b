#pragma once

// Online reconfiguration loop: each round, solve power flow on the network
// with every switch closed, weight the switched lines by −|I|, and take the
// minimum spanning tree (feeders tied by virtual edges) as the next topology.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "subdyn/algorithms.hpp"
#include "subdyn/apps/network_reconfig/graph.hpp"
#include "subdyn/apps/network_reconfig/network.hpp"
#include "subdyn/apps/network_reconfig/power_flow.hpp"
#include "subdyn/log.hpp"
#include "subdyn/signals.hpp"

namespace subdyn::nr {

inline std::vector<double> wm_weights(const PowerNetwork& net, const PfSolution& wmn) {
  std::vector<double> w(net.switch_count());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = -std::abs(wmn.branch_currents[net.switched_lines()[k]]);
  return w;
}

// Modular loss over switched lines, weight −|I_k| per closed switch. The
// constant contributed by static lines is dropped; it does not move the argmin.
inline SetFunction wm_objective(const PowerNetwork& net, const PfSolution& wmn) {
  if (net.switch_count() == 0) throw DomainError("network has no switched lines");
  return modular_function(wm_weights(net, wmn));
}

struct LoadPerturbation {
  std::uint64_t noise_seed = 0;
  double noise_scale_p = 0.2;  // relative
  double noise_scale_q = 0.2;  // relative
  double grid_step = 0.02;     // noise lattice cells per round
};

// p_{i,t} = p_i·max(0, 1 + scale_p·noise_i(t)), likewise for q, with an
// independent noise table and phase per bus and quantity.
class LoadProfile {
 public:
  LoadProfile(const PowerNetwork& net, LoadPerturbation cfg) : cfg_(cfg), p0_(net.p_demand()), q0_(net.q_demand()) {
    if (!(cfg_.grid_step > 0.0)) throw ConfigError("load noise grid step must be positive");
    if (cfg_.noise_scale_p < 0.0 || cfg_.noise_scale_q < 0.0) throw ConfigError("load noise scales must be >= 0");
    for (std::size_t i = 0; i < p0_.size(); ++i) {
      SeededRng rng(cfg_.noise_seed, 0x4c4f4144ULL + i);
      p_tables_.emplace_back(rng.next_u64(), cfg_.grid_step);
      q_tables_.emplace_back(rng.next_u64(), cfg_.grid_step);
      p_phase_.push_back(rng.uniform() * 256.0);
      q_phase_.push_back(rng.uniform() * 256.0);
    }
  }

  std::vector<double> p(std::size_t t) const { return sample(p0_, p_tables_, p_phase_, cfg_.noise_scale_p, t); }
  std::vector<double> q(std::size_t t) const { return sample(q0_, q_tables_, q_phase_, cfg_.noise_scale_q, t); }

 private:
  static std::vector<double> sample(const std::vector<double>& base, const std::vector<PerlinTable>& tables,
                                    const std::vector<double>& phase, double scale, std::size_t t) {
    std::vector<double> out(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      const double x = phase[i] + static_cast<double>(t) * tables[i].grid_step();
      out[i] = base[i] * std::max(0.0, 1.0 + scale * perlin_sample(tables[i], x));
    }
    return out;
  }

  LoadPerturbation cfg_;
  std::vector<double> p0_;
  std::vector<double> q0_;
  std::vector<PerlinTable> p_tables_;
  std::vector<PerlinTable> q_tables_;
  std::vector<double> p_phase_;
  std::vector<double> q_phase_;
};

struct Algorithm1Step {
  SubsetMask next;
  bool held = false;  // weakly-meshed power flow failed; previous topology kept
  PfSolution wmn;
  std::vector<double> weights;  // −|I| per switched line
};

inline Algorithm1Step algorithm1_step(const PowerNetwork& net, const std::vector<double>& p,
                                      const std::vector<double>& q, const SubsetMask& previous,
                                      double big_m = kDefaultBigM, const PfOptions& pf = {}) {
  Algorithm1Step step{previous, false, newton_raphson_pf(net, net.energized(net.all_switches_closed()), p, q, pf), {}};
  if (!step.wmn.converged) {
    logger().warn("weakly-meshed power flow failed; holding the previous topology");
    step.held = true;
    return step;
  }
  step.weights = wm_weights(net, step.wmn);
  step.next = min_weight_radial(net, step.weights, big_m);
  if (!is_radial(net, step.next)) throw InvariantViolation("spanning-tree step produced a non-radial topology");
  return step;
}

struct ReconfigConfig {
  std::size_t T = 400;
  LoadPerturbation loads;
  double big_m = kDefaultBigM;
  PfOptions pf;
  std::optional<SubsetMask> initial;  // defaults to the file's closed flags
};

struct ReconfigRow {
  std::size_t t = 0;
  std::optional<double> losses_pu;
  bool radial = false;
  SubsetMask switches;
  int pf_iterations = 0;
  double pf_mismatch = 0.0;
  double loss = 0.0;                 // f^WM_t(S_t)
  std::optional<double> optimum;     // f^WM_t(MST_t)
  std::optional<double> regret_cum;
  std::optional<double> regret_avg;
  std::optional<double> variation_cum;
};

struct ReconfigResult {
  std::vector<ReconfigRow> trace;
  RegretLedger regret;
  VariationLedger variation;
  double total_losses = 0.0;  // p.u., summed over rounds with a converged power flow
  bool all_radial = true;
  std::size_t pf_failures = 0;
  std::size_t held_rounds = 0;
  std::size_t voltage_violations = 0;  // bus-rounds outside the configured limits
};

inline ReconfigResult run_reconfiguration(const PowerNetwork& net, const ReconfigConfig& cfg) {
  if (cfg.T == 0) throw DomainError("reconfiguration needs at least one round");
  if (net.switch_count() == 0) throw ConfigError("network has no switched lines");
  const LoadProfile profile(net, cfg.loads);
  SubsetMask current = cfg.initial.value_or(net.initial_switches());
  if (!is_radial(net, current)) throw ConfigError("initial switch configuration is not radial");

  ReconfigResult out{{}, RegretLedger(1.0), VariationLedger{}, 0.0, true, 0, 0, 0};
  out.trace.reserve(cfg.T);
  for (std::size_t t = 1; t <= cfg.T; ++t) {
    const auto p = profile.p(t);
    const auto q = profile.q(t);
    ReconfigRow row;
    row.t = t;
    row.switches = current;
    row.radial = is_radial(net, current);
    out.all_radial = out.all_radial && row.radial;

    const auto sol = newton_raphson_pf(net, net.energized(current), p, q, cfg.pf);
    row.pf_iterations = sol.iterations;
    row.pf_mismatch = sol.max_mismatch;
    if (sol.converged) {
      row.losses_pu = active_losses(net, sol);
      out.total_losses += *row.losses_pu;
      out.voltage_violations += voltage_violations(net, sol);
    } else {
      ++out.pf_failures;
    }

    const auto step = algorithm1_step(net, p, q, current, cfg.big_m, cfg.pf);
    if (step.held) {
      ++out.held_rounds;
      row.loss = std::numeric_limits<double>::quiet_NaN();
    } else {
      const auto f = modular_function(step.weights);
      row.loss = f(current);
      row.optimum = f(step.next);
      out.variation.append(step.next);
      row.variation_cum = out.variation.cumulative();
    }
    out.regret.record(row.loss, row.optimum);
    row.regret_cum = out.regret.cumulative();
    row.regret_avg = out.regret.time_averaged();
    out.trace.push_back(std::move(row));
    current = step.next;
  }
  return out;
}

// Cumulative losses of a fresh uniform random radial topology every round.
// Draws whose power flow fails are redrawn, up to `max_draws` per round.
inline double random_radial_baseline_losses(const PowerNetwork& net, const ReconfigConfig& cfg, std::uint64_t seed,
                                            int max_draws = 20) {
  const LoadProfile profile(net, cfg.loads);
  SeededRng rng(seed, 0x52414e44ULL);
  double total = 0.0;
  for (std::size_t t = 1; t <= cfg.T; ++t) {
    const auto p = profile.p(t);
    const auto q = profile.q(t);
    bool done = false;
    for (int draw = 0; draw < max_draws && !done; ++draw) {
      const auto s = uniform_random_radial(net, rng);
      const auto sol = newton_raphson_pf(net, net.energized(s), p, q, cfg.pf);
      if (sol.converged) {
        total += active_losses(net, sol);
        done = true;
      }
    }
    if (!done) throw AlgorithmError("no random radial topology with a feasible power flow at round " + std::to_string(t));
  }
  return total;
}

inline void write_reconfig_csv(std::ostream& os, const std::vector<ReconfigRow>& rows) {
  os << "t,losses_pu,radial,switch_mask_hex,pf_iterations,pf_mismatch,algorithm,loss,optimum,alpha_regret_cum,"
        "regret_time_avg,variation_cum\n";
  for (const auto& r : rows) {
    os << r.t << ',' << format_optional(r.losses_pu) << ',' << (r.radial ? 1 : 0) << ',' << r.switches.to_hex() << ','
       << r.pf_iterations << ',' << format_real(r.pf_mismatch) << ",osga,"
       << (std::isnan(r.loss) ? std::string("NA") : format_real(r.loss)) << ',' << format_optional(r.optimum) << ','
       << format_optional(r.regret_cum) << ',' << format_optional(r.regret_avg) << ','
       << format_optional(r.variation_cum) << '\n';
  }
}

}  // namespace subdyn::nr
