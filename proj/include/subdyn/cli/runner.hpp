#pragma once

// Experiment execution for the command-line runner. prepare() does every
// check that can fail on bad input (ConfigError); execute() runs the
// experiment in memory, so a failure leaves nothing on disk.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "subdyn/algorithms.hpp"
#include "subdyn/cli/config.hpp"
#include "subdyn/oracle.hpp"

namespace subdyn::cli {

struct Prepared {
  ExperimentConfig cfg;
  std::vector<dr::TclUnit> fleet;
  std::optional<nr::PowerNetwork> network;
};

struct RunOutput {
  std::string trace_csv;
  nlohmann::json summary;
};

inline FeasibleFamily synthetic_family(const SyntheticSection& s) {
  const GroundSet g(s.stream.n);
  switch (s.family) {
    case FamilyKind::power_set: return power_set(g);
    case FamilyKind::cardinality_at_most: return cardinality_at_most(g, s.k);
    case FamilyKind::cardinality_exactly: return cardinality_exactly(g, s.k);
  }
  return power_set(g);
}

inline Prepared prepare(const ExperimentConfig& cfg) {
  validate(cfg);
  Prepared p{cfg, {}, std::nullopt};
  switch (cfg.kind) {
    case Kind::synthetic: break;
    case Kind::demand_response: {
      const auto& d = cfg.demand_response;
      if (d.fleet_path) {
        std::ifstream in(*d.fleet_path);
        if (!in) throw ConfigError("cannot open fleet file " + *d.fleet_path);
        nlohmann::json doc;
        try {
          in >> doc;
        } catch (const nlohmann::json::exception& e) {
          throw ConfigError("cannot parse fleet file " + *d.fleet_path + ": " + e.what());
        }
        p.fleet = dr::fleet_from_json(doc);
        if (p.fleet.size() > kMaxBruteForceN) throw ConfigError("fleet larger than 24 loads");
      } else {
        p.fleet = dr::random_fleet(d.fleet_size, d.fleet_seed.value_or(1000 + cfg.seed));
      }
      for (auto& unit : p.fleet) unit.params.release_at_setpoint = d.hysteresis;
      break;
    }
    case Kind::network_reconfig: {
      p.network = nr::load_network(cfg.network_reconfig.network_path);
      if (p.network->switch_count() == 0) throw ConfigError("network has no switched lines");
      if (!nr::is_radial(*p.network, p.network->initial_switches())) {
        throw ConfigError("initial switch configuration in the network file is not radial");
      }
      break;
    }
  }
  return p;
}

namespace detail {

inline nlohmann::json summary_head(const ExperimentConfig& cfg, const std::string& algorithm) {
  return {{"kind", to_string(cfg.kind)}, {"algorithm", algorithm}, {"T", cfg.T},
          {"seed", cfg.seed},           {"delta", cfg.delta},      {"alpha", cfg.alpha}};
}

inline nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace detail

inline RunOutput execute(const Prepared& p) {
  const auto start = std::chrono::steady_clock::now();
  const auto& cfg = p.cfg;
  RunOutput out;
  std::ostringstream csv;

  switch (cfg.kind) {
    case Kind::synthetic: {
      auto stream_cfg = cfg.synthetic.stream;
      stream_cfg.seed = cfg.seed;
      SyntheticStream stream(stream_cfg);
      const auto family = synthetic_family(cfg.synthetic);
      std::unique_ptr<OnlineAlgorithm> alg;
      switch (cfg.algorithm) {
        case Algorithm::osga: {
          std::optional<SubsetMask> init;
          if (!family.contains(SubsetMask(stream_cfg.n))) init = family.linear_min(std::vector<double>(stream_cfg.n, 0.0));
          alg = std::make_unique<Osga>(family, ApproxSpec{}, init);
          break;
        }
        case Algorithm::osgga: {
          std::optional<SubsetMask> init;
          if (!family.contains(SubsetMask(stream_cfg.n))) init = family.linear_min(std::vector<double>(stream_cfg.n, 0.0));
          alg = std::make_unique<Osgga>(family, init);
          break;
        }
        case Algorithm::ospgd:
          alg = std::make_unique<Ospgd>(OspgdConfig::unconstrained(stream_cfg.n, cfg.T, cfg.delta));
          break;
      }
      const auto res = run_online(stream, *alg, cfg.T, cfg.seed, brute_force_round_oracle(family), cfg.alpha);
      write_trace_csv(csv, res.trace);
      out.summary = detail::summary_head(cfg, to_string(cfg.algorithm));
      out.summary["cumulative_alpha_regret"] = detail::optional_number(res.regret.cumulative());
      out.summary["variation_V_T"] = res.variation.cumulative();
      out.summary["bound_M"] = stream.bound();
      break;
    }
    case Kind::demand_response: {
      const auto& d = cfg.demand_response;
      dr::DrExperimentConfig dcfg;
      dcfg.T = cfg.T;
      dcfg.delta = cfg.delta;
      dcfg.seed = cfg.seed;
      dcfg.signal = d.signal;
      dcfg.noise_seed = d.noise_seed.value_or(cfg.seed);
      dcfg.noise_grid_step = d.noise_grid_step;
      dcfg.policy = d.policy;
      dcfg.audit_regret = true;
      const auto res = dr::run_dr_experiment(p.fleet, dcfg);
      write_trace_csv(csv, res.trace, dr::dr_extra_headers());
      out.summary = detail::summary_head(cfg, dr::to_string(d.policy));
      out.summary["rmse"] = res.rmse;
      out.summary["cumulative_alpha_regret"] = detail::optional_number(res.regret.cumulative());
      out.summary["variation_V_T"] = res.variation.cumulative();
      out.summary["fleet_size"] = p.fleet.size();
      out.summary["max_band_excursion"] = res.max_band_excursion;
      break;
    }
    case Kind::network_reconfig: {
      const auto& r = cfg.network_reconfig;
      nr::ReconfigConfig rcfg;
      rcfg.T = cfg.T;
      rcfg.loads = r.loads;
      if (!r.noise_seed_set) rcfg.loads.noise_seed = cfg.seed;
      rcfg.big_m = r.big_m;
      const auto res = nr::run_reconfiguration(*p.network, rcfg);
      nr::write_reconfig_csv(csv, res.trace);
      out.summary = detail::summary_head(cfg, "osga");
      out.summary["total_losses_pu"] = res.total_losses;
      out.summary["total_losses_kw"] = res.total_losses * p.network->base_mva() * 1000.0;
      out.summary["cumulative_alpha_regret"] = detail::optional_number(res.regret.cumulative());
      out.summary["variation_V_T"] = res.variation.cumulative();
      out.summary["all_radial"] = res.all_radial;
      out.summary["pf_failures"] = res.pf_failures;
      out.summary["held_rounds"] = res.held_rounds;
      out.summary["voltage_violations"] = res.voltage_violations;
      break;
    }
  }
  out.trace_csv = csv.str();
  out.summary["wall_time"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

inline void write_outputs(const std::filesystem::path& dir, const RunOutput& out) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "trace.csv", std::ios::binary);
    f << out.trace_csv;
    if (!f) throw Error("cannot write " + (dir / "trace.csv").string());
  }
  std::ofstream f(dir / "summary.json", std::ios::binary);
  f << out.summary.dump(2) << '\n';
  if (!f) throw Error("cannot write " + (dir / "summary.json").string());
}

// ---------------------------------------------------------------------------
// Audit

struct AuditFixture {
  explicit AuditFixture(SetFunction fn) : f(std::move(fn)) {}

  SetFunction f;
  std::optional<SetFunction> approx;
  double beta = 1.0;
  std::optional<GenericApproxSpec> generic;
  std::size_t generic_k = 0;
  std::optional<dr::DrRound> dr_round;
  std::size_t rounds = 50;
  std::size_t seeds = 20;
  double delta = 1.0;
  double epsilon = 0.1;
};

namespace detail {

inline SetFunction function_from_json(const nlohmann::json& j, std::optional<dr::DrRound>* dr_out = nullptr) {
  const auto type = j.at("type").get<std::string>();
  if (type == "table") {
    const auto n = j.at("n").get<std::size_t>();
    if (n == 0 || n > kMaxBruteForceN) throw ConfigError("table fixture n must be in 1..24");
    auto values = j.at("values").get<std::vector<double>>();
    if (values.size() != (std::size_t{1} << n)) throw ConfigError("table fixture needs 2^n values");
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    auto table = std::make_shared<const std::vector<double>>(std::move(values));
    return SetFunction(GroundSet(n), [table](const SubsetMask& s) { return (*table)[s.to_u64()]; }, m > 0.0 ? m : 1.0);
  }
  if (type == "modular") return modular_function(j.at("weights").get<std::vector<double>>());
  if (type == "cut") {
    std::vector<WeightedEdge> edges;
    for (const auto& e : j.at("edges")) {
      edges.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>(), e.at(2).get<double>()});
    }
    return cut_function(j.at("n").get<std::size_t>(), edges);
  }
  if (type == "sqrt_modular") {
    const auto c = j.at("weights").get<std::vector<double>>();
    double total = 0.0;
    for (double x : c) {
      if (x < 0.0) throw ConfigError("sqrt_modular weights must be >= 0");
      total += x;
    }
    return SetFunction(GroundSet(c.size()),
                       [c](const SubsetMask& s) {
                         double v = 0.0;
                         for (std::size_t i = 0; i < c.size(); ++i) {
                           if (s.test(i)) v += c[i];
                         }
                         return std::sqrt(v);
                       },
                       total > 0.0 ? std::sqrt(total) : 1.0, true);
  }
  if (type == "dr") {
    dr::DrRound round(j.at("r").get<double>(), j.at("u").get<std::vector<double>>(), j.value("inflexible", 0.0));
    auto f = dr::dr_objective(round);
    if (dr_out) dr_out->emplace(std::move(round));
    return f;
  }
  throw ConfigError("function type must be table, modular, cut, sqrt_modular or dr, got '" + type + "'");
}

}  // namespace detail

inline AuditFixture parse_audit_fixture(const nlohmann::json& doc) {
  try {
    cli::detail::require_keys(doc, {"function", "approximation", "beta", "generic", "rounds", "seeds", "delta",
                                    "epsilon", "description"},
                              "audit fixture");
    std::optional<dr::DrRound> round;
    AuditFixture fx(detail::function_from_json(doc.at("function"), &round));
    fx.dr_round = std::move(round);
    if (doc.contains("approximation")) {
      fx.approx = detail::function_from_json(doc.at("approximation"));
      if (fx.approx->n() != fx.f.n()) throw ConfigError("approximation has a different ground set");
    }
    cli::detail::read(doc, "beta", fx.beta);
    if (doc.contains("generic")) {
      const auto& g = doc.at("generic");
      GenericApproxSpec spec{g.at("c").get<std::vector<double>>(), g.at("gamma").get<double>(),
                             g.at("nu").get<double>()};
      if (spec.c.size() != fx.f.n()) throw ConfigError("generic.c length differs from n");
      fx.generic = std::move(spec);
      fx.generic_k = g.value("k", std::size_t{1});
      if (fx.generic_k > fx.f.n()) throw ConfigError("generic.k exceeds n");
    }
    cli::detail::read(doc, "rounds", fx.rounds);
    cli::detail::read(doc, "seeds", fx.seeds);
    cli::detail::read(doc, "delta", fx.delta);
    cli::detail::read(doc, "epsilon", fx.epsilon);
    if (fx.beta < 1.0) throw ConfigError("beta must be >= 1");
    if (fx.rounds < 2 || fx.seeds < 1 || !(fx.delta > 0.0) || !(fx.epsilon > 0.0 && fx.epsilon < 1.0)) {
      throw ConfigError("audit rounds/seeds/delta/epsilon out of range");
    }
    return fx;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad audit fixture: ") + e.what());
  }
}

inline AuditFixture load_audit_fixture(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open audit fixture " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse audit fixture " + path + ": " + e.what());
  }
  return parse_audit_fixture(doc);
}

namespace detail {

class StaticStream : public ProblemStream {
 public:
  StaticStream(SetFunction f, std::optional<SetFunction> approx, std::optional<std::vector<double>> c)
      : f_(std::move(f)), approx_(std::move(approx)), c_(std::move(c)) {}
  std::optional<Round> reveal(std::size_t t) override { return Round{t, f_, approx_, c_}; }

 private:
  SetFunction f_;
  std::optional<SetFunction> approx_;
  std::optional<std::vector<double>> c_;
};

inline std::string mask_text(const SubsetMask& s) {
  std::string out = "{";
  bool first = true;
  for (auto i : s.elements()) {
    out += (first ? "" : ",") + std::to_string(i);
    first = false;
  }
  return out + "}";
}

// Variation of the minimizers of g over the family, counted from the
// algorithm's initial set. Constant stream: one jump from the start.
inline double static_variation_from(const SubsetMask& start, const SetFunction& g, const FeasibleFamily& family,
                                    std::size_t rounds) {
  VariationLedger v;
  v.append(start);
  const auto best = brute_force_min(g, family).mask;
  for (std::size_t t = 0; t < rounds; ++t) v.append(best);
  return v.cumulative();
}

}  // namespace detail

// Prints one line per check. Returns the number of failed checks.
inline int run_audit(const AuditFixture& fx, std::ostream& os) {
  int failures = 0;
  const auto n = fx.f.n();
  auto guarded = [&](const char* name, auto&& body) {
    try {
      body();
    } catch (const CapacityError& e) {
      os << name << ": skipped (capacity: " << e.what() << ")\n";
    } catch (const Error& e) {
      os << name << ": error (" << e.what() << ")\n";
      ++failures;
    }
  };
  auto verdict = [&](bool ok) {
    if (!ok) ++failures;
    return ok ? "pass" : "FAIL";
  };

  os << "fixture: n=" << n << ", M=" << format_real(fx.f.bound()) << "\n";
  guarded("submodular", [&] {
    const auto rep = check_submodular(fx.f);
    if (rep.holds) {
      os << "submodular: yes (margin " << format_real(rep.margin) << ")\n";
    } else {
      const auto& cx = *rep.counterexample;
      os << "submodular: no (margin " << format_real(rep.margin) << "); counterexample A=" << detail::mask_text(cx.A)
         << " B=" << detail::mask_text(cx.B) << " i=" << cx.element << "\n";
    }
  });
  std::optional<double> lipschitz;
  guarded("lipschitz", [&] {
    lipschitz = exact_lipschitz_modulus(fx.f);
    os << "lipschitz L: " << format_real(*lipschitz) << "\n";
  });
  if (fx.approx) {
    guarded("beta sandwich", [&] {
      const auto rep = audit_beta_sandwich(fx.f, *fx.approx, fx.beta);
      os << "beta sandwich (beta=" << fmt::format("{:g}", fx.beta) << "): " << verdict(rep.passes) << ", worst ratio "
         << format_real(rep.worst_ratio) << "\n";
    });
  }
  if (fx.generic) {
    guarded("generic sandwich", [&] {
      const auto rep = audit_generic_sandwich(fx.f, fx.generic->c, fx.generic->gamma, power_set(fx.f.ground()));
      os << "generic sandwich (gamma=" << fmt::format("{:g}", fx.generic->gamma) << "): " << verdict(rep.passes)
         << ", worst gamma " << format_real(rep.worst_gamma) << "\n";
    });
  }
  if (fx.dr_round) {
    guarded("literal-vs-simplified equivalence", [&] {
      const auto literal = dr::dr_objective_literal(*fx.dr_round);
      double worst = 0.0;
      subdyn::detail::enumerate_all(n, [&](const SubsetMask& s) {
        const double a = fx.f(s);
        const double b = literal(s);
        worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(b)));
      });
      os << "literal-vs-simplified equivalence: " << verdict(worst < 1e-9) << " (max rel err " << format_real(worst)
         << ")\n";
    });
  }

  const auto fn = fx.f.normalized() ? fx.f : normalize(fx.f);
  const auto family = power_set(fx.f.ground());
  const SubsetMask empty(n);

  guarded("theorem 1", [&] {
    if (!lipschitz) throw CapacityError("needs the exact Lipschitz modulus");
    const auto approx = fx.approx ? std::optional<SetFunction>(normalize(*fx.approx)) : std::nullopt;
    detail::StaticStream stream(fn, approx, std::nullopt);
    Osga alg(family, ApproxSpec{fx.beta, default_exact_min, lipschitz});
    const auto res = run_online(stream, alg, fx.rounds, 0, brute_force_round_oracle(family), fx.beta);
    const double v = detail::static_variation_from(empty, approx ? *approx : fn, family, fx.rounds);
    const double bound = theorem1_bound(fx.beta, *lipschitz, fx.beta, v);
    const double regret = *res.regret.cumulative();
    os << "theorem 1 (osga, alpha=beta): " << verdict(regret <= bound + 1e-9) << " regret " << format_real(regret)
       << " <= bound " << format_real(bound) << "\n";
  });
  guarded("corollary 1", [&] {
    if (!lipschitz) throw CapacityError("needs the exact Lipschitz modulus");
    detail::StaticStream stream(fn, std::nullopt, std::nullopt);
    Osga alg(family);
    const auto res = run_online(stream, alg, fx.rounds, 0, brute_force_round_oracle(family), 1.0);
    const double v = detail::static_variation_from(empty, fn, family, fx.rounds);
    const double bound = corollary1_bound(*lipschitz, v);
    const double regret = *res.regret.cumulative();
    os << "corollary 1 (osga, unconstrained): " << verdict(regret <= bound + 1e-9) << " regret "
       << format_real(regret) << " <= bound " << format_real(bound) << "\n";
  });
  if (fx.generic) {
    guarded("corollary 2", [&] {
      if (!lipschitz) throw CapacityError("needs the exact Lipschitz modulus");
      const auto& g = *fx.generic;
      const auto fam = cardinality_exactly(fx.f.ground(), fx.generic_k);
      std::vector<std::size_t> first(fx.generic_k);
      std::iota(first.begin(), first.end(), std::size_t{0});
      const auto start = SubsetMask::from_indices(n, first);
      detail::StaticStream stream(fx.f, std::nullopt, g.c);
      Osgga alg(fam, start);
      const auto res = run_online(stream, alg, fx.rounds, 0, brute_force_round_oracle(fam), g.gamma);
      const auto squared = modular_function(g.c);
      const double lg = exact_lipschitz_modulus(squared);
      const double v = detail::static_variation_from(start, squared, fam, fx.rounds);
      const double bound = corollary2_bound(g.gamma, lg, *lipschitz, g.nu, v);
      const double regret = *res.regret.cumulative();
      os << "corollary 2 (osgga, |S|=" << fx.generic_k << "): " << verdict(regret <= bound + 1e-9) << " regret "
         << format_real(regret) << " <= bound " << format_real(bound) << "\n";
    });
  }
  guarded("theorem 2", [&] {
    std::vector<double> regrets;
    double variation = 0.0;
    for (std::size_t s = 0; s < fx.seeds; ++s) {
      detail::StaticStream stream(fn, std::nullopt, std::nullopt);
      Ospgd alg(OspgdConfig::unconstrained(n, fx.rounds, fx.delta));
      const auto res = run_online(stream, alg, fx.rounds, s, brute_force_round_oracle(family), 1.0);
      regrets.push_back(*res.regret.cumulative());
      variation = res.variation.cumulative();
    }
    double mean = 0.0;
    for (double r : regrets) mean += r;
    mean /= static_cast<double>(regrets.size());
    const double expected = theorem2_bound(1.0, n, fx.delta, variation, fn.bound(), fx.rounds);
    os << "theorem 2 (ospgd, mean over " << fx.seeds << " seeds): " << verdict(mean <= expected) << " regret "
       << format_real(mean) << " <= bound " << format_real(expected) << "\n";
    const double hp = corollary3_high_probability_bound(n, fx.delta, variation, fn.bound(), fx.rounds, fx.epsilon);
    std::size_t exceed = 0;
    for (double r : regrets) exceed += r > hp ? 1 : 0;
    const double frac = static_cast<double>(exceed) / static_cast<double>(regrets.size());
    os << "corollary 3 (epsilon=" << fmt::format("{:g}", fx.epsilon) << "): " << verdict(frac <= fx.epsilon + 0.05) << " "
       << exceed << "/" << regrets.size() << " seeds above " << format_real(hp) << "\n";
  });
  return failures;
}

}  // namespace subdyn::cli
