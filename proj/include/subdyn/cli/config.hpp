#pragma once

// Experiment configuration for the command-line runner. Precedence is
// flags > config file > defaults. Relative fixture paths resolve against the
// config file's directory; the output directory resolves against the working
// directory.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "subdyn/apps/demand_response.hpp"
#include "subdyn/apps/network_reconfig.hpp"
#include "subdyn/errors.hpp"
#include "subdyn/synthetic.hpp"

namespace subdyn::cli {

enum class Kind { synthetic, demand_response, network_reconfig };
enum class Algorithm { osga, osgga, ospgd };
enum class FamilyKind { power_set, cardinality_at_most, cardinality_exactly };

inline std::string to_string(Kind k) {
  switch (k) {
    case Kind::synthetic: return "synthetic";
    case Kind::demand_response: return "demand_response";
    case Kind::network_reconfig: return "network_reconfig";
  }
  return "?";
}

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::osga: return "osga";
    case Algorithm::osgga: return "osgga";
    case Algorithm::ospgd: return "ospgd";
  }
  return "?";
}

struct SyntheticSection {
  SyntheticConfig stream;
  FamilyKind family = FamilyKind::power_set;
  std::size_t k = 0;
};

struct DrSection {
  std::size_t fleet_size = 15;
  std::optional<std::uint64_t> fleet_seed;  // default 1000 + seed
  std::optional<std::string> fleet_path;
  bool hysteresis = true;
  dr::DrPolicy policy = dr::DrPolicy::ospgd;
  RegulationSignalConfig signal;
  std::optional<std::uint64_t> noise_seed;  // default seed
  double noise_grid_step = 0.005;
};

struct NrSection {
  std::string network_path;
  nr::LoadPerturbation loads;
  bool noise_seed_set = false;  // default seed
  double big_m = nr::kDefaultBigM;
};

struct ExperimentConfig {
  Kind kind = Kind::synthetic;
  Algorithm algorithm = Algorithm::osga;
  std::size_t T = 100;
  std::uint64_t seed = 0;
  double delta = 1.0;
  double alpha = 1.0;
  std::string out = "out";
  SyntheticSection synthetic;
  DrSection demand_response;
  NrSection network_reconfig;
};

struct Overrides {
  std::optional<std::size_t> rounds;
  std::optional<std::uint64_t> seed;
  std::optional<double> delta;
  std::optional<double> alpha;
  std::optional<std::string> out;
};

namespace detail {

inline void require_keys(const nlohmann::json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const nlohmann::json& obj, const char* key, T& into) {
  if (obj.contains(key)) into = obj.at(key).get<T>();
}

inline std::string resolve(const std::string& path, const std::filesystem::path& base) {
  std::filesystem::path p(path);
  return p.is_absolute() ? p.string() : (base / p).lexically_normal().string();
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = ".") {
  ExperimentConfig cfg;
  try {
    detail::require_keys(doc, {"kind", "algorithm", "T", "seed", "delta", "alpha", "out", "synthetic",
                               "demand_response", "network_reconfig"},
                         "config");
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "synthetic") {
      cfg.kind = Kind::synthetic;
    } else if (kind == "demand_response") {
      cfg.kind = Kind::demand_response;
      cfg.algorithm = Algorithm::ospgd;
    } else if (kind == "network_reconfig") {
      cfg.kind = Kind::network_reconfig;
      cfg.algorithm = Algorithm::osga;
    } else {
      throw ConfigError("kind must be synthetic, demand_response or network_reconfig, got '" + kind + "'");
    }
    if (doc.contains("algorithm")) {
      const auto alg = doc.at("algorithm").get<std::string>();
      if (alg == "osga") {
        cfg.algorithm = Algorithm::osga;
      } else if (alg == "osgga") {
        cfg.algorithm = Algorithm::osgga;
      } else if (alg == "ospgd") {
        cfg.algorithm = Algorithm::ospgd;
      } else {
        throw ConfigError("algorithm must be osga, osgga or ospgd, got '" + alg + "'");
      }
    }
    if (doc.contains("T")) {
      const auto t = doc.at("T").get<long long>();
      if (t < 1) throw ConfigError("T must be >= 1");
      cfg.T = static_cast<std::size_t>(t);
    }
    detail::read(doc, "seed", cfg.seed);
    detail::read(doc, "delta", cfg.delta);
    detail::read(doc, "alpha", cfg.alpha);
    detail::read(doc, "out", cfg.out);

    if (doc.contains("synthetic")) {
      const auto& s = doc.at("synthetic");
      detail::require_keys(s, {"n", "terms", "modular_scale", "modular_bias", "drift", "family", "k"}, "synthetic");
      auto& st = cfg.synthetic.stream;
      detail::read(s, "n", st.n);
      detail::read(s, "terms", st.terms);
      detail::read(s, "modular_scale", st.modular_scale);
      detail::read(s, "modular_bias", st.modular_bias);
      detail::read(s, "drift", st.drift);
      detail::read(s, "k", cfg.synthetic.k);
      const auto fam = s.value("family", std::string("power_set"));
      if (fam == "power_set") {
        cfg.synthetic.family = FamilyKind::power_set;
      } else if (fam == "cardinality_at_most") {
        cfg.synthetic.family = FamilyKind::cardinality_at_most;
      } else if (fam == "cardinality_exactly") {
        cfg.synthetic.family = FamilyKind::cardinality_exactly;
      } else {
        throw ConfigError("synthetic.family must be power_set, cardinality_at_most or cardinality_exactly");
      }
    }

    if (doc.contains("demand_response")) {
      const auto& d = doc.at("demand_response");
      detail::require_keys(d, {"fleet_size", "fleet_seed", "fleet", "hysteresis", "policy", "signal", "noise_seed",
                               "noise_grid_step"},
                           "demand_response");
      auto& dr = cfg.demand_response;
      detail::read(d, "fleet_size", dr.fleet_size);
      if (d.contains("fleet_seed")) dr.fleet_seed = d.at("fleet_seed").get<std::uint64_t>();
      if (d.contains("fleet")) dr.fleet_path = detail::resolve(d.at("fleet").get<std::string>(), base_dir);
      detail::read(d, "hysteresis", dr.hysteresis);
      if (d.contains("noise_seed")) dr.noise_seed = d.at("noise_seed").get<std::uint64_t>();
      detail::read(d, "noise_grid_step", dr.noise_grid_step);
      const auto policy = d.value("policy", std::string("ospgd"));
      if (policy == "ospgd") {
        dr.policy = dr::DrPolicy::ospgd;
      } else if (policy == "round_optimal") {
        dr.policy = dr::DrPolicy::round_optimal;
      } else if (policy == "random_feasible") {
        dr.policy = dr::DrPolicy::random_feasible;
      } else {
        throw ConfigError("demand_response.policy must be ospgd, round_optimal or random_feasible");
      }
      if (d.contains("signal")) {
        const auto& g = d.at("signal");
        detail::require_keys(g, {"amplitude", "decay", "period", "noise_scale", "offset"}, "demand_response.signal");
        detail::read(g, "amplitude", dr.signal.amplitude);
        detail::read(g, "decay", dr.signal.decay);
        detail::read(g, "period", dr.signal.period);
        detail::read(g, "noise_scale", dr.signal.noise_scale);
        detail::read(g, "offset", dr.signal.offset);
      }
    }

    if (doc.contains("network_reconfig")) {
      const auto& r = doc.at("network_reconfig");
      detail::require_keys(r, {"network", "noise_seed", "noise_scale_p", "noise_scale_q", "grid_step", "big_m"},
                           "network_reconfig");
      auto& nr = cfg.network_reconfig;
      if (r.contains("network")) nr.network_path = detail::resolve(r.at("network").get<std::string>(), base_dir);
      if (r.contains("noise_seed")) {
        nr.loads.noise_seed = r.at("noise_seed").get<std::uint64_t>();
        nr.noise_seed_set = true;
      }
      detail::read(r, "noise_scale_p", nr.loads.noise_scale_p);
      detail::read(r, "noise_scale_q", nr.loads.noise_scale_q);
      detail::read(r, "grid_step", nr.loads.grid_step);
      detail::read(r, "big_m", nr.big_m);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  }
  return cfg;
}

inline void apply_overrides(ExperimentConfig& cfg, const Overrides& o) {
  if (o.rounds) {
    if (*o.rounds < 1) throw ConfigError("--rounds must be >= 1");
    cfg.T = *o.rounds;
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.delta) cfg.delta = *o.delta;
  if (o.alpha) cfg.alpha = *o.alpha;
  if (o.out) cfg.out = *o.out;
}

// Checks that do not touch the filesystem.
inline void validate(const ExperimentConfig& cfg) {
  if (cfg.T < 1) throw ConfigError("T must be >= 1");
  if (!(cfg.delta > 0.0) || !std::isfinite(cfg.delta)) throw ConfigError("delta must be a positive finite number");
  if (!(cfg.alpha >= 1.0) || !std::isfinite(cfg.alpha)) throw ConfigError("alpha must be a finite number >= 1");
  if (cfg.out.empty()) throw ConfigError("output directory must not be empty");
  switch (cfg.kind) {
    case Kind::synthetic: {
      const auto& s = cfg.synthetic;
      s.stream.validate();
      if (s.family != FamilyKind::power_set && s.k > s.stream.n) {
        throw ConfigError("synthetic.k exceeds n");
      }
      if (cfg.algorithm == Algorithm::ospgd && s.family != FamilyKind::power_set) {
        throw ConfigError("ospgd runs on the unconstrained family only");
      }
      if (cfg.algorithm == Algorithm::osgga && !s.stream.monotone_single_term()) {
        throw ConfigError("osgga needs synthetic.terms = 1 and modular_scale = 0 (exact generic approximation)");
      }
      break;
    }
    case Kind::demand_response: {
      if (cfg.algorithm != Algorithm::ospgd) throw ConfigError("demand_response pairs with ospgd");
      const auto& d = cfg.demand_response;
      if (!d.fleet_path && (d.fleet_size == 0 || d.fleet_size > kMaxBruteForceN)) {
        throw ConfigError("demand_response.fleet_size must be in 1..24");
      }
      if (!(d.signal.period > 0.0) || d.signal.decay < 0.0 || d.signal.amplitude < 0.0 || d.signal.noise_scale < 0.0) {
        throw ConfigError("demand_response.signal parameters out of range");
      }
      if (!(d.noise_grid_step > 0.0)) throw ConfigError("demand_response.noise_grid_step must be positive");
      break;
    }
    case Kind::network_reconfig: {
      if (cfg.algorithm != Algorithm::osga) throw ConfigError("network_reconfig pairs with osga");
      const auto& r = cfg.network_reconfig;
      if (r.network_path.empty()) throw ConfigError("network_reconfig.network is required");
      if (!(r.big_m > 0.0)) throw ConfigError("network_reconfig.big_m must be positive");
      if (!(r.loads.grid_step > 0.0) || r.loads.noise_scale_p < 0.0 || r.loads.noise_scale_q < 0.0) {
        throw ConfigError("network_reconfig load noise parameters out of range");
      }
      break;
    }
  }
}

inline ExperimentConfig load_config(const std::string& path, const Overrides& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse config " + path + ": " + e.what());
  }
  auto cfg = parse_config(doc, std::filesystem::path(path).parent_path());
  apply_overrides(cfg, overrides);
  validate(cfg);
  return cfg;
}

// "A..B" inclusive.
inline std::vector<std::uint64_t> parse_seed_range(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) throw ConfigError("--seeds expects A..B");
  try {
    std::size_t used = 0;
    const auto lo_s = text.substr(0, dots);
    const auto hi_s = text.substr(dots + 2);
    const auto lo = std::stoull(lo_s, &used);
    if (used != lo_s.size()) throw ConfigError("--seeds expects A..B");
    const auto hi = std::stoull(hi_s, &used);
    if (used != hi_s.size() || hi < lo) throw ConfigError("--seeds expects A..B with A <= B");
    if (hi - lo >= 100000) throw ConfigError("--seeds range too large");
    std::vector<std::uint64_t> seeds;
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    return seeds;
  } catch (const std::logic_error&) {
    throw ConfigError("--seeds expects A..B with nonnegative integers");
  }
}

}  // namespace subdyn::cli
