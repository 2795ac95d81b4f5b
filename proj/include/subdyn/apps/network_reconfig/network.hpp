#pragma once

// Distribution network model. Quantities are per-unit on (base_mva, base_kv).
// The JSON file keeps engineering units: p in kW, q in kVAr, r and x in ohms.

#include <complex>
#include <cstddef>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "subdyn/core.hpp"
#include "subdyn/errors.hpp"

namespace subdyn::nr {

using Complex = std::complex<double>;

enum class BusKind { slack, load };

struct Bus {
  int id = 0;
  BusKind kind = BusKind::load;
  double p_demand = 0.0;  // p.u.
  double q_demand = 0.0;  // p.u.
  bool is_feeder = false;
  double v_set = 1.0;     // slack voltage magnitude, p.u.
};

struct Line {
  int from = 0;
  int to = 0;
  double r = 0.0;  // p.u.
  double x = 0.0;  // p.u.
  bool switched = false;
  bool closed = true;  // initial state, switched lines only

  Complex admittance() const { return 1.0 / Complex(r, x); }
};

struct VoltageLimits {
  double vmin = 0.0;
  double vmax = std::numeric_limits<double>::infinity();
};

class PowerNetwork {
 public:
  PowerNetwork(std::vector<Bus> buses, std::vector<Line> lines, double base_mva = 1.0, double base_kv = 1.0,
               VoltageLimits limits = {})
      : buses_(std::move(buses)), lines_(std::move(lines)), base_mva_(base_mva), base_kv_(base_kv), limits_(limits) {
    if (buses_.empty()) throw ConfigError("network has no buses");
    if (!(base_mva_ > 0.0 && base_kv_ > 0.0)) throw ConfigError("network bases must be positive");
    for (std::size_t i = 0; i < buses_.size(); ++i) {
      const auto& b = buses_[i];
      if (!index_.emplace(b.id, i).second) throw ConfigError("duplicate bus id " + std::to_string(b.id));
      if ((b.kind == BusKind::slack) != b.is_feeder) {
        throw ConfigError("bus " + std::to_string(b.id) + ": feeder buses and slack buses must coincide");
      }
      if (b.kind == BusKind::load && (b.p_demand < 0.0 || b.q_demand < 0.0)) {
        throw ConfigError("bus " + std::to_string(b.id) + ": negative demand");
      }
      if (b.is_feeder) feeders_.push_back(i);
    }
    if (feeders_.empty()) throw ConfigError("network needs at least one feeder bus");
    for (std::size_t k = 0; k < lines_.size(); ++k) {
      const auto& l = lines_[k];
      if (l.from == l.to) throw ConfigError("line " + std::to_string(k) + " is a self-loop");
      if (!index_.count(l.from) || !index_.count(l.to)) {
        throw ConfigError("line " + std::to_string(k) + " references an unknown bus");
      }
      if (l.r == 0.0 && l.x == 0.0) throw ConfigError("line " + std::to_string(k) + " has zero impedance");
      if (l.switched) switched_.push_back(k);
    }
  }

  const std::vector<Bus>& buses() const noexcept { return buses_; }
  const std::vector<Line>& lines() const noexcept { return lines_; }
  std::size_t bus_count() const noexcept { return buses_.size(); }
  std::size_t line_count() const noexcept { return lines_.size(); }
  const std::vector<std::size_t>& feeders() const noexcept { return feeders_; }
  // Line indices of the switched lines, in file order. Position k here is
  // element k of the switch ground set.
  const std::vector<std::size_t>& switched_lines() const noexcept { return switched_; }
  std::size_t switch_count() const noexcept { return switched_.size(); }
  double base_mva() const noexcept { return base_mva_; }
  double base_kv() const noexcept { return base_kv_; }
  const VoltageLimits& limits() const noexcept { return limits_; }

  std::size_t index_of(int bus_id) const {
    auto it = index_.find(bus_id);
    if (it == index_.end()) throw DomainError("unknown bus id " + std::to_string(bus_id));
    return it->second;
  }
  std::size_t from_index(std::size_t line) const { return index_of(lines_.at(line).from); }
  std::size_t to_index(std::size_t line) const { return index_of(lines_.at(line).to); }

  // Switch states given by the file's `closed` flags.
  SubsetMask initial_switches() const {
    SubsetMask s(switched_.size());
    for (std::size_t k = 0; k < switched_.size(); ++k) {
      if (lines_[switched_[k]].closed) s.set(k);
    }
    return s;
  }

  SubsetMask all_switches_closed() const { return SubsetMask::full(switched_.size()); }

  // Energized flag per line: static lines always, switched lines per mask.
  std::vector<bool> energized(const SubsetMask& switches) const {
    if (switches.size() != switched_.size()) throw DimensionError("switch mask size differs from switch count");
    std::vector<bool> on(lines_.size(), true);
    for (std::size_t k = 0; k < switched_.size(); ++k) on[switched_[k]] = switches.test(k);
    return on;
  }

  std::vector<double> p_demand() const {
    std::vector<double> p(buses_.size());
    for (std::size_t i = 0; i < buses_.size(); ++i) p[i] = buses_[i].p_demand;
    return p;
  }
  std::vector<double> q_demand() const {
    std::vector<double> q(buses_.size());
    for (std::size_t i = 0; i < buses_.size(); ++i) q[i] = buses_[i].q_demand;
    return q;
  }

 private:
  std::vector<Bus> buses_;
  std::vector<Line> lines_;
  double base_mva_;
  double base_kv_;
  VoltageLimits limits_;
  std::unordered_map<int, std::size_t> index_;
  std::vector<std::size_t> feeders_;
  std::vector<std::size_t> switched_;
};

// {buses:[{id, kind, p, q, feeder[, v]}], lines:[{from, to, r, x, switched[, closed]}],
//  base_mva, base_kv[, vmin, vmax]}
inline PowerNetwork network_from_json(const nlohmann::json& doc) {
  try {
    const double base_mva = doc.at("base_mva").get<double>();
    const double base_kv = doc.at("base_kv").get<double>();
    if (!(base_mva > 0.0 && base_kv > 0.0)) throw ConfigError("network bases must be positive");
    const double s_base_kva = base_mva * 1000.0;
    const double z_base = base_kv * base_kv / base_mva;

    std::vector<Bus> buses;
    for (const auto& b : doc.at("buses")) {
      Bus bus;
      bus.id = b.at("id").get<int>();
      const auto kind = b.at("kind").get<std::string>();
      if (kind == "slack") {
        bus.kind = BusKind::slack;
      } else if (kind == "load") {
        bus.kind = BusKind::load;
      } else {
        throw ConfigError("bus kind must be slack or load, got " + kind);
      }
      bus.p_demand = b.value("p", 0.0) / s_base_kva;
      bus.q_demand = b.value("q", 0.0) / s_base_kva;
      bus.is_feeder = b.value("feeder", bus.kind == BusKind::slack);
      bus.v_set = b.value("v", 1.0);
      buses.push_back(bus);
    }
    std::vector<Line> lines;
    for (const auto& l : doc.at("lines")) {
      Line line;
      line.from = l.at("from").get<int>();
      line.to = l.at("to").get<int>();
      line.r = l.at("r").get<double>() / z_base;
      line.x = l.at("x").get<double>() / z_base;
      line.switched = l.value("switched", false);
      line.closed = l.value("closed", true);
      lines.push_back(line);
    }
    VoltageLimits limits;
    limits.vmin = doc.value("vmin", 0.0);
    limits.vmax = doc.value("vmax", std::numeric_limits<double>::infinity());
    return PowerNetwork(std::move(buses), std::move(lines), base_mva, base_kv, limits);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad network document: ") + e.what());
  }
}

inline PowerNetwork load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open network file " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse network file " + path + ": " + e.what());
  }
  return network_from_json(doc);
}

}  // namespace subdyn::nr
