#pragma once

// Polar Newton–Raphson power flow on the energized part of a network.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "subdyn/apps/network_reconfig/network.hpp"
#include "subdyn/log.hpp"

namespace subdyn::nr {

struct PfOptions {
  double tolerance = 1e-8;  // max |ΔP|, |ΔQ| in p.u.
  int max_iter = 50;
};

struct PfSolution {
  std::vector<Complex> voltages;
  std::vector<Complex> branch_currents;  // from → to, zero when de-energized
  std::vector<Complex> branch_flows;     // v_from · conj(I), zero when de-energized
  std::vector<bool> energized;
  std::vector<Complex> injections;       // net injection per bus, V·conj(Y V)
  bool converged = false;
  int iterations = 0;                    // mismatch evaluations
  double max_mismatch = 0.0;
};

namespace detail {

// Breadth-first sweep from the feeders; throws on buses no energized path
// reaches.
inline void require_supplied(const PowerNetwork& net, const std::vector<bool>& energized) {
  std::vector<std::vector<std::size_t>> adj(net.bus_count());
  for (std::size_t k = 0; k < net.line_count(); ++k) {
    if (!energized[k]) continue;
    adj[net.from_index(k)].push_back(net.to_index(k));
    adj[net.to_index(k)].push_back(net.from_index(k));
  }
  std::vector<bool> seen(net.bus_count(), false);
  std::vector<std::size_t> queue(net.feeders().begin(), net.feeders().end());
  for (auto f : queue) seen[f] = true;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    for (auto nb : adj[queue[head]]) {
      if (!seen[nb]) {
        seen[nb] = true;
        queue.push_back(nb);
      }
    }
  }
  for (std::size_t i = 0; i < net.bus_count(); ++i) {
    if (!seen[i]) throw TopologyError("bus " + std::to_string(net.buses()[i].id) + " is not supplied by any feeder");
  }
}

inline Eigen::MatrixXcd build_ybus(const PowerNetwork& net, const std::vector<bool>& energized) {
  const auto n = static_cast<Eigen::Index>(net.bus_count());
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  for (std::size_t k = 0; k < net.line_count(); ++k) {
    if (!energized[k]) continue;
    const auto i = static_cast<Eigen::Index>(net.from_index(k));
    const auto j = static_cast<Eigen::Index>(net.to_index(k));
    const Complex yl = net.lines()[k].admittance();
    y(i, i) += yl;
    y(j, j) += yl;
    y(i, j) -= yl;
    y(j, i) -= yl;
  }
  return y;
}

}  // namespace detail

// Demands override the bus table when given (online loads p_{i,t}, q_{i,t}).
inline PfSolution newton_raphson_pf(const PowerNetwork& net, const std::vector<bool>& energized,
                                    const std::vector<double>& p_demand, const std::vector<double>& q_demand,
                                    const PfOptions& opt = {}) {
  const std::size_t nb = net.bus_count();
  if (energized.size() != net.line_count()) throw DimensionError("energized flags do not match line count");
  if (p_demand.size() != nb || q_demand.size() != nb) throw DimensionError("demand vectors do not match bus count");
  if (opt.max_iter < 1 || !(opt.tolerance > 0.0)) throw DomainError("power flow options out of range");
  detail::require_supplied(net, energized);

  const Eigen::MatrixXcd ybus = detail::build_ybus(net, energized);
  std::vector<Eigen::Index> pq;
  for (std::size_t i = 0; i < nb; ++i) {
    if (net.buses()[i].kind == BusKind::load) pq.push_back(static_cast<Eigen::Index>(i));
  }
  const auto m = static_cast<Eigen::Index>(pq.size());

  Eigen::VectorXd vm(static_cast<Eigen::Index>(nb));
  Eigen::VectorXd va = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nb));
  Eigen::VectorXcd s_spec(static_cast<Eigen::Index>(nb));
  for (std::size_t i = 0; i < nb; ++i) {
    const auto& b = net.buses()[i];
    vm(static_cast<Eigen::Index>(i)) = b.kind == BusKind::slack ? b.v_set : 1.0;
    s_spec(static_cast<Eigen::Index>(i)) = -Complex(p_demand[i], q_demand[i]);
  }

  PfSolution sol;
  sol.energized = energized;
  Eigen::VectorXcd v(static_cast<Eigen::Index>(nb));
  Eigen::VectorXcd ibus;
  Eigen::VectorXd f(2 * m);

  auto refresh = [&] {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = std::polar(vm(i), va(i));
    ibus = ybus * v;
    for (Eigen::Index k = 0; k < m; ++k) {
      const Eigen::Index i = pq[static_cast<std::size_t>(k)];
      const Complex mis = v(i) * std::conj(ibus(i)) - s_spec(i);
      f(k) = mis.real();
      f(m + k) = mis.imag();
    }
    ++sol.iterations;
    sol.max_mismatch = m == 0 ? 0.0 : f.cwiseAbs().maxCoeff();
    return sol.max_mismatch < opt.tolerance;
  };

  bool done = refresh();
  while (!done && sol.iterations < opt.max_iter) {
    // dS/dθ = j·diag(V)·conj(diag(I) − Y·diag(V)),
    // dS/d|V| = diag(V)·conj(Y·diag(V/|V|)) + conj(diag(I))·diag(V/|V|).
    Eigen::MatrixXd jac(2 * m, 2 * m);
    for (Eigen::Index r = 0; r < m; ++r) {
      const Eigen::Index i = pq[static_cast<std::size_t>(r)];
      for (Eigen::Index c = 0; c < m; ++c) {
        const Eigen::Index k = pq[static_cast<std::size_t>(c)];
        const Complex vk_unit = v(k) / vm(k);
        Complex ds_dva = Complex(0.0, 1.0) * v(i) * std::conj(-ybus(i, k) * v(k));
        Complex ds_dvm = v(i) * std::conj(ybus(i, k) * vk_unit);
        if (i == k) {
          ds_dva += Complex(0.0, 1.0) * v(i) * std::conj(ibus(i));
          ds_dvm += std::conj(ibus(i)) * vk_unit;
        }
        jac(r, c) = ds_dva.real();
        jac(r, m + c) = ds_dvm.real();
        jac(m + r, c) = ds_dva.imag();
        jac(m + r, m + c) = ds_dvm.imag();
      }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) {
      logger().warn("power flow: singular Jacobian after {} evaluations", sol.iterations);
      break;
    }
    const Eigen::VectorXd dx = lu.solve(-f);
    for (Eigen::Index k = 0; k < m; ++k) {
      const Eigen::Index i = pq[static_cast<std::size_t>(k)];
      va(i) += dx(k);
      vm(i) += dx(m + k);
    }
    done = refresh();
  }
  sol.converged = done && std::isfinite(sol.max_mismatch);

  sol.voltages.assign(v.data(), v.data() + v.size());
  sol.injections.resize(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    sol.injections[i] = sol.voltages[i] * std::conj(ibus(static_cast<Eigen::Index>(i)));
  }
  sol.branch_currents.assign(net.line_count(), Complex{});
  sol.branch_flows.assign(net.line_count(), Complex{});
  for (std::size_t k = 0; k < net.line_count(); ++k) {
    if (!energized[k]) continue;
    const Complex vi = sol.voltages[net.from_index(k)];
    const Complex vj = sol.voltages[net.to_index(k)];
    sol.branch_currents[k] = (vi - vj) * net.lines()[k].admittance();
    sol.branch_flows[k] = vi * std::conj(sol.branch_currents[k]);
  }
  if (!sol.converged) {
    logger().warn("power flow did not converge: {} evaluations, mismatch {}", sol.iterations, sol.max_mismatch);
  }
  return sol;
}

inline PfSolution newton_raphson_pf(const PowerNetwork& net, const std::vector<bool>& energized,
                                    const PfOptions& opt = {}) {
  return newton_raphson_pf(net, energized, net.p_demand(), net.q_demand(), opt);
}

// Σ over energized lines of Re(|v_i − v_j|²·conj(y_ij)).
inline double active_losses(const PowerNetwork& net, const PfSolution& sol) {
  if (!sol.converged) throw ContractError("active losses need a converged power flow");
  double total = 0.0;
  for (std::size_t k = 0; k < net.line_count(); ++k) {
    if (!sol.energized[k]) continue;
    const Complex dv = sol.voltages[net.from_index(k)] - sol.voltages[net.to_index(k)];
    total += (std::norm(dv) * std::conj(net.lines()[k].admittance())).real();
  }
  return total;
}

// Feeder generation minus demand minus losses, active part. Zero up to the
// power-flow mismatch on a converged solution.
inline double active_balance_residual(const PowerNetwork& net, const PfSolution& sol,
                                      const std::vector<double>& p_demand) {
  double generation = 0.0;
  for (auto f : net.feeders()) generation += sol.injections[f].real() + p_demand[f];
  const double demand = std::accumulate(p_demand.begin(), p_demand.end(), 0.0);
  return generation - demand - active_losses(net, sol);
}

// Buses whose voltage magnitude leaves the configured limits.
inline std::size_t voltage_violations(const PowerNetwork& net, const PfSolution& sol) {
  std::size_t count = 0;
  for (const auto& v : sol.voltages) {
    const double mag = std::abs(v);
    if (mag < net.limits().vmin || mag > net.limits().vmax) ++count;
  }
  return count;
}

}  // namespace subdyn::nr
