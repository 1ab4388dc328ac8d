#pragma once

// Test-side oracles, deliberately independent of the library's computation
// paths: exhaustive search where the library prunes, path enumeration where
// it runs a DP, and a per-tick network simulation where it uses transfer
// polynomials.

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "laf/laf.hpp"

namespace oracles {

using laf::Mat;
using laf::Vec;

inline double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

// Exhaustive nearest-point search over a provably sufficient coefficient box:
// any coefficient vector beating the Babai point satisfies
// |k_i - c_i| <= d0 * ||row_i(G^-1)||.
inline Vec brute_force_quantize(const laf::Lattice& lat, const Vec& x) {
  const int n = lat.dimension();
  const Mat& g = lat.generator();
  const Mat ginv = g.inverse();
  const Vec c = ginv * x;
  Vec k0(n);
  for (int i = 0; i < n; ++i) k0(i) = std::round(c(i));
  const double d0 = (x - g * k0).norm();

  std::vector<long long> lo(n), hi(n);
  for (int i = 0; i < n; ++i) {
    const double radius = d0 * ginv.row(i).norm() + 1e-9;
    lo[i] = static_cast<long long>(std::ceil(c(i) - radius));
    hi[i] = static_cast<long long>(std::floor(c(i) + radius));
  }

  Vec best_k(n);
  double best_d2 = std::numeric_limits<double>::infinity();
  bool have = false;
  std::vector<long long> k(n);
  std::function<void(int)> walk = [&](int i) {
    if (i == n) {
      Vec kv(n);
      for (int j = 0; j < n; ++j) kv(j) = static_cast<double>(k[j]);
      const double d2 = (x - g * kv).squaredNorm();
      const double tie = 1e-9 * (1.0 + best_d2);
      bool take = !have || d2 < best_d2 - tie;
      if (!take && std::abs(d2 - best_d2) <= tie) {
        for (int j = 0; j < n; ++j) {
          if (kv(j) != best_k(j)) {
            take = kv(j) < best_k(j);
            break;
          }
        }
      }
      if (take) {
        best_d2 = std::min(best_d2, d2);
        best_k = kv;
        have = true;
      }
      return;
    }
    for (long long v = lo[i]; v <= hi[i]; ++v) {
      k[i] = v;
      walk(i + 1);
    }
  };
  walk(0);
  return g * best_k;
}

// Exact second moment of a star-shaped polygon around the origin via the
// triangle formula: integral of |x|^2 over triangle (0,a,b) equals
// area/6 * (a.a + b.b + a.b).
inline double polygon_second_moment_per_dim(const std::vector<std::pair<double, double>>& verts) {
  double area = 0.0, integral = 0.0;
  const std::size_t m = verts.size();
  for (std::size_t i = 0; i < m; ++i) {
    const auto [ax, ay] = verts[i];
    const auto [bx, by] = verts[(i + 1) % m];
    const double a = 0.5 * std::abs(ax * by - ay * bx);
    area += a;
    integral += a / 6.0 * ((ax * ax + ay * ay) + (bx * bx + by * by) + (ax * bx + ay * by));
  }
  return integral / (2.0 * area);  // per-dimension, n = 2
}

// All source->destination paths: delay = number of relays on the path,
// gain = product of edge gains and relay amplification gains.
inline std::vector<double> taps_by_path_enumeration(const laf::RelayNetwork& net,
                                                    const laf::AfPlan& plan,
                                                    std::size_t* path_count = nullptr) {
  std::vector<double> taps;
  std::size_t count = 0;
  std::function<void(int, int, double)> dfs = [&](int v, int relays, double prod) {
    if (v == net.destination()) {
      if (static_cast<int>(taps.size()) <= relays) taps.resize(relays + 1, 0.0);
      taps[static_cast<std::size_t>(relays)] += prod;
      ++count;
      return;
    }
    const bool is_relay = v != net.source();
    const double scale = is_relay ? plan.beta[static_cast<std::size_t>(v)] : 1.0;
    for (int e : net.out_edges(v)) {
      const auto& edge = net.edges()[static_cast<std::size_t>(e)];
      dfs(edge.to, relays + (is_relay ? 1 : 0), prod * scale * edge.gain);
    }
  };
  dfs(net.source(), 0, 1.0);
  if (path_count) *path_count = count;
  return taps;
}

// Per-tick simulation of the whole network: at tick t every node receives
// the same-tick transmissions of its in-neighbors plus fresh unit noise; a
// relay transmits a beta-scaled copy of its previous-tick observation. Used
// as an independent route to taps, noise statistics, and node powers.
struct NetworkStreams {
  std::vector<std::vector<double>> transmit;  // [node][tick]
  std::vector<double> destination;            // receive samples at the destination
};

inline NetworkStreams simulate_network_stream(const laf::RelayNetwork& net,
                                              const laf::AfPlan& plan,
                                              const std::vector<double>& source_stream,
                                              int extra_ticks, laf::RngStream* rng,
                                              double noise_scale = 1.0) {
  const int n = net.num_nodes();
  const int ticks = static_cast<int>(source_stream.size()) + extra_ticks;
  std::normal_distribution<double> gauss(0.0, 1.0);
  NetworkStreams out;
  out.transmit.assign(static_cast<std::size_t>(n), std::vector<double>(ticks, 0.0));
  out.destination.assign(static_cast<std::size_t>(ticks), 0.0);
  std::vector<double> prev_receive(static_cast<std::size_t>(n), 0.0);
  std::vector<double> receive(static_cast<std::size_t>(n), 0.0);
  for (int t = 0; t < ticks; ++t) {
    for (int v = 0; v < n; ++v) {
      if (v == net.source()) {
        out.transmit[static_cast<std::size_t>(v)][static_cast<std::size_t>(t)] =
            t < static_cast<int>(source_stream.size()) ? source_stream[static_cast<std::size_t>(t)]
                                                       : 0.0;
      } else if (v != net.destination()) {
        out.transmit[static_cast<std::size_t>(v)][static_cast<std::size_t>(t)] =
            plan.beta[static_cast<std::size_t>(v)] * prev_receive[static_cast<std::size_t>(v)];
      }
    }
    for (int v = 0; v < n; ++v) {
      if (v == net.source()) continue;
      double acc = 0.0;
      for (int e : net.in_edges(v)) {
        const auto& edge = net.edges()[static_cast<std::size_t>(e)];
        acc += edge.gain *
               out.transmit[static_cast<std::size_t>(edge.from)][static_cast<std::size_t>(t)];
      }
      if (rng) acc += noise_scale * gauss(*rng);
      receive[static_cast<std::size_t>(v)] = acc;
    }
    out.destination[static_cast<std::size_t>(t)] =
        receive[static_cast<std::size_t>(net.destination())];
    std::swap(prev_receive, receive);
  }
  return out;
}

// Chain with every relay receiving exactly 1/delta of nominal power, the
// configuration where the per-layer noise bound is met with equality.
inline laf::RelayNetwork make_tight_chain(double delta, int hops, double source_power) {
  if (hops < 2) throw std::invalid_argument("tight chain needs at least one relay");
  std::vector<std::string> nodes = {"s"};
  std::map<std::string, double> powers = {{"s", source_power}};
  std::vector<std::tuple<std::string, std::string, double>> edges;
  std::string prev = "s";
  double prev_power = source_power;
  for (int k = 1; k < hops; ++k) {
    const std::string name = "r" + std::to_string(k);
    nodes.push_back(name);
    const double relay_power = 2.0 + k;  // arbitrary budgets
    powers[name] = relay_power;
    edges.emplace_back(prev, name, std::sqrt(1.0 / (delta * prev_power)));
    prev = name;
    prev_power = relay_power;
  }
  nodes.push_back("d");
  edges.emplace_back(prev, "d", 1.7);
  return laf::RelayNetwork::build(nodes, "s", "d", edges, powers);
}

// chi-square homogeneity statistic for G binomial groups of equal size
inline double chi2_homogeneity(const std::vector<std::size_t>& errors, std::size_t per_group) {
  double total_err = 0.0;
  for (auto e : errors) total_err += static_cast<double>(e);
  const double groups = static_cast<double>(errors.size());
  const double n = static_cast<double>(per_group);
  const double p = total_err / (groups * n);
  if (p <= 0.0 || p >= 1.0) return 0.0;
  double stat = 0.0;
  for (auto e : errors) {
    const double de = static_cast<double>(e) - n * p;
    stat += de * de / (n * p) + de * de / (n * (1.0 - p));
  }
  return stat;
}

}  // namespace oracles
