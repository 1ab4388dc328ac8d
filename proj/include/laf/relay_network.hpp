#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "laf/lattice.hpp"
#include "laf/rng.hpp"

namespace laf {

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Directed acyclic gain graph with one source, one destination, and per-node
// transmit power budgets. Validation requires every node to sit on some
// source-destination path so the layer and delta accounting stay
// well-defined. The network is layered when every node's hop distance from
// the source is unique (equivalently, all source-destination paths have the
// same hop count).
class RelayNetwork {
 public:
  struct Edge {
    int from;
    int to;
    double gain;
  };

  static RelayNetwork build(const std::vector<std::string>& node_names,
                            const std::string& source_name, const std::string& destination_name,
                            const std::vector<std::tuple<std::string, std::string, double>>& edges,
                            const std::map<std::string, double>& powers) {
    RelayNetwork net;
    std::map<std::string, int> index;
    for (const auto& name : node_names) {
      if (name.empty()) throw ValidationError("nodes: empty node id");
      if (index.count(name)) throw ValidationError("nodes: duplicate node id '" + name + "'");
      index[name] = static_cast<int>(net.names_.size());
      net.names_.push_back(name);
    }
    auto lookup = [&](const std::string& name, const std::string& where) {
      auto it = index.find(name);
      if (it == index.end())
        throw ValidationError(where + ": unknown node reference '" + name + "'");
      return it->second;
    };
    net.source_ = lookup(source_name, "source");
    net.dest_ = lookup(destination_name, "destination");
    if (net.source_ == net.dest_)
      throw ValidationError("source and destination must be distinct nodes");

    const int n = net.num_nodes();
    net.in_.assign(n, {});
    net.out_.assign(n, {});
    std::vector<std::vector<bool>> seen(n, std::vector<bool>(n, false));
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const auto& [from_name, to_name, gain] = edges[e];
      const std::string where = "edges[" + std::to_string(e) + "]";
      const int from = lookup(from_name, where + ".from");
      const int to = lookup(to_name, where + ".to");
      if (from == to) throw ValidationError(where + ": self-loop at '" + from_name + "'");
      if (to == net.source_) throw ValidationError(where + ": edge into the source");
      if (from == net.dest_) throw ValidationError(where + ": edge out of the destination");
      if (!(gain > 0.0) || !std::isfinite(gain))
        throw ValidationError(where + ".gain: must be a positive finite number on '" + from_name +
                              "->" + to_name + "'");
      if (seen[from][to])
        throw ValidationError(where + ": duplicate edge '" + from_name + "->" + to_name + "'");
      seen[from][to] = true;
      const int id = static_cast<int>(net.edges_.size());
      net.edges_.push_back({from, to, gain});
      net.out_[from].push_back(id);
      net.in_[to].push_back(id);
    }

    net.power_.assign(n, 0.0);
    for (const auto& [name, p] : powers) {
      const int v = lookup(name, "powers");
      if (v == net.dest_)
        throw ValidationError("powers: destination '" + name + "' does not transmit");
      if (!(p > 0.0) || !std::isfinite(p))
        throw ValidationError("powers['" + name + "']: must be a positive finite number");
      net.power_[v] = p;
    }
    for (int v = 0; v < n; ++v) {
      if (v != net.dest_ && !(net.power_[v] > 0.0))
        throw ValidationError("powers: missing entry for node '" + net.names_[v] + "'");
    }

    net.finalize();
    return net;
  }

  int num_nodes() const { return static_cast<int>(names_.size()); }
  const std::string& name(int v) const { return names_[static_cast<std::size_t>(v)]; }
  int source() const { return source_; }
  int destination() const { return dest_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<int>& in_edges(int v) const { return in_[static_cast<std::size_t>(v)]; }
  const std::vector<int>& out_edges(int v) const { return out_[static_cast<std::size_t>(v)]; }
  double power(int v) const { return power_[static_cast<std::size_t>(v)]; }
  const std::vector<int>& topo_order() const { return topo_; }

  bool is_layered() const { return layered_; }
  int num_hops() const {
    require_layered();
    return hops_;
  }
  int layer_of(int v) const {
    require_layered();
    return layer_[static_cast<std::size_t>(v)];
  }
  const std::vector<std::vector<int>>& layers() const {
    require_layered();
    return layer_nodes_;
  }
  int longest_hops() const { return longest_to_dest_; }

  std::vector<int> relays() const {
    std::vector<int> r;
    for (int v = 0; v < num_nodes(); ++v)
      if (v != source_ && v != dest_) r.push_back(v);
    return r;
  }
  int num_relays() const { return num_nodes() - 2; }

  void require_layered() const {
    if (!layered_)
      throw std::logic_error(
          "network is not layered; reduce it to an ISI channel for this analysis");
  }

 private:
  void finalize() {
    const int n = num_nodes();
    // Kahn topological order; leftovers sit on a cycle.
    std::vector<int> indeg(n, 0);
    for (const auto& e : edges_) ++indeg[static_cast<std::size_t>(e.to)];
    std::vector<int> queue;
    for (int v = 0; v < n; ++v)
      if (indeg[v] == 0) queue.push_back(v);
    std::sort(queue.begin(), queue.end());
    topo_.clear();
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const int v = queue[head];
      topo_.push_back(v);
      for (int e : out_[v]) {
        if (--indeg[static_cast<std::size_t>(edges_[e].to)] == 0)
          queue.push_back(edges_[e].to);
      }
    }
    if (static_cast<int>(topo_.size()) != n) {
      for (int v = 0; v < n; ++v)
        if (indeg[v] > 0)
          throw ValidationError("cycle detected through node '" + names_[v] + "'");
    }
    if (!in_[source_].empty()) throw ValidationError("source must have in-degree 0");
    if (!out_[dest_].empty()) throw ValidationError("destination must have out-degree 0");

    // Every node must lie on a source->destination path.
    std::vector<bool> from_src(n, false), to_dest(n, false);
    from_src[source_] = true;
    for (int v : topo_)
      if (from_src[v])
        for (int e : out_[v]) from_src[edges_[e].to] = true;
    to_dest[dest_] = true;
    for (auto it = topo_.rbegin(); it != topo_.rend(); ++it)
      if (to_dest[*it])
        for (int e : in_[*it]) to_dest[edges_[e].from] = true;
    if (!from_src[dest_]) throw ValidationError("no path from source to destination");
    for (int v = 0; v < n; ++v)
      if (!(from_src[v] && to_dest[v]))
        throw ValidationError("node '" + names_[v] + "' is not on any source-destination path");

    // Hop-count DP; layered iff shortest == longest for every node.
    std::vector<int> shortest(n, -1), longest(n, -1);
    shortest[source_] = longest[source_] = 0;
    for (int v : topo_) {
      if (shortest[v] < 0) continue;
      for (int e : out_[v]) {
        const int w = edges_[e].to;
        if (shortest[w] < 0 || shortest[v] + 1 < shortest[w]) shortest[w] = shortest[v] + 1;
        if (longest[v] + 1 > longest[w]) longest[w] = longest[v] + 1;
      }
    }
    layered_ = true;
    for (int v = 0; v < n; ++v)
      if (shortest[v] != longest[v]) layered_ = false;
    longest_to_dest_ = longest[dest_];
    if (layered_) {
      layer_ = shortest;
      hops_ = layer_[dest_];
      layer_nodes_.assign(static_cast<std::size_t>(hops_) + 1, {});
      for (int v = 0; v < n; ++v) layer_nodes_[static_cast<std::size_t>(layer_[v])].push_back(v);
    }
  }

  std::vector<std::string> names_;
  int source_ = -1;
  int dest_ = -1;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> in_, out_;
  std::vector<double> power_;
  std::vector<int> topo_;
  bool layered_ = false;
  std::vector<int> layer_;
  int hops_ = 0;
  int longest_to_dest_ = 0;
  std::vector<std::vector<int>> layer_nodes_;
};

// Nominal received power at every non-source node: coherent amplitude sum
// over the in-neighborhood with each upstream node at its full power budget.
// On a layered network this is exactly the per-layer accounting the
// amplification rule is defined against.
inline std::vector<double> nominal_received_powers(const RelayNetwork& net) {
  std::vector<double> p(static_cast<std::size_t>(net.num_nodes()), 0.0);
  for (int v = 0; v < net.num_nodes(); ++v) {
    if (v == net.source()) continue;
    double amp = 0.0;
    for (int e : net.in_edges(v)) {
      const auto& edge = net.edges()[static_cast<std::size_t>(e)];
      amp += edge.gain * std::sqrt(net.power(edge.from));
    }
    p[static_cast<std::size_t>(v)] = amp * amp;
  }
  return p;
}

struct ReceivedPowers {
  std::vector<double> at_node;  // indexed by node id; 0 at the source
  double at_destination = 0.0;
};

inline ReceivedPowers received_powers(const RelayNetwork& net) {
  net.require_layered();
  ReceivedPowers rp;
  rp.at_node = nominal_received_powers(net);
  rp.at_destination = rp.at_node[static_cast<std::size_t>(net.destination())];
  return rp;
}

// Tightest delta with every relay's received power at least 1/delta.
// A network with no relays propagates no noise: delta = 0.
inline double network_delta(const RelayNetwork& net) {
  const auto p = nominal_received_powers(net);
  double min_relay = std::numeric_limits<double>::infinity();
  for (int v : net.relays()) min_relay = std::min(min_relay, p[static_cast<std::size_t>(v)]);
  if (!std::isfinite(min_relay)) return 0.0;
  if (!(min_relay > 0.0)) throw ValidationError("a relay receives zero power");
  return 1.0 / min_relay;
}

inline std::vector<double> amplification_gains(const RelayNetwork& net, double delta) {
  if (!(delta >= 0.0)) throw std::invalid_argument("delta must be nonnegative");
  const auto p = nominal_received_powers(net);
  std::vector<double> beta(static_cast<std::size_t>(net.num_nodes()), 0.0);
  for (int v : net.relays())
    beta[static_cast<std::size_t>(v)] =
        std::sqrt(net.power(v)) / std::sqrt((1.0 + delta) * p[static_cast<std::size_t>(v)]);
  return beta;
}

// Fixed operating point of the amplify-and-forward chain.
struct AfPlan {
  double delta = 0.0;
  std::vector<double> beta;            // per node; zero except at relays
  std::vector<double> received_power;  // nominal, per node
  double destination_power = 0.0;
};

inline AfPlan plan_af(const RelayNetwork& net, std::optional<double> delta_override = {}) {
  AfPlan plan;
  plan.delta = delta_override ? *delta_override : network_delta(net);
  if (delta_override && !(*delta_override >= network_delta(net)))
    throw std::invalid_argument("delta override is tighter than the network supports");
  plan.beta = amplification_gains(net, plan.delta);
  plan.received_power = nominal_received_powers(net);
  plan.destination_power = plan.received_power[static_cast<std::size_t>(net.destination())];
  return plan;
}

// Per-symbol layer-synchronous pass: every node adds unit-variance Gaussian
// noise on receive, relays retransmit a beta-scaled copy. Block components
// ride independent channel uses.
inline Vec simulate_af(const RelayNetwork& net, const AfPlan& plan, const Vec& source_block,
                       RngStream& rng, bool noise_on, double noise_scale = 1.0) {
  net.require_layered();
  const int n = static_cast<int>(source_block.size());
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Vec> transmit(static_cast<std::size_t>(net.num_nodes()));
  transmit[static_cast<std::size_t>(net.source())] = source_block;
  const auto& layers = net.layers();
  for (std::size_t l = 1; l < layers.size(); ++l) {
    for (int v : layers[l]) {
      Vec y = Vec::Zero(n);
      for (int e : net.in_edges(v)) {
        const auto& edge = net.edges()[static_cast<std::size_t>(e)];
        y += edge.gain * transmit[static_cast<std::size_t>(edge.from)];
      }
      if (noise_on) {
        for (int i = 0; i < n; ++i) y(i) += noise_scale * gauss(rng);
      }
      if (v == net.destination()) return y;
      transmit[static_cast<std::size_t>(v)] = plan.beta[static_cast<std::size_t>(v)] * y;
    }
  }
  throw std::logic_error("destination not reached");
}

// Exact noise accounting: each relay's receive noise is an independent unit
// source; its amplitude transfer to every downstream node follows the same
// linear chain as the signal, so the arriving powers add across sources.
struct PropagatedNoise {
  double total = 0.0;  // exact power of all relay noise arriving at the destination
  std::vector<double> dest_from_layer;  // indexed by source layer (0..L), zero outside 1..L-1
  Mat node_layer_power;                 // arriving power, node x source layer
  Mat node_layer_bound;                 // delta * P_R(node) / (1+delta)^(hop gap)
  double series_bound = 0.0;            // delta * P_d * sum_{k=1..L-1} (1+delta)^-k
  double linear_bound = 0.0;            // L * delta * P_d
};

inline PropagatedNoise exact_propagated_noise(const RelayNetwork& net, const AfPlan& plan) {
  net.require_layered();
  const int n = net.num_nodes();
  const int hops = net.num_hops();
  PropagatedNoise out;
  out.dest_from_layer.assign(static_cast<std::size_t>(hops) + 1, 0.0);
  out.node_layer_power = Mat::Zero(n, hops + 1);
  out.node_layer_bound = Mat::Zero(n, hops + 1);

  for (int r : net.relays()) {
    // amplitude of r's receive noise inside every downstream observation
    std::vector<double> t(static_cast<std::size_t>(n), 0.0);
    for (int e : net.out_edges(r))
      t[static_cast<std::size_t>(net.edges()[static_cast<std::size_t>(e)].to)] =
          net.edges()[static_cast<std::size_t>(e)].gain * plan.beta[static_cast<std::size_t>(r)];
    for (int v : net.topo_order()) {
      if (net.layer_of(v) <= net.layer_of(r) + 1) continue;
      double amp = 0.0;
      for (int e : net.in_edges(v)) {
        const auto& edge = net.edges()[static_cast<std::size_t>(e)];
        amp += edge.gain * plan.beta[static_cast<std::size_t>(edge.from)] *
               t[static_cast<std::size_t>(edge.from)];
      }
      t[static_cast<std::size_t>(v)] = amp;
    }
    const int src_layer = net.layer_of(r);
    for (int v = 0; v < n; ++v) {
      const double pw = t[static_cast<std::size_t>(v)] * t[static_cast<std::size_t>(v)];
      if (pw > 0.0) out.node_layer_power(v, src_layer) += pw;
    }
    out.total += t[static_cast<std::size_t>(net.destination())] *
                 t[static_cast<std::size_t>(net.destination())];
    out.dest_from_layer[static_cast<std::size_t>(src_layer)] +=
        t[static_cast<std::size_t>(net.destination())] *
        t[static_cast<std::size_t>(net.destination())];
  }

  for (int v = 0; v < n; ++v) {
    if (v == net.source()) continue;
    for (int ls = 1; ls < net.layer_of(v); ++ls) {
      const int gap = net.layer_of(v) - ls;
      out.node_layer_bound(v, ls) = plan.delta *
                                    plan.received_power[static_cast<std::size_t>(v)] /
                                    std::pow(1.0 + plan.delta, gap);
    }
  }

  const double pd = plan.destination_power;
  for (int k = 1; k <= hops - 1; ++k)
    out.series_bound += plan.delta * pd / std::pow(1.0 + plan.delta, k);
  out.linear_bound = static_cast<double>(hops) * plan.delta * pd;
  return out;
}

inline double mac_cutset(double destination_power) {
  if (!(destination_power >= 0.0))
    throw std::invalid_argument("destination power must be nonnegative");
  return 0.5 * std::log2(1.0 + destination_power);
}

inline double rate_laf(double destination_power, double delta, int num_hops) {
  if (!(destination_power >= 0.0) || !(delta >= 0.0) || num_hops < 1)
    throw std::invalid_argument("rate_laf: invalid arguments");
  const double attenuation = std::pow(1.0 + delta, num_hops - 1);
  return 0.5 * std::log2(1.0 + destination_power /
                                   (attenuation * (1.0 + num_hops * delta * destination_power)));
}

// Scalar channel the layered AF network collapses to: y = gain * x + relay
// noise + unit receiver noise.
struct EquivalentChannel {
  double gain = 0.0;                        // exact end-to-end signal amplitude
  double propagated_noise_power = 0.0;      // exact, from the transfer DP
  double destination_noise_variance = 1.0;
  double received_power = 0.0;
  double source_power = 0.0;
  double delta = 0.0;
  int num_hops = 1;
  double snr_lower_bound = 0.0;
  double series_bound = 0.0;

  double signal_power() const { return received_power / std::pow(1.0 + delta, num_hops - 1); }
  double snr_exact(double noise_scale = 1.0) const {
    return signal_power() /
           (noise_scale * noise_scale * (destination_noise_variance + propagated_noise_power));
  }
  // gamma for the quantizer front end: either against the propagated relay
  // noise alone, or against the full effective noise.
  double gamma_propagated_only(double noise_scale = 1.0) const {
    const double pz = noise_scale * noise_scale * propagated_noise_power;
    if (pz == 0.0) return std::numeric_limits<double>::infinity();
    return received_power / (std::pow(1.0 + delta, num_hops - 1) * pz);
  }
  double gamma_full_mmse(double noise_scale = 1.0) const { return snr_exact(noise_scale); }
};

enum class AlphaMode { propagated_only, full_mmse };

inline EquivalentChannel equivalent_channel(const RelayNetwork& net, const AfPlan& plan) {
  net.require_layered();
  EquivalentChannel eq;
  eq.received_power = plan.destination_power;
  eq.source_power = net.power(net.source());
  eq.delta = plan.delta;
  eq.num_hops = net.num_hops();
  eq.gain = std::sqrt(eq.received_power) /
            std::sqrt(eq.source_power * std::pow(1.0 + eq.delta, eq.num_hops - 1));
  const PropagatedNoise noise = exact_propagated_noise(net, plan);
  eq.propagated_noise_power = noise.total;
  eq.series_bound = noise.series_bound;
  eq.snr_lower_bound = eq.received_power /
                       (std::pow(1.0 + eq.delta, eq.num_hops - 1) *
                        (1.0 + eq.num_hops * eq.delta * eq.received_power));
  return eq;
}

// Reproducible instance generator for property tests: full bipartite layers,
// gains in [0.5, 2], powers in [1, 10].
inline RelayNetwork random_layered_network(RngStream& rng, int max_relay_layers = 3,
                                           int max_per_layer = 3) {
  std::uniform_int_distribution<int> layer_count(1, max_relay_layers);
  std::uniform_int_distribution<int> layer_size(1, max_per_layer);
  std::uniform_real_distribution<double> gain(0.5, 2.0);
  std::uniform_real_distribution<double> power(1.0, 10.0);

  const int relay_layers = layer_count(rng);
  std::vector<std::vector<std::string>> tiers;
  tiers.push_back({"s"});
  for (int l = 1; l <= relay_layers; ++l) {
    const int sz = layer_size(rng);
    std::vector<std::string> tier;
    for (int i = 0; i < sz; ++i)
      tier.push_back("r" + std::to_string(l) + "_" + std::to_string(i));
    tiers.push_back(tier);
  }
  tiers.push_back({"d"});

  std::vector<std::string> nodes;
  std::map<std::string, double> powers;
  for (const auto& tier : tiers)
    for (const auto& name : tier) {
      nodes.push_back(name);
      if (name != "d") powers[name] = power(rng);
    }
  std::vector<std::tuple<std::string, std::string, double>> edges;
  for (std::size_t l = 0; l + 1 < tiers.size(); ++l)
    for (const auto& from : tiers[l])
      for (const auto& to : tiers[l + 1]) edges.emplace_back(from, to, gain(rng));
  return RelayNetwork::build(nodes, "s", "d", edges, powers);
}

}  // namespace laf
