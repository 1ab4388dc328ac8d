#pragma once

#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "laf/relay_network.hpp"

namespace laf {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Strict schema: {"nodes": [...], "source": id, "destination": id,
// "edges": [{"from","to","gain"}], "powers": {id: P}}. Anything else is
// rejected with the offending field named.
inline RelayNetwork parse_network(const nlohmann::json& j, const std::string& context) {
  auto fail = [&](const std::string& what) -> void {
    throw ParseError(context + ": " + what);
  };
  if (!j.is_object()) fail("top level must be a JSON object");
  static const std::vector<std::string> allowed = {"nodes", "source", "destination", "edges",
                                                   "powers"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      fail("unknown field '" + key + "'");
  }
  for (const auto& key : allowed) {
    if (!j.contains(key)) fail("missing field '" + key + "'");
  }
  if (!j["nodes"].is_array()) fail("'nodes' must be an array of strings");
  std::vector<std::string> nodes;
  for (std::size_t i = 0; i < j["nodes"].size(); ++i) {
    if (!j["nodes"][i].is_string()) fail("nodes[" + std::to_string(i) + "]: must be a string");
    nodes.push_back(j["nodes"][i].get<std::string>());
  }
  if (!j["source"].is_string()) fail("'source' must be a node id string");
  if (!j["destination"].is_string()) fail("'destination' must be a node id string");

  if (!j["edges"].is_array()) fail("'edges' must be an array");
  std::vector<std::tuple<std::string, std::string, double>> edges;
  for (std::size_t i = 0; i < j["edges"].size(); ++i) {
    const auto& e = j["edges"][i];
    const std::string where = "edges[" + std::to_string(i) + "]";
    if (!e.is_object()) fail(where + ": must be an object");
    for (const auto& [key, _] : e.items()) {
      if (key != "from" && key != "to" && key != "gain")
        fail(where + ": unknown field '" + key + "'");
    }
    if (!e.contains("from") || !e["from"].is_string()) fail(where + ".from: must be a node id");
    if (!e.contains("to") || !e["to"].is_string()) fail(where + ".to: must be a node id");
    if (!e.contains("gain") || !e["gain"].is_number()) fail(where + ".gain: must be a number");
    edges.emplace_back(e["from"].get<std::string>(), e["to"].get<std::string>(),
                       e["gain"].get<double>());
  }

  if (!j["powers"].is_object()) fail("'powers' must be an object of node id -> power");
  std::map<std::string, double> powers;
  for (const auto& [key, val] : j["powers"].items()) {
    if (!val.is_number()) fail("powers['" + key + "']: must be a number");
    powers[key] = val.get<double>();
  }

  try {
    return RelayNetwork::build(nodes, j["source"].get<std::string>(),
                               j["destination"].get<std::string>(), edges, powers);
  } catch (const ValidationError& err) {
    throw ParseError(context + ": " + err.what());
  }
}

inline RelayNetwork load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& err) {
    throw ParseError(path + ": " + err.what());
  }
  return parse_network(j, path);
}

}  // namespace laf
