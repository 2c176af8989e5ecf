#include <iostream>
#include <map>

#include "lf/network.hpp"
#include "json.hpp"

namespace lf {

using nlohmann::json;

namespace {

double require_num(const json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key)) throw SchemaError(path + ": missing field '" + key + "'");
  if (!obj[key].is_number()) throw SchemaError(path + "." + key + ": expected a number");
  return obj[key].get<double>();
}

int require_int(const json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key)) throw SchemaError(path + ": missing field '" + key + "'");
  if (!obj[key].is_number_integer()) throw SchemaError(path + "." + key + ": expected an integer");
  return obj[key].get<int>();
}

}  // namespace

RadialNetwork parse_network_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SchemaError("$: expected an object");
  RadialNetwork net;
  net.base_mva = require_num(doc, "base_mva", "$");
  net.v0 = require_num(doc, "v0", "$");
  if (!doc.contains("nodes") || !doc["nodes"].is_array())
    throw SchemaError("$.nodes: missing or not an array");
  if (!doc.contains("lines") || !doc["lines"].is_array())
    throw SchemaError("$.lines: missing or not an array");

  struct NodeRec { double p, q, g, b; };
  std::map<int, NodeRec> nodes;
  int idx = 0;
  for (const auto& n : doc["nodes"]) {
    std::string path = "$.nodes[" + std::to_string(idx++) + "]";
    int id = require_int(n, "id", path);
    if (id < 1) throw SchemaError(path + ".id: node ids start at 1 (0 is the slack)");
    if (nodes.count(id)) throw SchemaError(path + ".id: duplicate node id " + std::to_string(id));
    nodes[id] = {require_num(n, "p", path), require_num(n, "q", path),
                 require_num(n, "g_shunt", path), require_num(n, "b_shunt", path)};
  }
  const int J = (int)nodes.size();
  for (int j = 1; j <= J; ++j)
    if (!nodes.count(j)) throw SchemaError("$.nodes: ids must be contiguous 1..J, missing " +
                                           std::to_string(j));
  net.node_count = J;
  net.p_inj.resize(J);
  net.q_inj.resize(J);
  net.g_shunt.resize(J);
  net.b_shunt.resize(J);
  for (int j = 1; j <= J; ++j) {
    net.p_inj[j - 1] = nodes[j].p;
    net.q_inj[j - 1] = nodes[j].q;
    net.g_shunt[j - 1] = nodes[j].g;
    net.b_shunt[j - 1] = nodes[j].b;
  }

  net.lines.assign(J, Line{});
  std::vector<bool> have(J, false);
  idx = 0;
  for (const auto& l : doc["lines"]) {
    std::string path = "$.lines[" + std::to_string(idx++) + "]";
    int from = require_int(l, "from", path);
    int to = require_int(l, "to", path);
    if (to < 1 || to > J)
      throw NotRadial(path + ": line 'to' node " + std::to_string(to) + " out of range");
    if (have[to - 1]) throw NotRadial(path + ": node " + std::to_string(to) + " has two parents");
    have[to - 1] = true;
    Line ln;
    ln.up = from;
    ln.r = require_num(l, "r", path);
    ln.x = require_num(l, "x", path);
    ln.tap = l.contains("tap") ? require_num(l, "tap", path) : 1.0;
    net.lines[to - 1] = ln;
    double bc = l.contains("b_charging") ? require_num(l, "b_charging", path) : 0.0;
    if (bc != 0.0) {
      net.b_shunt[to - 1] += bc / 2.0;
      if (from >= 1) net.b_shunt[from - 1] += bc / 2.0;
    }
  }
  if ((int)doc["lines"].size() != J)
    throw NotRadial("$.lines: expected " + std::to_string(J) + " lines, got " +
                    std::to_string(doc["lines"].size()));
  net.validate();
  return net;
}

std::string serialize_network_json(const RadialNetwork& net) {
  json doc;
  doc["base_mva"] = net.base_mva;
  doc["v0"] = net.v0;
  json nodes = json::array();
  for (int j = 1; j <= net.J(); ++j)
    nodes.push_back({{"id", j},
                     {"p", net.p_inj[j - 1]},
                     {"q", net.q_inj[j - 1]},
                     {"g_shunt", net.g_shunt[j - 1]},
                     {"b_shunt", net.b_shunt[j - 1]}});
  doc["nodes"] = nodes;
  json lines = json::array();
  for (int j = 1; j <= net.J(); ++j)
    lines.push_back({{"from", net.lines[j - 1].up},
                     {"to", j},
                     {"r", net.lines[j - 1].r},
                     {"x", net.lines[j - 1].x},
                     {"tap", net.lines[j - 1].tap},
                     {"b_charging", 0.0}});
  doc["lines"] = lines;
  return doc.dump(2);
}

}  // namespace lf
