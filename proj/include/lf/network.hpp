#pragma once

#include <string>
#include <vector>

#include "lf/errors.hpp"

namespace lf {

/// One branch of the feeder. Branch with array index b has downstream node
/// b+1; `up` is the upstream node id (0 = slack).
struct Line {
  int up = 0;
  double r = 0.0;    // series resistance, p.u.
  double x = 0.0;    // series reactance, p.u.
  double tap = 1.0;  // off-nominal tap ratio a > 0
};

/// Immutable per-unit model of a rooted radial feeder. Nodes are labeled
/// 0..J with 0 the slack; all per-node arrays are indexed by node-1.
struct RadialNetwork {
  int node_count = 0;   // J, non-slack nodes
  double v0 = 1.0;      // squared slack voltage magnitude
  double base_mva = 1.0;
  std::vector<Line> lines;       // size J
  std::vector<double> g_shunt;   // size J, "+G v" convention
  std::vector<double> b_shunt;   // size J, "-B v" convention
  std::vector<double> p_inj;     // size J, known net injections (neg = load)
  std::vector<double> q_inj;

  int J() const { return node_count; }
  /// Checks tree structure, tap and v0 positivity. Throws NotRadial/BadTap.
  void validate() const;
};

/// Root-to-leaf branch ordering plus the children sets J'(j).
struct TopoOrder {
  std::vector<int> forward;                // 0-based branch indices
  std::vector<std::vector<int>> children;  // children[node], node in 0..J
};

TopoOrder topo_order(const RadialNetwork& net);

RadialNetwork scale_loads(const RadialNetwork& net, double factor);

// --- MATPOWER case parsing -------------------------------------------------

struct RawBus {
  int id = 0;
  int type = 1;           // 1 PQ, 2 PV, 3 slack
  double pd = 0, qd = 0;  // MW / MVAr
  double gs = 0, bs = 0;  // MW / MVAr at v = 1
  double base_kv = 0;
  double vm = 1.0;
};

struct RawBranch {
  int from = 0, to = 0;
  double r = 0, x = 0;
  double b_charging = 0;
  double tap = 0;  // 0 means nominal
  int status = 1;
};

struct RawCase {
  double base_mva = 1.0;
  std::vector<RawBus> buses;
  std::vector<RawBranch> branches;  // in-service only
};

RawCase parse_matpower(const std::string& text);
RadialNetwork to_radial(const RawCase& raw);

// --- JSON network schema ---------------------------------------------------

RadialNetwork parse_network_json(const std::string& text);
std::string serialize_network_json(const RadialNetwork& net);

/// Reads a network from a file, dispatching on format ("matpower"/"json")
/// or the file extension when format is empty.
RadialNetwork load_network(const std::string& path, const std::string& format = "");

}  // namespace lf
