#include "lf/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace lf {

void RadialNetwork::validate() const {
  const int J = node_count;
  if (J <= 0) throw NotRadial("network has no non-slack nodes");
  if (v0 <= 0) throw NotRadial("squared slack voltage must be positive");
  if ((int)lines.size() != J)
    throw NotRadial("branch count " + std::to_string(lines.size()) +
                    " != node count " + std::to_string(J));
  for (int b = 0; b < J; ++b) {
    const Line& ln = lines[b];
    if (ln.up < 0 || ln.up > J)
      throw NotRadial("branch " + std::to_string(b + 1) + " has invalid upstream node");
    if (ln.tap <= 0) throw BadTap("branch " + std::to_string(b + 1) + " has tap <= 0");
    if (ln.r * ln.r + ln.x * ln.x <= 0)
      throw NotRadial("branch " + std::to_string(b + 1) + " has zero impedance");
    if (ln.r < 0)
      std::cerr << "warning: branch " << b + 1 << " has negative resistance\n";
  }
  // reachability from the root; each node 1..J has exactly one parent by
  // construction (lines[b].up), so a cycle shows up as unreachability
  std::vector<std::vector<int>> kids(J + 1);
  for (int b = 0; b < J; ++b) kids[lines[b].up].push_back(b + 1);
  std::vector<bool> seen(J + 1, false);
  std::vector<int> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    int n = stack.back();
    stack.pop_back();
    for (int c : kids[n])
      if (!seen[c]) {
        seen[c] = true;
        stack.push_back(c);
      }
  }
  for (int n = 1; n <= J; ++n)
    if (!seen[n]) throw NotRadial("node " + std::to_string(n) + " not reachable from the root");
}

TopoOrder topo_order(const RadialNetwork& net) {
  const int J = net.J();
  TopoOrder order;
  order.children.assign(J + 1, {});
  for (int b = 0; b < J; ++b) order.children[net.lines[b].up].push_back(b);
  order.forward.reserve(J);
  std::vector<int> stack;
  for (auto it = order.children[0].rbegin(); it != order.children[0].rend(); ++it)
    stack.push_back(*it);
  while (!stack.empty()) {
    int b = stack.back();
    stack.pop_back();
    order.forward.push_back(b);
    const auto& kids = order.children[b + 1];
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
  }
  return order;
}

RadialNetwork scale_loads(const RadialNetwork& net, double factor) {
  RadialNetwork out = net;
  for (int j = 0; j < net.J(); ++j) {
    out.p_inj[j] *= factor;
    out.q_inj[j] *= factor;
  }
  return out;
}

// --- MATPOWER parser ---------------------------------------------------

namespace {

struct Matrix {
  std::vector<std::vector<double>> rows;
};

// Strips '%' comments, keeps line structure for error reporting.
std::string strip_comment(const std::string& line) {
  auto pos = line.find('%');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

double parse_num(const std::string& tok, int lineno) {
  size_t used = 0;
  double val;
  try {
    val = std::stod(tok, &used);
  } catch (const std::exception&) {
    throw MalformedCase("line " + std::to_string(lineno) + ": non-numeric token '" + tok + "'");
  }
  if (used != tok.size())
    throw MalformedCase("line " + std::to_string(lineno) + ": non-numeric token '" + tok + "'");
  return val;
}

}  // namespace

RawCase parse_matpower(const std::string& text) {
  std::map<std::string, Matrix> matrices;
  double base_mva = 0;
  bool have_base = false;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::string current;  // matrix being filled, empty if none
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = strip_comment(line);
    // trim
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto e = s.find_last_not_of(" \t\r");
    s = s.substr(b, e - b + 1);
    if (s.empty()) continue;

    if (current.empty()) {
      if (s.rfind("function", 0) == 0) continue;
      auto eq = s.find('=');
      if (s.rfind("mpc.", 0) == 0 && eq != std::string::npos) {
        std::string name = s.substr(4, eq - 4);
        name.erase(std::remove_if(name.begin(), name.end(), ::isspace), name.end());
        std::string rhs = s.substr(eq + 1);
        auto rb = rhs.find_first_not_of(" \t");
        if (rb == std::string::npos) continue;
        rhs = rhs.substr(rb);
        if (name == "baseMVA") {
          auto sc = rhs.find(';');
          if (sc != std::string::npos) rhs = rhs.substr(0, sc);
          base_mva = parse_num(rhs, lineno);
          have_base = true;
        } else if (rhs[0] == '[') {
          current = name;
          matrices[current];
          rhs = rhs.substr(1);
          s = rhs;  // fall through to row parsing below
          if (s.empty()) continue;
        }
        // other scalar/string assignments (version, etc.) ignored
        if (current.empty()) continue;
      } else {
        continue;  // stray statement outside any matrix
      }
    }

    // inside a matrix: rows separated by ';', matrix closed by ']'
    std::string chunk = s;
    while (!chunk.empty()) {
      auto close = chunk.find(']');
      std::string body = (close == std::string::npos) ? chunk : chunk.substr(0, close);
      std::istringstream rowin(body);
      std::string rowpart;
      while (std::getline(rowin, rowpart, ';')) {
        std::istringstream toks(rowpart);
        std::string tok;
        std::vector<double> row;
        while (toks >> tok) row.push_back(parse_num(tok, lineno));
        if (!row.empty()) matrices[current].rows.push_back(std::move(row));
      }
      if (close == std::string::npos) break;
      current.clear();
      chunk = chunk.substr(close + 1);
      // anything after ']' on this line other than ';' is ignored
      break;
    }
  }

  if (!have_base) throw MalformedCase("missing mpc.baseMVA");
  if (!matrices.count("bus")) throw MalformedCase("missing mpc.bus matrix");
  if (!matrices.count("branch")) throw MalformedCase("missing mpc.branch matrix");

  RawCase raw;
  raw.base_mva = base_mva;
  int slack_count = 0;
  for (const auto& row : matrices["bus"].rows) {
    if (row.size() < 8) throw MalformedCase("bus row with fewer than 8 columns");
    RawBus bus;
    bus.id = (int)row[0];
    bus.type = (int)row[1];
    bus.pd = row[2];
    bus.qd = row[3];
    bus.gs = row[4];
    bus.bs = row[5];
    bus.vm = row.size() > 7 ? row[7] : 1.0;
    bus.base_kv = row.size() > 9 ? row[9] : 0.0;
    if (bus.type == 3) ++slack_count;
    raw.buses.push_back(bus);
  }
  if (slack_count != 1)
    throw UnsupportedFeature("expected exactly one slack bus, found " +
                             std::to_string(slack_count));
  for (const auto& row : matrices["branch"].rows) {
    if (row.size() < 4) throw MalformedCase("branch row with fewer than 4 columns");
    RawBranch br;
    br.from = (int)row[0];
    br.to = (int)row[1];
    br.r = row[2];
    br.x = row[3];
    br.b_charging = row.size() > 4 ? row[4] : 0.0;
    br.tap = row.size() > 8 ? row[8] : 0.0;
    br.status = row.size() > 10 ? (int)row[10] : 1;
    if (br.status != 0) raw.branches.push_back(br);
  }
  return raw;
}

RadialNetwork to_radial(const RawCase& raw) {
  const int nbus = (int)raw.buses.size();
  if ((int)raw.branches.size() != nbus - 1)
    throw NotRadial("in-service branch count " + std::to_string(raw.branches.size()) +
                    " != bus count - 1 (" + std::to_string(nbus - 1) + ")");

  std::map<int, int> pos;  // external id -> index in raw.buses
  for (int i = 0; i < nbus; ++i) {
    if (pos.count(raw.buses[i].id))
      throw NotRadial("duplicate bus id " + std::to_string(raw.buses[i].id));
    pos[raw.buses[i].id] = i;
  }
  int slack = -1;
  for (int i = 0; i < nbus; ++i)
    if (raw.buses[i].type == 3) slack = i;

  // adjacency over in-service branches
  std::vector<std::vector<int>> adj(nbus);  // branch indices
  for (int k = 0; k < (int)raw.branches.size(); ++k) {
    const auto& br = raw.branches[k];
    if (!pos.count(br.from) || !pos.count(br.to))
      throw NotRadial("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                      " references unknown bus");
    adj[pos.at(br.from)].push_back(k);
    adj[pos.at(br.to)].push_back(k);
  }

  // BFS from the slack; relabel nodes 1..J in discovery order so each
  // branch ends at its own downstream node id
  std::vector<int> newid(nbus, -1);
  newid[slack] = 0;
  std::vector<int> parent_branch(nbus, -1);
  std::vector<int> bfs{slack};
  std::vector<int> disc;  // raw bus indices in discovery order
  for (size_t h = 0; h < bfs.size(); ++h) {
    int u = bfs[h];
    for (int k : adj[u]) {
      if (k == parent_branch[u]) continue;
      const auto& br = raw.branches[k];
      int v = pos.at(br.from) == u ? pos.at(br.to) : pos.at(br.from);
      if (v == u) throw NotRadial("self-loop at bus " + std::to_string(raw.buses[u].id));
      if (newid[v] >= 0)
        throw NotRadial("cycle detected at bus " + std::to_string(raw.buses[v].id));
      newid[v] = (int)disc.size() + 1;
      parent_branch[v] = k;
      disc.push_back(v);
      bfs.push_back(v);
    }
  }
  if ((int)disc.size() != nbus - 1) {
    for (int i = 0; i < nbus; ++i)
      if (newid[i] < 0)
        throw NotRadial("bus " + std::to_string(raw.buses[i].id) + " disconnected from the slack");
  }

  const int J = nbus - 1;
  RadialNetwork net;
  net.node_count = J;
  net.base_mva = raw.base_mva;
  double vm0 = raw.buses[slack].vm > 0 ? raw.buses[slack].vm : 1.0;
  net.v0 = vm0 * vm0;
  net.lines.resize(J);
  net.g_shunt.assign(J, 0.0);
  net.b_shunt.assign(J, 0.0);
  net.p_inj.assign(J, 0.0);
  net.q_inj.assign(J, 0.0);

  for (int j = 1; j <= J; ++j) {
    int v = disc[j - 1];
    const RawBranch& br = raw.branches[parent_branch[v]];
    int other = pos.at(br.from) == v ? pos.at(br.to) : pos.at(br.from);
    Line ln;
    ln.up = newid[other];
    ln.r = br.r;
    ln.x = br.x;
    double tap = br.tap == 0.0 ? 1.0 : br.tap;
    if (tap <= 0) throw BadTap("branch to bus " + std::to_string(raw.buses[v].id) + " has tap <= 0");
    // MATPOWER places the tap at the 'from' side; when the feeder is
    // traversed against branch orientation the ratio inverts
    ln.tap = pos.at(br.from) == other ? tap : 1.0 / tap;
    net.lines[j - 1] = ln;

    const RawBus& bus = raw.buses[v];
    net.p_inj[j - 1] = -bus.pd / raw.base_mva;
    net.q_inj[j - 1] = -bus.qd / raw.base_mva;
    net.g_shunt[j - 1] = bus.gs / raw.base_mva;
    net.b_shunt[j - 1] = bus.bs / raw.base_mva;
  }
  // aggregate line charging: half of b at each endpoint (slack half dropped)
  for (const auto& br : raw.branches) {
    for (int endpoint : {br.from, br.to}) {
      int n = newid[pos.at(endpoint)];
      if (n > 0) net.b_shunt[n - 1] += br.b_charging / 2.0;
    }
  }
  net.validate();
  return net;
}

RadialNetwork load_network(const std::string& path, const std::string& format) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open network file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string fmt = format;
  if (fmt.empty()) {
    fmt = path.size() > 5 && path.substr(path.size() - 5) == ".json" ? "json" : "matpower";
  }
  if (fmt == "json") return parse_network_json(ss.str());
  if (fmt == "matpower") return to_radial(parse_matpower(ss.str()));
  throw Error("unknown network format: " + fmt);
}

}  // namespace lf
