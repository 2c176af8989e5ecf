#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lf/baselines.hpp"
#include "lf/solvers.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNoConverge = 2;

struct RunSpec {
  std::string network;
  std::string format;  // "", "matpower", "json"
  std::string method = "pan-qe";
  std::string init = "warm";
  std::string retraction;  // "", "bfm", "qe1", "qe2"
  double load_scale = 1.0;
  lf::SolverConfig cfg;
  bool alpha_bar_set = false;
  std::string out;
  std::string out_format = "csv";
};

const std::vector<std::string> kMethods = {"gd-bfm", "gd-qe",  "newton-qe",    "pan-bfm",
                                           "pan-qe", "nr",     "bfs",          "lindistflow",
                                           "approx1"};

bool is_bfm_method(const std::string& m) { return m == "gd-bfm" || m == "pan-bfm"; }
bool is_qe_method(const std::string& m) {
  return m == "gd-qe" || m == "pan-qe" || m == "newton-qe" || m == "approx1";
}

lf::RetractionKind resolve_retraction(const RunSpec& spec) {
  const std::string& r = spec.retraction;
  if (is_bfm_method(spec.method) || spec.method == "bfs") {
    if (!r.empty() && r != "bfm")
      throw lf::Error("retraction '" + r + "' is incompatible with method " + spec.method);
    return lf::RetractionKind::BfmSweep;
  }
  if (r == "bfm")
    throw lf::Error("retraction 'bfm' is incompatible with method " + spec.method);
  if (r == "qe1") return lf::RetractionKind::QeSphere;
  return lf::RetractionKind::QeCurrent;  // default qe2
}

struct MethodResult {
  lf::SolveReport rep;
  lf::Vec v;          // squared voltage magnitudes, size J
  lf::Vec Va;         // angles incl. slack, size J+1
  lf::Vec P, Q, l;    // per-branch, size J
};

MethodResult run_method(const RunSpec& spec, const lf::RadialNetwork& net) {
  lf::SolverConfig cfg = spec.cfg;
  cfg.init = spec.init == "flat" ? lf::InitKind::Flat : lf::InitKind::Warm;
  cfg.retraction = resolve_retraction(spec);
  if (!spec.alpha_bar_set) cfg.armijo.alpha_bar = spec.method == "gd-bfm" ? 4.5 : 1.0;

  const int J = net.J();
  const lf::TopoOrder order = lf::topo_order(net);
  MethodResult res;

  auto from_qe_u = [&](const lf::Vec& u) {
    res.P = u.segment(0, J);
    res.Q = u.segment(J, J);
    res.l = u.segment(2 * J, J);
    res.v = u.segment(3 * J, J);
    res.Va = lf::recover_angles(net, lf::QePoint{u});
  };

  if (spec.method == "gd-bfm" || spec.method == "gd-qe") {
    const auto m = is_bfm_method(spec.method) ? lf::Manifold::BFM : lf::Manifold::QE;
    res.rep = lf::solve_gd(m, net, cfg);
    from_qe_u(res.rep.final_point.head(4 * J));
  } else if (spec.method == "pan-bfm" || spec.method == "pan-qe") {
    const auto m = is_bfm_method(spec.method) ? lf::Manifold::BFM : lf::Manifold::QE;
    res.rep = lf::solve_pan(m, net, cfg);
    from_qe_u(res.rep.final_point.head(4 * J));
  } else if (spec.method == "newton-qe") {
    res.rep = lf::solve_newton_qe(net, cfg);
    from_qe_u(res.rep.final_point);
  } else if (spec.method == "bfs") {
    res.rep = lf::bfs_solve(net, order, cfg);
    from_qe_u(res.rep.final_point.head(4 * J));
  } else if (spec.method == "nr") {
    lf::NewtonRaphsonResult nr = lf::newton_raphson(net, cfg.init, cfg);
    res.rep = std::move(nr.report);
    res.v = nr.polar.Vm.tail(J).array().square();
    res.Va = nr.polar.Va;
    res.P = nr.polar.P;
    res.Q = nr.polar.Q;
    res.l = nr.polar.l;
  } else if (spec.method == "lindistflow") {
    const lf::Vec u = lf::lindistflow_solve(net);
    const lf::FlowLinearSystem sys = lf::linear_part(net);
    res.rep.converged = true;
    res.rep.iterations = 0;
    res.rep.final_point = u;
    res.rep.final_v = u.segment(3 * J, J);
    from_qe_u(u);
  } else if (spec.method == "approx1") {
    const lf::QePoint pt = lf::pan_first_iteration(net, cfg);
    const lf::FlowLinearSystem sys = lf::linear_part(net);
    res.rep.converged = true;
    res.rep.iterations = 1;
    res.rep.trajectory.push_back({1, lf::objective_qe(sys, pt.u), 0.0, 0.0, 1.0, 0.0});
    res.rep.final_point = pt.u;
    res.rep.final_v = pt.u.segment(3 * J, J);
    from_qe_u(pt.u);
  } else {
    throw lf::Error("unknown method: " + spec.method);
  }
  return res;
}

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw lf::Error("cannot open output file: " + tmp.string());
    os << content;
    if (!os.flush()) throw lf::Error("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

void emit(const std::string& path, const std::string& content) {
  if (path.empty())
    std::cout << content;
  else
    atomic_write(path, content);
}

std::string trajectory_csv(const lf::SolveReport& rep) {
  std::ostringstream os;
  os.precision(17);
  os << "iter,f,grad_norm,max_dv,step,time_ms\n";
  for (const auto& r : rep.trajectory)
    os << r.iter << ',' << r.f << ',' << r.grad_norm << ',' << r.max_dv << ',' << r.step << ','
       << r.time_ms << '\n';
  return os.str();
}

std::string solution_json(const MethodResult& res, double v0) {
  json doc;
  doc["converged"] = res.rep.converged;
  doc["iterations"] = res.rep.iterations;
  json nodes = json::array();
  nodes.push_back({{"id", 0}, {"vm", std::sqrt(v0)}, {"va", 0.0}});
  for (int j = 0; j < res.v.size(); ++j)
    nodes.push_back({{"id", j + 1},
                     {"vm", std::sqrt(std::max(res.v[j], 0.0))},
                     {"va", res.Va[j + 1]}});
  doc["nodes"] = std::move(nodes);
  json lines = json::array();
  for (int j = 0; j < res.P.size(); ++j)
    lines.push_back({{"id", j + 1}, {"p", res.P[j]}, {"q", res.Q[j]}, {"l", res.l[j]}});
  doc["lines"] = std::move(lines);
  return doc.dump(2) + "\n";
}

lf::RadialNetwork load_scaled(const RunSpec& spec) {
  lf::RadialNetwork net = lf::load_network(spec.network, spec.format);
  if (spec.load_scale != 1.0) net = lf::scale_loads(net, spec.load_scale);
  return net;
}

int cmd_solve(const RunSpec& spec) {
  const lf::RadialNetwork net = load_scaled(spec);
  const MethodResult res = run_method(spec, net);
  const std::string payload =
      spec.out_format == "json" ? solution_json(res, net.v0) : trajectory_csv(res.rep);
  emit(spec.out, payload);
  std::cerr << spec.method << ": " << (res.rep.converged ? "converged" : "did not converge")
            << " in " << res.rep.iterations << " iterations";
  if (!res.rep.failure.empty()) std::cerr << " (" << res.rep.failure << ")";
  std::cerr << "\n";
  return res.rep.converged ? kExitOk : kExitNoConverge;
}

int cmd_compare(const RunSpec& base, const std::vector<std::string>& methods,
                const std::string& reference) {
  if (methods.empty()) {
    std::cerr << "compare: empty method list\n";
    return kExitInput;
  }
  const lf::RadialNetwork net = load_scaled(base);

  RunSpec ref_spec = base;
  ref_spec.method = reference;
  ref_spec.retraction.clear();
  const MethodResult ref = run_method(ref_spec, net);

  std::ostringstream os;
  os.precision(6);
  os << "method,iterations,converged,max_dv_vs_" << reference << "\n";
  bool all_agree = true;
  for (const auto& m : methods) {
    RunSpec s = base;
    s.method = m;
    s.retraction.clear();
    try {
      const MethodResult r = run_method(s, net);
      const lf::CompareMetrics cm = lf::solution_compare(r.v, ref.v);
      os << m << ',' << r.rep.iterations << ',' << (r.rep.converged ? 1 : 0) << ','
         << std::scientific << cm.max << std::defaultfloat << '\n';
      if (!r.rep.converged || cm.max > 1e-5) all_agree = false;
    } catch (const std::exception& e) {
      os << m << ",,0,error: " << e.what() << '\n';
      all_agree = false;
    }
  }
  emit(base.out, os.str());
  return all_agree ? kExitOk : kExitNoConverge;
}

int cmd_approx(const RunSpec& base) {
  const lf::RadialNetwork net = load_scaled(base);
  const int J = net.J();

  RunSpec exact_spec = base;
  exact_spec.method = "pan-qe";
  exact_spec.init = "warm";
  exact_spec.retraction.clear();
  const MethodResult exact = run_method(exact_spec, net);
  if (!exact.rep.converged) {
    std::cerr << "approx: exact reference solve did not converge\n";
    return kExitNoConverge;
  }
  const lf::Vec ldf = lf::lindistflow_solve(net);
  lf::SolverConfig cfg = base.cfg;
  cfg.init = lf::InitKind::Warm;
  cfg.retraction = lf::RetractionKind::QeCurrent;
  const lf::QePoint ap = lf::pan_first_iteration(net, cfg);

  const lf::CompareMetrics m_ldf = lf::solution_compare(ldf.segment(3 * J, J), exact.v);
  const lf::CompareMetrics m_ap = lf::solution_compare(ap.u.segment(3 * J, J), exact.v);

  std::ostringstream os;
  os.precision(17);
  os << "node,lindistflow_err,approx1_err\n";
  for (int j = 0; j < J; ++j)
    os << j + 1 << ',' << m_ldf.node_abs[j] << ',' << m_ap.node_abs[j] << '\n';
  os << "mean," << m_ldf.mean << ',' << m_ap.mean << '\n';
  os << "max," << m_ldf.max << ',' << m_ap.max << '\n';
  emit(base.out, os.str());
  return kExitOk;
}

void add_common_flags(CLI::App* app, RunSpec& spec) {
  app->add_option("--network", spec.network, "Network file path")->required();
  app->add_option("--format", spec.format, "Input format")
      ->check(CLI::IsMember({"matpower", "json"}));
  app->add_option("--init", spec.init, "Initialization")->check(CLI::IsMember({"flat", "warm"}));
  app->add_option("--load-scale", spec.load_scale, "Multiply all loads by this factor");
  app->add_option("--eps-grad", spec.cfg.eps_grad, "Gradient-norm tolerance");
  app->add_option("--eps-volt", spec.cfg.eps_volt, "Voltage-change tolerance");
  app->add_option("--beta", spec.cfg.armijo.beta, "Armijo backtracking factor");
  app->add_option("--sigma", spec.cfg.armijo.sigma, "Armijo sufficient-decrease factor");
  app->add_option("--max-iter", spec.cfg.max_iter, "Iteration cap");
  app->add_option("--out", spec.out, "Output file (stdout if omitted)");
  auto* ab = app->add_option("--alpha-bar", spec.cfg.armijo.alpha_bar, "Initial Armijo step");
  app->parse_complete_callback([ab, &spec] { spec.alpha_bar_set = ab->count() > 0; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Load-flow solver suite for radial distribution networks"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Key-value config file (flags override it)");

  RunSpec solve_spec;
  CLI::App* solve = app.add_subcommand("solve", "Run one method and emit its trajectory/solution");
  add_common_flags(solve, solve_spec);
  solve->add_option("--method", solve_spec.method, "Solver method")
      ->check(CLI::IsMember(kMethods));
  solve->add_option("--retraction", solve_spec.retraction, "Retraction")
      ->check(CLI::IsMember({"bfm", "qe1", "qe2"}));
  solve->add_option("--out-format", solve_spec.out_format, "Output artifact")
      ->check(CLI::IsMember({"csv", "json"}));

  RunSpec cmp_spec;
  std::vector<std::string> cmp_methods;
  std::string cmp_reference = "pan-qe";
  CLI::App* compare = app.add_subcommand("compare", "Run several methods and compare voltages");
  add_common_flags(compare, cmp_spec);
  compare->add_option("--methods", cmp_methods, "Methods to run")
      ->delimiter(',')
      ->check(CLI::IsMember(kMethods));
  compare->add_option("--reference", cmp_reference, "Reference method")
      ->check(CLI::IsMember(kMethods));

  RunSpec approx_spec;
  CLI::App* approx = app.add_subcommand("approx", "Approximant error report vs the exact solution");
  add_common_flags(approx, approx_spec);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInput;
  }

  try {
    if (solve->parsed()) return cmd_solve(solve_spec);
    if (compare->parsed()) return cmd_compare(cmp_spec, cmp_methods, cmp_reference);
    if (approx->parsed()) return cmd_approx(approx_spec);
  } catch (const lf::MaxIterExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNoConverge;
  } catch (const lf::Diverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNoConverge;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
