#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

std::string data(const std::string& name) { return std::string(LF_DATA_DIR) + "/" + name; }

fs::path tmp_file(const std::string& name) {
  return fs::temp_directory_path() / ("lf_cli_" + name);
}

/// Runs the CLI with `args`, discarding stderr; returns the process exit code.
int run(const std::string& args) {
  const std::string cmd = std::string(LF_BIN) + " " + args + " 2>/dev/null >/dev/null";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) out.push_back(line);
  return out;
}

/// Strips the trailing time_ms column from every data row of a trajectory CSV.
std::string drop_times(const std::string& csv) {
  std::string out;
  for (const auto& line : lines_of(csv)) {
    const size_t cut = line.rfind(',');
    out += line.substr(0, cut);
    out += '\n';
  }
  return out;
}

}  // namespace

TEST_CASE("solve: trajectory CSV header and row count on case33bw") {
  const fs::path out = tmp_file("traj.csv");
  const int rc = run("solve --network " + data("case33bw.m") + " --method pan-qe --out " +
                     out.string());
  CHECK(rc == 0);
  const auto rows = lines_of(slurp(out));
  REQUIRE(rows.size() == 4);  // header + one row per iteration
  CHECK(rows[0] == "iter,f,grad_norm,max_dv,step,time_ms");
  CHECK(rows[1].substr(0, 2) == "1,");
  CHECK(rows[3].substr(0, 2) == "3,");
  fs::remove(out);
}

TEST_CASE("solve: --load-scale changes the iteration count") {
  const fs::path out = tmp_file("traj_scaled.csv");
  const int rc = run("solve --network " + data("case33bw.m") +
                     " --method pan-qe --load-scale 3.5 --out " + out.string());
  CHECK(rc == 0);
  CHECK(lines_of(slurp(out)).size() == 6);  // header + 5 iterations
  fs::remove(out);
}

TEST_CASE("solve: trajectory output is deterministic apart from timings") {
  const fs::path a = tmp_file("det_a.csv"), b = tmp_file("det_b.csv");
  const std::string base =
      "solve --network " + data("case69.m") + " --method newton-qe --init flat --out ";
  REQUIRE(run(base + a.string()) == 0);
  REQUIRE(run(base + b.string()) == 0);
  CHECK(drop_times(slurp(a)) == drop_times(slurp(b)));
  fs::remove(a);
  fs::remove(b);
}

TEST_CASE("solve: JSON solution shape") {
  const fs::path out = tmp_file("sol.json");
  const int rc = run("solve --network " + data("case33bw.m") +
                     " --method nr --out-format json --out " + out.string());
  CHECK(rc == 0);
  const nlohmann::json doc = nlohmann::json::parse(slurp(out));
  CHECK(doc.at("converged").get<bool>());
  CHECK(doc.at("iterations").get<int>() >= 1);
  REQUIRE(doc.at("nodes").size() == 33);
  REQUIRE(doc.at("lines").size() == 32);
  const auto& slack = doc["nodes"][0];
  CHECK(slack.at("id") == 0);
  CHECK(slack.at("vm").get<double>() == 1.0);
  CHECK(slack.at("va").get<double>() == 0.0);
  for (const char* key : {"id", "p", "q", "l"}) CHECK(doc["lines"][0].contains(key));
  fs::remove(out);
}

TEST_CASE("solve: atomic output leaves no temp file behind") {
  const fs::path out = tmp_file("atomic.csv");
  REQUIRE(run("solve --network " + data("case22.m") + " --method bfs --out " + out.string()) ==
          0);
  CHECK(fs::exists(out));
  CHECK_FALSE(fs::exists(out.string() + ".tmp"));
  fs::remove(out);
}

TEST_CASE("solve: lindistflow emits an empty trajectory") {
  const fs::path out = tmp_file("ldf.csv");
  REQUIRE(run("solve --network " + data("case33bw.m") + " --method lindistflow --out " +
              out.string()) == 0);
  CHECK(lines_of(slurp(out)).size() == 1);  // header only
  fs::remove(out);
}

TEST_CASE("exit codes: bad input is 1, disagreement/non-convergence is 2") {
  CHECK(run("solve --network " + data("case33bw.m") + " --method bogus") == 1);
  CHECK(run("solve --network /nonexistent.m --method pan-qe") == 1);
  CHECK(run("solve --network " + data("case33bw.m") + " --method pan-bfm --retraction qe1") ==
        1);  // incompatible manifold/retraction pair
  // LinDistFlow voltages differ from the reference by far more than 1e-5
  CHECK(run("compare --network " + data("case33bw.m") + " --methods lindistflow") == 2);
}

TEST_CASE("compare: agreeing methods exit 0 with one CSV row each") {
  const fs::path out = tmp_file("cmp.csv");
  const int rc = run("compare --network " + data("case69.m") +
                     " --methods pan-bfm,newton-qe,nr,bfs --out " + out.string());
  CHECK(rc == 0);
  const auto rows = lines_of(slurp(out));
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == "method,iterations,converged,max_dv_vs_pan-qe");
  CHECK(rows[1].substr(0, 8) == "pan-bfm,");
  for (size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].find(",1,") != std::string::npos);
  fs::remove(out);
}

TEST_CASE("approx: per-node error table with summary rows") {
  const fs::path out = tmp_file("approx.csv");
  REQUIRE(run("approx --network " + data("case33bw.m") + " --out " + out.string()) == 0);
  const auto rows = lines_of(slurp(out));
  REQUIRE(rows.size() == 1 + 32 + 2);  // header, one row per load node, mean, max
  CHECK(rows[0] == "node,lindistflow_err,approx1_err");
  CHECK(rows[33].substr(0, 5) == "mean,");
  CHECK(rows[34].substr(0, 4) == "max,");
  // approx1 improves on LinDistFlow in the mean by the documented margin
  std::istringstream mean_row(rows[33].substr(5));
  double ldf = 0, ap = 0;
  char comma;
  mean_row >> ldf >> comma >> ap;
  CHECK(ap < ldf * 0.05);
  fs::remove(out);
}
