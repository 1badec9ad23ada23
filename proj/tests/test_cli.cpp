#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "cbp/cli.hpp"

namespace fs = std::filesystem;
using namespace cbp;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("cbp_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name, const std::string& content = "") const {
    fs::path p = path / name;
    if (!content.empty()) {
      std::ofstream out(p);
      out << content;
    }
    return p.string();
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const char* kChainFgt =
    "variables 3\n2 2 2\n"
    "factor 2 0 1\n2 1 1 2\n"
    "factor 2 1 2\n2 1 1 2\n";

}  // namespace

TEST_CASE("compress reports the chain ratios") {
  TempDir tmp;
  std::string in = tmp.file("chain.fgt", kChainFgt);
  std::string out = tmp.file("stats.json");
  std::string graph_out = tmp.file("graph.json");
  REQUIRE(cli::run({"compress", "--input", in, "--output", out, "--graph-out", graph_out}) == 0);
  json stats = json::parse(slurp(out));
  REQUIRE(stats["clusternodes"] == 2);
  REQUIRE(stats["clusterfactors"] == 1);
  REQUIRE(stats["node_ratio"].get<double>() == Catch::Approx(2.0 / 3.0));
  REQUIRE(stats["factor_ratio"].get<double>() == Catch::Approx(0.5));
  json graph = json::parse(slurp(graph_out));
  REQUIRE(graph["clusternodes"].size() == 2);
  REQUIRE(graph["edges"].size() == 2);
}

TEST_CASE("missing input exits with the input-error code") {
  REQUIRE(cli::run({"compress", "--input", "/nonexistent/file.fgt"}) == cli::kExitInput);
}

TEST_CASE("compress accepts DIMACS input") {
  TempDir tmp;
  // Two interchangeable clauses over interchangeable variables.
  std::string in = tmp.file("sym.cnf", "p cnf 4 2\n1 2 0\n3 4 0\n");
  std::string out = tmp.file("stats.json");
  REQUIRE(cli::run({"compress", "--input", in, "--output", out}) == 0);
  json stats = json::parse(slurp(out));
  REQUIRE(stats["variables"] == 4);
  REQUIRE(stats["clusternodes"] == 1);
  REQUIRE(stats["clusterfactors"] == 1);
}

TEST_CASE("marginals output is engine transparent") {
  TempDir tmp;
  std::string in = tmp.file("unary.fgt", "variables 1\n2\nfactor 1 0\n3 1\n");
  std::string out_bp = tmp.file("bp.json");
  std::string out_cbp = tmp.file("cbp.json");
  REQUIRE(cli::run({"marginals", "--input", in, "--engine", "bp", "--output", out_bp}) == 0);
  REQUIRE(cli::run({"marginals", "--input", in, "--engine", "cbp", "--output", out_cbp}) == 0);
  json b = json::parse(slurp(out_bp));
  REQUIRE(b["beliefs"]["0"][0].get<double>() == Catch::Approx(0.75));
  REQUIRE(b["beliefs"]["0"][1].get<double>() == Catch::Approx(0.25));
  REQUIRE(slurp(out_bp) == slurp(out_cbp));
}

TEST_CASE("marginals condition on an evidence file") {
  TempDir tmp;
  std::string in = tmp.file("chain.fgt", kChainFgt);
  std::string ev = tmp.file("ev.json", "{\"1\": 1}");
  std::string out_bp = tmp.file("bp.json"), out_cbp = tmp.file("cbp.json");
  REQUIRE(cli::run({"marginals", "--input", in, "--evidence", ev, "--engine", "bp", "--output",
                    out_bp}) == 0);
  REQUIRE(cli::run({"marginals", "--input", in, "--evidence", ev, "--engine", "cbp", "--output",
                    out_cbp}) == 0);
  json b = json::parse(slurp(out_bp));
  // Observed variable collapses to its observed state.
  REQUIRE(b["beliefs"]["1"][1].get<double>() == Catch::Approx(1.0));
  // End variables react identically to the middle observation.
  REQUIRE(b["beliefs"]["0"] == b["beliefs"]["2"]);
  json c = json::parse(slurp(out_cbp));
  for (const std::string v : {"0", "1", "2"})
    for (int s = 0; s < 2; ++s)
      REQUIRE(b["beliefs"][v][s].get<double>() ==
              Catch::Approx(c["beliefs"][v][s].get<double>()).margin(1e-9));
}

TEST_CASE("contradictory evidence exits with code 3") {
  TempDir tmp;
  std::string in = tmp.file("unary.fgt", "variables 1\n2\nfactor 1 0\n0 1\n");
  std::string ev = tmp.file("ev.json", "{\"0\": 0}");
  REQUIRE(cli::run({"marginals", "--input", in, "--evidence", ev}) == cli::kExitContradiction);
}

TEST_CASE("count produces the documented bound and confidence") {
  TempDir tmp;
  std::string in = tmp.file("or2.cnf", "p cnf 2 1\n1 2 0\n");
  std::string out = tmp.file("count.json");
  REQUIRE(cli::run({"count", "--input", in, "--alpha", "0", "--iterations", "20", "--seed", "11",
                    "--exact-threshold", "2", "--output", out}) == 0);
  json r = json::parse(slurp(out));
  REQUIRE(r["lower_bound"] == "3");
  REQUIRE(r["iterations"].size() == 20);

  std::string out7 = tmp.file("count7.json");
  REQUIRE(cli::run({"count", "--input", in, "--alpha", "1", "--iterations", "7", "--seed", "11",
                    "--output", out7}) == 0);
  json r7 = json::parse(slurp(out7));
  REQUIRE(r7["confidence"].get<double>() == Catch::Approx(0.9921875).margin(1e-12));
}

TEST_CASE("count is engine transparent and deterministic") {
  TempDir tmp;
  std::string in = tmp.file("f.cnf",
                            "p cnf 6 7\n1 2 3 0\n-1 4 0\n2 -4 5 0\n-2 6 0\n3 5 -6 0\n-3 -5 0\n"
                            "4 5 6 0\n");
  std::string a = tmp.file("a.json"), b = tmp.file("b.json"), c = tmp.file("c.json");
  REQUIRE(cli::run({"count", "--input", in, "--seed", "21", "--exact-threshold", "3",
                    "--engine", "bp", "--output", a}) == 0);
  REQUIRE(cli::run({"count", "--input", in, "--seed", "21", "--exact-threshold", "3",
                    "--engine", "bp", "--output", b}) == 0);
  REQUIRE(slurp(a) == slurp(b));
  REQUIRE(cli::run({"count", "--input", in, "--seed", "21", "--exact-threshold", "3",
                    "--engine", "cbp", "--output", c}) == 0);
  json ja = json::parse(slurp(a)), jc = json::parse(slurp(c));
  REQUIRE(ja["lower_bound"] == jc["lower_bound"]);
}

TEST_CASE("bench-dmln emits one CSV row per (seed, r) pair") {
  TempDir tmp;
  std::string out = tmp.file("bench.csv");
  REQUIRE(cli::run({"bench-dmln", "--people", "3", "--timesteps", "2", "--r-grid", "0,1",
                    "--seeds", "1,2", "--friends", "1", "--output", out}) == 0);
  std::string csv = slurp(out);
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 5);  // header + 4 rows
  std::string again = tmp.file("bench2.csv");
  REQUIRE(cli::run({"bench-dmln", "--people", "3", "--timesteps", "2", "--r-grid", "0,1",
                    "--seeds", "1,2", "--friends", "1", "--output", again}) == 0);
  REQUIRE(slurp(out) == slurp(again));
}

TEST_CASE("bench-dmln can dump the query beliefs") {
  TempDir tmp;
  std::string out = tmp.file("bench.csv");
  std::string beliefs = tmp.file("beliefs.json");
  REQUIRE(cli::run({"bench-dmln", "--people", "3", "--timesteps", "2", "--r-grid", "0", "--seeds",
                    "4", "--friends", "1", "--output", out, "--beliefs-out", beliefs}) == 0);
  json b = json::parse(slurp(beliefs));
  REQUIRE(b.is_array());
  REQUIRE(b.size() == 1);
  REQUIRE(b[0]["cancer"].size() == 6);  // one entry per Cancer atom
  for (const auto& entry : b[0]["cancer"])
    REQUIRE(std::abs(entry["p_ff"].get<double>() - entry["p_lfoff"].get<double>()) <= 1e-6);
}

TEST_CASE("bench-count emits the cumulative ratio series") {
  TempDir tmp;
  std::string in = tmp.file("f.cnf",
                            "p cnf 6 7\n1 2 3 0\n-1 4 0\n2 -4 5 0\n-2 6 0\n3 5 -6 0\n-3 -5 0\n"
                            "4 5 6 0\n");
  std::string out = tmp.file("series.csv");
  REQUIRE(cli::run({"bench-count", "--input", in, "--seed", "33", "--iterations", "2",
                    "--exact-threshold", "3", "--output", out}) == 0);
  std::string csv = slurp(out);
  REQUIRE(csv.find("ratio_messages") != std::string::npos);
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') >= 2);
}

TEST_CASE("missing seed is a usage error") {
  TempDir tmp;
  std::string in = tmp.file("or2.cnf", "p cnf 2 1\n1 2 0\n");
  REQUIRE(cli::run({"count", "--input", in}) == cli::kExitInput);
}

TEST_CASE("oversized clause is a budget error") {
  TempDir tmp;
  std::ostringstream wide;
  wide << "p cnf 30 1\n";
  for (int i = 1; i <= 30; ++i) wide << i << " ";
  wide << "0\n";
  std::string in = tmp.file("wide.cnf", wide.str());
  REQUIRE(cli::run({"marginals", "--input", in}) == cli::kExitBudget);
}

TEST_CASE("unknown subcommand fails with usage error") {
  REQUIRE(cli::run({"frobnicate"}) == cli::kExitInput);
}
