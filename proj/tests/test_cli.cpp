#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#ifndef MACX_BIN
#error "MACX_BIN must be defined as the path of the command-line binary"
#endif

using json = nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::filesystem::path scratch() {
  static const std::filesystem::path dir = [] {
    std::filesystem::path p = std::filesystem::current_path() / "cli_test_tmp";
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
  }();
  return dir;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fixture(const std::string& name, const std::string& text) {
  const std::filesystem::path path = scratch() / name;
  std::ofstream(path, std::ios::binary) << text;
  return path.string();
}

// Runs the binary through the shell, capturing exit code, stdout and stderr.
// `env` is an optional VAR=value prefix.
RunResult run(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  const std::filesystem::path out_path = scratch() / ("out" + std::to_string(counter));
  const std::filesystem::path err_path = scratch() / ("err" + std::to_string(counter));
  ++counter;
  std::string cmd;
  if (!env.empty()) cmd += env + " ";
  cmd += "'";
  cmd += MACX_BIN;
  cmd += "' " + args + " >'" + out_path.string() + "' 2>'" + err_path.string() + "'";
  const int status = std::system(cmd.c_str());
  RunResult res;
  if (status != -1 && WIFEXITED(status)) res.exit_code = WEXITSTATUS(status);
  res.out = slurp(out_path);
  res.err = slurp(err_path);
  return res;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

std::string adder_channel() {
  static const std::string path = fixture("adder.json", R"({
    "x_size": 2, "y_size": 2, "z_size": 3,
    "w": [[[1, 0, 0], [0, 1, 0]], [[0, 1, 0], [0, 0, 1]]]
  })");
  return path;
}

std::string or_channel() {
  static const std::string path = fixture("or.json", R"({
    "x_size": 2, "y_size": 2, "z_size": 2,
    "w": [[[1, 0], [0, 1]], [[0, 1], [0, 1]]]
  })");
  return path;
}

// Binary symmetric noise on the XOR of the inputs (crossover 0.18).
std::string sym_channel() {
  static const std::string path = fixture("sym.json", R"({
    "x_size": 2, "y_size": 2, "z_size": 2,
    "w": [[[0.82, 0.18], [0.18, 0.82]], [[0.18, 0.82], [0.82, 0.18]]]
  })");
  return path;
}

// First alphabet has three symbols: trips the lattice-oracle size guard.
std::string wide_channel() {
  static const std::string path = fixture("wide.json", R"({
    "x_size": 3, "y_size": 2, "z_size": 2,
    "w": [[[1, 0], [0, 1]], [[0, 1], [1, 0]], [[0.5, 0.5], [0.5, 0.5]]]
  })");
  return path;
}

// Pairwise XOR sums cluster on four coordinates, so on the noisy XOR channel
// every pair's decode probability stays below (1 - 0.05) / 2.
std::string cluster_code() {
  static const std::string path = fixture("code_cluster.json", R"({
    "n": 6,
    "u": [[0, 0, 0, 0, 0, 0], [0, 0, 0, 0, 0, 1],
          [0, 0, 0, 0, 1, 0], [0, 0, 0, 0, 1, 1]],
    "v": [[0, 0, 0, 0, 0, 0], [0, 0, 0, 1, 0, 0],
          [0, 0, 1, 0, 0, 0], [0, 0, 1, 1, 0, 0]]
  })");
  return path;
}

}  // namespace

TEST_CASE("help text and argument dispatch") {
  const RunResult help = run("--help");
  CHECK(help.exit_code == 0);
  CHECK(contains(help.out, "capacity"));
  CHECK(contains(help.out, "exponent"));
  CHECK(contains(help.out, "surface"));
  CHECK(contains(help.out, "simulate"));
  CHECK(contains(help.out, "wring"));
  CHECK(contains(help.out, "MACX_THREADS"));

  CHECK(run("").exit_code == 2);           // subcommand required
  CHECK(run("frobnicate").exit_code == 2); // unknown subcommand
  CHECK(run("capacity --channel " + adder_channel() + " --rates 0.7").exit_code == 2);
}

TEST_CASE("capacity reports membership with exit codes 0, 3 and 2") {
  const RunResult inside =
      run("capacity --channel " + adder_channel() + " --rates 0.7 0.7");
  CHECK(inside.exit_code == 0);
  const json j = json::parse(inside.out);
  CHECK(j.at("command") == "capacity");
  CHECK(j.at("inside") == true);
  CHECK(j.at("slack").get<double>() > 0.05);
  CHECK(j.at("witness_rates").contains("i12"));
  CHECK(j.at("witness").at("q_weights").is_array());
  CHECK(j.at("witness_marginal_l1").get<double>() >= 0.0);

  const RunResult origin =
      run("capacity --channel " + adder_channel() + " --rates 0 0");
  CHECK(origin.exit_code == 0);
  CHECK(json::parse(origin.out).at("inside") == true);

  const RunResult outside =
      run("capacity --channel " + or_channel() + " --rates 0.7 0.7");
  CHECK(outside.exit_code == 3);
  const json jo = json::parse(outside.out);
  CHECK(jo.at("inside") == false);
  CHECK(jo.at("slack").get<double>() < 0.0);

  const RunResult missing = run("capacity --channel nope.json --rates 0.1 0.1");
  CHECK(missing.exit_code == 2);
  CHECK(contains(missing.err, "cannot open"));

  const std::string bad = fixture("bad_channel.json", R"({
    "x_size": 2, "y_size": 2, "z_size": 2,
    "w": [[[1, 0], [0, 1]], [[1, 0, 0], [0, 1]]]
  })");
  const RunResult malformed = run("capacity --channel " + bad + " --rates 0.1 0.1");
  CHECK(malformed.exit_code == 2);
  CHECK(contains(malformed.err, "w[1][0]"));
}

TEST_CASE("exponent evaluates all three methods and guards the oracle") {
  // Inside capacity the search-based exponent is exactly zero.
  const RunResult zero = run("exponent --channel " + sym_channel() +
                             " --rates 0.25 0.25 --method sphere_packing");
  CHECK(zero.exit_code == 0);
  const json jz = json::parse(zero.out);
  CHECK(jz.at("method") == "sphere_packing");
  CHECK(jz.at("value").get<double>() == 0.0);
  CHECK(jz.at("infinite") == false);
  CHECK(jz.at("converged") == true);
  CHECK(jz.at("witness_v").size() == 2);
  CHECK(jz.at("witness_v").at(0).at(0).size() == 2);
  CHECK(jz.at("witness_p").size() == 2);

  // Below capacity all methods agree to grid accuracy (values frozen from
  // seed-0 runs of this binary and cross-checked against each other here).
  const RunResult sp = run("exponent --channel " + sym_channel() +
                           " --rates 0.1 0.1 --method sphere_packing");
  const RunResult har = run("exponent --channel " + sym_channel() +
                            " --rates 0.1 0.1 --method haroutunian");
  const RunResult oracle = run("exponent --channel " + sym_channel() +
                               " --rates 0.1 0.1 --method grid_oracle --resolution 16");
  CHECK(sp.exit_code == 0);
  CHECK(har.exit_code == 0);
  CHECK(oracle.exit_code == 0);
  const double sp_v = json::parse(sp.out).at("value").get<double>();
  const double har_v = json::parse(har.out).at("value").get<double>();
  const double or_v = json::parse(oracle.out).at("value").get<double>();
  CHECK(sp_v == 0.0184025708223);
  CHECK(har_v == 0.0179755441235);
  CHECK(or_v == 0.0219328114915);
  CHECK(std::abs(sp_v - or_v) < 5e-2);
  CHECK(std::abs(har_v - or_v) < 5e-2);
  CHECK(json::parse(oracle.out).at("method") == "grid_oracle");

  const RunResult wide = run("exponent --channel " + wide_channel() +
                             " --rates 0.1 0.1 --method grid_oracle");
  CHECK(wide.exit_code == 2);
  CHECK(contains(wide.err, "lattice oracle"));

  const RunResult badm = run("exponent --channel " + sym_channel() +
                             " --rates 0.1 0.1 --method newton");
  CHECK(badm.exit_code == 2);
  CHECK(contains(badm.err, "--method"));
}

TEST_CASE("surface emits deterministic monotone CSV") {
  const std::string args = "surface --channel " + sym_channel() +
                           " --method haroutunian --r1 0.05:0.45:3 --r2 0.05:0.45:3";
  const RunResult first = run(args);
  CHECK(first.exit_code == 0);
  CHECK(first.out ==
        "r1,r2,value,method,converged\n"
        "0.05,0.05,0.077775491,haroutunian,true\n"
        "0.05,0.25,0.000275667358,haroutunian,true\n"
        "0.05,0.45,0,haroutunian,true\n"
        "0.25,0.05,0,haroutunian,true\n"
        "0.25,0.25,0,haroutunian,true\n"
        "0.25,0.45,0,haroutunian,true\n"
        "0.45,0.05,0,haroutunian,true\n"
        "0.45,0.25,0,haroutunian,true\n"
        "0.45,0.45,0,haroutunian,true\n");

  // Same seed and config: byte-identical bytes, with or without a thread cap.
  CHECK(run(args).out == first.out);
  CHECK(run(args, "MACX_THREADS=2").out == first.out);

  // Values are nonincreasing along rows and columns of the rate grid.
  std::vector<double> vals;
  std::istringstream lines(first.out);
  std::string line;
  std::getline(lines, line);  // header
  while (std::getline(lines, line)) {
    double r1 = 0.0, r2 = 0.0, v = 0.0;
    REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf", &r1, &r2, &v) == 3);
    vals.push_back(v);
  }
  REQUIRE(vals.size() == 9);
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 2; ++k) {
      CHECK(vals[3 * i + k] >= vals[3 * i + k + 1]);  // along r2
      CHECK(vals[3 * k + i] >= vals[3 * (k + 1) + i]);  // along r1
    }
  }

  const RunResult single = run("surface --channel " + sym_channel() +
                               " --method sphere_packing --r1 0:0:1 --r2 0:0:1");
  CHECK(single.exit_code == 0);
  CHECK(single.out ==
        "r1,r2,value,method,converged\n"
        "0,0,0.380117687,sphere_packing,true\n");
}

TEST_CASE("surface rejects malformed grids, oracle method and bad env caps") {
  const std::string base = "surface --channel " + sym_channel() + " ";
  const RunResult inverted = run(base + "--r1 0.4:0.1:3 --r2 0:0:1");
  CHECK(inverted.exit_code == 2);
  CHECK(contains(inverted.err, "inverted"));

  const RunResult onestep = run(base + "--r1 0:0.5:1 --r2 0:0:1");
  CHECK(onestep.exit_code == 2);
  CHECK(contains(onestep.err, "start == stop"));

  CHECK(run(base + "--r1 0:0.5 --r2 0:0:1").exit_code == 2);
  CHECK(run(base + "--r1 0:0:0 --r2 0:0:1").exit_code == 2);

  // grid_oracle parses as a method name but the surface evaluator refuses it.
  const RunResult oracle = run(base + "--r1 0:0:1 --r2 0:0:1 --method grid_oracle");
  CHECK(oracle.exit_code == 2);
  CHECK(contains(oracle.err, "search-based methods"));

  const RunResult badenv = run(base + "--r1 0:0:1 --r2 0:0:1", "MACX_THREADS=abc");
  CHECK(badenv.exit_code == 2);
  CHECK(contains(badenv.err, "MACX_THREADS"));
}

TEST_CASE("simulate analyzes a code file end to end") {
  const std::string code = fixture("code_single.json",
                                   R"({"n": 2, "u": [[0, 1]], "v": [[1, 0]]})");
  const RunResult res = run("simulate --channel " + adder_channel() + " --code " + code);
  CHECK(res.exit_code == 0);
  const json j = json::parse(res.out);
  CHECK(j.at("command") == "simulate");
  CHECK(j.at("code").at("n") == 2);
  CHECK(j.at("code").at("m") == 1);
  CHECK(j.at("code").at("n_codewords") == 1);
  CHECK(j.at("stats").at("max_error").get<double>() == 0.0);
  CHECK(j.at("dominant").at("pairs") == json::parse("[[0, 0]]"));
  CHECK(j.at("strong_converse").at("hypothesis_met") == true);
  CHECK(j.at("strong_converse").at("inside") == true);
  CHECK_FALSE(j.contains("sphere_packing"));  // no --rates requested
}

TEST_CASE("simulate generator run is frozen and byte-reproducible") {
  const std::string args = "simulate --channel " + sym_channel() +
                           " --gen-counts 2,1,1,2 --gen-m 4 --gen-codewords 4" +
                           " --seed 11 --lambda 0.9 --rates 0.25 0.25 --delta 0.05";
  const RunResult res = run(args);
  CHECK(res.exit_code == 0);
  const json j = json::parse(res.out);
  CHECK(j.at("code").at("n") == 6);
  CHECK(j.at("code").at("rates").at("r1").get<double>() == 0.333333333333);
  CHECK(j.at("stats").at("avg_error").get<double>() == 0.8319);
  CHECK(j.at("stats").at("max_error").get<double>() == 1.0);
  CHECK(j.at("stats").at("per_pair_error").at(0) ==
        json::parse("[0.094476875904, 0.3315214368, 0.354387770496, 0.5300139168]"));
  CHECK(j.at("dominant").at("counts") == json::parse("[2, 1, 1, 2]"));
  CHECK(j.at("dominant").at("pairs") == json::parse("[[0, 0], [0, 1], [0, 2], [0, 3]]"));
  CHECK(j.at("strong_converse").at("inside") == true);
  CHECK(j.at("strong_converse").at("slack").get<double>() == 173.437161421);
  CHECK(j.at("strong_converse").at("epsilon").get<double>() == 173.816988124);
  CHECK(j.at("sphere_packing").at("exponent").get<double>() == 0.0);
  CHECK(j.at("sphere_packing").at("bound").get<double>() == 0.5);
  CHECK(j.at("sphere_packing").at("max_error").get<double>() == 1.0);
  CHECK(j.at("sphere_packing").at("pass") == true);

  CHECK(run(args).out == res.out);
}

TEST_CASE("simulate guards rates, sizes and generator flags") {
  // Code rates 1/3 fall short of 0.3 + 0.05.
  const RunResult unmet = run("simulate --channel " + sym_channel() +
                              " --gen-counts 2,1,1,2 --gen-m 4 --gen-codewords 4" +
                              " --seed 11 --rates 0.3 0.3");
  CHECK(unmet.exit_code == 3);
  CHECK(contains(unmet.err, "precondition unmet"));
  CHECK(contains(unmet.err, "(0.35, 0.35)"));

  // 3^15 output blocks exceed the enumeration guard.
  std::string big = R"({"n": 15, "u": [[)";
  for (int t = 0; t < 15; ++t) big += t ? ",0" : "0";
  big += R"(]], "v": [[)";
  for (int t = 0; t < 15; ++t) big += t ? ",0" : "0";
  big += "]]}";
  const std::string big_path = fixture("code_big.json", big);
  const RunResult guarded =
      run("simulate --channel " + adder_channel() + " --code " + big_path);
  CHECK(guarded.exit_code == 2);
  CHECK(contains(guarded.err, "enumeration guard"));

  const std::string base = "simulate --channel " + sym_channel() + " ";
  const RunResult both = run(base + "--code " + cluster_code() + " --gen-counts 2,1,1,2");
  CHECK(both.exit_code == 2);
  CHECK(contains(both.err, "mutually exclusive"));

  const RunResult none = run(base);
  CHECK(none.exit_code == 2);
  CHECK(contains(none.err, "need --code"));

  const RunResult partial = run(base + "--gen-counts 2,1,1,2");
  CHECK(partial.exit_code == 2);
  CHECK(contains(partial.err, "generator needs"));

  const RunResult junk = run(base + "--gen-counts 2,1,x,2 --gen-m 2 --gen-codewords 2");
  CHECK(junk.exit_code == 2);
  CHECK(contains(junk.err, "comma-separated"));

  const RunResult short_list = run(base + "--gen-counts 2,1,1 --gen-m 2 --gen-codewords 2");
  CHECK(short_list.exit_code == 2);
  CHECK(contains(short_list.err, "one entry per input-symbol pair"));
}

TEST_CASE("wring run on a generated product-type code is frozen") {
  const RunResult res = run("wring --channel " + sym_channel() +
                            " --gen-counts 2,2,2,2 --gen-m 4 --gen-codewords 4" +
                            " --seed 7 --lambda 0.9");
  CHECK(res.exit_code == 0);
  const json j = json::parse(res.out);
  CHECK(j.at("command") == "wring");
  // delta defaults to n^{-1/2} with n = 8.
  CHECK(j.at("delta").get<double>() == 0.353553390593);
  CHECK(j.at("sigma").get<double>() == 11.7333372885);
  CHECK(j.at("k") == 0);
  CHECK(j.at("coords").empty());
  CHECK(j.at("dominant").at("pairs").size() == 12);
  CHECK(j.at("subcode") == j.at("dominant").at("pairs"));
  CHECK(j.at("retained_fraction").get<double>() == 1.0);
  CHECK(j.at("floor_met") == true);
  CHECK(j.at("cap_hit") == false);
  CHECK(j.at("emptied") == false);
  CHECK(j.at("max_letter_mi").get<double>() == 0.00282568005715);
  CHECK(j.at("independence_gap").get<double>() == 0.0555555555556);
  CHECK(j.at("gap_bound").get<double>() == 1.189207115);
  CHECK(j.at("independence_gap").get<double>() <= j.at("gap_bound").get<double>());
  CHECK(j.at("lemma1").at("lhs").get<double>() == 0.292481250361);
  CHECK(j.at("lemma1").at("rhs").get<double>() == 16.9276275192);
  CHECK(j.at("lemma1").at("pass") == true);
}

TEST_CASE("wring exits 3 when no codeword pair qualifies and 2 on bad lambda") {
  const RunResult absent = run("wring --channel " + sym_channel() + " --code " +
                               cluster_code() + " --lambda 0.05");
  CHECK(absent.exit_code == 3);
  CHECK(contains(absent.err, "no dominant type"));

  const RunResult bad = run("wring --channel " + sym_channel() + " --code " +
                            cluster_code() + " --lambda 1.2");
  CHECK(bad.exit_code == 2);

  const RunResult missing = run("wring --channel " + sym_channel() + " --code " +
                                cluster_code());
  CHECK(missing.exit_code == 2);  // --lambda is required
}

TEST_CASE("--out writes the report to a file instead of stdout") {
  const std::filesystem::path out = scratch() / "verdict.json";
  const RunResult res = run("capacity --channel " + adder_channel() +
                            " --rates 0.7 0.7 --out " + out.string());
  CHECK(res.exit_code == 0);
  CHECK(res.out.empty());
  CHECK(json::parse(slurp(out)).at("inside") == true);

  const std::filesystem::path csv = scratch() / "surface.csv";
  const RunResult surf = run("surface --channel " + sym_channel() +
                             " --method sphere_packing --r1 0:0:1 --r2 0:0:1 --out " +
                             csv.string());
  CHECK(surf.exit_code == 0);
  CHECK(surf.out.empty());
  CHECK(slurp(csv) ==
        "r1,r2,value,method,converged\n"
        "0,0,0.380117687,sphere_packing,true\n");
}
