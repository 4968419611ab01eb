// ============================================================================
// acceptance.cpp
// End-to-end acceptance harness for the multiple-access channel toolkit.
//
// Eight numbered checks, one [PASS]/[FAIL] line each; failing checks print
// indented detail lines so a red run is diagnosable from the log alone.
// Exit code is the number of failed checks.
//
// The checks cross-validate the search solvers against the exhaustive
// lattice evaluator, probe structural properties (zero outside capacity,
// product-input ordering, monotonicity in rates, finite-blocklength
// convergence), verify the maximal-error lower bound and the converse
// pipeline on a roster of seeded constant-composition codes, and rerun the
// command-line binary (path in MACX_BIN) to pin determinism and the frozen
// report examples.
// ============================================================================

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "macx/codesim.hpp"
#include "macx/exponents.hpp"
#include "macx/mac.hpp"
#include "macx/prob.hpp"
#include "channels.hpp"

#ifndef MACX_BIN
#error "MACX_BIN must be defined as the path of the command-line binary"
#endif

using json = nlohmann::json;
using namespace macx;

namespace {

constexpr double kInf = 1e99;  // stand-in so infinite values order correctly

struct NamedChannel {
  const char* name;
  Mac w;
};

// The five-channel suite every solver-level check runs on.
std::vector<NamedChannel> suite() {
  return {
      {"or_adder", fixtures::or_adder()},
      {"sym_noise", fixtures::sym_noise()},
      {"constant_rows", fixtures::constant_rows()},
      {"identity_x", fixtures::identity_x()},
      {"random42", fixtures::random_channel(42, 2, 2, 2)},
  };
}

const RatePair kSuiteRates[] = {{0.1, 0.1}, {0.25, 0.25}, {0.5, 0.5}};

std::string fmt_rate(RatePair r) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "(%g, %g)", r.r1, r.r2);
  return buf;
}

std::string fmt_val(const ExponentResult& e) {
  if (e.infinite) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", e.value);
  return buf;
}

double order_key(bool infinite, double value) { return infinite ? kInf : value; }

// ---------------------------------------------------------------------------
// 1. Both search solvers against the exhaustive lattice at resolution 32.

bool check_oracle_agreement(std::vector<std::string>& notes) {
  const auto t0 = std::chrono::steady_clock::now();
  for (const NamedChannel& c : suite()) {
    std::vector<OracleQuery> qs;
    for (const RatePair& r : kSuiteRates) qs.push_back({r, 0.0});
    const auto oh = exponent_grid_oracle(c.w, ExponentMethod::haroutunian, qs, 32);
    const auto os = exponent_grid_oracle(c.w, ExponentMethod::sphere_packing, qs, 32);
    for (int k = 0; k < 3; ++k) {
      const ExponentResult h = haroutunian_exponent(c.w, kSuiteRates[k]);
      const ExponentResult s = sphere_packing_exponent(c.w, kSuiteRates[k]);
      const auto compare = [&](const char* method, const ExponentResult& solver,
                               const ExponentResult& oracle) {
        const bool ok = solver.infinite == oracle.infinite &&
                        (solver.infinite || std::abs(solver.value - oracle.value) <= 1e-2);
        if (!ok)
          notes.push_back(std::string(c.name) + " " + fmt_rate(kSuiteRates[k]) + " " +
                          method + ": solver " + fmt_val(solver) + " vs lattice " +
                          fmt_val(oracle));
      };
      compare("haroutunian", h, oh[k]);
      compare("sphere_packing", s, os[k]);
    }
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (elapsed > 300.0) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "runtime %.1fs exceeds the 300s budget", elapsed);
    notes.push_back(buf);
  }
  return notes.empty();
}

// ---------------------------------------------------------------------------
// 2. Outside the capacity region both exponents are exactly zero and the
//    witness test channel echoes the channel under test.

bool check_zero_outside(std::vector<std::string>& notes) {
  std::vector<RatePair> rates(std::begin(kSuiteRates), std::end(kSuiteRates));
  rates.push_back({1.2, 1.2});  // outside every 2x2x2 region: sum capacity <= 1
  int outside_points = 0;
  for (const NamedChannel& c : suite()) {
    for (const RatePair& r : rates) {
      if (capacity_membership(c.w, r).inside) continue;
      ++outside_points;
      for (const ExponentResult& e :
           {haroutunian_exponent(c.w, r), sphere_packing_exponent(c.w, r)}) {
        const bool zero = !e.infinite && e.value == 0.0;
        const bool echo = e.witness_v.nx == c.w.nx && e.witness_v.ny == c.w.ny &&
                          e.witness_v.nz == c.w.nz && e.witness_v.w == c.w.w;
        if (!zero || !echo)
          notes.push_back(std::string(c.name) + " " + fmt_rate(r) + ": value " +
                          fmt_val(e) + (echo ? "" : ", witness differs from channel"));
      }
    }
  }
  if (outside_points == 0) notes.push_back("no rate point fell outside any region");
  return notes.empty();
}

// ---------------------------------------------------------------------------
// 3. With the outer maximization restricted to product input laws, the
//    pentagon-region exponent never drops below the single-letter form.

bool check_product_ordering(std::vector<std::string>& notes) {
  SearchOptions opts;
  opts.product_inputs = true;
  for (const NamedChannel& c : suite()) {
    for (const RatePair& r : kSuiteRates) {
      const ExponentResult hp = haroutunian_exponent(c.w, r, opts);
      const ExponentResult sp = sphere_packing_exponent(c.w, r, opts);
      const bool ok = sp.infinite || (!hp.infinite && sp.value >= hp.value - 1e-6);
      if (!ok)
        notes.push_back(std::string(c.name) + " " + fmt_rate(r) + ": sphere_packing " +
                        fmt_val(sp) + " < haroutunian " + fmt_val(hp));
    }
  }
  return notes.empty();
}

// ---------------------------------------------------------------------------
// 4. On an 8x8 rate grid the lattice values are nonincreasing in each rate
//    coordinate exactly; the search solvers stay within 1e-3 of monotone.

bool check_monotonicity(std::vector<std::string>& notes) {
  const NamedChannel chans[] = {
      {"sym_noise", fixtures::sym_noise()},
      {"random42", fixtures::random_channel(42, 2, 2, 2)},
  };
  std::vector<double> grid;
  for (int i = 0; i < 8; ++i) grid.push_back(0.02 + 0.04 * i);

  for (const NamedChannel& c : chans) {
    for (ExponentMethod m : {ExponentMethod::haroutunian, ExponentMethod::sphere_packing}) {
      const char* mname = m == ExponentMethod::haroutunian ? "haroutunian" : "sphere_packing";

      std::vector<OracleQuery> qs;
      for (double r1 : grid)
        for (double r2 : grid) qs.push_back({{r1, r2}, 0.0});
      const auto lattice = exponent_grid_oracle(c.w, m, qs, 16);
      const auto lv = [&](int i, int j) {
        const ExponentResult& e = lattice[8 * i + j];
        return order_key(e.infinite, e.value);
      };
      const auto pts = exponent_surface(c.w, m, grid, grid);
      const auto sv = [&](int i, int j) {
        const SurfacePoint& p = pts[8 * i + j];
        return order_key(p.infinite, p.value);
      };
      for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 7; ++j) {
          if (lv(i, j) < lv(i, j + 1) || lv(j, i) < lv(j + 1, i)) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "%s %s lattice not monotone near cell (%d, %d)",
                          c.name, mname, i, j);
            notes.push_back(buf);
          }
          if (sv(i, j) + 1e-3 < sv(i, j + 1) || sv(j, i) + 1e-3 < sv(j + 1, i)) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "%s %s solver surface rises past 1e-3 at (%d, %d)",
                          c.name, mname, i, j);
            notes.push_back(buf);
          }
        }
      }
    }
  }
  return notes.empty();
}

// ---------------------------------------------------------------------------
// 5. Maximal-error lower bound on a roster of seeded constant-composition
//    codes, with exact error probabilities from exhaustive enumeration.

struct RosterEntry {
  int channel;  // index into roster_channels()
  std::array<std::int64_t, 4> counts;
  int m;
  int n_codewords;
  RatePair r;
  double delta;
};

std::vector<NamedChannel> roster_channels() {
  return {
      {"sym_noise", fixtures::sym_noise()},
      {"noisy_or", fixtures::noisy_or()},
      {"xor_bsc", fixtures::xor_bsc()},
      {"constant_rows", fixtures::constant_rows()},
      {"random42", fixtures::random_channel(42, 2, 2, 2)},
      {"or_adder", fixtures::or_adder()},
  };
}

// Four code shapes per channel. Every entry satisfies the bound's rate
// precondition: log2(m)/n and log2(n_codewords)/n are at least r + delta.
// The xor_bsc entry with m = n_codewords = 2 runs at rates (0.05, 0.05):
// at (0.1, 0.1) the asymptotic bound is not yet in force at n = 6 (the
// finite-blocklength enlargement is what check 7 quantifies).
std::vector<RosterEntry> roster() {
  std::vector<RosterEntry> out;
  for (int c = 0; c < 6; ++c) {
    out.push_back({c, {2, 1, 1, 2}, 4, 4, {0.2, 0.2}, 0.1});
    out.push_back({c, {1, 1, 1, 1}, 4, 4, {0.3, 0.3}, 0.1});
    out.push_back({c, {2, 2, 1, 1}, 3, 3, {0.2, 0.2}, 0.05});
    if (c == 2)
      out.push_back({c, {1, 2, 2, 1}, 2, 2, {0.05, 0.05}, 0.05});
    else
      out.push_back({c, {1, 2, 2, 1}, 2, 2, {0.1, 0.1}, 0.05});
  }
  return out;
}

struct RosterRun {
  std::string label;
  Mac w;
  MultiUserCode code;
  CodeStats stats;
};

bool check_error_bound(std::vector<RosterRun>& runs, std::vector<std::string>& notes) {
  const std::vector<NamedChannel> chans = roster_channels();
  std::uint64_t seed = 100;
  for (const RosterEntry& entry : roster()) {
    const NamedChannel& c = chans[entry.channel];
    char label[96];
    std::snprintf(label, sizeof label, "%s counts{%lld,%lld,%lld,%lld} m%d n%d seed%llu",
                  c.name, (long long)entry.counts[0], (long long)entry.counts[1],
                  (long long)entry.counts[2], (long long)entry.counts[3], entry.m,
                  entry.n_codewords, (unsigned long long)seed);

    const EmpiricalType p({2, 2}, {entry.counts.begin(), entry.counts.end()});
    MultiUserCode code = constant_composition_code(p, entry.m, entry.n_codewords, seed);
    ++seed;
    code.decode = ml_decode(c.w, code.u, code.v);
    const CodeStats stats = error_probabilities(c.w, code);

    const ExponentResult e = sphere_packing_exponent(c.w, entry.r);
    const SpherePackingReport rep = sphere_packing_verify(c.w, code, entry.r, entry.delta, e);
    if (!rep.pass) {
      char buf[192];
      std::snprintf(buf, sizeof buf, "%s: exact max error %.6f below bound %.6f", label,
                    rep.max_error, rep.bound);
      notes.push_back(buf);
    }
    runs.push_back({label, c.w, std::move(code), stats});
  }
  return notes.empty();
}

// ---------------------------------------------------------------------------
// 6. Converse pipeline on every roster subcode: information budget, wringing
//    with delta = n^{-1/2}, single-user checks on each row and column, and
//    the averaged-letter identity of constant-composition pair sets.

bool check_converse_pipeline(const std::vector<RosterRun>& runs,
                             std::vector<std::string>& notes) {
  const double lambda = 0.9;
  for (const RosterRun& run : runs) {
    const auto fail = [&](const std::string& what) { notes.push_back(run.label + ": " + what); };

    const std::optional<DominantType> dom = dominant_type(run.code, run.stats, lambda);
    if (!dom) {
      fail("no dominant type at lambda 0.9");
      continue;
    }

    const Lemma1Report lem = lemma1_check(run.code, dom->pairs, lambda);
    if (!lem.pass) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "block information %.6f exceeds budget %.6f", lem.lhs,
                    lem.rhs);
      fail(buf);
    }

    const double n = static_cast<double>(run.code.n);
    const WringingResult wr = wring(run.code, dom->pairs, 1.0 / std::sqrt(n),
                                    wringing_sigma(run.code.n, lambda, 2, 2));
    if (wr.cap_hit) fail("wringing hit the step cap with a position still above delta");
    if (wr.emptied) {
      fail("wringing emptied the pair set");
    } else {
      const double gap = independence_gap(run.code, wr.subcode);
      const double bound = 2.0 * std::pow(n, -0.25);
      if (gap > bound) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "independence gap %.6f exceeds %.6f", gap, bound);
        fail(buf);
      }
    }

    std::set<int> rows, cols;
    for (const auto& [i, j] : dom->pairs) {
      cols.insert(j);
      rows.insert(i);
    }
    for (int j : cols) {
      std::vector<int> members;
      for (const auto& pr : dom->pairs)
        if (pr.second == j) members.push_back(pr.first);
      if (!augustin_check(run.code, run.w, SubcodeSide::row, j, members, lambda).pass)
        fail("row subcode check failed at fixed second index " + std::to_string(j));
    }
    for (int i : rows) {
      std::vector<int> members;
      for (const auto& pr : dom->pairs)
        if (pr.first == i) members.push_back(pr.second);
      if (!augustin_check(run.code, run.w, SubcodeSide::column, i, members, lambda).pass)
        fail("column subcode check failed at fixed first index " + std::to_string(i));
    }

    const FanoDistribution f = fano_distribution(run.code, dom->pairs);
    const JointDistribution avg = average_letter_joint(run.code, f);
    const JointDistribution tj = dom->p.to_joint();
    double l1 = 0.0;
    for (std::size_t a = 0; a < avg.flat().size(); ++a)
      l1 += std::abs(avg.flat()[a] - tj.flat()[a]);
    if (l1 > 1e-12) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "averaged letter joint is %.3e from the pair type", l1);
      fail(buf);
    }
  }
  return notes.empty();
}

// ---------------------------------------------------------------------------
// 7. Finite-blocklength exponents decrease with n and meet the asymptotic
//    value within 0.05 bits by n = 10^4.

bool check_gap_convergence(std::vector<std::string>& notes) {
  struct Case {
    const char* name;
    Mac w;
    RatePair r;
  };
  const Case cases[] = {
      {"constant_rows", fixtures::constant_rows(), {0.25, 0.25}},
      {"identity_x", fixtures::identity_x(), {0.5, 0.5}},
  };
  const std::vector<std::int64_t> ns = {10, 100, 1000, 10000};
  const EpsilonModel model;  // lambda 0.1, no conditioning-step term
  for (const Case& c : cases) {
    const GapReport g = finite_n_gap(c.w, c.r, ns, model);
    const auto fail = [&](const std::string& what) {
      notes.push_back(std::string(c.name) + " " + fmt_rate(c.r) + ": " + what);
    };
    if (!g.converged) fail("search did not converge");
    if (g.alpha_star_infinite) fail("asymptotic exponent is infinite");
    if (g.points.size() != ns.size()) {
      fail("wrong number of blocklength points");
      continue;
    }
    double prev = kInf;
    for (const GapPoint& p : g.points) {
      const double a = order_key(p.infinite, p.alpha);
      if (a > prev) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "alpha rises from %.6g to %.6g at n=%lld", prev, a,
                      (long long)p.n);
        fail(buf);
      }
      prev = a;
      if (!p.infinite && p.alpha < g.alpha_star - 1e-12) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "alpha %.6f below the asymptotic %.6f at n=%lld",
                      p.alpha, g.alpha_star, (long long)p.n);
        fail(buf);
      }
    }
    const GapPoint& last = g.points.back();
    if (last.infinite)
      fail("exponent still infinite at n=10000");
    else if (last.gap >= 0.05) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "final gap %.6f bits is not below 0.05", last.gap);
      fail(buf);
    }
  }
  return notes.empty();
}

// ---------------------------------------------------------------------------
// 8. The command-line binary is byte-deterministic and reproduces the frozen
//    report examples.

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliResult {
  int exit_code = -1;
  std::string out;
};

CliResult run_cli(const std::filesystem::path& dir, const std::string& args) {
  static int counter = 0;
  const std::filesystem::path out_path = dir / ("out" + std::to_string(counter++));
  const std::string cmd = std::string("'") + MACX_BIN + "' " + args + " >'" +
                          out_path.string() + "' 2>/dev/null";
  const int status = std::system(cmd.c_str());
  CliResult res;
  if (status != -1 && WIFEXITED(status)) res.exit_code = WEXITSTATUS(status);
  res.out = slurp(out_path);
  return res;
}

bool check_determinism(std::vector<std::string>& notes) {
  const std::filesystem::path dir = std::filesystem::current_path() / "acceptance_tmp";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);

  const std::filesystem::path sym = dir / "sym.json";
  std::ofstream(sym) << R"({"x_size": 2, "y_size": 2, "z_size": 2,
    "w": [[[0.82, 0.18], [0.18, 0.82]], [[0.18, 0.82], [0.82, 0.18]]]})";
  const std::filesystem::path adder = dir / "adder.json";
  std::ofstream(adder) << R"({"x_size": 2, "y_size": 2, "z_size": 3,
    "w": [[[1, 0, 0], [0, 1, 0]], [[0, 1, 0], [0, 0, 1]]]})";

  // Two runs of the same sweep must agree byte for byte, and both must match
  // the frozen regression text for this seed.
  const std::string surf_args = "surface --channel " + sym.string() +
                                " --method haroutunian --r1 0.05:0.45:3 --r2 0.05:0.45:3";
  const CliResult s1 = run_cli(dir, surf_args);
  const CliResult s2 = run_cli(dir, surf_args);
  if (s1.exit_code != 0 || s2.exit_code != 0) notes.push_back("surface run did not exit 0");
  if (s1.out != s2.out) notes.push_back("surface reruns differ byte-wise");
  const std::string frozen =
      "r1,r2,value,method,converged\n"
      "0.05,0.05,0.077775491,haroutunian,true\n"
      "0.05,0.25,0.000275667358,haroutunian,true\n"
      "0.05,0.45,0,haroutunian,true\n"
      "0.25,0.05,0,haroutunian,true\n"
      "0.25,0.25,0,haroutunian,true\n"
      "0.25,0.45,0,haroutunian,true\n"
      "0.45,0.05,0,haroutunian,true\n"
      "0.45,0.25,0,haroutunian,true\n"
      "0.45,0.45,0,haroutunian,true\n";
  if (s1.out != frozen) notes.push_back("surface output drifted from the frozen fixture");

  const CliResult cap = run_cli(dir, "capacity --channel " + adder.string() + " --rates 0.7 0.7");
  if (cap.exit_code != 0)
    notes.push_back("adder capacity example: expected exit 0, got " +
                    std::to_string(cap.exit_code));
  else if (json::parse(cap.out).at("inside") != true)
    notes.push_back("adder capacity example did not report inside");

  const CliResult sim = run_cli(
      dir, "simulate --channel " + sym.string() +
               " --gen-counts 2,1,1,2 --gen-m 4 --gen-codewords 4 --seed 11 --lambda 0.9" +
               " --rates 0.25 0.25 --delta 0.05");
  if (sim.exit_code != 0) {
    notes.push_back("simulate example: expected exit 0, got " + std::to_string(sim.exit_code));
  } else {
    const json j = json::parse(sim.out);
    if (j.at("stats").at("avg_error").get<double>() != 0.8319)
      notes.push_back("simulate example: average error drifted");
    if (j.at("strong_converse").at("slack").get<double>() != 173.437161421)
      notes.push_back("simulate example: strong-converse slack drifted");
    if (j.at("sphere_packing").at("bound").get<double>() != 0.5 ||
        j.at("sphere_packing").at("pass") != true)
      notes.push_back("simulate example: bound report drifted");
  }
  return notes.empty();
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  int failed = 0;
  std::vector<RosterRun> runs;

  const auto report = [&](int number, const char* text, auto&& fn) {
    std::vector<std::string> notes;
    const bool ok = fn(notes);
    std::printf("[%s] %d. %s\n", ok ? "PASS" : "FAIL", number, text);
    for (const std::string& n : notes) std::printf("       - %s\n", n.c_str());
    std::fflush(stdout);
    if (!ok) ++failed;
  };

  report(1, "search solvers match the exhaustive lattice within 1e-2 bits at 15 suite points",
         [](std::vector<std::string>& n) { return check_oracle_agreement(n); });
  report(2, "outside the capacity region both exponents are exactly zero and echo the channel",
         [](std::vector<std::string>& n) { return check_zero_outside(n); });
  report(3, "product-input pentagon exponent never drops below the single-letter form",
         [](std::vector<std::string>& n) { return check_product_ordering(n); });
  report(4, "8x8 rate grids: lattice values exactly monotone, solver surfaces within 1e-3",
         [](std::vector<std::string>& n) { return check_monotonicity(n); });
  report(5, "maximal-error lower bound holds on all 24 seeded constant-composition codes",
         [&](std::vector<std::string>& n) { return check_error_bound(runs, n); });
  report(6, "converse pipeline clears on every roster subcode (budget, wringing, rows/columns)",
         [&](std::vector<std::string>& n) { return check_converse_pipeline(runs, n); });
  report(7, "finite-blocklength exponents decrease to the asymptotic value (gap < 0.05 bits)",
         [](std::vector<std::string>& n) { return check_gap_convergence(n); });
  report(8, "command-line reruns are byte-identical and frozen examples reproduce",
         [](std::vector<std::string>& n) { return check_determinism(n); });

  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%d/8 checks passed in %.1fs\n", 8 - failed, elapsed);
  return failed;
}
