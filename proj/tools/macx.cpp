// Command-line front door: parse channel/code files, run the solvers and
// code simulations, and emit JSON or CSV artifacts.
//
// Exit codes: 0 on success (capacity: rates inside), 2 on input or size-guard
// errors, 3 on a negative verdict (capacity: outside; simulate: rate-plus-
// delta precondition unmet; wring: no dominant type). Never panics on
// malformed input.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "macx/codesim.hpp"
#include "macx/exponents.hpp"
#include "macx/io.hpp"
#include "macx/mac.hpp"

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// JSON helpers (all floats rounded to 12 significant digits)

json jnum(double x) {
  if (std::isnan(x)) return json();
  if (std::isinf(x)) return json();  // JSON has no infinity; flags carry it
  return json(macx::sig12(x));
}

json jrates(macx::RatePair r) { return json{{"r1", jnum(r.r1)}, {"r2", jnum(r.r2)}}; }

json jmatrix(const macx::StochasticMatrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (double p : m.row(i).data()) row.push_back(jnum(p));
    rows.push_back(std::move(row));
  }
  return rows;
}

json jjoint(const macx::JointDistribution& p) {
  if (p.rank() != 2) return json();
  json rows = json::array();
  for (std::size_t x = 0; x < p.dim(0); ++x) {
    json row = json::array();
    for (std::size_t y = 0; y < p.dim(1); ++y) row.push_back(jnum(p.at({x, y})));
    rows.push_back(std::move(row));
  }
  return rows;
}

json jchannel(const macx::Mac& w) {
  json xs = json::array();
  for (int x = 0; x < w.nx; ++x) {
    json ys = json::array();
    for (int y = 0; y < w.ny; ++y) {
      json zs = json::array();
      for (int z = 0; z < w.nz; ++z) zs.push_back(jnum(w.at(x, y, z)));
      ys.push_back(std::move(zs));
    }
    xs.push_back(std::move(ys));
  }
  return xs;
}

json jpairs(const std::vector<std::pair<int, int>>& pairs) {
  json out = json::array();
  for (const auto& [i, j] : pairs) out.push_back(json::array({i, j}));
  return out;
}

json jverdict(const macx::RegionVerdict& v) {
  return json{{"inside", v.inside},
              {"slack", jnum(v.slack)},
              {"witness_rates",
               {{"i1", jnum(v.witness_rates.i1)},
                {"i2", jnum(v.witness_rates.i2)},
                {"i12", jnum(v.witness_rates.i12)}}},
              {"witness",
               {{"q_weights", [&] {
                   json ws = json::array();
                   for (double q : v.witness.q_weights) ws.push_back(jnum(q));
                   return ws;
                 }()},
                {"px_given_q", jmatrix(v.witness.px_given_q)},
                {"py_given_q", jmatrix(v.witness.py_given_q)}}},
              {"witness_marginal_l1", jnum(v.witness_marginal_l1)}};
}

// ---------------------------------------------------------------------------
// Shared option plumbing

struct Args {
  std::string channel;
  std::string code;
  std::string out;
  std::string method = "sphere_packing";
  std::string grid1;
  std::string grid2;
  std::string gen_counts;
  int gen_m = 0;
  int gen_codewords = 0;
  std::vector<double> rates;
  int resolution = 32;
  std::uint64_t seed = 0;
  double lambda = 0.5;
  double delta = -1.0;  // sentinel: per-command default
};

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    macx::save_text(out_path, text);
  }
}

void emit_json(const std::string& out_path, const json& j) {
  emit(out_path, j.dump(2) + "\n");
}

[[noreturn]] void bad_input(const std::string& message) {
  throw macx::Error(macx::ErrorKind::invalid_input, message);
}

// Parses `start:stop:steps` into an inclusive linear grid.
std::vector<double> parse_grid(const std::string& spec) {
  double start = 0.0, stop = 0.0;
  int steps = 0;
  char trailing = 0;
  if (std::sscanf(spec.c_str(), "%lf:%lf:%d%c", &start, &stop, &steps, &trailing) != 3)
    bad_input("grid must be start:stop:steps, got '" + spec + "'");
  if (steps < 1) bad_input("grid steps must be at least 1");
  if (steps > 4096) bad_input("grid steps capped at 4096");
  if (stop < start) bad_input("grid range is inverted");
  if (steps == 1 && stop != start) bad_input("a 1-step grid needs start == stop");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    const double t = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
    out.push_back(start + t * (stop - start));
  }
  return out;
}

// MACX_THREADS caps worker-thread parallelism. The surface evaluator is
// deliberately sequential (its shared candidate pool is what makes surfaces
// monotone by construction and byte-reproducible), so the cap is validated
// and honored as an upper bound.
int thread_cap() {
  const char* env = std::getenv("MACX_THREADS");
  if (env == nullptr || *env == '\0') return 256;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == nullptr || *end != '\0' || v < 1 || v > 4096)
    bad_input("MACX_THREADS must be a positive integer");
  return static_cast<int>(v);
}

macx::SearchOptions solver_options(const Args& a) {
  macx::SearchOptions opts;
  opts.seed = a.seed;
  opts.grid_resolution = a.resolution;
  return opts;
}

macx::RatePair rate_pair(const Args& a) {
  if (a.rates.size() != 2) bad_input("--rates needs two values");
  return {a.rates[0], a.rates[1]};
}

// Loads the code file or builds one from the generator flags.
macx::MultiUserCode obtain_code(const Args& a, const macx::Mac& w) {
  const bool gen = !a.gen_counts.empty() || a.gen_m > 0 || a.gen_codewords > 0;
  if (!a.code.empty() && gen)
    bad_input("--code and the generator flags are mutually exclusive");
  if (!a.code.empty()) return macx::load_code(a.code, w.nx, w.ny);
  if (!gen) bad_input("need --code or --gen-counts/--gen-m/--gen-codewords");
  if (a.gen_counts.empty() || a.gen_m < 1 || a.gen_codewords < 1)
    bad_input("the generator needs --gen-counts, --gen-m and --gen-codewords");

  std::vector<std::int64_t> counts;
  std::size_t pos = 0;
  while (pos <= a.gen_counts.size()) {
    const std::size_t next = a.gen_counts.find(',', pos);
    const std::string tok = a.gen_counts.substr(
        pos, next == std::string::npos ? std::string::npos : next - pos);
    char* end = nullptr;
    const long v = std::strtol(tok.c_str(), &end, 10);
    if (tok.empty() || end == nullptr || *end != '\0')
      bad_input("--gen-counts must be a comma-separated integer list");
    counts.push_back(v);
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  if (counts.size() != static_cast<std::size_t>(w.nx) * static_cast<std::size_t>(w.ny))
    bad_input("--gen-counts needs one entry per input-symbol pair (row-major)");
  macx::EmpiricalType p({static_cast<std::size_t>(w.nx), static_cast<std::size_t>(w.ny)},
                        counts);
  return macx::constant_composition_code(p, a.gen_m, a.gen_codewords, a.seed);
}

// ---------------------------------------------------------------------------
// Commands

int cmd_capacity(const Args& a) {
  const macx::Mac w = macx::load_channel(a.channel);
  const macx::RatePair r = rate_pair(a);
  const macx::RegionVerdict v = macx::capacity_membership(w, r, solver_options(a));
  json j{{"command", "capacity"}, {"channel", a.channel}, {"rates", jrates(r)}};
  j.update(jverdict(v));
  emit_json(a.out, j);
  return v.inside ? 0 : 3;
}

int cmd_exponent(const Args& a) {
  const macx::Mac w = macx::load_channel(a.channel);
  const macx::RatePair r = rate_pair(a);
  macx::ExponentMethod method;
  if (!macx::parse_method(a.method, method))
    bad_input("--method must be haroutunian, sphere_packing or grid_oracle");

  macx::ExponentResult res;
  if (method == macx::ExponentMethod::grid_oracle) {
    // The lattice oracle evaluates the sphere-packing form of the bound.
    res = macx::exponent_grid_oracle(w, macx::ExponentMethod::sphere_packing, {{r, 0.0}},
                                     a.resolution)
              .at(0);
    res.method = macx::ExponentMethod::grid_oracle;
  } else {
    const macx::SearchOptions opts = solver_options(a);
    res = method == macx::ExponentMethod::haroutunian
              ? macx::haroutunian_exponent(w, r, opts)
              : macx::sphere_packing_exponent(w, r, opts);
  }

  json j{{"command", "exponent"},
         {"channel", a.channel},
         {"method", a.method},
         {"rates", jrates(r)},
         {"resolution", a.resolution},
         {"value", res.infinite ? json() : jnum(res.value)},
         {"infinite", res.infinite},
         {"converged", res.converged},
         {"witness_slack", jnum(res.witness_slack)},
         {"witness_p", jjoint(res.witness_p)},
         {"witness_v", jchannel(res.witness_v)}};
  emit_json(a.out, j);
  return 0;
}

int cmd_surface(const Args& a) {
  (void)thread_cap();  // validate the env cap; the sweep itself is sequential
  const macx::Mac w = macx::load_channel(a.channel);
  macx::ExponentMethod method;
  if (!macx::parse_method(a.method, method))
    bad_input("--method must be haroutunian or sphere_packing");
  const std::vector<double> r1s = parse_grid(a.grid1);
  const std::vector<double> r2s = parse_grid(a.grid2);
  const std::vector<macx::SurfacePoint> pts =
      macx::exponent_surface(w, method, r1s, r2s, solver_options(a));
  emit(a.out, macx::surface_csv(pts, method));
  return 0;
}

int cmd_simulate(const Args& a) {
  const macx::Mac w = macx::load_channel(a.channel);
  const macx::MultiUserCode base = obtain_code(a, w);
  macx::MultiUserCode code = base;
  code.decode = macx::ml_decode(w, code.u, code.v);
  const macx::CodeStats stats = macx::error_probabilities(w, code);
  const macx::RatePair code_rates{std::log2(static_cast<double>(code.m())) / code.n,
                                  std::log2(static_cast<double>(code.n_codewords())) / code.n};

  json j{{"command", "simulate"},
         {"channel", a.channel},
         {"lambda", jnum(a.lambda)},
         {"code",
          {{"n", code.n},
           {"m", code.m()},
           {"n_codewords", code.n_codewords()},
           {"rates", jrates(code_rates)}}}};

  json per = json::array();
  for (const auto& row : stats.per_pair_error) {
    json jrow = json::array();
    for (double e : row) jrow.push_back(jnum(e));
    per.push_back(std::move(jrow));
  }
  j["stats"] = {{"max_error", jnum(stats.max_error)},
                {"avg_error", jnum(stats.avg_error)},
                {"per_pair_error", std::move(per)}};

  const auto dom = macx::dominant_type(code, stats, a.lambda);
  if (dom) {
    json counts = json::array();
    for (std::int64_t c : dom->p.counts()) counts.push_back(c);
    j["dominant"] = {{"counts", std::move(counts)}, {"pairs", jpairs(dom->pairs)}};
  } else {
    j["dominant"] = json();
  }

  const macx::StrongConverseReport sc = macx::strong_converse_check(w, code, a.lambda);
  j["strong_converse"] = {{"hypothesis_met", sc.hypothesis_met},
                          {"inside", sc.inside},
                          {"slack", jnum(sc.slack)},
                          {"epsilon", jnum(sc.epsilon)}};

  if (!a.rates.empty()) {
    const macx::RatePair r = rate_pair(a);
    const double delta = a.delta < 0.0 ? 0.05 : a.delta;
    if (code_rates.r1 < r.r1 + delta - 1e-12 || code_rates.r2 < r.r2 + delta - 1e-12) {
      std::fprintf(stderr,
                   "precondition unmet: code rates (%.6g, %.6g) fall short of the "
                   "requested rates plus delta (%.6g, %.6g)\n",
                   code_rates.r1, code_rates.r2, r.r1 + delta, r.r2 + delta);
      return 3;
    }
    const macx::ExponentResult e = macx::sphere_packing_exponent(w, r, solver_options(a));
    const macx::SpherePackingReport rep = macx::sphere_packing_verify(w, code, r, delta, e);
    j["sphere_packing"] = {{"rates", jrates(r)},
                           {"delta", jnum(delta)},
                           {"exponent", e.infinite ? json() : jnum(e.value)},
                           {"exponent_infinite", e.infinite},
                           {"bound", jnum(rep.bound)},
                           {"max_error", jnum(rep.max_error)},
                           {"pass", rep.pass}};
  }

  emit_json(a.out, j);
  return 0;
}

int cmd_wring(const Args& a) {
  const macx::Mac w = macx::load_channel(a.channel);
  macx::MultiUserCode code = obtain_code(a, w);
  code.decode = macx::ml_decode(w, code.u, code.v);
  const macx::CodeStats stats = macx::error_probabilities(w, code);
  const auto dom = macx::dominant_type(code, stats, a.lambda);
  if (!dom) {
    std::fprintf(stderr, "no dominant type: no codeword pair decodes with probability "
                         ">= (1 - lambda) / 2 at lambda = %.6g\n", a.lambda);
    return 3;
  }

  const double delta = a.delta < 0.0 ? 1.0 / std::sqrt(static_cast<double>(code.n)) : a.delta;
  const double sigma = macx::wringing_sigma(code.n, a.lambda, code.nx, code.ny);
  const macx::WringingResult res = macx::wring(code, dom->pairs, delta, sigma);
  const double gap = macx::independence_gap(code, res.subcode);
  const macx::Lemma1Report lem = macx::lemma1_check(code, dom->pairs, a.lambda);

  json counts = json::array();
  for (std::int64_t c : dom->p.counts()) counts.push_back(c);
  json coords = json::array();
  for (const macx::WringingCoordinate& c : res.coords)
    coords.push_back(json{{"t", c.t}, {"x", c.x}, {"y", c.y}});

  json j{{"command", "wring"},
         {"channel", a.channel},
         {"lambda", jnum(a.lambda)},
         {"delta", jnum(res.delta)},
         {"sigma", jnum(res.sigma)},
         {"dominant", {{"counts", std::move(counts)}, {"pairs", jpairs(dom->pairs)}}},
         {"k", res.k},
         {"coords", std::move(coords)},
         {"subcode", jpairs(res.subcode)},
         {"retained_fraction", jnum(res.retained_fraction)},
         {"floor", jnum(res.floor)},
         {"floor_met", res.floor_met},
         {"cap_hit", res.cap_hit},
         {"emptied", res.emptied},
         {"max_letter_mi", jnum(res.max_letter_mi)},
         {"independence_gap", jnum(gap)},
         {"gap_bound", jnum(2.0 * std::pow(static_cast<double>(code.n), -0.25))},
         {"lemma1", {{"lhs", jnum(lem.lhs)}, {"rhs", jnum(lem.rhs)}, {"pass", lem.pass}}}};
  emit_json(a.out, j);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-user multiple-access channel toolkit: capacity verdicts, reliability "
               "exponents, exponent surfaces, and explicit-code converse checks. The "
               "MACX_THREADS environment variable caps worker-thread parallelism (surface "
               "sweeps are sequential by design, so it is an upper bound)."};
  app.require_subcommand(1);
  Args a;

  const auto add_channel = [&](CLI::App* sub) {
    sub->add_option("--channel", a.channel, "Channel JSON file (x_size, y_size, z_size, w)")
        ->required();
  };
  const auto add_rates = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("--rates", a.rates, "Rate pair R1 R2 in bits per use")
                    ->expected(2);
    if (required) opt->required();
  };
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", a.seed, "Seed for all randomized search (default 0)");
    sub->add_option("--resolution", a.resolution,
                    "Grid resolution for solver seeding and the lattice oracle");
    sub->add_option("--out", a.out, "Output path (default: stdout)");
  };
  const auto add_code = [&](CLI::App* sub) {
    sub->add_option("--code", a.code, "Code JSON file (n, u, v)");
    sub->add_option("--gen-counts", a.gen_counts,
                    "Generate a constant-composition code: joint-type counts, row-major");
    sub->add_option("--gen-m", a.gen_m, "Generated codewords for the first sender");
    sub->add_option("--gen-codewords", a.gen_codewords,
                    "Generated codewords for the second sender");
  };

  CLI::App* cap = app.add_subcommand(
      "capacity", "Decide whether a rate pair lies in the capacity region");
  add_channel(cap);
  add_rates(cap, true);
  add_common(cap);

  CLI::App* exp = app.add_subcommand(
      "exponent", "Compute a reliability exponent at one rate pair");
  add_channel(exp);
  add_rates(exp, true);
  exp->add_option("--method", a.method,
                  "haroutunian, sphere_packing, or grid_oracle (lattice oracle of the "
                  "sphere-packing form)");
  add_common(exp);

  CLI::App* surf = app.add_subcommand(
      "surface", "Sweep an exponent over a rate grid and emit CSV");
  add_channel(surf);
  surf->add_option("--r1", a.grid1, "First-rate grid start:stop:steps")->required();
  surf->add_option("--r2", a.grid2, "Second-rate grid start:stop:steps")->required();
  surf->add_option("--method", a.method, "haroutunian or sphere_packing");
  add_common(surf);

  CLI::App* sim = app.add_subcommand(
      "simulate", "Exact error statistics and converse checks for an explicit code");
  add_channel(sim);
  add_code(sim);
  sim->add_option("--lambda", a.lambda, "Maximal-error level in [0, 1) (default 0.5)");
  add_rates(sim, false);
  sim->add_option("--delta", a.delta,
                  "Rate margin for the sphere-packing bound (default 0.05; used with --rates)");
  add_common(sim);

  CLI::App* wr = app.add_subcommand(
      "wring", "Run the wringing pipeline on an explicit code");
  add_channel(wr);
  add_code(wr);
  wr->add_option("--lambda", a.lambda, "Maximal-error level in [0, 1)")->required();
  wr->add_option("--delta", a.delta,
                 "Per-letter information threshold in nats (default n^{-1/2})");
  add_common(wr);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (cap->parsed()) return cmd_capacity(a);
    if (exp->parsed()) return cmd_exponent(a);
    if (surf->parsed()) return cmd_surface(a);
    if (sim->parsed()) return cmd_simulate(a);
    if (wr->parsed()) return cmd_wring(a);
    return 2;
  } catch (const macx::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
