#include "macx/codesim.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "kernels.hpp"
#include "opt.hpp"

namespace macx {

namespace {

// base^exp, or -1 once the product passes cap.
std::int64_t pow_capped(std::int64_t base, std::int64_t exp, std::int64_t cap) {
  std::int64_t r = 1;
  for (std::int64_t i = 0; i < exp; ++i) {
    if (r > cap / base) return -1;
    r *= base;
  }
  return r;
}

constexpr std::int64_t kDecodeCap = 10000000;   // output blocks
constexpr std::int64_t kClassCap = 200000;      // sequences per marginal type class

// n! / prod(counts!) without overflow for the guarded sizes, as a running
// product of binomial coefficients.
std::int64_t multinomial_capped(const std::vector<std::int64_t>& counts, std::int64_t cap) {
  std::int64_t total = 0;
  for (std::int64_t c : counts) total += c;
  std::int64_t result = 1;
  std::int64_t used = 0;
  for (std::int64_t c : counts) {
    for (std::int64_t i = 1; i <= c; ++i) {
      result = result * (used + i) / i;  // exact: prefix products of C(used+i, i)
      if (result > cap) return -1;
    }
    used += c;
  }
  (void)total;
  return result;
}

// All sequences with the given symbol counts, in lexicographic order.
std::vector<std::vector<int>> type_class(const std::vector<std::int64_t>& counts) {
  if (multinomial_capped(counts, kClassCap) < 0)
    throw Error(ErrorKind::size_guard, "marginal type class too large to enumerate");
  std::vector<int> seq;
  for (std::size_t s = 0; s < counts.size(); ++s)
    seq.insert(seq.end(), static_cast<std::size_t>(counts[s]), static_cast<int>(s));
  std::vector<std::vector<int>> out;
  do {
    out.push_back(seq);
  } while (std::next_permutation(seq.begin(), seq.end()));
  return out;
}

void seeded_shuffle(std::vector<int>& idx, detail::Rng& rng) {
  for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i)
    std::swap(idx[i], idx[static_cast<std::size_t>(rng.index(i + 1))]);
}

void check_pair_symbols(const std::vector<std::vector<int>>& words, int n, int alphabet,
                        const char* who) {
  if (words.empty())
    throw Error(ErrorKind::invalid_input, std::string(who) + " codebook is empty");
  for (const auto& seq : words) {
    if (static_cast<int>(seq.size()) != n)
      throw Error(ErrorKind::invalid_input, std::string(who) + " codeword length mismatch");
    for (int s : seq)
      if (s < 0 || s >= alphabet)
        throw Error(ErrorKind::invalid_input, std::string(who) + " codeword symbol out of range");
  }
}

// Letter joint counts of a pair set at position t, flattened x-major.
std::vector<std::int64_t> letter_counts(const MultiUserCode& code,
                                        const std::vector<std::pair<int, int>>& pairs, int t) {
  std::vector<std::int64_t> c(static_cast<std::size_t>(code.nx) * code.ny, 0);
  for (const auto& [i, j] : pairs)
    ++c[static_cast<std::size_t>(code.u[i][t]) * code.ny + code.v[j][t]];
  return c;
}

JointDistribution counts_to_joint(const std::vector<std::int64_t>& c, int nx, int ny,
                                  double denom) {
  std::vector<double> flat(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) flat[i] = static_cast<double>(c[i]) / denom;
  return JointDistribution({static_cast<std::size_t>(nx), static_cast<std::size_t>(ny)},
                           std::move(flat));
}

// Letter mutual information of a pair set at position t, natural-log units.
double letter_mi_nats(const MultiUserCode& code, const std::vector<std::pair<int, int>>& pairs,
                      int t) {
  const auto c = letter_counts(code, pairs, t);
  return mutual_information(counts_to_joint(c, code.nx, code.ny,
                                            static_cast<double>(pairs.size()))) *
         detail::kLn2;
}

void check_lambda(double lambda) {
  if (!(lambda >= 0.0) || lambda >= 1.0 || !std::isfinite(lambda))
    throw Error(ErrorKind::invalid_input, "lambda must lie in [0, 1)");
}

void check_channel_match(const Mac& w, const MultiUserCode& code) {
  if (w.nx != code.nx || w.ny != code.ny)
    throw Error(ErrorKind::invalid_input, "code alphabets do not match the channel");
}

}  // namespace

void validate_code(const MultiUserCode& code) {
  if (code.n < 1) throw Error(ErrorKind::invalid_input, "block length must be positive");
  if (code.nx < 1 || code.ny < 1)
    throw Error(ErrorKind::invalid_input, "code alphabets must be nonempty");
  check_pair_symbols(code.u, code.n, code.nx, "sender-one");
  check_pair_symbols(code.v, code.n, code.ny, "sender-two");
  if (!code.decode.empty()) {
    const std::int64_t pairs =
        static_cast<std::int64_t>(code.m()) * code.n_codewords();
    for (std::int32_t d : code.decode)
      if (d < -1 || d >= pairs)
        throw Error(ErrorKind::invalid_input, "decoder entry out of range");
  }
}

MultiUserCode constant_composition_code(const EmpiricalType& p, int m, int n_codewords,
                                        std::uint64_t seed) {
  if (p.rank() != 2)
    throw Error(ErrorKind::invalid_input, "joint type must have exactly two axes");
  if (m < 1 || n_codewords < 1)
    throw Error(ErrorKind::invalid_input, "codeword counts must be positive");
  const int nx = static_cast<int>(p.dims()[0]);
  const int ny = static_cast<int>(p.dims()[1]);
  const std::int64_t n = p.n();
  const auto& target = p.counts();

  std::vector<std::int64_t> cx(static_cast<std::size_t>(nx), 0);
  std::vector<std::int64_t> cy(static_cast<std::size_t>(ny), 0);
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y) {
      cx[x] += target[static_cast<std::size_t>(x) * ny + y];
      cy[y] += target[static_cast<std::size_t>(x) * ny + y];
    }

  const std::vector<std::vector<int>> tx = type_class(cx);
  const std::vector<std::vector<int>> ty = type_class(cy);

  const auto matches = [&](const std::vector<int>& uu, const std::vector<int>& vv) {
    std::vector<std::int64_t> jc(static_cast<std::size_t>(nx) * ny, 0);
    for (std::int64_t t = 0; t < n; ++t)
      ++jc[static_cast<std::size_t>(uu[t]) * ny + vv[t]];
    return jc == target;
  };

  detail::Rng rng(seed);
  std::vector<int> order(ty.size());
  std::iota(order.begin(), order.end(), 0);
  seeded_shuffle(order, rng);

  // Depth-first growth of the v side: a candidate v survives at a node when
  // enough u-sequences still pair with every chosen v at the target type.
  std::vector<int> all_u(tx.size());
  std::iota(all_u.begin(), all_u.end(), 0);

  std::vector<int> chosen;
  std::vector<int> final_survivors;
  long nodes = 0;
  const long kNodeBudget = 50000;

  const auto dfs = [&](auto&& self, const std::vector<int>& survivors, int req) -> bool {
    if (static_cast<int>(chosen.size()) == n_codewords) {
      final_survivors = survivors;
      return true;
    }
    for (int cand : order) {
      if (std::find(chosen.begin(), chosen.end(), cand) != chosen.end()) continue;
      if (++nodes > kNodeBudget) return false;
      std::vector<int> next;
      for (int ui : survivors)
        if (matches(tx[ui], ty[cand])) next.push_back(ui);
      if (static_cast<int>(next.size()) < req) continue;
      chosen.push_back(cand);
      if (self(self, next, req)) return true;
      chosen.pop_back();
    }
    return false;
  };

  bool built = false;
  for (int req : {m, 1}) {
    chosen.clear();
    nodes = 0;
    if (dfs(dfs, all_u, req)) {
      built = true;
      break;
    }
  }
  if (!built) {
    // Greedy fallback: extend while possible, then repeat earlier choices.
    // One v always works (symbols can be laid into its blocks cell by cell),
    // so this never leaves the v side empty.
    chosen.clear();
    std::vector<int> survivors = all_u;
    bool grew = true;
    while (static_cast<int>(chosen.size()) < n_codewords && grew) {
      grew = false;
      for (int cand : order) {
        if (std::find(chosen.begin(), chosen.end(), cand) != chosen.end()) continue;
        std::vector<int> next;
        for (int ui : survivors)
          if (matches(tx[ui], ty[cand])) next.push_back(ui);
        if (next.empty()) continue;
        chosen.push_back(cand);
        survivors.swap(next);
        grew = true;
        break;
      }
    }
    if (chosen.empty())
      throw Error(ErrorKind::infeasible, "no codeword pair attains the requested joint type");
    final_survivors = survivors;
  }

  MultiUserCode code;
  code.n = static_cast<int>(n);
  code.nx = nx;
  code.ny = ny;
  for (int jj = 0; jj < n_codewords; ++jj)
    code.v.push_back(ty[chosen[jj % chosen.size()]]);

  seeded_shuffle(final_survivors, rng);
  for (int ii = 0; ii < m; ++ii)
    code.u.push_back(tx[final_survivors[ii % final_survivors.size()]]);
  return code;
}

std::vector<std::int32_t> ml_decode(const Mac& w, const std::vector<std::vector<int>>& u,
                                    const std::vector<std::vector<int>>& v) {
  if (u.empty() || v.empty())
    throw Error(ErrorKind::invalid_input, "decoder needs at least one codeword per sender");
  const int n = static_cast<int>(u[0].size());
  if (n < 1) throw Error(ErrorKind::invalid_input, "block length must be positive");
  check_pair_symbols(u, n, w.nx, "sender-one");
  check_pair_symbols(v, n, w.ny, "sender-two");

  const std::int64_t blocks = pow_capped(w.nz, n, kDecodeCap);
  if (blocks < 0)
    throw Error(ErrorKind::size_guard, "output block count exceeds the enumeration guard");

  const int mm = static_cast<int>(u.size());
  const int nn = static_cast<int>(v.size());
  std::vector<std::int32_t> table(static_cast<std::size_t>(blocks));
  std::vector<int> z(static_cast<std::size_t>(n), 0);
  for (std::int64_t rank = 0; rank < blocks; ++rank) {
    double best = -1.0;
    std::int32_t arg = 0;
    for (int i = 0; i < mm; ++i)
      for (int j = 0; j < nn; ++j) {
        double prob = 1.0;
        for (int t = 0; t < n; ++t) prob *= w.at(u[i][t], v[j][t], z[t]);
        if (prob > best) {
          best = prob;
          arg = static_cast<std::int32_t>(i) * nn + j;
        }
      }
    table[static_cast<std::size_t>(rank)] = arg;
    for (int t = n - 1; t >= 0; --t) {
      if (++z[t] < w.nz) break;
      z[t] = 0;
    }
  }
  return table;
}

CodeStats error_probabilities(const Mac& w, const MultiUserCode& code) {
  validate_code(code);
  check_channel_match(w, code);
  const std::int64_t blocks = pow_capped(w.nz, code.n, kDecodeCap);
  if (blocks < 0)
    throw Error(ErrorKind::size_guard, "output block count exceeds the enumeration guard");
  if (static_cast<std::int64_t>(code.decode.size()) != blocks)
    throw Error(ErrorKind::invalid_input, "decoder table size does not match the output space");

  const int mm = code.m();
  const int nn = code.n_codewords();
  std::vector<std::vector<double>> success(static_cast<std::size_t>(mm),
                                           std::vector<double>(static_cast<std::size_t>(nn), 0.0));
  std::vector<int> z(static_cast<std::size_t>(code.n), 0);
  for (std::int64_t rank = 0; rank < blocks; ++rank) {
    const std::int32_t d = code.decode[static_cast<std::size_t>(rank)];
    if (d >= 0) {
      const int i = d / nn;
      const int j = d % nn;
      double prob = 1.0;
      for (int t = 0; t < code.n; ++t) prob *= w.at(code.u[i][t], code.v[j][t], z[t]);
      success[i][j] += prob;
    }
    for (int t = code.n - 1; t >= 0; --t) {
      if (++z[t] < w.nz) break;
      z[t] = 0;
    }
  }

  CodeStats stats;
  stats.per_pair_error.assign(static_cast<std::size_t>(mm),
                              std::vector<double>(static_cast<std::size_t>(nn), 0.0));
  double sum = 0.0;
  for (int i = 0; i < mm; ++i)
    for (int j = 0; j < nn; ++j) {
      const double e = std::min(1.0, std::max(0.0, 1.0 - success[i][j]));
      stats.per_pair_error[i][j] = e;
      stats.max_error = std::max(stats.max_error, e);
      sum += e;
    }
  stats.avg_error = sum / (static_cast<double>(mm) * nn);
  return stats;
}

std::optional<DominantType> dominant_type(const MultiUserCode& code, const CodeStats& stats,
                                          double lambda) {
  validate_code(code);
  check_lambda(lambda);
  const int mm = code.m();
  const int nn = code.n_codewords();
  if (static_cast<int>(stats.per_pair_error.size()) != mm)
    throw Error(ErrorKind::invalid_input, "statistics shape does not match the code");
  for (const auto& row : stats.per_pair_error)
    if (static_cast<int>(row.size()) != nn)
      throw Error(ErrorKind::invalid_input, "statistics shape does not match the code");

  // Qualifying pairs decode correctly with probability >= (1 - lambda) / 2.
  const double success_floor = (1.0 - lambda) / 2.0;
  std::map<EmpiricalType, std::vector<std::pair<int, int>>> buckets;
  for (int i = 0; i < mm; ++i)
    for (int j = 0; j < nn; ++j) {
      if (1.0 - stats.per_pair_error[i][j] < success_floor) continue;
      EmpiricalType jt = joint_type(code.u[i], code.v[j], static_cast<std::size_t>(code.nx),
                                    static_cast<std::size_t>(code.ny));
      buckets[std::move(jt)].emplace_back(i, j);
    }

  std::optional<DominantType> candidate;
  for (auto& [type, pairs] : buckets) {
    // Map iteration is in ascending type order, so strict > keeps the
    // lexicographically smallest count vector on ties.
    if (!candidate || pairs.size() > candidate->pairs.size())
      candidate = DominantType{type, pairs};
  }
  if (!candidate) return std::nullopt;

  const double lam_star = 2.0 * lambda / (1.0 + lambda);
  const double threshold = static_cast<double>(mm) * nn * (1.0 - lam_star) /
                           std::pow(static_cast<double>(code.n) + 1.0,
                                    static_cast<double>(code.nx) * code.ny);
  if (static_cast<double>(candidate->pairs.size()) < threshold - 1e-12) return std::nullopt;
  return candidate;
}

FanoDistribution fano_distribution(const MultiUserCode& code,
                                   const std::vector<std::pair<int, int>>& pair_set) {
  validate_code(code);
  if (pair_set.empty())
    throw Error(ErrorKind::invalid_input, "pair set is empty");
  for (const auto& [i, j] : pair_set)
    if (i < 0 || i >= code.m() || j < 0 || j >= code.n_codewords())
      throw Error(ErrorKind::invalid_input, "pair index out of range");
  std::vector<std::pair<int, int>> sorted = pair_set;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw Error(ErrorKind::invalid_input, "pair set contains a duplicate");

  FanoDistribution f;
  f.pairs = pair_set;
  f.mass = 1.0 / static_cast<double>(pair_set.size());
  return f;
}

JointDistribution fano_letter_joint(const MultiUserCode& code, const FanoDistribution& f,
                                    int t) {
  if (t < 0 || t >= code.n)
    throw Error(ErrorKind::invalid_input, "position out of range");
  return counts_to_joint(letter_counts(code, f.pairs, t), code.nx, code.ny,
                         static_cast<double>(f.pairs.size()));
}

double fano_block_mi(const MultiUserCode& code, const FanoDistribution& f) {
  // Merge codewords that coincide as sequences: the blocks are random
  // variables, so equal values share one outcome.
  std::map<std::vector<int>, int> uid, vid;
  for (const auto& [i, j] : f.pairs) {
    uid.emplace(code.u[i], static_cast<int>(uid.size()));
    vid.emplace(code.v[j], static_cast<int>(vid.size()));
  }
  std::vector<double> flat(uid.size() * vid.size(), 0.0);
  for (const auto& [i, j] : f.pairs)
    flat[static_cast<std::size_t>(uid[code.u[i]]) * vid.size() + vid[code.v[j]]] += f.mass;
  return mutual_information(JointDistribution({uid.size(), vid.size()}, std::move(flat)));
}

JointDistribution average_letter_joint(const MultiUserCode& code, const FanoDistribution& f) {
  std::vector<std::int64_t> total(static_cast<std::size_t>(code.nx) * code.ny, 0);
  for (int t = 0; t < code.n; ++t) {
    const auto c = letter_counts(code, f.pairs, t);
    for (std::size_t i = 0; i < c.size(); ++i) total[i] += c[i];
  }
  return counts_to_joint(total, code.nx, code.ny,
                         static_cast<double>(f.pairs.size()) * code.n);
}

Lemma1Report lemma1_check(const MultiUserCode& code,
                          const std::vector<std::pair<int, int>>& a, double lambda) {
  check_lambda(lambda);
  const FanoDistribution f = fano_distribution(code, a);
  Lemma1Report rep;
  rep.lhs = fano_block_mi(code, f);
  rep.rhs = subcode_mi_budget_bits(code.n, lambda, code.nx, code.ny);
  rep.pass = rep.lhs <= rep.rhs + 1e-9;
  return rep;
}

double wringing_sigma(std::int64_t n, double lambda, int ax, int ay) {
  return subcode_mi_budget_bits(n, lambda, ax, ay) * detail::kLn2;
}

WringingResult wring(const MultiUserCode& code, const std::vector<std::pair<int, int>>& a,
                     double delta, double sigma) {
  const FanoDistribution f = fano_distribution(code, a);
  if (!(delta > 0.0) || !(delta < sigma) || !std::isfinite(sigma))
    throw Error(ErrorKind::invalid_input, "need 0 < delta < sigma");

  WringingResult res;
  res.sigma = sigma;
  res.delta = delta;
  std::vector<std::pair<int, int>> cur = f.pairs;

  while (true) {
    double mx = -1.0;
    int tstar = -1;
    for (int t = 0; t < code.n; ++t) {
      const double mi = letter_mi_nats(code, cur, t);
      if (mi > mx) {
        mx = mi;
        tstar = t;
      }
    }
    res.max_letter_mi = std::max(mx, 0.0);
    if (mx <= delta) break;
    if (!(static_cast<double>(res.k) < 2.0 * sigma / delta)) {
      res.cap_hit = true;
      break;
    }
    const auto counts = letter_counts(code, cur, tstar);
    std::int64_t top = -1;
    int xbar = 0, ybar = 0;
    for (int x = 0; x < code.nx; ++x)
      for (int y = 0; y < code.ny; ++y)
        if (counts[static_cast<std::size_t>(x) * code.ny + y] > top) {
          top = counts[static_cast<std::size_t>(x) * code.ny + y];
          xbar = x;
          ybar = y;
        }
    std::vector<std::pair<int, int>> next;
    for (const auto& [i, j] : cur)
      if (code.u[i][tstar] == xbar && code.v[j][tstar] == ybar) next.emplace_back(i, j);
    if (next.empty()) {
      res.emptied = true;
      break;
    }
    cur.swap(next);
    res.coords.push_back({tstar, xbar, ybar});
    ++res.k;
  }

  res.subcode = cur;
  res.retained_fraction =
      static_cast<double>(cur.size()) / static_cast<double>(f.pairs.size());
  res.floor = std::pow(
      delta / (static_cast<double>(code.nx) * code.ny * (2.0 * sigma - delta)),
      static_cast<double>(res.k));
  res.floor_met = res.retained_fraction >= res.floor - 1e-12;
  return res;
}

double independence_gap(const MultiUserCode& code,
                        const std::vector<std::pair<int, int>>& pairs) {
  const FanoDistribution f = fano_distribution(code, pairs);
  double gap = 0.0;
  for (int t = 0; t < code.n; ++t) {
    const JointDistribution joint = fano_letter_joint(code, f, t);
    const Distribution px = joint.marginal(0);
    const Distribution py = joint.marginal(1);
    std::vector<double> prod(static_cast<std::size_t>(code.nx) * code.ny);
    for (int x = 0; x < code.nx; ++x)
      for (int y = 0; y < code.ny; ++y)
        prod[static_cast<std::size_t>(x) * code.ny + y] = px[x] * py[y];
    const JointDistribution indep(
        {static_cast<std::size_t>(code.nx), static_cast<std::size_t>(code.ny)}, std::move(prod));
    gap = std::max(gap, l1_distance(joint, indep));
  }
  return gap;
}

AugustinReport augustin_check(const MultiUserCode& code, const Mac& w, SubcodeSide side,
                              int fixed_index, const std::vector<int>& members,
                              double lambda) {
  validate_code(code);
  check_channel_match(w, code);
  check_lambda(lambda);
  const bool row = side == SubcodeSide::row;
  const int fixed_limit = row ? code.n_codewords() : code.m();
  const int member_limit = row ? code.m() : code.n_codewords();
  if (fixed_index < 0 || fixed_index >= fixed_limit)
    throw Error(ErrorKind::invalid_input, "fixed codeword index out of range");
  if (members.empty())
    throw Error(ErrorKind::invalid_input, "subcode member list is empty");
  std::vector<int> sorted = members;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw Error(ErrorKind::invalid_input, "subcode member list contains a duplicate");
  for (int idx : members)
    if (idx < 0 || idx >= member_limit)
      throw Error(ErrorKind::invalid_input, "subcode member index out of range");

  const int alphabet = row ? code.nx : code.ny;
  const std::vector<int>& fixed_word = row ? code.v[fixed_index] : code.u[fixed_index];
  const double msub = static_cast<double>(members.size());

  AugustinReport rep;
  rep.lhs = std::log2(msub);
  for (int t = 0; t < code.n; ++t) {
    // P(letter) from the subcode, pushed through this position's slice.
    std::vector<double> flat(static_cast<std::size_t>(alphabet) * w.nz, 0.0);
    for (int idx : members) {
      const int s = row ? code.u[idx][t] : code.v[idx][t];
      for (int z = 0; z < w.nz; ++z)
        flat[static_cast<std::size_t>(s) * w.nz + z] +=
            (row ? w.at(s, fixed_word[t], z) : w.at(fixed_word[t], s, z)) / msub;
    }
    rep.mi_sum += mutual_information(JointDistribution(
        {static_cast<std::size_t>(alphabet), static_cast<std::size_t>(w.nz)}, std::move(flat)));
  }
  rep.rhs = rep.mi_sum +
            3.0 / (1.0 - lambda) * alphabet * std::sqrt(static_cast<double>(code.n));
  rep.pass = rep.lhs < rep.rhs;
  return rep;
}

StrongConverseReport strong_converse_check(const Mac& w, const MultiUserCode& code,
                                           double lambda,
                                           const std::optional<EpsilonModel>& model,
                                           const SearchOptions& opts) {
  check_lambda(lambda);
  const CodeStats stats = error_probabilities(w, code);
  StrongConverseReport rep;
  rep.rates.r1 = std::log2(static_cast<double>(code.m())) / code.n;
  rep.rates.r2 = std::log2(static_cast<double>(code.n_codewords())) / code.n;

  const std::optional<DominantType> dom = dominant_type(code, stats, lambda);
  if (!dom) return rep;

  EpsilonModel em;
  if (model) {
    em = *model;
  } else {
    em.lambda = lambda;
    em.k_mode = EpsilonModel::KMode::cap;
  }
  rep.hypothesis_met = true;
  rep.p = dom->p.to_joint();
  rep.epsilon = em(code.n, code.nx, code.ny);
  const RegionVerdict verdict = region_membership(w, rep.p, rep.rates, rep.epsilon, opts);
  rep.inside = verdict.inside;
  rep.slack = verdict.slack;
  return rep;
}

SpherePackingReport sphere_packing_verify(const Mac& w, const MultiUserCode& code,
                                          RatePair r, double delta,
                                          const ExponentResult& e_sp) {
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw Error(ErrorKind::invalid_input, "delta must be positive");
  if (!(r.r1 >= 0.0) || !(r.r2 >= 0.0))
    throw Error(ErrorKind::invalid_input, "rates must be nonnegative");
  validate_code(code);
  check_channel_match(w, code);

  SpherePackingReport rep;
  rep.code_rates.r1 = std::log2(static_cast<double>(code.m())) / code.n;
  rep.code_rates.r2 = std::log2(static_cast<double>(code.n_codewords())) / code.n;
  if (rep.code_rates.r1 < r.r1 + delta - 1e-12 || rep.code_rates.r2 < r.r2 + delta - 1e-12)
    throw Error(ErrorKind::invalid_input,
                "code rates fall short of the rate-plus-delta precondition");

  rep.max_error = error_probabilities(w, code).max_error;
  rep.bound = e_sp.infinite
                  ? 0.0
                  : 0.5 * std::exp2(-static_cast<double>(code.n) * e_sp.value * (1.0 + delta));
  rep.pass = rep.max_error >= rep.bound - 1e-12;
  return rep;
}

}  // namespace macx
