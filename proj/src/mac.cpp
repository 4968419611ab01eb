#include "macx/mac.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "kernels.hpp"
#include "opt.hpp"
#include "region.hpp"

namespace macx {

using detail::kBoundarySlop;
using detail::kInf;
using detail::kMarginalPenalty;
using detail::kMarginalTol;
using detail::kMaxA;
using detail::kMaxQ;
using detail::RawDecomp;

// ---------------------------------------------------------------------------
// Channel construction and validation
// ---------------------------------------------------------------------------

void validate_mac(Mac& w) {
  if (w.nx < 1 || w.ny < 1 || w.nz < 1)
    throw Error(ErrorKind::invalid_input, "channel alphabets must be nonempty");
  if (w.nx > 64 || w.ny > 64 || w.nz > 64)
    throw Error(ErrorKind::size_guard, "channel alphabet larger than 64 symbols");
  const std::size_t want = static_cast<std::size_t>(w.nx) * w.ny * w.nz;
  if (w.w.size() != want)
    throw Error(ErrorKind::invalid_input, "channel table size does not match alphabets");
  for (int x = 0; x < w.nx; ++x) {
    for (int y = 0; y < w.ny; ++y) {
      double* row = w.row(x, y);
      double sum = 0.0;
      for (int z = 0; z < w.nz; ++z) {
        if (!(row[z] >= -1e-12) || !std::isfinite(row[z]))
          throw Error(ErrorKind::invalid_input, "channel entry negative or not finite");
        if (row[z] < 0.0) row[z] = 0.0;
        sum += row[z];
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw Error(ErrorKind::invalid_input, "channel row does not sum to 1 at (" +
                                                  std::to_string(x) + ", " + std::to_string(y) + ")");
      for (int z = 0; z < w.nz; ++z) row[z] /= sum;
    }
  }
}

Mac make_mac(int nx, int ny, int nz, std::vector<double> w) {
  Mac m;
  m.nx = nx;
  m.ny = ny;
  m.nz = nz;
  m.w = std::move(w);
  validate_mac(m);
  return m;
}

void validate_options(const SearchOptions& opts) {
  if (opts.grid_resolution < 2 || opts.grid_resolution > 4096)
    throw Error(ErrorKind::invalid_input, "grid_resolution out of range [2, 4096]");
  if (opts.multistart_count < 1 || opts.multistart_count > 100000)
    throw Error(ErrorKind::invalid_input, "multistart_count out of range [1, 100000]");
  if (!(opts.tolerance > 0.0) || opts.tolerance > 1e-2)
    throw Error(ErrorKind::invalid_input, "tolerance must lie in (0, 1e-2]");
  if (opts.max_iterations < 10 || opts.max_iterations > 1000000)
    throw Error(ErrorKind::invalid_input, "max_iterations out of range [10, 1000000]");
}

// ---------------------------------------------------------------------------
// Pentagon evaluation
// ---------------------------------------------------------------------------

namespace {

void check_decomposition_shape(const Mac& w, const TimeSharingDecomposition& d) {
  const std::size_t m = d.q_weights.size();
  if (m < 1) throw Error(ErrorKind::invalid_input, "decomposition has no components");
  if (d.px_given_q.rows() != m || d.py_given_q.rows() != m)
    throw Error(ErrorKind::invalid_input, "decomposition component counts disagree");
  if (static_cast<int>(d.px_given_q.cols()) != w.nx ||
      static_cast<int>(d.py_given_q.cols()) != w.ny)
    throw Error(ErrorKind::invalid_input, "decomposition alphabet does not match channel");
  double sum = 0.0;
  for (double qw : d.q_weights) {
    if (!(qw >= -1e-12) || !std::isfinite(qw))
      throw Error(ErrorKind::invalid_input, "decomposition weight negative or not finite");
    sum += qw;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw Error(ErrorKind::invalid_input, "decomposition weights do not sum to 1");
}

}  // namespace

PentagonRates pentagon_rates(const Mac& w, const TimeSharingDecomposition& d) {
  check_decomposition_shape(w, d);
  double wsum = 0.0;
  for (double qw : d.q_weights) wsum += qw;
  std::vector<double> scratch(static_cast<std::size_t>(w.nx) * w.ny + w.nz);
  PentagonRates out;
  for (std::size_t q = 0; q < d.q_weights.size(); ++q) {
    const double qw = d.q_weights[q] / wsum;
    if (qw <= 0.0) continue;
    const detail::InfoTriple t = detail::component_info_triple(
        d.px_given_q.row(q).data().data(), d.py_given_q.row(q).data().data(), w.w.data(),
        w.nx, w.ny, w.nz, scratch.data());
    out.i1 += qw * t.i1;
    out.i2 += qw * t.i2;
    out.i12 += qw * t.i12;
  }
  return out;
}

JointDistribution decomposition_marginal(const TimeSharingDecomposition& d) {
  const std::size_t m = d.q_weights.size();
  if (m < 1 || d.px_given_q.rows() != m || d.py_given_q.rows() != m)
    throw Error(ErrorKind::invalid_input, "decomposition component counts disagree");
  const std::size_t nx = d.px_given_q.cols();
  const std::size_t ny = d.py_given_q.cols();
  double wsum = 0.0;
  for (double qw : d.q_weights) wsum += qw;
  if (!(wsum > 0.0))
    throw Error(ErrorKind::invalid_input, "decomposition weights do not sum to 1");
  std::vector<double> flat(nx * ny, 0.0);
  for (std::size_t q = 0; q < m; ++q) {
    const double qw = d.q_weights[q] / wsum;
    if (qw <= 0.0) continue;
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t y = 0; y < ny; ++y)
        flat[x * ny + y] += qw * d.px_given_q.row(q)[x] * d.py_given_q.row(q)[y];
  }
  return JointDistribution({nx, ny}, std::move(flat));
}

// ---------------------------------------------------------------------------
// Decomposition families (internal)
// ---------------------------------------------------------------------------

namespace detail {

namespace {

// Two-component split of a 2x2 joint with the first component anchored at
// independent inputs ((1-alpha, alpha), (1-beta, beta)). The determinant of
// the residual is linear in the component weight, so the weight that makes
// the residual rank one (hence itself a product) is available in closed
// form. Returns false when that weight is out of range or the residual
// picks up negative mass.
bool closed_form_split(const double* p, double alpha, double beta, RawDecomp& out) {
  const double a0 = 1.0 - alpha, a1 = alpha, b0 = 1.0 - beta, b1 = beta;
  const double det = p[0] * p[3] - p[1] * p[2];
  const double s = a0 * b0 * p[3] + a1 * b1 * p[0] - a0 * b1 * p[2] - a1 * b0 * p[1];
  if (std::abs(s) < 1e-13) return false;
  double w = det / s;
  if (!(w > 1e-12) || w > 1.0 + 1e-9) return false;
  if (w > 1.0) w = 1.0;
  const double prod[4] = {a0 * b0, a0 * b1, a1 * b0, a1 * b1};
  out = RawDecomp{};
  out.nx = 2;
  out.ny = 2;
  out.a[0][0] = a0;
  out.a[0][1] = a1;
  out.b[0][0] = b0;
  out.b[0][1] = b1;
  if (w >= 1.0 - 1e-12) {
    double l1 = 0.0;
    for (int i = 0; i < 4; ++i) l1 += std::abs(p[i] - prod[i]);
    if (l1 > 1e-9) return false;
    out.m = 1;
    out.w[0] = 1.0;
    return true;
  }
  const double rm = 1.0 - w;
  double r[4];
  for (int i = 0; i < 4; ++i) {
    r[i] = p[i] - w * prod[i];
    if (r[i] < -1e-10) return false;
    if (r[i] < 0.0) r[i] = 0.0;
  }
  // the residual is rank one by construction, so its own marginals factor it
  double ra1 = (r[2] + r[3]) / rm;
  double rb1 = (r[1] + r[3]) / rm;
  ra1 = std::clamp(ra1, 0.0, 1.0);
  rb1 = std::clamp(rb1, 0.0, 1.0);
  out.m = 2;
  out.w[0] = w;
  out.w[1] = rm;
  out.a[1][0] = 1.0 - ra1;
  out.a[1][1] = ra1;
  out.b[1][0] = 1.0 - rb1;
  out.b[1][1] = rb1;
  return true;
}

}  // namespace

std::vector<RawDecomp> family_decomps(const double* pxy, int nx, int ny, int grid) {
  std::vector<RawDecomp> fam;
  double ax[kMaxA] = {0.0};
  double by[kMaxA] = {0.0};
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y) {
      ax[x] += pxy[x * ny + y];
      by[y] += pxy[x * ny + y];
    }

  // product split, when the joint factorizes
  double prod_l1 = 0.0;
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y) prod_l1 += std::abs(pxy[x * ny + y] - ax[x] * by[y]);
  if (prod_l1 <= 1e-9) {
    RawDecomp d;
    d.m = 1;
    d.nx = nx;
    d.ny = ny;
    d.w[0] = 1.0;
    for (int x = 0; x < nx; ++x) d.a[0][x] = ax[x];
    for (int y = 0; y < ny; ++y) d.b[0][y] = by[y];
    fam.push_back(d);
  }

  // condition on X: one product component per supported x
  {
    int sx = 0;
    for (int x = 0; x < nx; ++x)
      if (ax[x] > 1e-15) ++sx;
    if (sx >= 1 && sx <= kMaxQ) {
      RawDecomp d;
      d.nx = nx;
      d.ny = ny;
      for (int x = 0; x < nx; ++x) {
        if (ax[x] <= 1e-15) continue;
        const int q = d.m++;
        d.w[q] = ax[x];
        d.a[q][x] = 1.0;
        for (int y = 0; y < ny; ++y) d.b[q][y] = pxy[x * ny + y] / ax[x];
      }
      fam.push_back(d);
    }
  }

  // condition on Y
  {
    int sy = 0;
    for (int y = 0; y < ny; ++y)
      if (by[y] > 1e-15) ++sy;
    if (sy >= 1 && sy <= kMaxQ) {
      RawDecomp d;
      d.nx = nx;
      d.ny = ny;
      for (int y = 0; y < ny; ++y) {
        if (by[y] <= 1e-15) continue;
        const int q = d.m++;
        d.w[q] = by[y];
        d.b[q][y] = 1.0;
        for (int x = 0; x < nx; ++x) d.a[q][x] = pxy[x * ny + y] / by[y];
      }
      fam.push_back(d);
    }
  }

  // one point mass per supported cell
  {
    int sc = 0;
    for (int i = 0; i < nx * ny; ++i)
      if (pxy[i] > 1e-15) ++sc;
    if (sc >= 1 && sc <= kMaxQ) {
      RawDecomp d;
      d.nx = nx;
      d.ny = ny;
      for (int x = 0; x < nx; ++x)
        for (int y = 0; y < ny; ++y) {
          if (pxy[x * ny + y] <= 1e-15) continue;
          const int q = d.m++;
          d.w[q] = pxy[x * ny + y];
          d.a[q][x] = 1.0;
          d.b[q][y] = 1.0;
        }
      fam.push_back(d);
    }
  }

  // lattice of closed-form two-component splits (2x2 inputs only)
  if (nx == 2 && ny == 2 && grid >= 1) {
    for (int i = 0; i <= grid; ++i) {
      for (int j = 0; j <= grid; ++j) {
        RawDecomp d;
        if (closed_form_split(pxy, static_cast<double>(i) / grid,
                              static_cast<double>(j) / grid, d))
          fam.push_back(d);
      }
    }
  }
  return fam;
}

RawDecomp random_exact_decomp(const double* pxy, int nx, int ny, Rng& rng) {
  if (nx == 2 && ny == 2) {
    for (int attempt = 0; attempt < 24; ++attempt) {
      double q[4] = {pxy[0], pxy[1], pxy[2], pxy[3]};
      double w0 = 0.0;
      int cell = -1;
      if (rng.u01() < 0.5) {
        const int c = rng.index(4);
        if (pxy[c] > 1e-9) {
          cell = c;
          w0 = (0.1 + 0.8 * rng.u01()) * pxy[c];
          for (int i = 0; i < 4; ++i) q[i] = pxy[i] / (1.0 - w0);
          q[cell] = (pxy[cell] - w0) / (1.0 - w0);
        }
      }
      RawDecomp d;
      if (!closed_form_split(q, rng.u01(), rng.u01(), d)) continue;
      if (cell >= 0) {
        for (int qi = d.m; qi > 0; --qi) {
          d.w[qi] = d.w[qi - 1] * (1.0 - w0);
          d.a[qi] = d.a[qi - 1];
          d.b[qi] = d.b[qi - 1];
        }
        ++d.m;
        d.w[0] = w0;
        d.a[0] = {};
        d.b[0] = {};
        d.a[0][cell / 2] = 1.0;
        d.b[0][cell % 2] = 1.0;
      }
      return d;
    }
  }
  auto fam = family_decomps(pxy, nx, ny, 0);
  if (!fam.empty()) return fam[rng.index(static_cast<int>(fam.size()))];
  return RawDecomp{};
}

// ---------------------------------------------------------------------------
// Max-min slack search
// ---------------------------------------------------------------------------

namespace {

// Block layout: [weights(4)] [a_0..a_3 (nx each)] [b_0..b_3 (ny each)].
SimplexBlocks encode_decomp(const RawDecomp& d, int nx, int ny) {
  SimplexBlocks sb;
  sb.offsets.resize(10);
  sb.offsets[0] = 0;
  sb.offsets[1] = kMaxQ;
  for (int q = 0; q < kMaxQ; ++q) sb.offsets[2 + q] = sb.offsets[1 + q] + nx;
  for (int q = 0; q < kMaxQ; ++q) sb.offsets[6 + q] = sb.offsets[5 + q] + ny;
  sb.x.assign(static_cast<std::size_t>(sb.offsets[9]), 0.0);
  for (int q = 0; q < kMaxQ; ++q) sb.x[q] = q < d.m ? d.w[q] : 0.0;
  for (int q = 0; q < kMaxQ; ++q) {
    double* a = sb.x.data() + sb.offsets[1 + q];
    double* b = sb.x.data() + sb.offsets[5 + q];
    if (q < d.m) {
      for (int x = 0; x < nx; ++x) a[x] = d.a[q][x];
      for (int y = 0; y < ny; ++y) b[y] = d.b[q][y];
    } else {
      for (int x = 0; x < nx; ++x) a[x] = 1.0 / nx;
      for (int y = 0; y < ny; ++y) b[y] = 1.0 / ny;
    }
  }
  return sb;
}

RawDecomp decode_decomp(const SimplexBlocks& sb, int nx, int ny) {
  RawDecomp d;
  d.nx = nx;
  d.ny = ny;
  d.m = kMaxQ;
  for (int q = 0; q < kMaxQ; ++q) {
    d.w[q] = sb.x[q];
    const double* a = sb.x.data() + sb.offsets[1 + q];
    const double* b = sb.x.data() + sb.offsets[5 + q];
    for (int x = 0; x < nx; ++x) d.a[q][x] = a[x];
    for (int y = 0; y < ny; ++y) d.b[q][y] = b[y];
  }
  return d;
}

// Drop numerically dead components and renormalize the weights.
RawDecomp compact_decomp(const RawDecomp& d) {
  RawDecomp out;
  out.nx = d.nx;
  out.ny = d.ny;
  double sum = 0.0;
  for (int q = 0; q < d.m; ++q) {
    if (d.w[q] <= 1e-12) continue;
    out.w[out.m] = d.w[q];
    out.a[out.m] = d.a[q];
    out.b[out.m] = d.b[q];
    sum += d.w[q];
    ++out.m;
  }
  if (out.m == 0) {
    out = d;
    out.m = d.m > 0 ? d.m : 1;
    return out;
  }
  for (int q = 0; q < out.m; ++q) out.w[q] /= sum;
  return out;
}

struct BlockEval {
  const double* v = nullptr;
  int nx = 0, ny = 0, nz = 0;
  const double* pxy = nullptr;  // null = free marginal
  double t1 = 0.0, t2 = 0.0, t3 = 0.0;
  double penalty = kMarginalPenalty;
  mutable std::vector<double> scratch;

  double min3(const InfoTriple& t) const {
    return std::min({t.i1 - t1, t.i2 - t2, t.i12 - t3});
  }

  InfoTriple triple(const SimplexBlocks& sb) const {
    InfoTriple total;
    for (int q = 0; q < kMaxQ; ++q) {
      const double wq = sb.x[q];
      if (wq <= 1e-15) continue;
      const InfoTriple t = component_info_triple(sb.block(1 + q), sb.block(5 + q), v, nx,
                                                 ny, nz, scratch.data());
      total.i1 += wq * t.i1;
      total.i2 += wq * t.i2;
      total.i12 += wq * t.i12;
    }
    return total;
  }

  double marginal_l1(const SimplexBlocks& sb) const {
    if (pxy == nullptr) return 0.0;
    double l1 = 0.0;
    for (int x = 0; x < nx; ++x)
      for (int y = 0; y < ny; ++y) {
        double m = 0.0;
        for (int q = 0; q < kMaxQ; ++q) m += sb.x[q] * sb.block(1 + q)[x] * sb.block(5 + q)[y];
        l1 += std::abs(m - pxy[x * ny + y]);
      }
    return l1;
  }

  double operator()(const SimplexBlocks& sb) const {
    return min3(triple(sb)) - penalty * marginal_l1(sb);
  }
};

struct ScoredDecomp {
  RawDecomp d;
  double slack = -kInf;
  InfoTriple info;
  double l1 = kInf;
};

ScoredDecomp score_decomp(const RawDecomp& d, const BlockEval& ev) {
  ScoredDecomp s;
  s.d = d;
  std::vector<double> scratch(static_cast<std::size_t>(ev.nx) * ev.ny + ev.nz);
  s.info = decomp_triple(d, ev.v, ev.nz, scratch.data());
  s.slack = ev.min3(s.info);
  s.l1 = ev.pxy ? decomp_marginal_l1(d, ev.pxy) : 0.0;
  return s;
}

// For 2x2 joints: rebuild an exactly marginal-feasible two-component split
// anchored at each component of d, keeping the best. Recovers exactness
// after penalty-search drift.
bool exactify_2x2(const RawDecomp& d, const BlockEval& ev, ScoredDecomp& out) {
  if (ev.nx != 2 || ev.ny != 2 || ev.pxy == nullptr) return false;
  bool found = false;
  for (int q = 0; q < d.m; ++q) {
    if (d.w[q] <= 1e-3) continue;
    RawDecomp cand;
    if (!closed_form_split(ev.pxy, d.a[q][1], d.b[q][1], cand)) continue;
    const ScoredDecomp s = score_decomp(cand, ev);
    if (!found || s.slack > out.slack) {
      out = s;
      found = true;
    }
  }
  return found;
}

}  // namespace

SlackResult max_decomp_slack(const double* v, int nx, int ny, int nz, const double* pxy,
                             double t1, double t2, double t3, const SearchOptions& opts,
                             const RawDecomp* warm, int n_warm) {
  BlockEval ev;
  ev.v = v;
  ev.nx = nx;
  ev.ny = ny;
  ev.nz = nz;
  ev.pxy = pxy;
  ev.t1 = t1;
  ev.t2 = t2;
  ev.t3 = t3;
  ev.scratch.assign(static_cast<std::size_t>(nx) * ny + nz, 0.0);

  Rng rng(opts.seed);
  std::vector<RawDecomp> seeds;
  if (pxy != nullptr) {
    auto fam = family_decomps(pxy, nx, ny, std::min(opts.grid_resolution, 16));
    seeds.insert(seeds.end(), fam.begin(), fam.end());
    for (int i = 0; i < opts.multistart_count; ++i) {
      RawDecomp d = random_exact_decomp(pxy, nx, ny, rng);
      if (d.m > 0) seeds.push_back(d);
    }
    // free-form mixtures for joints the structural family misses; the
    // marginal penalty pulls these onto the constraint during refinement
    for (int i = 0; i < opts.multistart_count / 2 + 1; ++i) {
      RawDecomp d;
      d.m = kMaxQ;
      d.nx = nx;
      d.ny = ny;
      rng.dirichlet(d.w.data(), kMaxQ);
      for (int q = 0; q < kMaxQ; ++q) {
        rng.dirichlet(d.a[q].data(), nx);
        rng.dirichlet(d.b[q].data(), ny);
      }
      seeds.push_back(d);
    }
  } else {
    // lattice of single products for small alphabets
    if (nx <= 4 && ny <= 4) {
      const auto tx = enumerate_types(4, nx);
      const auto ty = enumerate_types(4, ny);
      for (const auto& cx : tx) {
        for (const auto& cy : ty) {
          RawDecomp d;
          d.m = 1;
          d.nx = nx;
          d.ny = ny;
          d.w[0] = 1.0;
          for (int x = 0; x < nx; ++x) d.a[0][x] = static_cast<double>(cx.counts()[x]) / 4.0;
          for (int y = 0; y < ny; ++y) d.b[0][y] = static_cast<double>(cy.counts()[y]) / 4.0;
          seeds.push_back(d);
        }
      }
    }
    for (int i = 0; i < opts.multistart_count; ++i) {
      RawDecomp d;
      d.nx = nx;
      d.ny = ny;
      if (i % 2 == 0) {
        d.m = 1;
        d.w[0] = 1.0;
        rng.dirichlet(d.a[0].data(), nx);
        rng.dirichlet(d.b[0].data(), ny);
      } else {
        d.m = kMaxQ;
        rng.dirichlet(d.w.data(), kMaxQ);
        for (int q = 0; q < kMaxQ; ++q) {
          rng.dirichlet(d.a[q].data(), nx);
          rng.dirichlet(d.b[q].data(), ny);
        }
      }
      seeds.push_back(d);
    }
  }
  for (int i = 0; i < n_warm; ++i) {
    if (warm[i].m > 0 && warm[i].nx == nx && warm[i].ny == ny) seeds.push_back(warm[i]);
  }

  SlackResult res;
  if (seeds.empty()) return res;

  // cheap ranking of every seed, refinement of the best few
  std::vector<std::pair<double, std::size_t>> order;
  order.reserve(seeds.size());
  {
    SimplexBlocks sb;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      sb = encode_decomp(seeds[i], nx, ny);
      order.emplace_back(-ev(sb), i);
    }
  }
  std::stable_sort(order.begin(), order.end());
  const std::size_t refine_count = std::min<std::size_t>(order.size(), 6);

  std::vector<ScoredDecomp> finals;
  for (std::size_t c = 0; c < refine_count; ++c) {
    SimplexBlocks sb = encode_decomp(seeds[order[c].second], nx, ny);
    pattern_search_max(sb, ev, 0.25, 1e-5, opts.max_iterations);
    if (pxy != nullptr && ev.marginal_l1(sb) > 1e-8) {
      BlockEval hard = ev;
      hard.penalty = 1e6;
      hard.scratch = ev.scratch;
      pattern_search_max(sb, hard, 0.02, 1e-7, opts.max_iterations / 2 + 10);
    }
    ScoredDecomp s = score_decomp(compact_decomp(decode_decomp(sb, nx, ny)), ev);
    ScoredDecomp exact;
    if (exactify_2x2(s.d, ev, exact) && (s.l1 > kMarginalTol || exact.slack >= s.slack))
      s = exact;
    finals.push_back(s);
  }

  // best feasible candidate wins; otherwise report the closest miss
  std::size_t best = finals.size();
  std::size_t nearest = 0;
  for (std::size_t i = 0; i < finals.size(); ++i) {
    if (finals[i].l1 < finals[nearest].l1) nearest = i;
    if (finals[i].l1 > kMarginalTol) continue;
    if (best == finals.size() || finals[i].slack > finals[best].slack) best = i;
  }
  const ScoredDecomp& pick = best < finals.size() ? finals[best] : finals[nearest];
  res.slack = pick.slack;
  res.info = pick.info;
  res.best = pick.d;
  res.marginal_l1 = pick.l1;
  res.marginal_ok = pick.l1 <= kMarginalTol;
  return res;
}

SlackResult refine_decomp_slack(const double* v, int nx, int ny, int nz, const double* pxy,
                                double t1, double t2, double t3, const RawDecomp& start) {
  BlockEval ev;
  ev.v = v;
  ev.nx = nx;
  ev.ny = ny;
  ev.nz = nz;
  ev.pxy = pxy;
  ev.t1 = t1;
  ev.t2 = t2;
  ev.t3 = t3;
  ev.scratch.assign(static_cast<std::size_t>(nx) * ny + nz, 0.0);

  SimplexBlocks sb = encode_decomp(start, nx, ny);
  pattern_search_max(sb, ev, 0.1, 1e-5, 220);
  if (pxy != nullptr && ev.marginal_l1(sb) > 1e-8) {
    BlockEval hard = ev;
    hard.penalty = 1e6;
    hard.scratch = ev.scratch;
    pattern_search_max(sb, hard, 0.01, 1e-7, 160);
  }
  ScoredDecomp s = score_decomp(compact_decomp(decode_decomp(sb, nx, ny)), ev);
  ScoredDecomp exact;
  if (exactify_2x2(s.d, ev, exact) && (s.l1 > kMarginalTol || exact.slack >= s.slack))
    s = exact;

  SlackResult res;
  res.slack = s.slack;
  res.info = s.info;
  res.best = s.d;
  res.marginal_l1 = s.l1;
  res.marginal_ok = s.l1 <= kMarginalTol;
  return res;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Region membership
// ---------------------------------------------------------------------------

namespace {

void check_rates(RatePair r) {
  if (!std::isfinite(r.r1) || !std::isfinite(r.r2) || r.r1 < 0.0 || r.r2 < 0.0)
    throw Error(ErrorKind::invalid_input, "rates must be finite and nonnegative");
}

void check_search_alphabets(const Mac& w) {
  if (w.nx > kMaxA || w.ny > kMaxA)
    throw Error(ErrorKind::size_guard,
                "region search supports input alphabets up to 8 symbols");
}

TimeSharingDecomposition to_public_decomp(const RawDecomp& d) {
  std::vector<double> weights;
  std::vector<Distribution> ar;
  std::vector<Distribution> br;
  double sum = 0.0;
  for (int q = 0; q < d.m; ++q) {
    if (d.w[q] <= 1e-12) continue;
    sum += d.w[q];
  }
  for (int q = 0; q < d.m; ++q) {
    if (d.w[q] <= 1e-12) continue;
    weights.push_back(d.w[q] / sum);
    ar.emplace_back(std::vector<double>(d.a[q].begin(), d.a[q].begin() + d.nx));
    br.emplace_back(std::vector<double>(d.b[q].begin(), d.b[q].begin() + d.ny));
  }
  TimeSharingDecomposition out;
  out.q_weights = std::move(weights);
  out.px_given_q = StochasticMatrix(std::move(ar));
  out.py_given_q = StochasticMatrix(std::move(br));
  return out;
}

RegionVerdict membership_impl(const Mac& w, const double* pxy, RatePair r, double epsilon,
                              const SearchOptions& opts) {
  const detail::SlackResult res = detail::max_decomp_slack(
      w.w.data(), w.nx, w.ny, w.nz, pxy, r.r1, r.r2, r.r1 + r.r2, opts);
  if (pxy != nullptr && !res.marginal_ok)
    throw Error(ErrorKind::no_decomposition,
                "no mixture of at most four product inputs matches the joint within 1e-6 "
                "(best L1 " +
                    std::to_string(res.marginal_l1) + ")");
  RegionVerdict verdict;
  verdict.slack = res.slack + epsilon;
  verdict.inside = verdict.slack >= -kBoundarySlop;
  verdict.witness = to_public_decomp(res.best);
  verdict.witness_rates.i1 = res.info.i1;
  verdict.witness_rates.i2 = res.info.i2;
  verdict.witness_rates.i12 = res.info.i12;
  verdict.witness_marginal_l1 = res.marginal_l1;
  return verdict;
}

}  // namespace

RegionVerdict region_membership(const Mac& w, const JointDistribution& p, RatePair r,
                                double epsilon, const SearchOptions& opts) {
  Mac wc = w;
  validate_mac(wc);
  validate_options(opts);
  check_rates(r);
  check_search_alphabets(wc);
  if (!std::isfinite(epsilon) || epsilon < 0.0)
    throw Error(ErrorKind::invalid_input, "epsilon must be finite and nonnegative");
  if (p.rank() != 2 || static_cast<int>(p.dim(0)) != wc.nx ||
      static_cast<int>(p.dim(1)) != wc.ny)
    throw Error(ErrorKind::invalid_input, "joint input shape does not match channel");
  return membership_impl(wc, p.flat().data(), r, epsilon, opts);
}

RegionVerdict capacity_membership(const Mac& w, RatePair r, const SearchOptions& opts) {
  Mac wc = w;
  validate_mac(wc);
  validate_options(opts);
  check_rates(r);
  check_search_alphabets(wc);
  return membership_impl(wc, nullptr, r, 0.0, opts);
}

FeasibilityTriple haroutunian_feasible(const Mac& v, const JointDistribution& p, RatePair r) {
  Mac vc = v;
  validate_mac(vc);
  check_rates(r);
  if (p.rank() != 2 || static_cast<int>(p.dim(0)) != vc.nx ||
      static_cast<int>(p.dim(1)) != vc.ny)
    throw Error(ErrorKind::invalid_input, "joint input shape does not match channel");
  std::vector<double> scratch(static_cast<std::size_t>(vc.nz));
  const detail::InfoTriple t = detail::joint_info_triple(p.flat().data(), vc.w.data(),
                                                         vc.nx, vc.ny, vc.nz, scratch.data());
  FeasibilityTriple out;
  out.info.i1 = t.i1;
  out.info.i2 = t.i2;
  out.info.i12 = t.i12;
  out.c1 = t.i1 <= r.r1;
  out.c2 = t.i2 <= r.r2;
  out.c3 = t.i12 <= r.r1 + r.r2;
  out.any = out.c1 || out.c2 || out.c3;
  return out;
}

double product_channel_prob(const Mac& w, const std::vector<int>& xs,
                            const std::vector<int>& ys, const std::vector<int>& zs) {
  if (xs.size() != ys.size() || xs.size() != zs.size())
    throw Error(ErrorKind::invalid_input, "sequence lengths disagree");
  double p = 1.0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    if (xs[t] < 0 || xs[t] >= w.nx || ys[t] < 0 || ys[t] >= w.ny || zs[t] < 0 ||
        zs[t] >= w.nz)
      throw Error(ErrorKind::invalid_input, "sequence symbol out of range");
    p *= w.at(xs[t], ys[t], zs[t]);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Finite-blocklength slack model
// ---------------------------------------------------------------------------

namespace {

void check_model_args(std::int64_t n, double lambda, int ax, int ay) {
  if (n < 1) throw Error(ErrorKind::invalid_input, "blocklength must be positive");
  if (!(lambda > 0.0) || !(lambda < 1.0))
    throw Error(ErrorKind::invalid_input, "lambda must lie in (0, 1)");
  if (ax < 1 || ay < 1)
    throw Error(ErrorKind::invalid_input, "alphabet sizes must be positive");
}

}  // namespace

double subcode_mi_budget_bits(std::int64_t n, double lambda, int ax, int ay) {
  check_model_args(n, lambda, ax, ay);
  const double lam_star = 2.0 * lambda / (1.0 + lambda);
  return -std::log2(1.0 - lam_star) +
         static_cast<double>(ax) * ay * std::log2(static_cast<double>(n) + 1.0);
}

double wringing_step_cap(std::int64_t n, double lambda, int ax, int ay) {
  const double sigma_nats = subcode_mi_budget_bits(n, lambda, ax, ay) * detail::kLn2;
  const double delta = 1.0 / std::sqrt(static_cast<double>(n));
  return std::ceil(2.0 * sigma_nats / delta);
}

double EpsilonModel::operator()(std::int64_t n, int ax, int ay) const {
  check_model_args(n, lambda, ax, ay);
  if (!(k >= 0.0) || !std::isfinite(k))
    throw Error(ErrorKind::invalid_input, "conditioning-step count must be nonnegative");
  const double lam_prime = (1.0 + lambda) / 2.0;
  const double lam_star = 2.0 * lambda / (1.0 + lambda);
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const double cells = static_cast<double>(ax) * ay;
  const double cap = wringing_step_cap(n, lambda, ax, ay);

  double k_eff = 0.0;
  switch (k_mode) {
    case KMode::zero:
      k_eff = 0.0;
      break;
    case KMode::cap:
      k_eff = cap;
      break;
    case KMode::given:
      k_eff = std::min(k, cap);
      break;
  }

  const double biggest = std::max({static_cast<double>(ax), static_cast<double>(ay), cells});
  const double term1 = 3.0 / (1.0 - lam_prime) * biggest / sqrt_n;
  double term2 = 0.0;
  if (k_eff > 0.0) {
    const double sigma_bits = subcode_mi_budget_bits(n, lambda, ax, ay);
    term2 = k_eff / static_cast<double>(n) * std::log2(2.0 * sigma_bits * cells * sqrt_n);
  }
  const double term3 = (cells * std::log2(static_cast<double>(n) + 1.0) +
                        std::log2(static_cast<double>(n)) - std::log2(1.0 - lam_star)) /
                       static_cast<double>(n);
  return term1 + term2 + term3;
}

}  // namespace macx
