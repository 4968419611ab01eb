#pragma once

// Internal machinery for time-sharing decompositions and the max-min slack
// search behind region membership and the sphere-packing feasibility tests.
// Decompositions live in fixed-capacity structs (|Q| <= 4, alphabets <= 8)
// so the search loops stay allocation-free.

#include <array>
#include <vector>

#include "kernels.hpp"
#include "macx/mac.hpp"
#include "opt.hpp"

namespace macx::detail {

inline constexpr int kMaxQ = 4;
inline constexpr int kMaxA = 8;

// Slop applied to boundary comparisons: a pentagon contains a rate point
// when every inequality holds within this tolerance.
inline constexpr double kBoundarySlop = 1e-9;

// L1 budget for a witness marginal to count as matching the target.
inline constexpr double kMarginalTol = 1e-6;

// Exact-penalty weight (bits per unit L1) steering the search back onto the
// marginal constraint manifold.
inline constexpr double kMarginalPenalty = 1e3;

struct RawDecomp {
  int m = 0;
  int nx = 0;
  int ny = 0;
  std::array<double, kMaxQ> w{};
  std::array<std::array<double, kMaxA>, kMaxQ> a{};
  std::array<std::array<double, kMaxA>, kMaxQ> b{};
};

// Triple of a decomposition through channel v. Scratch: nx*ny + nz doubles.
inline InfoTriple decomp_triple(const RawDecomp& d, const double* v, int nz,
                                double* scratch) {
  InfoTriple total;
  for (int q = 0; q < d.m; ++q) {
    if (d.w[q] <= 1e-15) continue;
    const InfoTriple t =
        component_info_triple(d.a[q].data(), d.b[q].data(), v, d.nx, d.ny, nz, scratch);
    total.i1 += d.w[q] * t.i1;
    total.i2 += d.w[q] * t.i2;
    total.i12 += d.w[q] * t.i12;
  }
  return total;
}

inline void decomp_marginal(const RawDecomp& d, double* pxy) {
  for (int i = 0; i < d.nx * d.ny; ++i) pxy[i] = 0.0;
  for (int q = 0; q < d.m; ++q) {
    if (d.w[q] <= 0.0) continue;
    for (int x = 0; x < d.nx; ++x)
      for (int y = 0; y < d.ny; ++y) pxy[x * d.ny + y] += d.w[q] * d.a[q][x] * d.b[q][y];
  }
}

inline double decomp_marginal_l1(const RawDecomp& d, const double* target) {
  double m[kMaxA * kMaxA];
  decomp_marginal(d, m);
  double l1 = 0.0;
  for (int i = 0; i < d.nx * d.ny; ++i) l1 += std::abs(m[i] - target[i]);
  return l1;
}

// A decomposition with its component joints flattened, so repeated triple
// evaluations against varying channels stay cheap.
struct PreparedDecomp {
  int m = 0;
  std::array<double, kMaxQ> w{};
  std::array<std::array<double, kMaxA * kMaxA>, kMaxQ> pq{};
};

inline PreparedDecomp prepare_decomp(const RawDecomp& d) {
  PreparedDecomp p;
  p.m = d.m;
  for (int q = 0; q < d.m; ++q) {
    p.w[q] = d.w[q];
    for (int x = 0; x < d.nx; ++x)
      for (int y = 0; y < d.ny; ++y) p.pq[q][x * d.ny + y] = d.a[q][x] * d.b[q][y];
  }
  return p;
}

inline InfoTriple prepared_triple(const PreparedDecomp& d, const double* v, int nx, int ny,
                                  int nz, double* scratch) {
  InfoTriple total;
  for (int q = 0; q < d.m; ++q) {
    if (d.w[q] <= 1e-15) continue;
    const InfoTriple t = joint_info_triple(d.pq[q].data(), v, nx, ny, nz, scratch);
    total.i1 += d.w[q] * t.i1;
    total.i2 += d.w[q] * t.i2;
    total.i12 += d.w[q] * t.i12;
  }
  return total;
}

// Deterministic family of marginal-exact decompositions of pxy, used as
// search seeds and as the oracle's fixed feasibility grid. Members:
//   - the product split when pxy factorizes,
//   - Q = X and Q = Y conditioning splits (alphabet permitting),
//   - the all-point-mass split when nx*ny <= 4,
//   - for 2x2 inputs, two-component splits with one component anchored on a
//     (grid+1)^2 lattice and the other solved in closed form.
std::vector<RawDecomp> family_decomps(const double* pxy, int nx, int ny, int grid);

// Random marginal-exact decomposition for multistart seeding (2x2 closed
// form with random anchors plus optional point-mass peeling; falls back to
// structural splits elsewhere). May return m = 0 on failure.
RawDecomp random_exact_decomp(const double* pxy, int nx, int ny, Rng& rng);

struct SlackResult {
  // max over marginal-feasible decompositions of min(i1-t1, i2-t2, i12-t3)
  double slack = -kInf;
  InfoTriple info;
  RawDecomp best;
  double marginal_l1 = kInf;
  bool marginal_ok = false;
};

// Thorough multistart pattern search for the best slack. When pxy is null
// the marginal is free (capacity membership). warm decompositions, if any,
// are refined alongside the standard seeds.
SlackResult max_decomp_slack(const double* v, int nx, int ny, int nz, const double* pxy,
                             double t1, double t2, double t3, const SearchOptions& opts,
                             const RawDecomp* warm = nullptr, int n_warm = 0);

// Cheap refinement pass around a single start; used for warm re-evaluation
// inside solver loops.
SlackResult refine_decomp_slack(const double* v, int nx, int ny, int nz, const double* pxy,
                                double t1, double t2, double t3, const RawDecomp& start);

}  // namespace macx::detail
