#pragma once

#include <cstdint>
#include <vector>

#include "macx/mac.hpp"
#include "macx/prob.hpp"

namespace macx {

enum class ExponentMethod { haroutunian, sphere_packing, grid_oracle };

// Result of a reliability-exponent computation. Values are in bits per
// channel use. An infinite value means no admissible test channel exists
// (every channel matching the support constraints leaves the rate point
// achievable); witness_v then just echoes the channel under test.
struct ExponentResult {
  double value = 0.0;
  bool infinite = false;
  bool converged = true;
  ExponentMethod method = ExponentMethod::haroutunian;
  JointDistribution witness_p;  // maximizing input law
  Mac witness_v;                // minimizing test channel (when finite)
  // Verified margin of the witness test channel: for the pentagon-region
  // variant, the rate point's slack in the witness's region (<= 0 when the
  // point is excluded); for the single-letter variant, the smallest
  // constraint margin min_c(g_c - t_c) (<= 0 when some constraint holds).
  double witness_slack = 0.0;
};

// Single-letter reliability exponent at rate pair r:
//   max over input joints P of min over test channels V satisfying at least
//   one of I_V(X;Z|Y) <= r1, I_V(Y;Z|X) <= r2, I_V(X,Y;Z) <= r1+r2
//   of D(V || W | P).
// With opts.product_inputs the outer maximization runs over independent
// input pairs only.
ExponentResult haroutunian_exponent(const Mac& w, RatePair r,
                                    const SearchOptions& opts = {});

// Pentagon-region reliability exponent at rate pair r:
//   max over input joints P of min over test channels V whose region
//   C_V(P) does not contain r (boundary included) of D(V || W | P).
// The inner feasible set is the closure {V : slack(V; P, r) <= 0}; finite
// witnesses are verified against the region search and pushed strictly
// outside by opts.tolerance when attainable.
ExponentResult sphere_packing_exponent(const Mac& w, RatePair r,
                                       const SearchOptions& opts = {});

// One lattice query: a rate pair plus a region enlargement. epsilon grows
// the acceptance region uniformly, shrinking the feasible test-channel set
// (used by the finite-blocklength gap analysis).
struct OracleQuery {
  RatePair r;
  double epsilon = 0.0;
};

// Exhaustive lattice evaluation of either exponent, independent of the
// search-based solvers: the input law ranges over the type lattice of
// denominator `resolution`, and test channels range row-wise over the same
// lattice restricted to the support of w. All queries are answered in one
// sweep, so results across queries are exactly comparable (shared candidate
// sets make monotonicity in rates and epsilon structural, not numerical).
// Guarded to nx*ny <= 4, nz <= 3, and a bounded lattice size.
std::vector<ExponentResult> exponent_grid_oracle(const Mac& w, ExponentMethod which,
                                                 const std::vector<OracleQuery>& queries,
                                                 int resolution);

struct SurfacePoint {
  RatePair r;
  double value = 0.0;
  bool infinite = false;
  bool converged = true;
};

// Exponent values over the Cartesian grid r1s x r2s (r2 fastest). All grid
// points are evaluated against one shared pool of input-law and
// test-channel candidates, making the surface nonincreasing in each rate
// coordinate by construction.
std::vector<SurfacePoint> exponent_surface(const Mac& w, ExponentMethod method,
                                           const std::vector<double>& r1s,
                                           const std::vector<double>& r2s,
                                           const SearchOptions& opts = {});

struct GapPoint {
  std::int64_t n = 0;
  double epsilon = 0.0;  // region enlargement at this blocklength, bits
  double alpha = 0.0;    // enlarged-region exponent
  bool infinite = false;
  double gap = 0.0;      // alpha - alpha_star (0 when both infinite)
};

struct GapReport {
  double alpha_star = 0.0;  // exponent at epsilon = 0
  bool alpha_star_infinite = false;
  bool converged = true;
  std::vector<GapPoint> points;  // one per requested blocklength, input order
};

// Finite-blocklength behavior of the pentagon-region exponent: for each
// blocklength n, the region is enlarged by the slack model's epsilon_n and
// the exponent recomputed. A shared candidate pool across all epsilon
// levels makes alpha nonincreasing in n structurally. alpha is infinite at
// least when epsilon_n exceeds r1 + r2 (then even an input-independent test
// channel leaves the enlarged region covering the rate point); it can also be
// infinite below that bound, e.g. for deterministic channels whose only
// support-respecting test channel is the channel itself.
GapReport finite_n_gap(const Mac& w, RatePair r, const std::vector<std::int64_t>& ns,
                       const EpsilonModel& model, const SearchOptions& opts = {});

}  // namespace macx
