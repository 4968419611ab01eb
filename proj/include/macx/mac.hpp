#pragma once

#include <cstdint>
#include <vector>

#include "macx/prob.hpp"

namespace macx {

// Two-user discrete memoryless multiple-access channel W(z | x, y),
// stored row-major as w[(x*ny + y)*nz + z]. Rows are conditional
// distributions over the output alphabet.
struct Mac {
  int nx = 0;
  int ny = 0;
  int nz = 0;
  std::vector<double> w;

  double at(int x, int y, int z) const { return w[(static_cast<std::size_t>(x) * ny + y) * nz + z]; }
  const double* row(int x, int y) const { return w.data() + (static_cast<std::size_t>(x) * ny + y) * nz; }
  double* row(int x, int y) { return w.data() + (static_cast<std::size_t>(x) * ny + y) * nz; }
};

// Renormalizes rows whose mass is within 1e-9 of 1 and rejects anything
// further off, along with shape errors and negative entries.
void validate_mac(Mac& w);

Mac make_mac(int nx, int ny, int nz, std::vector<double> w);

struct RatePair {
  double r1 = 0.0;
  double r2 = 0.0;
};

struct PentagonRates {
  double i1 = 0.0;   // I(X ; Z | Y, Q)
  double i2 = 0.0;   // I(Y ; Z | X, Q)
  double i12 = 0.0;  // I(X,Y ; Z | Q)
};

// Time-sharing mixture of at most four product inputs: component q gets
// weight q_weights[q] and independent per-user inputs px_given_q.row(q),
// py_given_q.row(q).
struct TimeSharingDecomposition {
  std::vector<double> q_weights;
  StochasticMatrix px_given_q;
  StochasticMatrix py_given_q;
};

// The three conditional informations of a decomposition through a channel.
PentagonRates pentagon_rates(const Mac& w, const TimeSharingDecomposition& d);

// The joint (x, y) input law induced by a decomposition.
JointDistribution decomposition_marginal(const TimeSharingDecomposition& d);

// Shared knobs for the search-based operations. tolerance doubles as the
// convergence threshold and the constraint push depth; values above 1e-2
// are rejected.
struct SearchOptions {
  int grid_resolution = 32;
  int multistart_count = 64;
  std::uint64_t seed = 1;
  double tolerance = 1e-4;
  int max_iterations = 400;
  // Restrict maximizations over input laws to independent (product) inputs.
  // Ignored by operations that take the input law as an argument.
  bool product_inputs = false;
};

void validate_options(const SearchOptions& opts);

struct RegionVerdict {
  bool inside = false;
  // Achieved max-min margin, epsilon included: max over decompositions of
  // min(i1 + eps - r1, i2 + eps - r2, i12 + eps - r1 - r2). Inside means
  // slack >= -1e-9 with a marginal-exact witness.
  double slack = 0.0;
  TimeSharingDecomposition witness;
  PentagonRates witness_rates;
  double witness_marginal_l1 = 0.0;
};

// Membership of a rate pair in the epsilon-enlarged region C_W(p): the union
// over marginal-p time-sharing decompositions of their rate pentagons.
// Inside verdicts carry a re-checkable witness; outside verdicts are the
// best effort of the search. Throws ErrorKind::no_decomposition when no
// mixture of at most four products matches p within 1e-6 in L1.
RegionVerdict region_membership(const Mac& w, const JointDistribution& p, RatePair r,
                                double epsilon, const SearchOptions& opts = {});

// Membership in the capacity region: the input marginal is free.
RegionVerdict capacity_membership(const Mac& w, RatePair r, const SearchOptions& opts = {});

// The three single-letter conditions evaluated directly on the joint input p
// pushed through the test channel v: c1 holds when I(X;Z|Y) <= r1, c2 when
// I(Y;Z|X) <= r2, c3 when I(X,Y;Z) <= r1 + r2.
struct FeasibilityTriple {
  PentagonRates info;
  bool c1 = false;
  bool c2 = false;
  bool c3 = false;
  bool any = false;
};

FeasibilityTriple haroutunian_feasible(const Mac& v, const JointDistribution& p, RatePair r);

// Probability of an output block under n independent channel uses.
double product_channel_prob(const Mac& w, const std::vector<int>& xs,
                            const std::vector<int>& ys, const std::vector<int>& zs);

// Finite-blocklength slack model for the converse machinery. The middle
// term carries the conditioning-step count k; k is capped at the structural
// wringing bound ceil(2*sigma/delta) with delta = n^{-1/2} in natural-log
// units. All returned values are bits.
struct EpsilonModel {
  enum class KMode { zero, cap, given };
  double lambda = 0.1;
  KMode k_mode = KMode::zero;
  double k = 0.0;

  double operator()(std::int64_t n, int ax, int ay) const;
};

// ceil(2 * sigma / delta) with sigma the natural-log mutual-information
// budget -ln(1 - 2*lambda/(1+lambda)) + ax*ay*ln(n+1) and delta = n^{-1/2}.
double wringing_step_cap(std::int64_t n, double lambda, int ax, int ay);

// -log2(1 - 2*lambda/(1+lambda)) + ax*ay*log2(n+1), the mutual-information
// budget of a maximal-error subcode in bits.
double subcode_mi_budget_bits(std::int64_t n, double lambda, int ax, int ay);

}  // namespace macx
