#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "macx/exponents.hpp"
#include "macx/mac.hpp"
#include "macx/prob.hpp"

namespace macx {

// Explicit two-user block code: m codewords over X^n for the first sender,
// n_codewords over Y^n for the second, plus an optional decoder. Output
// blocks are ranked in base |Z| with z[0] most significant; decode[rank]
// holds the decoded pair index i * n_codewords + j, or -1 for reject. An
// empty table means "no decoder attached".
struct MultiUserCode {
  int n = 0;
  int nx = 0;
  int ny = 0;
  std::vector<std::vector<int>> u;
  std::vector<std::vector<int>> v;
  std::vector<std::int32_t> decode;

  int m() const { return static_cast<int>(u.size()); }
  int n_codewords() const { return static_cast<int>(v.size()); }
};

// Shape, alphabet-range, and (when present) decoder-table checks.
void validate_code(const MultiUserCode& code);

// Exact per-pair error statistics from exhaustive output enumeration.
struct CodeStats {
  std::vector<std::vector<double>> per_pair_error;  // m x n_codewords
  double max_error = 0.0;                           // worst pair
  double avg_error = 0.0;                           // mean over pairs
};

// Builds a code in which every one of the m * n_codewords codeword pairs
// has joint type exactly p (p must be an integral type at its length n).
// Construction: enumerate the two marginal type classes, then grow the
// v-side by seeded depth-first search, keeping only v-choices that leave
// enough u-sequences whose pairwise joint type with every chosen v is p;
// u-codewords are drawn from the surviving shell. When distinct codewords
// cannot fill the requested counts, the remainder repeats earlier ones (the
// type guarantee is unaffected). Throws invalid_input for a non-integral
// type and size_guard when a marginal type class is too large to enumerate.
MultiUserCode constant_composition_code(const EmpiricalType& p, int m,
                                        int n_codewords, std::uint64_t seed);

// Maximum-likelihood decoder table over all |Z|^n output blocks: each block
// decodes to the pair maximizing the product channel probability, ties
// broken toward the smallest (i, j) in lexicographic order; never rejects.
// Guarded at |Z|^n <= 1e7.
std::vector<std::int32_t> ml_decode(const Mac& w, const std::vector<std::vector<int>>& u,
                                    const std::vector<std::vector<int>>& v);

// Exact error probabilities by enumeration of Z^n: per_pair_error[i][j] is
// one minus the mass the decoder routes to (i, j) under inputs (u_i, v_j).
// Requires an attached decoder; same size guard as ml_decode.
CodeStats error_probabilities(const Mac& w, const MultiUserCode& code);

// A joint type together with the codeword pairs that both carry it and
// decode correctly with probability at least (1 - lambda) / 2.
struct DominantType {
  EmpiricalType p;
  std::vector<std::pair<int, int>> pairs;  // row-major (i, j) order
};

// The type maximizing the number of qualifying pairs (ties to the
// lexicographically smallest count vector). Returned only when that count
// reaches m * n_codewords * (1 - 2*lambda/(1+lambda)) / (n+1)^(nx*ny);
// otherwise nullopt. Requires lambda in [0, 1).
std::optional<DominantType> dominant_type(const MultiUserCode& code,
                                          const CodeStats& stats, double lambda);

// Uniform distribution over a set of codeword pairs, kept sparse.
struct FanoDistribution {
  std::vector<std::pair<int, int>> pairs;
  double mass = 0.0;  // 1 / pairs.size()
};

// Validates the pair set (nonempty, in range, no duplicates) and attaches
// the uniform mass.
FanoDistribution fano_distribution(const MultiUserCode& code,
                                   const std::vector<std::pair<int, int>>& pair_set);

// P(X_t, Y_t): the position-t letter joint under the Fano distribution.
JointDistribution fano_letter_joint(const MultiUserCode& code,
                                    const FanoDistribution& f, int t);

// I(X^n; Y^n) in bits under the Fano distribution, with codewords that are
// equal as sequences merged into one value.
double fano_block_mi(const MultiUserCode& code, const FanoDistribution& f);

// (1/n) sum_t P(X_t, Y_t), accumulated in integer counts so the
// constant-composition identity with the joint type is exact.
JointDistribution average_letter_joint(const MultiUserCode& code,
                                       const FanoDistribution& f);

// Block mutual information against the subcode budget in bits:
// pass iff I(X^n; Y^n) <= -log2(1 - 2*lambda/(1+lambda)) + nx*ny*log2(n+1)
// plus 1e-9.
struct Lemma1Report {
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

Lemma1Report lemma1_check(const MultiUserCode& code,
                          const std::vector<std::pair<int, int>>& a, double lambda);

// The mutual-information budget -ln(1 - 2*lambda/(1+lambda)) + ax*ay*ln(n+1)
// in natural-log units: the default sigma for wring.
double wringing_sigma(std::int64_t n, double lambda, int ax, int ay);

struct WringingCoordinate {
  int t = 0;
  int x = 0;
  int y = 0;
};

// Outcome of the greedy conditioning loop. All mutual informations and both
// budget parameters are in natural-log units.
struct WringingResult {
  std::vector<WringingCoordinate> coords;       // conditioned positions
  int k = 0;                                    // number of steps taken
  std::vector<std::pair<int, int>> subcode;     // retained pairs
  double retained_fraction = 1.0;               // |retained| / |input|
  double floor = 1.0;    // (delta / (nx*ny*(2*sigma - delta)))^k
  double sigma = 0.0;
  double delta = 0.0;
  double max_letter_mi = 0.0;                   // after conditioning
  bool cap_hit = false;     // step cap reached with a position still above delta
  bool emptied = false;     // conditioning removed every pair (flagged failure)
  bool floor_met = false;   // retained_fraction >= floor
};

// Greedy wringing: while some position's letter mutual information exceeds
// delta and fewer than 2*sigma/delta steps were taken, condition on the
// highest-information position's most probable symbol pair and restrict the
// pair set to matches. Requires 0 < delta < sigma; throws invalid_input on
// an empty pair set.
WringingResult wring(const MultiUserCode& code,
                     const std::vector<std::pair<int, int>>& a, double delta,
                     double sigma);

// max over positions t of the L1 distance between P(X_t, Y_t) and the
// product of its marginals, under the uniform distribution on the pairs.
double independence_gap(const MultiUserCode& code,
                        const std::vector<std::pair<int, int>>& pairs);

// Which single-user subcode a check runs on: row fixes v_j and varies the
// retained u_i through the slices W(.|., v_jt); column fixes u_i and varies
// the retained v_j through W(.|u_it, .).
enum class SubcodeSide { row, column };

// Single-user converse check in bits: pass iff log2(subcode size) is below
// the sum over positions of I(input; output) under the subcode's Fano
// distribution plus 3/(1-lambda) * alphabet * sqrt(n).
struct AugustinReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double mi_sum = 0.0;  // the informations part of rhs
  bool pass = false;
};

AugustinReport augustin_check(const MultiUserCode& code, const Mac& w,
                              SubcodeSide side, int fixed_index,
                              const std::vector<int>& members, double lambda);

// Rate-membership consequence of a bounded-error code: when a dominant type
// exists, the code's rate pair (log2 m / n, log2 n_codewords / n) must lie
// in the type's region enlarged by the finite-blocklength slack model.
struct StrongConverseReport {
  bool hypothesis_met = false;  // dominant type found
  bool inside = false;
  double slack = 0.0;           // achieved margin from the region search
  double epsilon = 0.0;         // slack-model value used
  RatePair rates;
  JointDistribution p;          // the dominant joint type (when met)
};

// Runs error_probabilities + dominant_type, then region membership at the
// epsilon of `model` (default: EpsilonModel with this lambda and the step
// count capped at the structural wringing bound). Only joint types that mix
// into at most four product inputs are checkable; others throw
// no_decomposition from the region search.
StrongConverseReport strong_converse_check(const Mac& w, const MultiUserCode& code,
                                           double lambda,
                                           const std::optional<EpsilonModel>& model = {},
                                           const SearchOptions& opts = {});

// Exact lower-bound check on the maximal error probability: pass iff
// P_e^m >= 0.5 * 2^(-n * e_sp.value * (1 + delta)) - 1e-12 (bound 0 when
// e_sp is infinite). Requires delta > 0 and code rates at least (r1 + delta,
// r2 + delta); a shortfall is a rejected input, not a bound failure.
struct SpherePackingReport {
  double max_error = 0.0;  // exact P_e^m
  double bound = 0.0;
  bool pass = false;
  RatePair code_rates;
};

SpherePackingReport sphere_packing_verify(const Mac& w, const MultiUserCode& code,
                                          RatePair r, double delta,
                                          const ExponentResult& e_sp);

}  // namespace macx
