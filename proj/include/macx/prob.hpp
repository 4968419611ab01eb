#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace macx {

enum class ErrorKind {
  invalid_input,
  size_guard,
  no_decomposition,
  infeasible,
};

// Runtime failure with a stable category so callers (and the CLI) can map
// failures to exit codes without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Probability vector over a finite alphabet. Entries are nonnegative and sum
// to 1 within 1e-12 after construction. Inputs whose total mass is within
// 1e-9 of 1 are renormalized; anything further off is rejected.
class Distribution {
 public:
  Distribution() = default;
  explicit Distribution(std::vector<double> p);

  static Distribution uniform(std::size_t k);
  static Distribution point_mass(std::size_t k, std::size_t i);

  std::size_t size() const noexcept { return p_.size(); }
  double operator[](std::size_t i) const { return p_[i]; }
  const std::vector<double>& data() const noexcept { return p_; }

 private:
  std::vector<double> p_;
};

// Row-stochastic matrix: rows are Distributions. Used for single-letter
// channels W(z|x) and conditionals such as p(x|q).
class StochasticMatrix {
 public:
  StochasticMatrix() = default;
  explicit StochasticMatrix(std::vector<Distribution> rows);
  StochasticMatrix(std::size_t rows, std::size_t cols, const std::vector<double>& flat);

  std::size_t rows() const noexcept { return rows_.size(); }
  std::size_t cols() const noexcept { return rows_.empty() ? 0 : rows_[0].size(); }
  const Distribution& row(std::size_t i) const { return rows_[i]; }

 private:
  std::vector<Distribution> rows_;
};

// Dense joint distribution over 2 to 4 axes, row-major storage.
class JointDistribution {
 public:
  JointDistribution() = default;
  JointDistribution(std::vector<std::size_t> dims, std::vector<double> flat);

  static JointDistribution from_matrix(const std::vector<std::vector<double>>& m);

  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  const std::vector<double>& flat() const noexcept { return p_; }

  double at(const std::vector<std::size_t>& idx) const;

  // Marginal onto a single axis, or onto an ordered subset of axes.
  Distribution marginal(std::size_t axis) const;
  JointDistribution marginal(const std::vector<std::size_t>& axes) const;

 private:
  std::vector<std::size_t> dims_;
  std::vector<double> p_;
};

// Empirical type of a sequence (or tuple of parallel sequences): integer
// counts over the alphabet cells plus the sequence length n.
class EmpiricalType {
 public:
  EmpiricalType() = default;
  EmpiricalType(std::vector<std::size_t> dims, std::vector<std::int64_t> counts);

  std::size_t rank() const noexcept { return dims_.size(); }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  const std::vector<std::int64_t>& counts() const noexcept { return counts_; }
  std::int64_t n() const noexcept { return n_; }

  Distribution to_distribution() const;       // rank 1
  JointDistribution to_joint() const;         // rank >= 2

  friend bool operator==(const EmpiricalType& a, const EmpiricalType& b) {
    return a.dims_ == b.dims_ && a.counts_ == b.counts_;
  }
  // Lexicographic order on the flattened counts; used for deterministic
  // tie-breaking when several types compete.
  friend bool operator<(const EmpiricalType& a, const EmpiricalType& b) {
    return a.counts_ < b.counts_;
  }

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::int64_t> counts_;
  std::int64_t n_ = 0;
};

// All information quantities are in bits. Terms with zero probability are
// dropped (0 log 0 = 0); kl_divergence returns +infinity when p puts mass
// where q has none.

double entropy(const Distribution& p);
double kl_divergence(const Distribution& p, const Distribution& q);

// D(V || W | p) = sum_x p(x) D(V(.|x) || W(.|x)).
double conditional_kl(const StochasticMatrix& v, const StochasticMatrix& w,
                      const Distribution& p);

// I(A; B) of a 2-axis joint.
double mutual_information(const JointDistribution& pab);

// I(A; B | C) where A, B, C are disjoint groups of axes of the joint.
// Axes not listed anywhere are marginalized out first. C may be empty.
double conditional_mutual_information(const JointDistribution& j,
                                      const std::vector<std::size_t>& a_axes,
                                      const std::vector<std::size_t>& b_axes,
                                      const std::vector<std::size_t>& c_axes);

double l1_distance(const Distribution& p, const Distribution& q);
double l1_distance(const JointDistribution& p, const JointDistribution& q);

// Counting measure of a sequence over alphabet {0, ..., alphabet-1}.
EmpiricalType empirical_type(const std::vector<int>& seq, std::size_t alphabet);

// Joint counting measure of two parallel sequences.
EmpiricalType joint_type(const std::vector<int>& xs, const std::vector<int>& ys,
                         std::size_t ax, std::size_t ay);

// All types of length-n sequences over k symbols, in ascending lexicographic
// order of the count vector. The list has C(n+k-1, k-1) entries.
std::vector<EmpiricalType> enumerate_types(std::int64_t n, std::size_t k);

}  // namespace macx
