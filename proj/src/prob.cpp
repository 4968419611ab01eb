#include "macx/prob.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kernels.hpp"

namespace macx {

namespace {

// Shared construction-time check: clamp dust-sized negatives, renormalize
// when the total is within 1e-9 of 1, reject anything further off.
void normalize_simplex(std::vector<double>& p, const char* what) {
  if (p.empty()) throw Error(ErrorKind::invalid_input, std::string(what) + ": empty");
  double sum = 0.0;
  for (double& x : p) {
    if (x < 0.0) {
      if (x < -1e-12)
        throw Error(ErrorKind::invalid_input,
                    std::string(what) + ": negative entry " + std::to_string(x));
      x = 0.0;
    }
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw Error(ErrorKind::invalid_input,
                std::string(what) + ": mass " + std::to_string(sum) + " is not 1");
  if (sum != 1.0 && std::abs(sum - 1.0) > 1e-15) {
    for (double& x : p) x /= sum;
  }
}

std::size_t checked_flat_size(const std::vector<std::size_t>& dims, const char* what) {
  if (dims.size() < 2 || dims.size() > 4)
    throw Error(ErrorKind::invalid_input, std::string(what) + ": rank must be 2 to 4");
  std::size_t total = 1;
  for (std::size_t d : dims) {
    if (d == 0) throw Error(ErrorKind::invalid_input, std::string(what) + ": zero axis");
    total *= d;
  }
  return total;
}

}  // namespace

Distribution::Distribution(std::vector<double> p) : p_(std::move(p)) {
  normalize_simplex(p_, "Distribution");
}

Distribution Distribution::uniform(std::size_t k) {
  return Distribution(std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

Distribution Distribution::point_mass(std::size_t k, std::size_t i) {
  if (i >= k) throw Error(ErrorKind::invalid_input, "point_mass: index out of range");
  std::vector<double> p(k, 0.0);
  p[i] = 1.0;
  return Distribution(std::move(p));
}

StochasticMatrix::StochasticMatrix(std::vector<Distribution> rows) : rows_(std::move(rows)) {
  if (rows_.empty()) throw Error(ErrorKind::invalid_input, "StochasticMatrix: no rows");
  for (const Distribution& r : rows_)
    if (r.size() != rows_[0].size())
      throw Error(ErrorKind::invalid_input, "StochasticMatrix: ragged rows");
}

StochasticMatrix::StochasticMatrix(std::size_t rows, std::size_t cols,
                                   const std::vector<double>& flat) {
  if (rows == 0 || cols == 0 || flat.size() != rows * cols)
    throw Error(ErrorKind::invalid_input, "StochasticMatrix: bad shape");
  rows_.reserve(rows);
  for (std::size_t i = 0; i < rows; ++i)
    rows_.emplace_back(std::vector<double>(flat.begin() + i * cols,
                                           flat.begin() + (i + 1) * cols));
}

JointDistribution::JointDistribution(std::vector<std::size_t> dims, std::vector<double> flat)
    : dims_(std::move(dims)), p_(std::move(flat)) {
  const std::size_t total = checked_flat_size(dims_, "JointDistribution");
  if (p_.size() != total)
    throw Error(ErrorKind::invalid_input, "JointDistribution: flat size mismatch");
  normalize_simplex(p_, "JointDistribution");
}

JointDistribution JointDistribution::from_matrix(const std::vector<std::vector<double>>& m) {
  if (m.empty() || m[0].empty())
    throw Error(ErrorKind::invalid_input, "from_matrix: empty");
  std::vector<double> flat;
  flat.reserve(m.size() * m[0].size());
  for (const auto& row : m) {
    if (row.size() != m[0].size())
      throw Error(ErrorKind::invalid_input, "from_matrix: ragged rows");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return JointDistribution({m.size(), m[0].size()}, std::move(flat));
}

double JointDistribution::at(const std::vector<std::size_t>& idx) const {
  if (idx.size() != dims_.size())
    throw Error(ErrorKind::invalid_input, "at: index rank mismatch");
  std::size_t flat = 0;
  for (std::size_t a = 0; a < dims_.size(); ++a) {
    if (idx[a] >= dims_[a]) throw Error(ErrorKind::invalid_input, "at: index out of range");
    flat = flat * dims_[a] + idx[a];
  }
  return p_[flat];
}

Distribution JointDistribution::marginal(std::size_t axis) const {
  if (axis >= dims_.size()) throw Error(ErrorKind::invalid_input, "marginal: bad axis");
  std::vector<double> out(dims_[axis], 0.0);
  std::vector<std::size_t> idx(dims_.size(), 0);
  for (std::size_t f = 0; f < p_.size(); ++f) {
    out[idx[axis]] += p_[f];
    for (std::size_t a = dims_.size(); a-- > 0;) {
      if (++idx[a] < dims_[a]) break;
      idx[a] = 0;
    }
  }
  return Distribution(std::move(out));
}

JointDistribution JointDistribution::marginal(const std::vector<std::size_t>& axes) const {
  if (axes.size() < 2) throw Error(ErrorKind::invalid_input, "marginal: need 2+ axes");
  std::vector<std::size_t> out_dims;
  for (std::size_t a : axes) {
    if (a >= dims_.size()) throw Error(ErrorKind::invalid_input, "marginal: bad axis");
    out_dims.push_back(dims_[a]);
  }
  std::size_t out_total = 1;
  for (std::size_t d : out_dims) out_total *= d;
  std::vector<double> out(out_total, 0.0);
  std::vector<std::size_t> idx(dims_.size(), 0);
  for (std::size_t f = 0; f < p_.size(); ++f) {
    std::size_t o = 0;
    for (std::size_t k = 0; k < axes.size(); ++k) o = o * out_dims[k] + idx[axes[k]];
    out[o] += p_[f];
    for (std::size_t a = dims_.size(); a-- > 0;) {
      if (++idx[a] < dims_[a]) break;
      idx[a] = 0;
    }
  }
  return JointDistribution(std::move(out_dims), std::move(out));
}

EmpiricalType::EmpiricalType(std::vector<std::size_t> dims, std::vector<std::int64_t> counts)
    : dims_(std::move(dims)), counts_(std::move(counts)) {
  if (dims_.empty() || dims_.size() > 4)
    throw Error(ErrorKind::invalid_input, "EmpiricalType: rank must be 1 to 4");
  std::size_t total = 1;
  for (std::size_t d : dims_) total *= d;
  if (counts_.size() != total)
    throw Error(ErrorKind::invalid_input, "EmpiricalType: counts size mismatch");
  n_ = 0;
  for (std::int64_t c : counts_) {
    if (c < 0) throw Error(ErrorKind::invalid_input, "EmpiricalType: negative count");
    n_ += c;
  }
  if (n_ == 0) throw Error(ErrorKind::invalid_input, "EmpiricalType: empty (n = 0)");
}

Distribution EmpiricalType::to_distribution() const {
  if (rank() != 1)
    throw Error(ErrorKind::invalid_input, "to_distribution: rank is not 1");
  std::vector<double> p(counts_.size());
  for (std::size_t i = 0; i < counts_.size(); ++i)
    p[i] = static_cast<double>(counts_[i]) / static_cast<double>(n_);
  return Distribution(std::move(p));
}

JointDistribution EmpiricalType::to_joint() const {
  if (rank() < 2) throw Error(ErrorKind::invalid_input, "to_joint: rank is below 2");
  std::vector<double> p(counts_.size());
  for (std::size_t i = 0; i < counts_.size(); ++i)
    p[i] = static_cast<double>(counts_[i]) / static_cast<double>(n_);
  return JointDistribution(dims_, std::move(p));
}

double entropy(const Distribution& p) {
  return detail::entropy_bits(p.data().data(), static_cast<int>(p.size()));
}

double kl_divergence(const Distribution& p, const Distribution& q) {
  if (p.size() != q.size())
    throw Error(ErrorKind::invalid_input, "kl_divergence: size mismatch");
  return detail::kl_bits(p.data().data(), q.data().data(), static_cast<int>(p.size()));
}

double conditional_kl(const StochasticMatrix& v, const StochasticMatrix& w,
                      const Distribution& p) {
  if (v.rows() != w.rows() || v.cols() != w.cols() || p.size() != v.rows())
    throw Error(ErrorKind::invalid_input, "conditional_kl: shape mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < v.rows(); ++i) {
    if (p[i] <= 0.0) continue;  // rows with no input weight cost nothing
    const double r = kl_divergence(v.row(i), w.row(i));
    if (r == detail::kInf) return detail::kInf;
    d += p[i] * r;
  }
  return d;
}

double mutual_information(const JointDistribution& pab) {
  if (pab.rank() != 2)
    throw Error(ErrorKind::invalid_input, "mutual_information: rank must be 2");
  const Distribution pa = pab.marginal(std::size_t{0});
  const Distribution pb = pab.marginal(std::size_t{1});
  const std::size_t na = pab.dim(0), nb = pab.dim(1);
  double info = 0.0;
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t b = 0; b < nb; ++b) {
      const double pxy = pab.flat()[a * nb + b];
      if (pxy > 0.0) info += pxy * std::log2(pxy / (pa[a] * pb[b]));
    }
  return info < 0.0 ? 0.0 : info;
}

double conditional_mutual_information(const JointDistribution& j,
                                      const std::vector<std::size_t>& a_axes,
                                      const std::vector<std::size_t>& b_axes,
                                      const std::vector<std::size_t>& c_axes) {
  if (a_axes.empty() || b_axes.empty())
    throw Error(ErrorKind::invalid_input, "conditional_mutual_information: empty group");
  std::vector<bool> seen(j.rank(), false);
  for (const auto* group : {&a_axes, &b_axes, &c_axes})
    for (std::size_t a : *group) {
      if (a >= j.rank() || seen[a])
        throw Error(ErrorKind::invalid_input,
                    "conditional_mutual_information: axes must be disjoint and in range");
      seen[a] = true;
    }

  std::size_t na = 1, nb = 1, nc = 1;
  for (std::size_t a : a_axes) na *= j.dim(a);
  for (std::size_t a : b_axes) nb *= j.dim(a);
  for (std::size_t a : c_axes) nc *= j.dim(a);

  // Collapse to a dense [c][a][b] table, marginalizing unused axes.
  std::vector<double> t(na * nb * nc, 0.0);
  std::vector<std::size_t> idx(j.rank(), 0);
  for (std::size_t f = 0; f < j.flat().size(); ++f) {
    std::size_t ia = 0, ib = 0, ic = 0;
    for (std::size_t a : a_axes) ia = ia * j.dim(a) + idx[a];
    for (std::size_t a : b_axes) ib = ib * j.dim(a) + idx[a];
    for (std::size_t a : c_axes) ic = ic * j.dim(a) + idx[a];
    t[(ic * na + ia) * nb + ib] += j.flat()[f];
    for (std::size_t a = j.rank(); a-- > 0;) {
      if (++idx[a] < j.dim(a)) break;
      idx[a] = 0;
    }
  }

  double info = 0.0;
  std::vector<double> pa(na), pb(nb);
  for (std::size_t c = 0; c < nc; ++c) {
    const double* slice = t.data() + c * na * nb;
    double pc = 0.0;
    std::fill(pa.begin(), pa.end(), 0.0);
    std::fill(pb.begin(), pb.end(), 0.0);
    for (std::size_t a = 0; a < na; ++a)
      for (std::size_t b = 0; b < nb; ++b) {
        const double v = slice[a * nb + b];
        pc += v;
        pa[a] += v;
        pb[b] += v;
      }
    if (pc <= 0.0) continue;
    for (std::size_t a = 0; a < na; ++a)
      for (std::size_t b = 0; b < nb; ++b) {
        const double v = slice[a * nb + b];
        if (v > 0.0) info += v * std::log2(v * pc / (pa[a] * pb[b]));
      }
  }
  return info < 0.0 ? 0.0 : info;
}

double l1_distance(const Distribution& p, const Distribution& q) {
  if (p.size() != q.size())
    throw Error(ErrorKind::invalid_input, "l1_distance: size mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) d += std::abs(p[i] - q[i]);
  return d;
}

double l1_distance(const JointDistribution& p, const JointDistribution& q) {
  if (p.dims() != q.dims())
    throw Error(ErrorKind::invalid_input, "l1_distance: shape mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < p.flat().size(); ++i)
    d += std::abs(p.flat()[i] - q.flat()[i]);
  return d;
}

EmpiricalType empirical_type(const std::vector<int>& seq, std::size_t alphabet) {
  if (seq.empty()) throw Error(ErrorKind::invalid_input, "empirical_type: empty sequence");
  std::vector<std::int64_t> counts(alphabet, 0);
  for (int s : seq) {
    if (s < 0 || static_cast<std::size_t>(s) >= alphabet)
      throw Error(ErrorKind::invalid_input,
                  "empirical_type: symbol " + std::to_string(s) + " outside alphabet");
    ++counts[static_cast<std::size_t>(s)];
  }
  return EmpiricalType({alphabet}, std::move(counts));
}

EmpiricalType joint_type(const std::vector<int>& xs, const std::vector<int>& ys,
                         std::size_t ax, std::size_t ay) {
  if (xs.size() != ys.size() || xs.empty())
    throw Error(ErrorKind::invalid_input, "joint_type: length mismatch or empty");
  std::vector<std::int64_t> counts(ax * ay, 0);
  for (std::size_t t = 0; t < xs.size(); ++t) {
    const int x = xs[t], y = ys[t];
    if (x < 0 || static_cast<std::size_t>(x) >= ax || y < 0 ||
        static_cast<std::size_t>(y) >= ay)
      throw Error(ErrorKind::invalid_input, "joint_type: symbol outside alphabet");
    ++counts[static_cast<std::size_t>(x) * ay + static_cast<std::size_t>(y)];
  }
  return EmpiricalType({ax, ay}, std::move(counts));
}

namespace {
void enumerate_rec(std::int64_t remaining, std::size_t cell, std::vector<std::int64_t>& cur,
                   std::vector<EmpiricalType>& out, const std::vector<std::size_t>& dims) {
  if (cell + 1 == cur.size()) {
    cur[cell] = remaining;
    out.emplace_back(dims, cur);
    return;
  }
  for (std::int64_t c = 0; c <= remaining; ++c) {
    cur[cell] = c;
    enumerate_rec(remaining - c, cell + 1, cur, out, dims);
  }
}
}  // namespace

std::vector<EmpiricalType> enumerate_types(std::int64_t n, std::size_t k) {
  if (n <= 0 || k == 0) throw Error(ErrorKind::invalid_input, "enumerate_types: need n > 0, k > 0");
  // Guard against combinatorial blowups; (n+1)^(k-1) bounds the list length.
  double bound = 1.0;
  for (std::size_t i = 1; i < k; ++i) bound *= static_cast<double>(n + 1);
  if (bound > 2e7) throw Error(ErrorKind::size_guard, "enumerate_types: list too large");
  std::vector<EmpiricalType> out;
  std::vector<std::int64_t> cur(k, 0);
  enumerate_rec(n, 0, cur, out, {k});
  return out;
}

}  // namespace macx
