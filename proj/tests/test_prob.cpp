#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <random>

#include "macx/prob.hpp"

using namespace macx;

namespace {

// Deterministic uniform in [0,1): fixed bit mapping so results never depend
// on the standard library's distribution implementation.
double u01(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

Distribution random_dist(std::mt19937_64& g, std::size_t k) {
  std::vector<double> p(k);
  double s = 0.0;
  for (auto& x : p) {
    x = -std::log(1.0 - u01(g));  // exponential, gives Dirichlet(1,...,1)
    s += x;
  }
  for (auto& x : p) x /= s;
  return Distribution(p);
}

JointDistribution random_joint(std::mt19937_64& g, std::vector<std::size_t> dims) {
  std::size_t total = 1;
  for (auto d : dims) total *= d;
  std::vector<double> p(total);
  double s = 0.0;
  for (auto& x : p) {
    x = -std::log(1.0 - u01(g));
    s += x;
  }
  for (auto& x : p) x /= s;
  return JointDistribution(std::move(dims), std::move(p));
}

// Independent high-precision summation used as the oracle for the
// closed-form information quantities.
long double mi_oracle(const std::vector<std::vector<double>>& m) {
  std::size_t na = m.size(), nb = m[0].size();
  std::vector<long double> pa(na, 0.0L), pb(nb, 0.0L);
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t b = 0; b < nb; ++b) {
      pa[a] += m[a][b];
      pb[b] += m[a][b];
    }
  long double info = 0.0L;
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t b = 0; b < nb; ++b)
      if (m[a][b] > 0.0)
        info += static_cast<long double>(m[a][b]) *
                std::log2l(static_cast<long double>(m[a][b]) / (pa[a] * pb[b]));
  return info;
}

}  // namespace

TEST_CASE("distribution construction and normalization") {
  CHECK_THROWS_AS(Distribution({0.5, 0.4}), Error);            // mass 0.9
  CHECK_THROWS_AS(Distribution({0.5, 0.5, -0.1, 0.1}), Error); // real negative
  CHECK_THROWS_AS(Distribution(std::vector<double>{}), Error);

  // Within 1e-9 of the simplex: accepted and renormalized.
  Distribution d({0.5, 0.5 + 5e-10});
  double s = d[0] + d[1];
  CHECK(std::abs(s - 1.0) <= 1e-12);

  Distribution u = Distribution::uniform(4);
  CHECK(u[3] == doctest::Approx(0.25).epsilon(1e-12));
  Distribution pm = Distribution::point_mass(3, 1);
  CHECK(pm[1] == 1.0);
}

TEST_CASE("entropy closed forms") {
  CHECK(entropy(Distribution::point_mass(5, 2)) == 0.0);
  CHECK(entropy(Distribution::uniform(8)) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(entropy(Distribution({0.25, 0.5, 0.25})) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("entropy bounds on random distributions") {
  std::mt19937_64 g(11);
  for (int it = 0; it < 200; ++it) {
    std::size_t k = 2 + static_cast<std::size_t>(g() % 7);
    double h = entropy(random_dist(g, k));
    CHECK(h >= 0.0);
    CHECK(h <= std::log2(static_cast<double>(k)) + 1e-12);
  }
}

TEST_CASE("kl divergence closed forms") {
  Distribution p({0.3, 0.7});
  CHECK(kl_divergence(p, p) == 0.0);
  CHECK(kl_divergence(Distribution({1.0, 0.0}), Distribution({0.5, 0.5})) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::isinf(kl_divergence(Distribution({0.5, 0.5}), Distribution({1.0, 0.0}))));
  CHECK_THROWS_AS(kl_divergence(Distribution({1.0, 0.0}), Distribution::uniform(3)), Error);
}

TEST_CASE("kl divergence is nonnegative, zero only at equality") {
  std::mt19937_64 g(12);
  for (int it = 0; it < 200; ++it) {
    Distribution p = random_dist(g, 4);
    Distribution q = random_dist(g, 4);
    double d = kl_divergence(p, q);
    CHECK(d >= 0.0);
    if (l1_distance(p, q) > 1e-3) CHECK(d > 0.0);
  }
}

TEST_CASE("conditional kl") {
  StochasticMatrix v(2, 2, {0.9, 0.1, 0.2, 0.8});
  StochasticMatrix w(2, 2, {0.5, 0.5, 0.5, 0.5});
  CHECK(conditional_kl(v, v, Distribution::uniform(2)) == 0.0);

  // A point-mass conditioner selects a single row.
  double row0 = kl_divergence(v.row(0), w.row(0));
  CHECK(conditional_kl(v, w, Distribution({1.0, 0.0})) ==
        doctest::Approx(row0).epsilon(1e-12));

  // Uniform conditioner averages the rows.
  double row1 = kl_divergence(v.row(1), w.row(1));
  CHECK(conditional_kl(v, w, Distribution::uniform(2)) ==
        doctest::Approx(0.5 * (row0 + row1)).epsilon(1e-12));
}

TEST_CASE("mutual information closed forms and oracle") {
  // Product joint: independent, information zero.
  CHECK(mutual_information(JointDistribution::from_matrix(
            {{0.12, 0.28}, {0.18, 0.42}})) == doctest::Approx(0.0).epsilon(1e-12));

  // Identity coupling of two uniform bits carries exactly one bit.
  CHECK(mutual_information(JointDistribution::from_matrix({{0.5, 0.0}, {0.0, 0.5}})) ==
        doctest::Approx(1.0).epsilon(1e-12));

  // Cross-checked against the independent high-precision summation.
  std::vector<std::vector<double>> m{{0.4, 0.1}, {0.1, 0.4}};
  double got = mutual_information(JointDistribution::from_matrix(m));
  CHECK(got == doctest::Approx(static_cast<double>(mi_oracle(m))).epsilon(1e-12));
}

TEST_CASE("mutual information bounds and symmetry") {
  std::mt19937_64 g(13);
  for (int it = 0; it < 200; ++it) {
    JointDistribution j = random_joint(g, {3, 4});
    double i = mutual_information(j);
    CHECK(i >= 0.0);
    CHECK(i <= entropy(j.marginal(std::size_t{0})) + 1e-12);
    CHECK(i <= entropy(j.marginal(std::size_t{1})) + 1e-12);
    // Transpose invariance.
    std::vector<double> tr(j.flat().size());
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 4; ++b) tr[b * 3 + a] = j.flat()[a * 4 + b];
    double it_ = mutual_information(JointDistribution({4, 3}, tr));
    CHECK(i == doctest::Approx(it_).epsilon(1e-12));
  }
}

TEST_CASE("pinsker style bound on random joints") {
  std::mt19937_64 g(14);
  for (int it = 0; it < 200; ++it) {
    JointDistribution j = random_joint(g, {3, 3});
    Distribution pa = j.marginal(std::size_t{0});
    Distribution pb = j.marginal(std::size_t{1});
    std::vector<double> prod(9);
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b) prod[a * 3 + b] = pa[a] * pb[b];
    double l1 = l1_distance(j, JointDistribution({3, 3}, prod));
    double mi_nats = mutual_information(j) * std::log(2.0);
    CHECK(l1 <= 2.0 * std::sqrt(mi_nats) + 1e-9);
  }
}

TEST_CASE("conditional mutual information") {
  // X uniform bit, Y = X, Z independent coin: I(X;Y|Z) = 1, I(X;Z|Y) = 0.
  std::vector<double> p(8, 0.0);
  auto at = [](std::size_t x, std::size_t y, std::size_t z) { return (x * 2 + y) * 2 + z; };
  p[at(0, 0, 0)] = 0.25;
  p[at(0, 0, 1)] = 0.25;
  p[at(1, 1, 0)] = 0.25;
  p[at(1, 1, 1)] = 0.25;
  JointDistribution j({2, 2, 2}, p);
  CHECK(conditional_mutual_information(j, {0}, {1}, {2}) ==
        doctest::Approx(1.0).epsilon(1e-12));
  // Conditioning on a copy of the first argument kills the information.
  CHECK(conditional_mutual_information(j, {0}, {2}, {1}) ==
        doctest::Approx(0.0).epsilon(1e-12));
  // Empty conditioner reduces to plain mutual information.
  CHECK(conditional_mutual_information(j, {0}, {1}, {}) ==
        doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(conditional_mutual_information(j, {0}, {0}, {1}), Error);
}

TEST_CASE("conditional mutual information matches per slice oracle") {
  std::mt19937_64 g(15);
  for (int it = 0; it < 50; ++it) {
    JointDistribution j = random_joint(g, {2, 3, 2});
    // Oracle: sum_c p(c) * MI of the conditional slice.
    double want = 0.0;
    for (std::size_t c = 0; c < 2; ++c) {
      double pc = 0.0;
      std::vector<std::vector<double>> slice(2, std::vector<double>(3, 0.0));
      for (std::size_t a = 0; a < 2; ++a)
        for (std::size_t b = 0; b < 3; ++b) {
          double v = j.flat()[(a * 3 + b) * 2 + c];
          slice[a][b] = v;
          pc += v;
        }
      if (pc <= 0.0) continue;
      for (auto& row : slice)
        for (auto& v : row) v /= pc;
      want += pc * static_cast<double>(mi_oracle(slice));
    }
    double got = conditional_mutual_information(j, {0}, {1}, {2});
    CHECK(got == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("l1 distance") {
  CHECK(l1_distance(Distribution({0.6, 0.4}), Distribution({0.5, 0.5})) ==
        doctest::Approx(0.2).epsilon(1e-12));
  CHECK(l1_distance(Distribution({1.0, 0.0}), Distribution({0.0, 1.0})) ==
        doctest::Approx(2.0).epsilon(1e-12));
  Distribution p({0.3, 0.7});
  CHECK(l1_distance(p, p) == 0.0);
  CHECK_THROWS_AS(l1_distance(p, Distribution::uniform(3)), Error);
}

TEST_CASE("empirical and joint types") {
  EmpiricalType t = empirical_type({0, 1, 1, 2}, 3);
  CHECK(t.n() == 4);
  CHECK(t.counts() == std::vector<std::int64_t>{1, 2, 1});
  CHECK(t.to_distribution()[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(empirical_type({0, 3}, 3), Error);
  CHECK_THROWS_AS(empirical_type({}, 3), Error);

  EmpiricalType jt = joint_type({0, 1, 1, 0}, {1, 1, 0, 1}, 2, 2);
  CHECK(jt.n() == 4);
  // counts indexed (x * ay + y)
  CHECK(jt.counts() == std::vector<std::int64_t>{0, 2, 1, 1});
  CHECK_THROWS_AS(joint_type({0, 1}, {0}, 2, 2), Error);
}

TEST_CASE("enumerate_types") {
  auto types = enumerate_types(4, 3);
  CHECK(types.size() == 15);  // C(6, 2)
  // Ascending lexicographic order of count vectors, each summing to n.
  for (std::size_t i = 0; i < types.size(); ++i) {
    std::int64_t s = 0;
    for (auto c : types[i].counts()) s += c;
    CHECK(s == 4);
    if (i > 0) CHECK(types[i - 1] < types[i]);
  }
  auto binary = enumerate_types(6, 2);
  CHECK(binary.size() == 7);
  CHECK_THROWS_AS(enumerate_types(0, 3), Error);
  CHECK_THROWS_AS(enumerate_types(1000000, 4), Error);
}
