#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "channels.hpp"
#include "macx/mac.hpp"
#include "region.hpp"

using namespace macx;
using fixtures::uniform_joint;

namespace {

TimeSharingDecomposition single_product(std::vector<double> a, std::vector<double> b) {
  TimeSharingDecomposition d;
  d.q_weights = {1.0};
  d.px_given_q = StochasticMatrix(1, a.size(), a);
  d.py_given_q = StochasticMatrix(1, b.size(), b);
  return d;
}

JointDistribution diagonal_joint(std::size_t k) {
  std::vector<double> flat(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) flat[i * k + i] = 1.0 / static_cast<double>(k);
  return JointDistribution({k, k}, std::move(flat));
}

double rate_slack(const PentagonRates& p, RatePair r) {
  return std::min({p.i1 - r.r1, p.i2 - r.r2, p.i12 - r.r1 - r.r2});
}

}  // namespace

TEST_CASE("channel construction validates rows") {
  CHECK_NOTHROW(fixtures::pure_adder());
  // near-1 row mass is renormalized
  Mac m = make_mac(1, 1, 2, {0.5 + 2e-10, 0.5});
  CHECK(std::abs(m.at(0, 0, 0) + m.at(0, 0, 1) - 1.0) < 1e-15);
  // clearly broken rows are rejected
  CHECK_THROWS_AS(make_mac(1, 1, 2, {0.6, 0.5}), Error);
  CHECK_THROWS_AS(make_mac(1, 1, 2, {1.2, -0.2}), Error);
  CHECK_THROWS_AS(make_mac(2, 1, 2, {1.0, 0.0}), Error);
  try {
    make_mac(1, 1, 2, {0.6, 0.5});
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_input);
  }
}

TEST_CASE("pentagon rates of the adder at uniform product inputs") {
  const Mac w = fixtures::pure_adder();
  const auto d = single_product({0.5, 0.5}, {0.5, 0.5});
  const PentagonRates p = pentagon_rates(w, d);
  CHECK(p.i1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.i2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.i12 == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("pentagon rates match independently computed values") {
  const auto d = single_product({0.5, 0.5}, {0.5, 0.5});
  const PentagonRates a = pentagon_rates(fixtures::noisy_or(), d);
  CHECK(a.i1 == doctest::Approx(0.265502203205359).epsilon(1e-12));
  CHECK(a.i2 == doctest::Approx(0.265502203205359).epsilon(1e-12));
  CHECK(a.i12 == doctest::Approx(0.412295305641411).epsilon(1e-12));
  const PentagonRates b = pentagon_rates(fixtures::xor_bsc(), d);
  CHECK(b.i1 == doctest::Approx(0.531004406410719).epsilon(1e-12));
  CHECK(b.i2 == doctest::Approx(0.531004406410719).epsilon(1e-12));
  CHECK(b.i12 == doctest::Approx(0.531004406410719).epsilon(1e-12));
}

TEST_CASE("pentagon rates validate decomposition shape") {
  const Mac w = fixtures::noisy_or();
  TimeSharingDecomposition d = single_product({0.5, 0.5}, {0.5, 0.5});
  d.q_weights = {0.5, 0.5};  // two weights, one component
  CHECK_THROWS_AS(pentagon_rates(w, d), Error);
  TimeSharingDecomposition e = single_product({0.5, 0.3, 0.2}, {0.5, 0.5});
  CHECK_THROWS_AS(pentagon_rates(w, e), Error);
}

TEST_CASE("decomposition marginal mixes products") {
  TimeSharingDecomposition d;
  d.q_weights = {0.5, 0.5};
  d.px_given_q = StochasticMatrix(2, 2, {1, 0, 0, 1});
  d.py_given_q = StochasticMatrix(2, 2, {1, 0, 0, 1});
  const JointDistribution p = decomposition_marginal(d);
  CHECK(p.at({0, 0}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(p.at({0, 1}) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(p.at({1, 1}) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("capacity membership of the adder") {
  const Mac w = fixtures::pure_adder();
  SearchOptions opts;
  opts.seed = 7;

  const RegionVerdict in = capacity_membership(w, {0.74, 0.74}, opts);
  CHECK(in.inside);
  CHECK(in.slack == doctest::Approx(0.02).epsilon(1e-4));

  const RegionVerdict out = capacity_membership(w, {0.76, 0.76}, opts);
  CHECK_FALSE(out.inside);
  CHECK(out.slack == doctest::Approx(-0.02).epsilon(1e-4));

  // witness pentagon is re-checkable and certifies the reported slack
  const PentagonRates wit = pentagon_rates(w, in.witness);
  CHECK(wit.i1 == doctest::Approx(in.witness_rates.i1).epsilon(1e-9));
  CHECK(wit.i2 == doctest::Approx(in.witness_rates.i2).epsilon(1e-9));
  CHECK(wit.i12 == doctest::Approx(in.witness_rates.i12).epsilon(1e-9));
  CHECK(rate_slack(wit, {0.74, 0.74}) >= in.slack - 1e-9);
}

TEST_CASE("fixed-marginal membership of the adder at uniform product inputs") {
  const Mac w = fixtures::pure_adder();
  const JointDistribution p = uniform_joint(2, 2);

  const RegionVerdict in = region_membership(w, p, {0.7, 0.7}, 0.0);
  CHECK(in.inside);
  CHECK(in.slack == doctest::Approx(0.1).epsilon(1e-5));
  CHECK(in.witness_marginal_l1 <= 1e-6);
  const JointDistribution wm = decomposition_marginal(in.witness);
  CHECK(l1_distance(wm, p) <= 1e-6 + 1e-9);

  const RegionVerdict out = region_membership(w, p, {0.9, 0.9}, 0.0);
  CHECK_FALSE(out.inside);
  CHECK(out.slack == doctest::Approx(-0.3).epsilon(1e-5));
}

TEST_CASE("epsilon enlargement shifts slack exactly") {
  const Mac w = fixtures::pure_adder();
  const JointDistribution p = uniform_joint(2, 2);
  const RegionVerdict base = region_membership(w, p, {0.76, 0.76}, 0.0);
  const RegionVerdict grown = region_membership(w, p, {0.76, 0.76}, 0.05);
  const RegionVerdict small = region_membership(w, p, {0.76, 0.76}, 0.01);
  CHECK_FALSE(base.inside);
  CHECK(grown.inside);
  CHECK_FALSE(small.inside);
  CHECK(grown.slack == doctest::Approx(base.slack + 0.05).epsilon(1e-12));
  CHECK(small.slack == doctest::Approx(base.slack + 0.01).epsilon(1e-12));
}

TEST_CASE("second user contributes nothing through a copy of the first") {
  const Mac w = fixtures::identity_x();
  const RegionVerdict border = capacity_membership(w, {1.0, 0.0});
  CHECK(border.inside);
  CHECK(std::abs(border.slack) <= 1e-6);
  const RegionVerdict out = capacity_membership(w, {1.0, 0.05});
  CHECK_FALSE(out.inside);
  CHECK(out.slack == doctest::Approx(-0.05).epsilon(1e-5));
}

TEST_CASE("input-independent output admits only the origin") {
  const Mac w = fixtures::constant_rows();
  CHECK(capacity_membership(w, {0.0, 0.0}).inside);
  const RegionVerdict out = capacity_membership(w, {0.02, 0.0});
  CHECK_FALSE(out.inside);
  CHECK(out.slack == doctest::Approx(-0.02).epsilon(1e-6));
}

TEST_CASE("correlated diagonal input pins the pentagon to the origin") {
  const Mac w = fixtures::xor_bsc();
  const JointDistribution p = diagonal_joint(2);
  const RegionVerdict origin = region_membership(w, p, {0.0, 0.0}, 0.0);
  CHECK(origin.inside);
  CHECK(std::abs(origin.slack) <= 1e-9);
  CHECK(origin.witness_marginal_l1 <= 1e-9);
  const RegionVerdict out = region_membership(w, p, {0.1, 0.0}, 0.0);
  CHECK_FALSE(out.inside);
  CHECK(out.slack == doctest::Approx(-0.1).epsilon(1e-9));
}

TEST_CASE("point-mass joint input is decomposed exactly") {
  const Mac w = fixtures::noisy_or();
  const JointDistribution p({2, 2}, {0.0, 1.0, 0.0, 0.0});
  const RegionVerdict v = region_membership(w, p, {0.0, 0.0}, 0.0);
  CHECK(v.inside);
  CHECK(std::abs(v.slack) <= 1e-9);
  CHECK(v.witness_marginal_l1 <= 1e-12);
}

TEST_CASE("undecomposable joints are reported, not approximated") {
  const Mac w = make_mac(5, 5, 2, [] {
    std::vector<double> t(50, 0.0);
    for (int i = 0; i < 25; ++i) t[2 * i] = 1.0;
    return t;
  }());
  const JointDistribution p = diagonal_joint(5);
  CHECK_THROWS_AS(region_membership(w, p, {0.1, 0.1}, 0.0), Error);
  try {
    region_membership(w, p, {0.1, 0.1}, 0.0);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::no_decomposition);
  }
}

TEST_CASE("membership slack is monotone in the rate point") {
  const Mac w = fixtures::noisy_or();
  const JointDistribution p = uniform_joint(2, 2);
  SearchOptions opts;
  opts.seed = 3;
  double prev = region_membership(w, p, {0.05, 0.08}, 0.0, opts).slack;
  for (double step : {0.05, 0.1, 0.2}) {
    const double cur = region_membership(w, p, {0.05 + step, 0.08 + step}, 0.0, opts).slack;
    CHECK(cur <= prev + 1e-6);
    prev = cur;
  }
}

TEST_CASE("capacity slack dominates fixed-marginal slack") {
  const Mac w = fixtures::noisy_or();
  const RatePair r{0.2, 0.2};
  const double cap = capacity_membership(w, r).slack;
  for (auto joint : {uniform_joint(2, 2), JointDistribution({2, 2}, {0.4, 0.2, 0.1, 0.3}),
                     diagonal_joint(2)}) {
    const double fixed = region_membership(w, joint, r, 0.0).slack;
    CHECK(cap >= fixed - 1e-6);
  }
}

TEST_CASE("membership searches agree with direct feasibility on random channels") {
  // inside verdicts must come with a pentagon certificate; re-evaluate it
  for (std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
    const Mac w = fixtures::random_channel(seed, 2, 2, 3);
    SearchOptions opts;
    opts.seed = seed;
    for (RatePair r : {RatePair{0.05, 0.05}, RatePair{0.15, 0.1}, RatePair{0.3, 0.3}}) {
      const RegionVerdict v = capacity_membership(w, r, opts);
      const PentagonRates wit = pentagon_rates(w, v.witness);
      CHECK(rate_slack(wit, r) >= v.slack - 1e-9);
    }
  }
}

TEST_CASE("single-letter feasibility conditions") {
  const JointDistribution p = uniform_joint(2, 2);
  const FeasibilityTriple adder = haroutunian_feasible(fixtures::pure_adder(), p, {0.5, 0.5});
  CHECK_FALSE(adder.c1);
  CHECK_FALSE(adder.c2);
  CHECK_FALSE(adder.c3);
  CHECK_FALSE(adder.any);
  CHECK(adder.info.i12 == doctest::Approx(1.5).epsilon(1e-12));

  const FeasibilityTriple loose = haroutunian_feasible(fixtures::pure_adder(), p, {1.2, 0.5});
  CHECK(loose.c1);       // 1.0 <= 1.2
  CHECK_FALSE(loose.c2);  // 1.0 > 0.5
  CHECK(loose.c3);       // 1.5 <= 1.7
  CHECK(loose.any);

  const FeasibilityTriple flat = haroutunian_feasible(fixtures::constant_rows(), p, {0.0, 0.0});
  CHECK(flat.c1);
  CHECK(flat.c2);
  CHECK(flat.c3);
}

TEST_CASE("block probabilities multiply across channel uses") {
  const Mac w = fixtures::xor_bsc();
  CHECK(product_channel_prob(w, {0, 0}, {0, 1}, {0, 0}) == doctest::Approx(0.09).epsilon(1e-15));
  CHECK(product_channel_prob(w, {}, {}, {}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(product_channel_prob(w, {0}, {0, 1}, {0, 0}), Error);
  CHECK_THROWS_AS(product_channel_prob(w, {2}, {0}, {0}), Error);
}

TEST_CASE("search options are validated") {
  const Mac w = fixtures::noisy_or();
  SearchOptions opts;
  opts.tolerance = 0.5;
  CHECK_THROWS_AS(capacity_membership(w, {0.1, 0.1}, opts), Error);
  opts = SearchOptions{};
  opts.grid_resolution = 1;
  CHECK_THROWS_AS(capacity_membership(w, {0.1, 0.1}, opts), Error);
  opts = SearchOptions{};
  CHECK_THROWS_AS(region_membership(w, uniform_joint(2, 2), {-0.1, 0.1}, 0.0, opts), Error);
  CHECK_THROWS_AS(region_membership(w, uniform_joint(2, 2), {0.1, 0.1}, -1.0, opts), Error);
  CHECK_THROWS_AS(region_membership(w, uniform_joint(2, 3), {0.1, 0.1}, 0.0, opts), Error);
}

TEST_CASE("finite-blocklength slack model matches frozen values") {
  EpsilonModel m;  // lambda 0.1, no conditioning steps
  CHECK(m(10, 2, 2) == doctest::Approx(10.177656545778833).epsilon(1e-12));
  CHECK(m(100, 2, 2) == doctest::Approx(3.002328754046436).epsilon(1e-12));
  CHECK(m(1000, 2, 2) == doctest::Approx(0.893398238648769).epsilon(1e-12));
  CHECK(m(10000, 2, 2) == doctest::Approx(0.273339531223077).epsilon(1e-12));

  EpsilonModel capped;
  capped.k_mode = EpsilonModel::KMode::cap;
  CHECK(capped(100, 2, 2) == doctest::Approx(44.414079666719786).epsilon(1e-12));

  EpsilonModel given;
  given.k_mode = EpsilonModel::KMode::given;
  given.k = 5.0;
  CHECK(given(100, 2, 2) == doctest::Approx(3.555961787638326).epsilon(1e-12));
  given.k = 1e12;  // far past the structural cap; must clamp to the cap value
  CHECK(given(100, 2, 2) == doctest::Approx(44.414079666719786).epsilon(1e-12));

  CHECK(wringing_step_cap(100, 0.1, 2, 2) == doctest::Approx(374.0));
  CHECK(subcode_mi_budget_bits(100, 0.1, 2, 2) ==
        doctest::Approx(26.922352548202163).epsilon(1e-12));

  EpsilonModel bad;
  bad.lambda = 1.0;
  CHECK_THROWS_AS(bad(100, 2, 2), Error);
  CHECK_THROWS_AS(m(0, 2, 2), Error);
}

TEST_CASE("slack model decays toward zero and grows with conditioning steps") {
  EpsilonModel m;
  double prev = m(10, 2, 2);
  for (std::int64_t n : {100, 1000, 10000, 100000}) {
    const double cur = m(n, 2, 2);
    CHECK(cur < prev);
    prev = cur;
  }
  EpsilonModel k1;
  k1.k_mode = EpsilonModel::KMode::given;
  k1.k = 1.0;
  CHECK(k1(1000, 2, 2) > m(1000, 2, 2));
}

TEST_CASE("internal decomposition family is marginal-exact") {
  using namespace macx::detail;
  const double joints[][4] = {
      {0.25, 0.25, 0.25, 0.25},
      {0.4, 0.2, 0.1, 0.3},
      {0.5, 0.0, 0.0, 0.5},
      {0.7, 0.1, 0.1, 0.1},
  };
  for (const double* p : joints) {
    const auto fam = family_decomps(p, 2, 2, 12);
    CHECK(fam.size() >= 2);
    for (const auto& d : fam) {
      CHECK(decomp_marginal_l1(d, p) <= 1e-9);
      double wsum = 0.0;
      for (int q = 0; q < d.m; ++q) wsum += d.w[q];
      CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("internal random decompositions hit the target marginal") {
  using namespace macx::detail;
  Rng rng(99);
  const double p[4] = {0.35, 0.15, 0.2, 0.3};
  int produced = 0;
  for (int i = 0; i < 200; ++i) {
    const RawDecomp d = random_exact_decomp(p, 2, 2, rng);
    if (d.m == 0) continue;
    ++produced;
    CHECK(decomp_marginal_l1(d, p) <= 1e-9);
  }
  CHECK(produced >= 150);
}
