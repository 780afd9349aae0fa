#include <cmath>

#include "accuracytrader/workload_cf.hpp"
#include "doctest.h"
#include "oracle.hpp"

using namespace atr;

TEST_CASE("pearson: identical maps give 1, mirrored maps give -1") {
  ItemRatings a{{1, 1.0}, {2, 2.0}, {3, 3.0}};
  CHECK(pearson(a, a) == doctest::Approx(1.0));
  ItemRatings b{{1, 3.0}, {2, 2.0}, {3, 1.0}};
  CHECK(pearson(a, b) == doctest::Approx(-1.0));
}

TEST_CASE("pearson matches the direct formula") {
  ItemRatings a{{1, 4.0}, {2, 5.0}, {3, 3.0}, {4, 2.0}};
  ItemRatings b{{1, 3.0}, {2, 4.0}, {3, 2.0}, {4, 2.0}};
  CHECK(pearson(a, b) == doctest::Approx(oracle::pearson_direct(a, b, 2)).epsilon(1e-12));
}

TEST_CASE("pearson guards: low overlap and zero variance give 0") {
  ItemRatings a{{1, 4.0}, {2, 5.0}};
  ItemRatings one{{1, 4.0}};
  CHECK(pearson(a, one) == 0.0);
  ItemRatings flat{{1, 3.0}, {2, 3.0}};
  CHECK(pearson(a, flat) == 0.0);
  CHECK(pearson(ItemRatings{}, ItemRatings{}) == 0.0);
}

TEST_CASE("pearson is symmetric and shift/scale invariant") {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    ItemRatings a, b, b_affine;
    int n = static_cast<int>(rng.uniform_int(2, 12));
    for (int i = 0; i < n; ++i) {
      a[i] = rng.uniform(1, 5);
      b[i] = rng.uniform(1, 5);
      b_affine[i] = 2.0 * b[i] + 1.0;
    }
    CHECK(pearson(a, b) == doctest::Approx(pearson(b, a)).epsilon(1e-12));
    CHECK(pearson(a, b_affine) == doctest::Approx(pearson(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("pearson matches the oracle on 1000 random instances") {
  Rng rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    ItemRatings a, b;
    int n = static_cast<int>(rng.uniform_int(0, 15));
    for (int i = 0; i < n; ++i) {
      if (rng.uniform() < 0.8) a[i] = rng.uniform(1, 5);
      if (rng.uniform() < 0.8) b[i] = rng.uniform(1, 5);
    }
    double got = pearson(a, b);
    double want = oracle::pearson_direct(a, b, 2);
    CHECK(std::abs(got - want) <= 1e-12);
  }
}

TEST_CASE("predict_contribution skips unrated targets, centers residuals") {
  CfRequest req;
  req.user = "act";
  req.known = {{1, 3.0}, {2, 3.0}};
  req.targets = {10, 11};

  ItemRatings none{{5, 4.0}};
  NeighborView miss{&none, 4.0};
  auto zero = predict_contribution(req, miss, 0.7, true);
  CHECK(zero[0].weight_mass == 0.0);
  CHECK(zero[1].weight_mass == 0.0);

  // Single neighbor with rating equal to their own mean contributes nothing
  // beyond the active mean.
  ItemRatings nb{{10, 4.0}};
  NeighborView view{&nb, 4.0};
  CfResult res;
  res.acc = predict_contribution(req, view, 1.0, true);
  CfConfig cfg;
  auto preds = finalize(res, req, cfg);
  CHECK(preds.at(10) == doctest::Approx(3.0));
  CHECK(preds.at(11) == doctest::Approx(3.0));  // fallback: no contribution
}

TEST_CASE("two weighted neighbors reproduce the weighted-average formula") {
  CfRequest req;
  req.user = "act";
  req.known = {{1, 2.0}, {2, 4.0}};  // active mean 3.0
  req.targets = {10};

  ItemRatings n1{{10, 4.5}};
  ItemRatings n2{{10, 2.0}};
  double m1 = 4.5, m2 = 2.0;  // neighbor means
  CfResult res;
  res.acc.assign(1, CfAccum{});
  auto d1 = predict_contribution(req, {&n1, 3.5}, 0.5, true);
  auto d2 = predict_contribution(req, {&n2, 2.5}, 0.25, true);
  (void)m1;
  (void)m2;
  for (std::size_t i = 0; i < res.acc.size(); ++i) {
    res.acc[i] += d1[i];
    res.acc[i] += d2[i];
  }
  CfConfig cfg;
  auto preds = finalize(res, req, cfg);
  double want = 3.0 + (0.5 * (4.5 - 3.5) + 0.25 * (2.0 - 2.5)) / (0.5 + 0.25);
  CHECK(preds.at(10) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("finalize clamps to the rating scale and falls back to the mean") {
  CfRequest req;
  req.user = "act";
  req.known = {{1, 3.0}, {2, 3.0}};
  req.targets = {10};
  CfConfig cfg;

  CfResult big;
  big.acc = {CfAccum{1.0, 0.5}};  // 3.0 + 2.0 = 5.0, at the top of the scale
  CHECK(finalize(big, req, cfg).at(10) == doctest::Approx(5.0));

  CfResult overflow;
  overflow.acc = {CfAccum{5.0, 0.5}};  // 3.0 + 10.0 clamps to 5
  CHECK(finalize(overflow, req, cfg).at(10) == doctest::Approx(5.0));

  CfResult empty;
  empty.acc = {CfAccum{}};
  CHECK(finalize(empty, req, cfg).at(10) == doctest::Approx(3.0));
}

TEST_CASE("contribution additivity: order and grouping do not matter") {
  Rng rng(5);
  CfRequest req;
  req.user = "act";
  for (int i = 0; i < 10; ++i) req.known[i] = rng.uniform(1, 5);
  req.targets = {20, 21, 22};

  std::vector<ItemRatings> neighbors;
  std::vector<double> weights;
  for (int n = 0; n < 40; ++n) {
    ItemRatings r;
    for (int i = 0; i < 10; ++i)
      if (rng.uniform() < 0.5) r[i] = rng.uniform(1, 5);
    for (ItemId t : req.targets)
      if (rng.uniform() < 0.6) r[t] = rng.uniform(1, 5);
    if (r.empty()) r[0] = 3.0;
    neighbors.push_back(r);
    weights.push_back(rng.uniform(-1, 1));
  }

  auto run = [&](const std::vector<std::size_t>& order) {
    CfResult res;
    res.acc.assign(req.targets.size(), CfAccum{});
    for (std::size_t idx : order) {
      NeighborView view{&neighbors[idx], ratings_mean(neighbors[idx])};
      auto d = predict_contribution(req, view, weights[idx], true);
      for (std::size_t i = 0; i < d.size(); ++i) res.acc[i] += d[i];
    }
    CfConfig cfg;
    return finalize(res, req, cfg);
  };

  std::vector<std::size_t> order(neighbors.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto base = run(order);
  for (int shuffle = 0; shuffle < 5; ++shuffle) {
    rng.shuffle(order);
    auto other = run(order);
    for (auto& [item, v] : base) CHECK(std::abs(other.at(item) - v) <= 1e-9);
  }
}

TEST_CASE("rmse matches the formula and the brute-force oracle") {
  std::map<ItemId, double> preds{{1, 3.0}, {2, 5.0}};
  ItemRatings actuals{{1, 4.0}, {2, 4.0}};
  CHECK(rmse(preds, actuals) == doctest::Approx(1.0));

  ItemRatings exact_match{{1, 3.0}, {2, 5.0}};
  CHECK(rmse(preds, exact_match) == doctest::Approx(0.0));

  CHECK_THROWS_AS(rmse({}, actuals), DataError);

  Rng rng(3);
  std::map<ItemId, double> p2;
  ItemRatings a2;
  for (int i = 0; i < 100; ++i) {
    p2[i] = rng.uniform(1, 5);
    a2[i] = rng.uniform(1, 5);
  }
  CHECK(rmse(p2, a2) == doctest::Approx(oracle::rmse_direct(p2, a2)).epsilon(1e-12));
}

TEST_CASE("accuracy_loss_cf arithmetic") {
  CHECK(accuracy_loss_cf(1.0, 1.0) == 0.0);
  CHECK(accuracy_loss_cf(1.1, 1.0) == doctest::Approx(10.0));
  CHECK(accuracy_loss_cf(0.9, 1.0) == 0.0);  // floored
}
