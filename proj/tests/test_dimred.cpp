#include <chrono>
#include <cmath>

#include "accuracytrader/dimred.hpp"
#include "accuracytrader/synth.hpp"
#include "doctest.h"
#include "oracle.hpp"

using namespace atr;

namespace {

NumericDataset dense_dataset(const oracle::Dense& a, bool dense_flag = false) {
  NumericDataset d;
  d.dense = dense_flag;
  for (std::size_t r = 0; r < a.size(); ++r) d.row_ids.push_back("r" + std::to_string(r));
  for (std::size_t c = 0; c < a[0].size(); ++c) d.col_names.push_back("c" + std::to_string(c));
  d.rows.resize(a.size());
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t c = 0; c < a[r].size(); ++c)
      if (a[r][c] != 0.0) d.rows[r].emplace_back(static_cast<std::int32_t>(c), a[r][c]);
  return d;
}

oracle::Dense reconstruct(const FeatureMatrix& fm) {
  oracle::Dense out(fm.row_ids.size(), std::vector<double>(fm.col_names.size(), 0.0));
  for (std::size_t r = 0; r < out.size(); ++r)
    for (std::size_t c = 0; c < out[r].size(); ++c) out[r][c] = fm.reconstruct(r, c);
  return out;
}

}  // namespace

TEST_CASE("reduce recovers a rank-1 matrix against the power-iteration oracle") {
  oracle::Dense a = {{1, 2, 3}, {2, 4, 6}};  // outer([1,2],[1,2,3])
  NumericDataset d = dense_dataset(a);
  SvdConfig cfg;
  cfg.dims = 1;
  cfg.iters_per_dim = 4000;
  cfg.learning_rate = 0.01;
  cfg.regularization = 1e-9;
  FeatureMatrix fm = reduce(d, cfg);

  oracle::Dense ours = reconstruct(fm);
  oracle::Dense ref = oracle::rank1_reconstruction(a);
  double rel = oracle::frobenius_diff(ours, a) / oracle::frobenius(a);
  double rel_ref = oracle::frobenius_diff(ref, a) / oracle::frobenius(a);
  CHECK(rel_ref < 1e-9);  // the matrix is exactly rank 1
  CHECK(rel < 1e-3);
}

TEST_CASE("reduce on a diagonal 3x3 approaches the Jacobi-SVD reconstruction") {
  oracle::Dense a = {{1.0, 0, 0}, {0, 1.1, 0}, {0, 0, 0.9}};
  NumericDataset d = dense_dataset(a, /*dense=*/true);
  SvdConfig cfg;
  cfg.dims = 3;
  cfg.iters_per_dim = 6000;
  cfg.learning_rate = 0.03;
  cfg.regularization = 1e-9;
  FeatureMatrix fm = reduce(d, cfg);

  double rel = oracle::frobenius_diff(reconstruct(fm), a) / oracle::frobenius(a);
  oracle::Dense ref = oracle::jacobi_reconstruction(a, 3);
  double rel_ref = oracle::frobenius_diff(ref, a) / oracle::frobenius(a);
  CHECK(rel_ref < 1e-9);  // full-rank reconstruction is exact
  CHECK(rel < 0.05);
}

TEST_CASE("identical rows receive near-identical features") {
  // Rank-1 input: the per-dimension residual goes to zero, so the two equal
  // rows end up with equal updates and converge together.
  oracle::Dense a = {{1, 2, 3}, {1, 2, 3}, {2, 4, 6}};
  NumericDataset d = dense_dataset(a);
  SvdConfig cfg;
  cfg.dims = 1;
  cfg.iters_per_dim = 20000;
  cfg.learning_rate = 0.01;
  cfg.regularization = 1e-9;
  FeatureMatrix fm = reduce(d, cfg);
  CHECK(std::abs(fm.row_features[0][0] - fm.row_features[1][0]) < 1e-6);
}

TEST_CASE("reduce is deterministic for identical inputs") {
  CfSynthParams p;
  p.users = 120;
  p.items = 40;
  p.clusters = 4;
  p.ratings_per_user = 12;
  p.seed = 5;
  RatingMatrix m = gen_clustered_ratings(p);
  SubsetData s;
  s.kind = DataKind::Numeric;
  s.ratings = m;
  NumericDataset d = vectorize(s);
  SvdConfig cfg;
  cfg.iters_per_dim = 40;
  cfg.seed = 99;
  FeatureMatrix a = reduce(d, cfg);
  FeatureMatrix b = reduce(d, cfg);
  CHECK(a.row_features == b.row_features);
  CHECK(a.col_features == b.col_features);
}

TEST_CASE("reduce rejects empty and all-zero datasets and reports divergence") {
  NumericDataset d;
  d.row_ids = {"r0"};
  d.col_names = {"c0"};
  d.rows.resize(1);
  SvdConfig cfg;
  CHECK_THROWS_AS(reduce(d, cfg), DataError);

  d.rows[0].emplace_back(0, 0.0);
  CHECK_THROWS_AS(reduce(d, cfg), DataError);

  oracle::Dense big = {{100, 200}, {300, 400}};
  NumericDataset bd = dense_dataset(big);
  SvdConfig wild;
  wild.learning_rate = 10.0;
  wild.iters_per_dim = 200;
  CHECK_THROWS_WITH_AS(reduce(bd, wild), doctest::Contains("learning rate"), DataError);
}

TEST_CASE("runtime follows observed entries, not the u x v envelope") {
  // 200 observed cells spread over a 200 x 50000 shape must be quick.
  NumericDataset d;
  d.rows.resize(200);
  for (int r = 0; r < 200; ++r) {
    d.row_ids.push_back("r" + std::to_string(r));
    d.rows[static_cast<std::size_t>(r)].emplace_back(r * 250, 3.0);
  }
  for (int c = 0; c < 50000; ++c) d.col_names.push_back("c" + std::to_string(c));
  SvdConfig cfg;
  cfg.iters_per_dim = 100;
  auto t0 = std::chrono::steady_clock::now();
  FeatureMatrix fm = reduce(d, cfg);
  double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  CHECK(fm.row_ids.size() == 200);
  CHECK(ms < 2000);
}

TEST_CASE("clustered data keeps intra-cluster distances below inter-cluster ones") {
  CfSynthParams p;
  p.users = 300;
  p.items = 120;
  p.clusters = 5;
  p.ratings_per_user = 40;
  p.noise_sigma = 0.3;
  p.seed = 11;
  RatingMatrix m = gen_clustered_ratings(p);
  SubsetData s;
  s.kind = DataKind::Numeric;
  s.ratings = m;
  SvdConfig cfg;
  cfg.seed = 11;
  FeatureMatrix fm = reduce(vectorize(s), cfg);

  auto cluster_of = [](const PointId& id) { return std::stoi(id.substr(1)) % 5; };
  double intra = 0, inter = 0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < fm.row_ids.size(); ++i)
    for (std::size_t j = i + 1; j < fm.row_ids.size(); ++j) {
      double d2 = 0;
      for (int k = 0; k < fm.dims; ++k) {
        double diff = fm.row_features[i][static_cast<std::size_t>(k)] -
                      fm.row_features[j][static_cast<std::size_t>(k)];
        d2 += diff * diff;
      }
      if (cluster_of(fm.row_ids[i]) == cluster_of(fm.row_ids[j])) {
        intra += std::sqrt(d2);
        ++n_intra;
      } else {
        inter += std::sqrt(d2);
        ++n_inter;
      }
    }
  CHECK(intra / static_cast<double>(n_intra) < inter / static_cast<double>(n_inter));
}

TEST_CASE("project_row reproduces a training row's features") {
  CfSynthParams p;
  p.users = 150;
  p.items = 60;
  p.clusters = 3;
  p.ratings_per_user = 30;
  p.seed = 3;
  RatingMatrix m = gen_clustered_ratings(p);
  SubsetData s;
  s.kind = DataKind::Numeric;
  s.ratings = m;
  SvdConfig cfg;
  cfg.seed = 3;
  FeatureMatrix fm = reduce(vectorize(s), cfg);

  const PointId& probe = fm.row_ids[7];
  std::vector<std::pair<std::string, double>> attrs;
  for (auto& [item, v] : m.ratings.at(probe)) attrs.emplace_back(std::to_string(item), v);
  auto coords = project_row(fm, attrs, 1e-6, false);
  // Projection optimizes the same least-squares objective, so it should land
  // near the trained row (not exactly: training also moved the columns).
  double d2 = 0, n2 = 0;
  for (int k = 0; k < fm.dims; ++k) {
    double diff = coords[static_cast<std::size_t>(k)] - fm.row_of(probe)[static_cast<std::size_t>(k)];
    d2 += diff * diff;
    n2 += fm.row_of(probe)[static_cast<std::size_t>(k)] * fm.row_of(probe)[static_cast<std::size_t>(k)];
  }
  CHECK(std::sqrt(d2) < 0.5 * std::sqrt(n2) + 0.2);
}
