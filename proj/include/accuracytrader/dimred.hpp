#pragma once

#include <map>
#include <string>
#include <vector>

#include "accuracytrader/common.hpp"
#include "accuracytrader/dataset.hpp"

namespace atr {

struct SvdConfig {
  int dims = 3;
  int iters_per_dim = 100;
  double learning_rate = 0.002;
  double regularization = 0.02;
  std::uint64_t seed = 1;

  void validate() const;
};

// Low-dimensional dense features. Row features key the original points; the
// column features are retained for reconstruction checks and for projecting
// new or changed rows into the frozen reduced space.
struct FeatureMatrix {
  int dims = 0;
  std::vector<PointId> row_ids;
  std::vector<std::vector<double>> row_features;  // u x dims
  std::vector<std::string> col_names;
  std::vector<std::vector<double>> col_features;  // v x dims

  const std::vector<double>& row_of(const PointId& id) const;
  bool has_row(const PointId& id) const;
  void set_row(const PointId& id, std::vector<double> coords);  // add or replace
  void drop_row(const PointId& id);

  double reconstruct(std::size_t row, std::size_t col) const;

  void save_rows_csv(const std::string& path) const;
  void save_cols_csv(const std::string& path) const;
  static FeatureMatrix load_csv(const std::string& rows_path, const std::string& cols_path);

 private:
  mutable std::map<PointId, std::size_t> row_lookup_;
  void rebuild_lookup() const;
  friend FeatureMatrix reduce(const NumericDataset&, const SvdConfig&);
};

// Dimension-by-dimension gradient descent on the squared error of observed
// entries, each dimension fitting the residual left by the previous ones.
// Deterministic given (data, cfg); throws DataError on an empty/all-zero
// dataset and on divergence.
FeatureMatrix reduce(const NumericDataset& data, const SvdConfig& cfg);

// Least-squares projection of a row onto frozen column features:
// argmin_x ||values - Q x||^2 + reg ||x||^2. With dense_zeros, attributes
// not listed are treated as value zero (text occurrence counts); otherwise
// they are unobserved. Attributes without a column feature are ignored.
std::vector<double> project_row(const FeatureMatrix& features,
                                const std::vector<std::pair<std::string, double>>& attrs,
                                double regularization, bool dense_zeros);

}  // namespace atr
