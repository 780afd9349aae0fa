#pragma once

#include <map>
#include <vector>

#include "accuracytrader/common.hpp"
#include "accuracytrader/dataset.hpp"
#include "accuracytrader/synopsis.hpp"

namespace atr {

struct CfConfig {
  int min_overlap = 2;        // co-rated items required for a nonzero weight
  bool mean_centered = true;  // weighted average of mean-centered residuals
  RatingScale scale;
};

// A prediction request from an active user: the ratings we know, and the
// items whose ratings we want.
struct CfRequest {
  PointId user;
  ItemRatings known;
  std::vector<ItemId> targets;

  double active_mean() const;
  void validate() const;
};

// Mergeable accumulators for one target item. Contributions from neighbors
// processed in any order or grouping sum to the same final prediction.
struct CfAccum {
  double weighted_sum = 0.0;
  double weight_mass = 0.0;

  CfAccum& operator+=(const CfAccum& o) {
    weighted_sum += o.weighted_sum;
    weight_mass += o.weight_mass;
    return *this;
  }
  CfAccum& operator-=(const CfAccum& o) {
    weighted_sum -= o.weighted_sum;
    weight_mass -= o.weight_mass;
    return *this;
  }
};

struct CfResult {
  // One accumulator per target item, aligned with CfRequest::targets.
  std::vector<CfAccum> acc;
};

// A neighbor as the prediction step sees it: a rating vector and its mean.
// Original users supply their own ratings; aggregated users supply their
// per-item mean-rating vector.
struct NeighborView {
  const ItemRatings* ratings;
  double mean = 0.0;
};

double ratings_mean(const ItemRatings& r);
ItemRatings aggregated_means(const AggregatedUser& u);

// Pearson correlation over co-rated items only; 0 when the overlap is below
// min_overlap or either side has zero variance.
double pearson(const ItemRatings& a, const ItemRatings& b, int min_overlap = 2);

// Per-target deltas contributed by one weighted neighbor. Targets the
// neighbor has not rated contribute nothing.
std::vector<CfAccum> predict_contribution(const CfRequest& req, const NeighborView& neighbor,
                                          double weight, bool mean_centered);

// p(u,i) = active_mean + weighted_sum/weight_mass (centered mode), falling
// back to the active mean when no weight accumulated; clamped to the scale.
std::map<ItemId, double> finalize(const CfResult& result, const CfRequest& req,
                                  const CfConfig& cfg);

double rmse(const std::map<ItemId, double>& predictions, const ItemRatings& actuals);

// Percentage increase of the approximate RMSE over the exact one, floored
// at zero.
double accuracy_loss_cf(double rmse_approx, double rmse_exact);

}  // namespace atr
