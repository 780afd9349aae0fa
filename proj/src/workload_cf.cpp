#include "accuracytrader/workload_cf.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace atr {

double CfRequest::active_mean() const { return ratings_mean(known); }

void CfRequest::validate() const {
  if (known.empty()) throw DataError("cf request " + user + ": no known ratings");
  for (ItemId t : targets)
    if (known.count(t))
      throw DataError("cf request " + user + ": target item " + std::to_string(t) +
                      " already has a known rating");
}

double ratings_mean(const ItemRatings& r) {
  if (r.empty()) return 0.0;
  double s = 0.0;
  for (auto& [item, v] : r) s += v;
  return s / static_cast<double>(r.size());
}

ItemRatings aggregated_means(const AggregatedUser& u) {
  ItemRatings out;
  for (auto& [item, mc] : u) out.emplace(item, mc.mean);
  return out;
}

double pearson(const ItemRatings& a, const ItemRatings& b, int min_overlap) {
  // Walk the two sorted maps once to gather co-rated pairs.
  std::vector<std::pair<double, double>> pairs;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      pairs.emplace_back(ia->second, ib->second);
      ++ia;
      ++ib;
    }
  }
  if (static_cast<int>(pairs.size()) < min_overlap) return 0.0;

  double ma = 0.0, mb = 0.0;
  for (auto& [x, y] : pairs) {
    ma += x;
    mb += y;
  }
  ma /= static_cast<double>(pairs.size());
  mb /= static_cast<double>(pairs.size());
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (auto& [x, y] : pairs) {
    double dx = x - ma, dy = y - mb;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  double w = sxy / std::sqrt(sxx * syy);
  return std::clamp(w, -1.0, 1.0);
}

std::vector<CfAccum> predict_contribution(const CfRequest& req, const NeighborView& neighbor,
                                          double weight, bool mean_centered) {
  std::vector<CfAccum> deltas(req.targets.size());
  if (weight == 0.0) return deltas;
  for (std::size_t i = 0; i < req.targets.size(); ++i) {
    auto it = neighbor.ratings->find(req.targets[i]);
    if (it == neighbor.ratings->end()) continue;
    double value = mean_centered ? it->second - neighbor.mean : it->second;
    deltas[i].weighted_sum = weight * value;
    deltas[i].weight_mass = std::abs(weight);
  }
  return deltas;
}

std::map<ItemId, double> finalize(const CfResult& result, const CfRequest& req,
                                  const CfConfig& cfg) {
  if (result.acc.size() != req.targets.size())
    throw InvariantError("finalize: accumulator count disagrees with targets");
  double base = req.active_mean();
  std::map<ItemId, double> out;
  for (std::size_t i = 0; i < req.targets.size(); ++i) {
    const CfAccum& a = result.acc[i];
    double p;
    if (a.weight_mass > 0.0) {
      double avg = a.weighted_sum / a.weight_mass;
      p = cfg.mean_centered ? base + avg : avg;
    } else {
      p = base;
    }
    out[req.targets[i]] = std::clamp(p, cfg.scale.lo, cfg.scale.hi);
  }
  return out;
}

double rmse(const std::map<ItemId, double>& predictions, const ItemRatings& actuals) {
  if (actuals.empty()) throw DataError("rmse: empty test set");
  double sum = 0.0;
  for (auto& [item, actual] : actuals) {
    auto it = predictions.find(item);
    if (it == predictions.end())
      throw DataError("rmse: missing prediction for item " + std::to_string(item));
    double e = it->second - actual;
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(actuals.size()));
}

double accuracy_loss_cf(double rmse_approx, double rmse_exact) {
  if (rmse_exact <= 0.0) return rmse_approx > 0.0 ? 100.0 : 0.0;
  return std::max(0.0, 100.0 * (rmse_approx - rmse_exact) / rmse_exact);
}

}  // namespace atr
