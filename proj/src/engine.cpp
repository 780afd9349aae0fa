#include "accuracytrader/engine.hpp"

#include <algorithm>
#include <cmath>

namespace atr {

void EngineParams::validate() const {
  if (!(l_spe_ms > 0.0)) throw UsageError("engine: l_spe_ms must be > 0");
}

std::vector<AggId> rank_by_correlation(std::vector<std::pair<AggId, double>> correlations) {
  std::sort(correlations.begin(), correlations.end(),
            [](const std::pair<AggId, double>& a, const std::pair<AggId, double>& b) {
              if (a.second != b.second) return a.second > b.second;
              return a.first < b.first;
            });
  std::vector<AggId> order;
  order.reserve(correlations.size());
  for (auto& [id, c] : correlations) order.push_back(id);
  return order;
}

ComponentOutcome process(ComponentWorkload& workload, const EngineParams& params,
                         ProcessClock& clock) {
  params.validate();
  auto correlations = workload.process_synopsis();
  clock.charge_synopsis(workload.synopsis_size());
  auto order = rank_by_correlation(std::move(correlations));

  const std::size_t m = order.size();
  std::size_t cap = params.i_max < 0 ? m : std::min(m, static_cast<std::size_t>(params.i_max));

  ComponentOutcome out;
  while (out.sets_processed < cap && clock.elapsed_ms() < params.l_spe_ms) {
    AggId next = order[out.sets_processed];
    workload.improve(next);
    clock.charge_set(workload.set_size(next));
    out.processed_order.push_back(next);
    ++out.sets_processed;
  }
  out.synopsis_only = out.sets_processed == 0;
  out.elapsed_ms = clock.elapsed_ms();
  return out;
}

// ------------------------------- CF ----------------------------------------

CfComponentWorkload::CfComponentWorkload(const SynopsisState& state, const CfRequest& request,
                                         const CfConfig& cfg)
    : state_(state), request_(request), cfg_(cfg) {
  if (state.kind != DataKind::Numeric)
    throw InvariantError("CfComponentWorkload needs a numeric component");
  result_.acc.assign(request_.targets.size(), CfAccum{});
}

std::vector<std::pair<AggId, double>> CfComponentWorkload::process_synopsis() {
  std::vector<std::pair<AggId, double>> correlations;
  correlations.reserve(state_.synopsis.size());
  for (const auto& p : state_.synopsis.points) {
    ItemRatings means = aggregated_means(std::get<AggregatedUser>(p.payload));
    double w = pearson(request_.known, means, cfg_.min_overlap);
    // Both strongly positive and strongly negative neighbors matter, so the
    // ranking correlation is |w|.
    correlations.emplace_back(p.id, std::abs(w));
    if (w != 0.0) {
      NeighborView view{&means, ratings_mean(means)};
      auto deltas = predict_contribution(request_, view, w, cfg_.mean_centered);
      for (std::size_t i = 0; i < deltas.size(); ++i) result_.acc[i] += deltas[i];
      aggregated_contrib_.emplace(p.id, std::move(deltas));
    }
  }
  return correlations;
}

std::size_t CfComponentWorkload::set_size(AggId id) const {
  return state_.index.groups.at(id).size();
}

void CfComponentWorkload::improve(AggId id) {
  auto git = state_.index.groups.find(id);
  if (git == state_.index.groups.end())
    throw InvariantError("cf improve: unknown aggregated point " + std::to_string(id));

  // Swap the aggregated estimate for the real members' contributions.
  auto cit = aggregated_contrib_.find(id);
  if (cit != aggregated_contrib_.end()) {
    for (std::size_t i = 0; i < cit->second.size(); ++i) result_.acc[i] -= cit->second[i];
    aggregated_contrib_.erase(cit);
  }
  for (const auto& user : git->second) {
    const ItemRatings& ratings = state_.raw.ratings.ratings.at(user);
    double w = pearson(request_.known, ratings, cfg_.min_overlap);
    if (w == 0.0) continue;
    NeighborView view{&ratings, ratings_mean(ratings)};
    auto deltas = predict_contribution(request_, view, w, cfg_.mean_centered);
    for (std::size_t i = 0; i < deltas.size(); ++i) result_.acc[i] += deltas[i];
  }
}

// ------------------------------ search -------------------------------------

PointId SearchComponentWorkload::placeholder_id(int component, AggId agg) {
  return "ag" + std::to_string(component) + ":" + std::to_string(agg);
}

SearchComponentWorkload::SearchComponentWorkload(const SynopsisState& state,
                                                 const SearchRequest& request,
                                                 const CorpusStats& stats)
    : state_(state), request_(request), stats_(stats) {
  if (state.kind != DataKind::Text)
    throw InvariantError("SearchComponentWorkload needs a text component");
}

std::vector<std::pair<AggId, double>> SearchComponentWorkload::process_synopsis() {
  std::vector<std::pair<AggId, double>> correlations;
  correlations.reserve(state_.synopsis.size());
  for (const auto& p : state_.synopsis.points) {
    double c = score_aggregated(std::get<AggregatedPage>(p.payload), request_, stats_);
    correlations.emplace_back(p.id, c);
    if (c > 0.0) {
      placeholder_pos_.emplace(p.id, pool_.size());
      pool_.push_back({placeholder_id(state_.component_id, p.id), c, true});
    }
  }
  return correlations;
}

std::size_t SearchComponentWorkload::set_size(AggId id) const {
  return state_.index.groups.at(id).size();
}

void SearchComponentWorkload::improve(AggId id) {
  auto git = state_.index.groups.find(id);
  if (git == state_.index.groups.end())
    throw InvariantError("search improve: unknown aggregated point " + std::to_string(id));

  auto pit = placeholder_pos_.find(id);
  if (pit != placeholder_pos_.end()) {
    // Blank the placeholder; positions of other placeholders stay valid.
    pool_[pit->second].score = -1.0;
    placeholder_pos_.erase(pit);
  }
  for (const auto& doc : git->second) {
    double s = score_doc(state_.raw.corpus.docs.at(doc), request_, stats_);
    if (s > 0.0) pool_.push_back({doc, s, false});
  }
}

SearchResult SearchComponentWorkload::result() const {
  std::vector<ScoredDoc> hits;
  hits.reserve(pool_.size());
  for (const auto& e : pool_)
    if (e.score > 0.0) hits.push_back(e);
  sort_hits(hits);
  if (static_cast<int>(hits.size()) > request_.k) hits.resize(static_cast<std::size_t>(request_.k));
  return {std::move(hits)};
}

}  // namespace atr
