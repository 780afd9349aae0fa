#pragma once

#include <limits>
#include <map>
#include <memory>
#include <vector>

#include "accuracytrader/common.hpp"
#include "accuracytrader/synopsis.hpp"
#include "accuracytrader/workload_cf.hpp"
#include "accuracytrader/workload_search.hpp"

namespace atr {

struct EngineParams {
  // Deadline measured from request submit time; queueing delay counts.
  double l_spe_ms = std::numeric_limits<double>::infinity();
  // Maximum number of ranked original sets to process; negative means all.
  std::int64_t i_max = -1;

  void validate() const;
};

// Time source for the processing loop. Live runs observe real time and
// ignore the charge hooks; the simulator advances virtual time through them.
class ProcessClock {
 public:
  virtual ~ProcessClock() = default;
  virtual double elapsed_ms() = 0;
  virtual void charge_synopsis(std::size_t aggregated_points) { (void)aggregated_points; }
  virtual void charge_set(std::size_t original_points) { (void)original_points; }
};

// Never runs out of time; used for exact baselines and offline experiments.
class UnboundedClock : public ProcessClock {
 public:
  double elapsed_ms() override { return 0.0; }
};

// One component's view of a request: produce the initial result and the
// correlations from the synopsis, then refine with ranked original sets.
class ComponentWorkload {
 public:
  virtual ~ComponentWorkload() = default;
  // Returns (aggregated point id, correlation c_i) for every synopsis point.
  virtual std::vector<std::pair<AggId, double>> process_synopsis() = 0;
  virtual std::size_t synopsis_size() const = 0;
  virtual std::size_t set_size(AggId id) const = 0;
  // Process the original points behind one aggregated point.
  virtual void improve(AggId id) = 0;
};

struct ComponentOutcome {
  std::size_t sets_processed = 0;
  bool synopsis_only = true;
  double elapsed_ms = 0.0;
  std::vector<AggId> processed_order;
};

// Descending correlation, ties by ascending aggregated id.
std::vector<AggId> rank_by_correlation(std::vector<std::pair<AggId, double>> correlations);

// The accuracy-aware processing loop: initial result from the synopsis,
// ranking, then refinement while elapsed < l_spe and fewer than i_max sets
// are done. The deadline is checked before each set; a started set is always
// finished, so the observed elapsed time may overshoot l_spe by one set.
ComponentOutcome process(ComponentWorkload& workload, const EngineParams& params,
                         ProcessClock& clock);

// ---------------------------------------------------------------------------
// Live adapters: real computation on the component's data.
// ---------------------------------------------------------------------------

class CfComponentWorkload : public ComponentWorkload {
 public:
  CfComponentWorkload(const SynopsisState& state, const CfRequest& request, const CfConfig& cfg);

  std::vector<std::pair<AggId, double>> process_synopsis() override;
  std::size_t synopsis_size() const override { return state_.synopsis.size(); }
  std::size_t set_size(AggId id) const override;
  void improve(AggId id) override;

  const CfResult& result() const { return result_; }
  std::map<ItemId, double> predictions() const { return finalize(result_, request_, cfg_); }

 private:
  const SynopsisState& state_;
  const CfRequest& request_;
  CfConfig cfg_;
  CfResult result_;
  // Initial contribution of each aggregated point, subtracted when its set
  // is refined so full coverage degenerates to exact processing.
  std::map<AggId, std::vector<CfAccum>> aggregated_contrib_;
};

class SearchComponentWorkload : public ComponentWorkload {
 public:
  SearchComponentWorkload(const SynopsisState& state, const SearchRequest& request,
                          const CorpusStats& stats);

  std::vector<std::pair<AggId, double>> process_synopsis() override;
  std::size_t synopsis_size() const override { return state_.synopsis.size(); }
  std::size_t set_size(AggId id) const override;
  void improve(AggId id) override;

  // Current top-k over the candidate pool: scored original pages plus
  // placeholder entries for aggregated points not yet refined.
  SearchResult result() const;

  static PointId placeholder_id(int component, AggId agg);

 private:
  const SynopsisState& state_;
  const SearchRequest& request_;
  const CorpusStats& stats_;
  std::vector<ScoredDoc> pool_;
  std::map<AggId, std::size_t> placeholder_pos_;  // agg id -> index in pool_
};

}  // namespace atr
