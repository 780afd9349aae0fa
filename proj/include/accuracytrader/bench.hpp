#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "accuracytrader/engine.hpp"
#include "accuracytrader/kvconfig.hpp"
#include "accuracytrader/simulator.hpp"
#include "accuracytrader/synopsis.hpp"
#include "accuracytrader/synth.hpp"

namespace atr {

// Parsed benchmark scenario (flat key=value file; unknown keys rejected).
struct BenchScenario {
  DataKind kind = DataKind::Numeric;
  int n_components = 8;
  std::uint64_t seed = 42;

  // Data: explicit files, or the seeded synthetic generators when empty.
  std::string data_path;
  std::string requests_path;
  std::string testset_path;  // cf only
  CfSynthParams cf_synth;
  CorpusSynthParams corpus_synth;
  int synth_requests = 200;
  double known_fraction = 0.8;

  SynopsisBuildConfig synopsis;
  CfConfig cf;
  int search_k = 10;
  bool global_stats = false;

  std::vector<Strategy> strategies = {Strategy::Basic, Strategy::Reissue, Strategy::Partial,
                                      Strategy::AccuracyTrader};
  std::vector<double> rates = {7, 13, 20, 27, 40};
  std::size_t requests_per_run = 5000;
  std::string trace_path;  // when set, one trace-driven run per strategy

  ServiceModel service;
  InterferenceConfig interference;
  ReissueConfig reissue;
  double l_spe_ms = 100.0;
  std::int64_t i_max = -1;        // >= 0 wins over i_max_fraction
  double i_max_fraction = 1.0;    // fraction of m when i_max < 0
  double partial_deadline_ms = -1.0;  // < 0 -> l_spe_ms
  double window_ms = 5000.0;
  bool dump_outcomes = false;

  static BenchScenario parse(KvConfig cfg);
  static BenchScenario from_file(const std::string& path);

  double resolved_partial_deadline() const {
    return partial_deadline_ms > 0 ? partial_deadline_ms : l_spe_ms;
  }
  // Arrival rate that saturates one component with exact full scans.
  double saturation_rate_rps(std::size_t subset_size) const {
    return 1000.0 / service.full_scan_ms(subset_size);
  }
};

// Recorded refinement trajectory of one (payload, component) pair: the
// correlations, ranked order and result snapshots after each prefix of
// ranked sets. Snapshot m equals exact processing of the whole subset.
struct Trajectory {
  std::vector<std::pair<AggId, double>> correlations;
  std::vector<AggId> ranked;
  std::map<AggId, std::size_t> set_sizes;
  std::size_t synopsis_points = 0;
  std::vector<std::vector<CfAccum>> cf_prefix;  // cf: per prefix, per target
  std::vector<SearchResult> topk_prefix;        // search: per prefix
};

// Replays a Trajectory through the engine loop without recomputation.
class TrajectoryWorkload : public ComponentWorkload {
 public:
  explicit TrajectoryWorkload(const Trajectory& t) : t_(t) {}

  std::vector<std::pair<AggId, double>> process_synopsis() override { return t_.correlations; }
  std::size_t synopsis_size() const override { return t_.synopsis_points; }
  std::size_t set_size(AggId id) const override { return t_.set_sizes.at(id); }
  void improve(AggId id) override {
    if (cursor_ >= t_.ranked.size() || t_.ranked[cursor_] != id)
      throw InvariantError("trajectory replay diverged from recorded ranking");
    ++cursor_;
  }
  std::size_t cursor() const { return cursor_; }

 private:
  const Trajectory& t_;
  std::size_t cursor_ = 0;
};

// Builds the full desk-scale deployment for a scenario (data, partitions,
// per-component synopses, request payloads) and serves the simulator with
// memoized trajectories and merged-result accuracy.
class BenchWorkload : public WorkloadProvider {
 public:
  static std::unique_ptr<BenchWorkload> build(const BenchScenario& scenario);
  // Assemble from already-built component states (e.g. a persisted state
  // directory) plus request payloads of the matching kind.
  static std::unique_ptr<BenchWorkload> from_states(BenchScenario scenario,
                                                    std::vector<SynopsisState> states,
                                                    std::vector<CfRequestRecord> cf_requests,
                                                    std::vector<SearchRequest> queries);

  int n_components() const override { return static_cast<int>(states_.size()); }
  std::size_t subset_size(int component) const override;
  std::size_t synopsis_size(int component) const override;
  std::unique_ptr<ComponentWorkload> component_workload(const PointId& payload,
                                                        int component) override;
  double accuracy_loss_pct(const PointId& payload, const std::vector<std::int64_t>& sets) override;

  const std::vector<PointId>& payload_ids() const { return payload_ids_; }
  const SynopsisState& state(int component) const { return states_[static_cast<std::size_t>(component)]; }
  const BenchScenario& scenario() const { return scenario_; }
  const std::vector<CfRequestRecord>& cf_requests() const { return cf_requests_; }
  const std::vector<SearchRequest>& queries() const { return queries_; }
  const CorpusStats& stats(int component) const;

  const Trajectory& trajectory(const PointId& payload, int component);
  std::int64_t resolved_i_max() const;

  // Merged results for a given contribution vector (tests and experiments).
  std::map<ItemId, double> merged_cf_predictions(const PointId& payload,
                                                 const std::vector<std::int64_t>& sets);
  SearchResult merged_search_result(const PointId& payload,
                                    const std::vector<std::int64_t>& sets);
  double exact_cf_rmse(const PointId& payload);
  const SearchResult& exact_topk(const PointId& payload);

 private:
  std::size_t payload_index(const PointId& payload) const;
  Trajectory build_trajectory(std::size_t pidx, int component);

  BenchScenario scenario_;
  std::vector<SynopsisState> states_;
  std::vector<CorpusStats> stats_;  // per component (or shared copies)
  std::vector<CfRequestRecord> cf_requests_;
  std::vector<SearchRequest> queries_;
  std::vector<PointId> payload_ids_;
  std::map<PointId, std::size_t> payload_pos_;
  // memo[(payload, component)]
  std::map<std::pair<std::size_t, int>, Trajectory> trajectories_;
  std::map<std::size_t, double> exact_rmse_;
  std::map<std::size_t, SearchResult> exact_topk_;
};

struct BenchSummaryRow {
  double rate_rps = 0.0;  // 0 for trace-driven runs
  Strategy strategy = Strategy::Basic;
  double p999_latency_ms = 0.0;
  double mean_loss_pct = 0.0;
  std::size_t request_count = 0;
  std::size_t reissues = 0;
};

// Runs all configured (rate, strategy) pairs on identical arrivals and
// seeds; writes per-rate metrics CSVs, the summary table and optional
// per-request outcome dumps into out_dir.
std::vector<BenchSummaryRow> run_bench(BenchWorkload& workload, const std::string& out_dir);

std::string summary_csv(const std::vector<BenchSummaryRow>& rows);

// Ranked aggregated points bucketed into 10 sections; per-section mean
// fraction of highly related originals (cf: |weight| > 0.8 against the
// active user; search: membership in the exact merged top-k).
struct RankEffectiveness {
  std::vector<double> section_fraction;  // size 10
  double spearman_vs_section = 0.0;
};

RankEffectiveness rank_effectiveness(BenchWorkload& workload, std::size_t max_requests = 0);

// Tie-corrected Spearman rank correlation between (1..n) and values.
double spearman_against_index(const std::vector<double>& values);

}  // namespace atr
