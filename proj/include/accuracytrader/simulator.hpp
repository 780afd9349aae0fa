#pragma once

#include <deque>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "accuracytrader/common.hpp"
#include "accuracytrader/engine.hpp"

namespace atr {

enum class Strategy { Basic, Reissue, Partial, AccuracyTrader };

Strategy parse_strategy(const std::string& s);
std::string strategy_name(Strategy s);

// Linear service-time model: a full exact scan of a subset of size k costs
// fixed_ms + per_original_ms * k; processing a synopsis of m points costs
// fixed_ms + per_synopsis_point_ms * m; refining one ranked set of size s
// costs per_original_ms * s.
struct ServiceModel {
  double fixed_ms = 2.0;
  double per_original_ms = 0.146;
  double per_synopsis_point_ms = 0.06;

  double full_scan_ms(std::size_t subset_size) const {
    return fixed_ms + per_original_ms * static_cast<double>(subset_size);
  }
};

// Per-component ON/OFF slowdown process: OFF runs at multiplier 1, ON at a
// lognormal multiplier (clamped to >= 1); segment durations are exponential.
// A straggler component runs at a fixed multiplier instead.
struct InterferenceConfig {
  bool enabled = true;
  double on_multiplier_median = 1.5;
  double on_multiplier_sigma = 0.4;
  double mean_on_ms = 150.0;
  double mean_off_ms = 350.0;
  int straggler_component = -1;
  double straggler_multiplier = 1.0;
};

struct ReissueConfig {
  double percentile = 95.0;
  std::size_t window = 1000;      // rolling sample window
  std::size_t min_samples = 100;  // no reissue until this many completions
};

constexpr std::int64_t kFullExact = -1;  // component processed everything exactly
constexpr std::int64_t kSkipped = -2;    // component result missing at merge time

// Supplies per-component request evaluation to the simulator: the engine
// workload for the accuracy-aware strategy and the accuracy of merged
// results given each component's contribution.
class WorkloadProvider {
 public:
  virtual ~WorkloadProvider() = default;
  virtual int n_components() const = 0;
  virtual std::size_t subset_size(int component) const = 0;
  virtual std::size_t synopsis_size(int component) const = 0;
  virtual std::unique_ptr<ComponentWorkload> component_workload(const PointId& payload,
                                                                int component) = 0;
  virtual double accuracy_loss_pct(const PointId& payload,
                                   const std::vector<std::int64_t>& sets) = 0;
};

struct Arrival {
  double submit_ms = 0.0;
  PointId payload;
};

std::vector<Arrival> constant_rate_arrivals(double rate_rps, std::size_t count,
                                            const std::vector<PointId>& payload_cycle);
std::vector<Arrival> load_trace(const std::string& path);
void save_trace(const std::vector<Arrival>& arrivals, const std::string& path);

struct SimRun {
  Strategy strategy = Strategy::Basic;
  ServiceModel service;
  InterferenceConfig interference;
  ReissueConfig reissue;
  EngineParams engine;  // accuracytrader deadline and i_max
  double partial_deadline_ms = 100.0;
  std::uint64_t seed = 1;
  bool record_outcomes = false;
};

struct RequestMetrics {
  std::size_t index = 0;
  PointId payload;
  double submit_ms = 0.0;
  double complete_ms = 0.0;
  double loss_pct = 0.0;
};

struct OutcomeRecord {
  std::size_t request_index = 0;
  int component = 0;
  double elapsed_ms = 0.0;
  std::int64_t sets_processed = 0;
  bool synopsis_only = false;
};

struct Metrics {
  std::vector<RequestMetrics> requests;
  // One effective latency sample per (request, component), with submit time
  // for window attribution.
  std::vector<std::pair<double, double>> component_samples;
  std::vector<OutcomeRecord> outcomes;
  std::size_t reissue_count = 0;

  double p999_latency_ms() const;
  double mean_loss_pct() const;
  // `window_start_ms,strategy,p999_latency_ms,mean_accuracy_loss_pct,request_count`
  std::string windows_csv(const std::string& strategy, double window_ms) const;
};

// Nearest-rank percentile: sorted ascending, 1-based index ceil(p/100 * N).
double percentile_nearest_rank(std::vector<double> samples, double p);

// Deterministic single-run simulation; every arrival is accounted for
// exactly once in the returned metrics.
Metrics simulate(const SimRun& run, const std::vector<Arrival>& arrivals,
                 WorkloadProvider& provider);

}  // namespace atr
