#include <cmath>
#include <set>

#include "accuracytrader/simulator.hpp"
#include "doctest.h"
#include "oracle.hpp"

using namespace atr;

namespace {

// Fixed-size components; accuracy loss is the fraction of components that
// contributed nothing, which is enough to exercise the strategy plumbing.
class MockProvider : public WorkloadProvider {
 public:
  MockProvider(int n, std::size_t subset, std::size_t synopsis, std::vector<std::size_t> sets = {})
      : n_(n), subset_(subset), synopsis_(synopsis), set_sizes_(std::move(sets)) {
    if (set_sizes_.empty()) set_sizes_.assign(5, subset_ / 5);
  }

  int n_components() const override { return n_; }
  std::size_t subset_size(int) const override { return subset_; }
  std::size_t synopsis_size(int) const override { return synopsis_; }

  std::unique_ptr<ComponentWorkload> component_workload(const PointId&, int) override {
    class W : public ComponentWorkload {
     public:
      explicit W(const std::vector<std::size_t>& sizes) : sizes_(sizes) {}
      std::vector<std::pair<AggId, double>> process_synopsis() override {
        std::vector<std::pair<AggId, double>> c;
        for (std::size_t i = 0; i < sizes_.size(); ++i)
          c.emplace_back(static_cast<AggId>(i), 1.0 - 0.1 * static_cast<double>(i));
        return c;
      }
      std::size_t synopsis_size() const override { return sizes_.size(); }
      std::size_t set_size(AggId id) const override { return sizes_[static_cast<std::size_t>(id)]; }
      void improve(AggId) override {}

     private:
      const std::vector<std::size_t>& sizes_;
    };
    return std::make_unique<W>(set_sizes_);
  }

  double accuracy_loss_pct(const PointId&, const std::vector<std::int64_t>& sets) override {
    double skipped = 0;
    for (auto s : sets)
      if (s == kSkipped) skipped += 1;
    return 100.0 * skipped / static_cast<double>(sets.size());
  }

 private:
  int n_;
  std::size_t subset_;
  std::size_t synopsis_;
  std::vector<std::size_t> set_sizes_;
};

SimRun quiet_run(Strategy s) {
  SimRun run;
  run.strategy = s;
  run.service = {10.0, 0.0, 0.0};  // flat 10ms service
  run.interference.enabled = false;
  run.engine.l_spe_ms = 100.0;
  run.partial_deadline_ms = 100.0;
  run.seed = 5;
  return run;
}

}  // namespace

TEST_CASE("single request, no interference: 10ms component latency") {
  MockProvider provider(1, 100, 10);
  Metrics m = simulate(quiet_run(Strategy::Basic), {{0.0, "r"}}, provider);
  REQUIRE(m.component_samples.size() == 1);
  CHECK(m.component_samples[0].second == doctest::Approx(10.0));
  CHECK(m.requests[0].complete_ms == doctest::Approx(10.0));
}

TEST_CASE("two simultaneous requests queue FIFO: 10ms and 20ms") {
  MockProvider provider(1, 100, 10);
  Metrics m = simulate(quiet_run(Strategy::Basic), {{0.0, "a"}, {0.0, "b"}}, provider);
  REQUIRE(m.requests.size() == 2);
  CHECK(m.requests[0].complete_ms == doctest::Approx(10.0));
  CHECK(m.requests[1].complete_ms == doctest::Approx(20.0));
}

TEST_CASE("constant-rate arrivals are evenly spaced") {
  auto arrivals = constant_rate_arrivals(20.0, 20, {"p"});
  REQUIRE(arrivals.size() == 20);
  for (std::size_t i = 0; i < arrivals.size(); ++i)
    CHECK(arrivals[i].submit_ms == doctest::Approx(50.0 * static_cast<double>(i)));
}

TEST_CASE("empty trace produces empty metrics") {
  MockProvider provider(2, 100, 10);
  Metrics m = simulate(quiet_run(Strategy::Basic), {}, provider);
  CHECK(m.requests.empty());
  CHECK(m.component_samples.empty());
}

TEST_CASE("percentile: nearest-rank definition") {
  std::vector<double> ladder;
  for (int i = 1; i <= 1000; ++i) ladder.push_back(static_cast<double>(i));
  CHECK(percentile_nearest_rank(ladder, 99.9) == doctest::Approx(999.0));
  CHECK(percentile_nearest_rank({42.0}, 99.9) == doctest::Approx(42.0));
  CHECK(percentile_nearest_rank({42.0}, 1.0) == doctest::Approx(42.0));

  Rng rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> samples;
    int n = static_cast<int>(rng.uniform_int(1, 60));
    for (int i = 0; i < n; ++i)
      samples.push_back(static_cast<double>(rng.uniform_int(0, 9)));
    double p = rng.uniform(0.5, 100.0);
    CHECK(percentile_nearest_rank(samples, p) == oracle::percentile(samples, p));
  }
}

TEST_CASE("identical configuration gives bit-identical metrics") {
  MockProvider provider(4, 200, 20);
  SimRun run = quiet_run(Strategy::AccuracyTrader);
  run.interference.enabled = true;
  run.service = {2.0, 0.1, 0.05};
  auto arrivals = constant_rate_arrivals(40.0, 400, {"a", "b", "c"});
  Metrics m1 = simulate(run, arrivals, provider);
  Metrics m2 = simulate(run, arrivals, provider);
  REQUIRE(m1.requests.size() == m2.requests.size());
  CHECK(m1.windows_csv("x", 1000.0) == m2.windows_csv("x", 1000.0));
  CHECK(m1.component_samples == m2.component_samples);
}

TEST_CASE("conservation: every request is accounted for exactly once") {
  MockProvider provider(3, 150, 15);
  for (Strategy s : {Strategy::Basic, Strategy::Reissue, Strategy::Partial,
                     Strategy::AccuracyTrader}) {
    SimRun run = quiet_run(s);
    run.interference.enabled = true;
    run.service = {2.0, 0.1, 0.05};
    auto arrivals = constant_rate_arrivals(50.0, 300, {"p", "q"});
    Metrics m = simulate(run, arrivals, provider);
    CHECK(m.requests.size() == 300);
    CHECK(m.component_samples.size() == 300 * 3);
    std::set<std::size_t> seen;
    for (auto& r : m.requests) seen.insert(r.index);
    CHECK(seen.size() == 300);
  }
}

TEST_CASE("FIFO discipline: per-component completion order equals enqueue order") {
  // One component, staggered arrivals; completions must follow submits.
  MockProvider provider(1, 100, 10);
  SimRun run = quiet_run(Strategy::Basic);
  run.interference.enabled = true;  // varying service times
  run.service = {5.0, 0.05, 0.0};
  auto arrivals = constant_rate_arrivals(120.0, 200, {"p"});
  Metrics m = simulate(run, arrivals, provider);
  double prev_complete = 0.0;
  for (auto& r : m.requests) {  // sorted by arrival index
    CHECK(r.complete_ms >= prev_complete);
    prev_complete = r.complete_ms;
  }
}

TEST_CASE("basic and reissue report zero accuracy loss") {
  MockProvider provider(4, 100, 10);
  for (Strategy s : {Strategy::Basic, Strategy::Reissue}) {
    SimRun run = quiet_run(s);
    run.interference.enabled = true;
    auto arrivals = constant_rate_arrivals(30.0, 200, {"p"});
    Metrics m = simulate(run, arrivals, provider);
    CHECK(m.mean_loss_pct() == 0.0);
  }
}

TEST_CASE("zero interference, single request: all strategies coincide") {
  MockProvider provider(4, 100, 10, {20, 20, 20, 20, 20});
  std::vector<double> latencies;
  for (Strategy s : {Strategy::Basic, Strategy::Reissue, Strategy::Partial}) {
    SimRun run = quiet_run(s);
    run.service = {3.0, 0.1, 0.0};
    Metrics m = simulate(run, {{0.0, "p"}}, provider);
    latencies.push_back(m.component_samples[0].second);
  }
  CHECK(latencies[0] == latencies[1]);
  CHECK(latencies[0] == latencies[2]);
  // AccuracyTrader with synopsis costing zero and all sets processed does the
  // same work as a full scan here.
  SimRun at = quiet_run(Strategy::AccuracyTrader);
  at.service = {3.0, 0.1, 0.0};
  at.engine.l_spe_ms = 1e18;
  Metrics m = simulate(at, {{0.0, "p"}}, provider);
  CHECK(m.component_samples[0].second == doctest::Approx(latencies[0]));
}

TEST_CASE("saturated basic queues grow with trace length") {
  MockProvider provider(1, 100, 10);
  SimRun run = quiet_run(Strategy::Basic);  // 10ms service, capacity 100/s
  auto short_trace = constant_rate_arrivals(200.0, 200, {"p"});
  auto long_trace = constant_rate_arrivals(200.0, 800, {"p"});
  double p_short = simulate(run, short_trace, provider).p999_latency_ms();
  double p_long = simulate(run, long_trace, provider).p999_latency_ms();
  CHECK(p_long > 2.0 * p_short);
}

TEST_CASE("accuracytrader stays near its deadline under overload") {
  MockProvider provider(2, 100, 10, {20, 20, 20, 20, 20});
  SimRun run = quiet_run(Strategy::AccuracyTrader);
  run.service = {1.0, 0.5, 0.1};  // full scan 51ms; capacity ~20/s
  run.engine.l_spe_ms = 80.0;
  auto arrivals = constant_rate_arrivals(60.0, 1200, {"p"});  // 3x saturation
  Metrics m = simulate(run, arrivals, provider);
  CHECK(m.p999_latency_ms() <= 2.0 * run.engine.l_spe_ms);
  // Under the same load, basic diverges.
  SimRun basic = quiet_run(Strategy::Basic);
  basic.service = run.service;
  CHECK(simulate(basic, arrivals, provider).p999_latency_ms() > 10.0 * m.p999_latency_ms());
}

TEST_CASE("partial: all components on time behaves like basic") {
  MockProvider provider(3, 100, 10);
  SimRun run = quiet_run(Strategy::Partial);
  run.partial_deadline_ms = 1000.0;
  auto arrivals = constant_rate_arrivals(10.0, 50, {"p"});
  Metrics m = simulate(run, arrivals, provider);
  CHECK(m.mean_loss_pct() == 0.0);
  SimRun basic = quiet_run(Strategy::Basic);
  Metrics mb = simulate(basic, arrivals, provider);
  CHECK(m.p999_latency_ms() == mb.p999_latency_ms());
}

TEST_CASE("partial: nothing on time loses everything") {
  MockProvider provider(2, 100, 10);
  SimRun run = quiet_run(Strategy::Partial);
  run.partial_deadline_ms = 5.0;  // below the 10ms service time
  Metrics m = simulate(run, {{0.0, "p"}}, provider);
  CHECK(m.requests[0].loss_pct == doctest::Approx(100.0));
  CHECK(m.requests[0].complete_ms == doctest::Approx(5.0));
}

TEST_CASE("partial loss grows as more components miss the deadline") {
  MockProvider provider(4, 100, 10);
  SimRun run = quiet_run(Strategy::Partial);
  run.partial_deadline_ms = 25.0;
  std::vector<double> losses;
  for (double rate : {20.0, 80.0, 160.0}) {
    auto arrivals = constant_rate_arrivals(rate, 400, {"p"});
    losses.push_back(simulate(run, arrivals, provider).mean_loss_pct());
  }
  CHECK(losses[0] <= losses[1]);
  CHECK(losses[1] <= losses[2]);
  CHECK(losses[2] > 50.0);
}

TEST_CASE("reissue helps a straggler component under light load") {
  MockProvider provider(4, 100, 10);
  SimRun basic = quiet_run(Strategy::Basic);
  basic.interference.enabled = true;
  basic.interference.straggler_component = 1;
  basic.interference.straggler_multiplier = 10.0;
  auto arrivals = constant_rate_arrivals(20.0, 1500, {"p"});
  double p_basic = simulate(basic, arrivals, provider).p999_latency_ms();

  SimRun reissue = basic;
  reissue.strategy = Strategy::Reissue;
  Metrics mr = simulate(reissue, arrivals, provider);
  CHECK(mr.reissue_count > 0);
  CHECK(mr.p999_latency_ms() < p_basic);
}

TEST_CASE("uniform overload defeats reissue: replicas queue too") {
  MockProvider provider(2, 100, 10);
  SimRun run = quiet_run(Strategy::Reissue);  // 10ms service
  auto arrivals = constant_rate_arrivals(300.0, 1500, {"p"});  // 3x capacity
  Metrics m = simulate(run, arrivals, provider);
  CHECK(m.p999_latency_ms() > 1000.0);
}

TEST_CASE("trace round-trip and validation") {
  std::vector<Arrival> arrivals{{0.0, "a"}, {12.5, "b"}, {12.5, "c"}};
  auto path = (std::filesystem::temp_directory_path() / "atr_trace.csv").string();
  save_trace(arrivals, path);
  auto back = load_trace(path);
  REQUIRE(back.size() == 3);
  CHECK(back[1].submit_ms == 12.5);
  CHECK(back[2].payload == "c");

  std::ofstream bad(path);
  bad << "10,a\n5,b\n";
  bad.close();
  CHECK_THROWS_AS(load_trace(path), DataError);
}

TEST_CASE("per-request outcomes are recorded for accuracytrader") {
  MockProvider provider(2, 100, 10, {20, 20, 20, 20, 20});
  SimRun run = quiet_run(Strategy::AccuracyTrader);
  run.service = {1.0, 0.5, 0.1};
  run.engine.l_spe_ms = 30.0;
  run.record_outcomes = true;
  auto arrivals = constant_rate_arrivals(40.0, 50, {"p"});
  Metrics m = simulate(run, arrivals, provider);
  CHECK(m.outcomes.size() == 50 * 2);
  for (auto& o : m.outcomes) {
    CHECK(o.sets_processed <= 5);
    CHECK(o.elapsed_ms >= 0.0);
    if (o.sets_processed == 0) CHECK(o.synopsis_only);
  }
}
