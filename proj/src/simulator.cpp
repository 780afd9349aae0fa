#include "accuracytrader/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>

namespace atr {

Strategy parse_strategy(const std::string& s) {
  std::string v = to_lower(s);
  if (v == "basic") return Strategy::Basic;
  if (v == "reissue") return Strategy::Reissue;
  if (v == "partial") return Strategy::Partial;
  if (v == "accuracytrader") return Strategy::AccuracyTrader;
  throw UsageError("unknown strategy '" + s + "'");
}

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Basic: return "basic";
    case Strategy::Reissue: return "reissue";
    case Strategy::Partial: return "partial";
    case Strategy::AccuracyTrader: return "accuracytrader";
  }
  return "?";
}

std::vector<Arrival> constant_rate_arrivals(double rate_rps, std::size_t count,
                                            const std::vector<PointId>& payload_cycle) {
  if (!(rate_rps > 0.0)) throw UsageError("arrivals: rate must be > 0");
  if (payload_cycle.empty()) throw UsageError("arrivals: no payloads");
  std::vector<Arrival> out;
  out.reserve(count);
  double spacing = 1000.0 / rate_rps;
  for (std::size_t i = 0; i < count; ++i)
    out.push_back({spacing * static_cast<double>(i), payload_cycle[i % payload_cycle.size()]});
  return out;
}

std::vector<Arrival> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trace file: " + path);
  std::vector<Arrival> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line, ',');
    std::string ctx = path + ":" + std::to_string(lineno);
    if (fields.size() != 2) throw DataError(ctx + ": expected submit_time_ms,request_id");
    double t = parse_double(fields[0], ctx);
    if (t < 0) throw DataError(ctx + ": negative submit time");
    if (!out.empty() && t < out.back().submit_ms)
      throw DataError(ctx + ": submit times must be non-decreasing");
    out.push_back({t, fields[1]});
  }
  return out;
}

void save_trace(const std::vector<Arrival>& arrivals, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (auto& a : arrivals) out << format_double(a.submit_ms) << ',' << a.payload << '\n';
}

double percentile_nearest_rank(std::vector<double> samples, double p) {
  if (samples.empty()) throw DataError("percentile: no samples");
  if (p <= 0.0 || p > 100.0) throw UsageError("percentile: p must be in (0,100]");
  std::sort(samples.begin(), samples.end());
  std::size_t n = samples.size();
  std::size_t rank = static_cast<std::size_t>(
      std::ceil(p / 100.0 * static_cast<double>(n)));
  if (rank < 1) rank = 1;
  if (rank > n) rank = n;
  return samples[rank - 1];
}

double Metrics::p999_latency_ms() const {
  std::vector<double> lat;
  lat.reserve(component_samples.size());
  for (auto& [submit, l] : component_samples) lat.push_back(l);
  return percentile_nearest_rank(std::move(lat), 99.9);
}

double Metrics::mean_loss_pct() const {
  if (requests.empty()) return 0.0;
  double s = 0.0;
  for (auto& r : requests) s += r.loss_pct;
  return s / static_cast<double>(requests.size());
}

std::string Metrics::windows_csv(const std::string& strategy, double window_ms) const {
  std::ostringstream out;
  out << "window_start_ms,strategy,p999_latency_ms,mean_accuracy_loss_pct,request_count\n";
  if (requests.empty()) return out.str();
  std::map<std::int64_t, std::vector<double>> window_lat;
  std::map<std::int64_t, std::pair<double, std::size_t>> window_loss;
  for (auto& [submit, lat] : component_samples)
    window_lat[static_cast<std::int64_t>(std::floor(submit / window_ms))].push_back(lat);
  for (auto& r : requests) {
    auto& agg = window_loss[static_cast<std::int64_t>(std::floor(r.submit_ms / window_ms))];
    agg.first += r.loss_pct;
    agg.second += 1;
  }
  for (auto& [w, loss] : window_loss) {
    double p999 = percentile_nearest_rank(window_lat.at(w), 99.9);
    out << format_double(static_cast<double>(w) * window_ms) << ',' << strategy << ','
        << format_double(p999) << ','
        << format_double(loss.first / static_cast<double>(loss.second)) << ',' << loss.second
        << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------

namespace {

// Piecewise-constant slowdown timeline; advance() integrates work across
// segments so chunk costs reflect the multiplier active while they run.
class InterferenceTimeline {
 public:
  InterferenceTimeline(const InterferenceConfig& cfg, int component, std::uint64_t seed)
      : rng_(Rng(seed).derive("interference/" + std::to_string(component))) {
    if (cfg.straggler_component == component) {
      fixed_ = std::max(1.0, cfg.straggler_multiplier);
      dynamic_ = false;
    } else if (!cfg.enabled) {
      fixed_ = 1.0;
      dynamic_ = false;
    } else {
      cfg_ = cfg;
      dynamic_ = true;
      segments_.push_back({0.0, 1.0});
      horizon_ = rng_.exponential(cfg.mean_off_ms);
      on_next_ = true;
    }
  }

  double advance(double t, double work) {
    if (work <= 0.0) return t;
    if (!dynamic_) return t + work * fixed_;
    while (true) {
      extend(t);  // ensure segments cover t
      std::size_t idx = segment_at(t);
      double seg_end = idx + 1 < segments_.size() ? segments_[idx + 1].start : horizon_;
      double mult = segments_[idx].mult;
      double capacity = (seg_end - t) / mult;  // work units until segment end
      if (work <= capacity) return t + work * mult;
      work -= capacity;
      t = seg_end;
    }
  }

 private:
  void extend(double upto) {
    while (horizon_ <= upto) {
      if (on_next_) {
        double mult = std::max(1.0, rng_.lognormal_median(cfg_.on_multiplier_median,
                                                          cfg_.on_multiplier_sigma));
        segments_.push_back({horizon_, mult});
        horizon_ += rng_.exponential(cfg_.mean_on_ms);
      } else {
        segments_.push_back({horizon_, 1.0});
        horizon_ += rng_.exponential(cfg_.mean_off_ms);
      }
      on_next_ = !on_next_;
    }
  }

  std::size_t segment_at(double t) const {
    // Segments only grow; binary search for the last start <= t.
    std::size_t lo = 0, hi = segments_.size();
    while (lo + 1 < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (segments_[mid].start <= t)
        lo = mid;
      else
        hi = mid;
    }
    return lo;
  }

  struct Segment {
    double start;
    double mult;
  };
  Rng rng_;
  InterferenceConfig cfg_;
  std::vector<Segment> segments_;
  double horizon_ = 0.0;
  bool on_next_ = true;
  bool dynamic_ = false;
  double fixed_ = 1.0;
};

class SimClock : public ProcessClock {
 public:
  SimClock(double submit, double start, InterferenceTimeline& timeline, const ServiceModel& svc)
      : submit_(submit), t_(start), timeline_(timeline), svc_(svc) {}

  double elapsed_ms() override { return t_ - submit_; }
  void charge_synopsis(std::size_t m) override {
    t_ = timeline_.advance(t_, svc_.fixed_ms + svc_.per_synopsis_point_ms * static_cast<double>(m));
  }
  void charge_set(std::size_t points) override {
    t_ = timeline_.advance(t_, svc_.per_original_ms * static_cast<double>(points));
  }
  double now() const { return t_; }

 private:
  double submit_;
  double t_;
  InterferenceTimeline& timeline_;
  const ServiceModel& svc_;
};

struct SubOp {
  std::size_t request = 0;
  int component = 0;
  bool replica = false;
  double submit = 0.0;
  double finish = -1.0;
  bool done = false;
  std::int64_t sets = kFullExact;
  bool synopsis_only = false;
};

struct RequestState {
  PointId payload;
  double submit = 0.0;
  std::size_t pending = 0;  // (request, component) pairs not yet effective
  std::vector<std::int64_t> sets;
  std::vector<char> pair_done;
  bool finalized = false;
  double last_finish = 0.0;
};

struct Event {
  double time;
  std::uint64_t seq;
  enum Kind { Arrive, SubOpDone, ReissueCheck, PartialDeadline } kind;
  std::size_t a = 0;  // request index or subop index

  bool operator>(const Event& o) const {
    if (time != o.time) return time > o.time;
    return seq > o.seq;
  }
};

class Sim {
 public:
  Sim(const SimRun& run, const std::vector<Arrival>& arrivals, WorkloadProvider& provider)
      : run_(run), arrivals_(arrivals), provider_(provider) {
    n_ = provider.n_components();
    if (n_ < 1) throw UsageError("simulate: need at least one component");
    for (int c = 0; c < n_; ++c)
      timelines_.emplace_back(run.interference, c, run.seed);
    queues_.assign(static_cast<std::size_t>(n_), {});
    busy_.assign(static_cast<std::size_t>(n_), false);
  }

  Metrics operator()() {
    requests_.reserve(arrivals_.size());
    for (std::size_t i = 0; i < arrivals_.size(); ++i) {
      RequestState r;
      r.payload = arrivals_[i].payload;
      r.submit = arrivals_[i].submit_ms;
      r.pending = static_cast<std::size_t>(n_);
      r.sets.assign(static_cast<std::size_t>(n_), kFullExact);
      r.pair_done.assign(static_cast<std::size_t>(n_), 0);
      requests_.push_back(std::move(r));
      schedule(arrivals_[i].submit_ms, Event::Arrive, i);
    }

    while (!events_.empty()) {
      Event e = events_.top();
      events_.pop();
      switch (e.kind) {
        case Event::Arrive: on_arrive(e.time, e.a); break;
        case Event::SubOpDone: on_subop_done(e.time, e.a); break;
        case Event::ReissueCheck: on_reissue_check(e.time, e.a); break;
        case Event::PartialDeadline: on_partial_deadline(e.time, e.a); break;
      }
    }

    for (auto& r : requests_)
      if (!r.finalized) throw InvariantError("simulate: request left unfinalized");
    if (metrics_.requests.size() != arrivals_.size())
      throw InvariantError("simulate: request conservation violated");
    std::sort(metrics_.requests.begin(), metrics_.requests.end(),
              [](const RequestMetrics& a, const RequestMetrics& b) { return a.index < b.index; });
    std::sort(metrics_.outcomes.begin(), metrics_.outcomes.end(),
              [](const OutcomeRecord& a, const OutcomeRecord& b) {
                if (a.request_index != b.request_index) return a.request_index < b.request_index;
                return a.component < b.component;
              });
    return std::move(metrics_);
  }

 private:
  void schedule(double t, Event::Kind kind, std::size_t a) {
    events_.push(Event{t, seq_++, kind, a});
  }

  void on_arrive(double t, std::size_t req) {
    for (int c = 0; c < n_; ++c) {
      std::size_t so = new_subop(req, c, false, t);
      enqueue(t, c, so);
      if (run_.strategy == Strategy::Reissue) maybe_schedule_reissue_check(t, so);
    }
    if (run_.strategy == Strategy::Partial)
      schedule(t + run_.partial_deadline_ms, Event::PartialDeadline, req);
  }

  std::size_t new_subop(std::size_t req, int comp, bool replica, double submit) {
    subops_.push_back(SubOp{req, comp, replica, submit});
    return subops_.size() - 1;
  }

  void enqueue(double t, int comp, std::size_t so) {
    queues_[static_cast<std::size_t>(comp)].push_back(so);
    if (!busy_[static_cast<std::size_t>(comp)]) start_next(t, comp);
  }

  void start_next(double t, int comp) {
    auto& q = queues_[static_cast<std::size_t>(comp)];
    if (q.empty()) {
      busy_[static_cast<std::size_t>(comp)] = false;
      return;
    }
    std::size_t so_idx = q.front();
    q.pop_front();
    busy_[static_cast<std::size_t>(comp)] = true;
    SubOp& so = subops_[so_idx];
    auto& timeline = timelines_[static_cast<std::size_t>(comp)];

    if (run_.strategy == Strategy::AccuracyTrader && !so.replica) {
      SimClock clock(so.submit, t, timeline, run_.service);
      auto workload = provider_.component_workload(requests_[so.request].payload, comp);
      ComponentOutcome outcome = process(*workload, run_.engine, clock);
      so.finish = clock.now();
      so.sets = static_cast<std::int64_t>(outcome.sets_processed);
      so.synopsis_only = outcome.synopsis_only;
    } else {
      // Replicas scan their logical subset but run on this host's timeline.
      double work = run_.service.full_scan_ms(provider_.subset_size(so.component));
      so.finish = timeline.advance(t, work);
      so.sets = kFullExact;
    }
    schedule(so.finish, Event::SubOpDone, so_idx);
  }

  void maybe_schedule_reissue_check(double t, std::size_t so) {
    if (reissue_history_.size() < run_.reissue.min_samples) return;
    schedule(t + reissue_threshold(), Event::ReissueCheck, so);
  }

  double reissue_threshold() {
    // Recomputed lazily; the window only changes when completions arrive.
    if (threshold_dirty_) {
      std::vector<double> window(reissue_history_.begin(), reissue_history_.end());
      threshold_ = percentile_nearest_rank(std::move(window), run_.reissue.percentile);
      threshold_dirty_ = false;
    }
    return threshold_;
  }

  void record_reissue_sample(double latency) {
    reissue_history_.push_back(latency);
    if (reissue_history_.size() > run_.reissue.window) reissue_history_.pop_front();
    threshold_dirty_ = true;
  }

  void on_reissue_check(double t, std::size_t so_idx) {
    const SubOp& so = subops_[so_idx];
    RequestState& r = requests_[so.request];
    if (r.pair_done[static_cast<std::size_t>(so.component)]) return;  // already answered
    // One static replica holder per subset: the next component round-robin.
    int replica_comp = (so.component + 1) % n_;
    std::size_t rep = new_subop(so.request, so.component, true, so.submit);
    subops_[rep].component = so.component;  // logical subset
    ++metrics_.reissue_count;
    enqueue_replica(t, replica_comp, rep);
  }

  void enqueue_replica(double t, int replica_comp, std::size_t so) {
    replica_host_[so] = replica_comp;
    queues_[static_cast<std::size_t>(replica_comp)].push_back(so);
    if (!busy_[static_cast<std::size_t>(replica_comp)]) start_next(t, replica_comp);
  }

  void on_subop_done(double t, std::size_t so_idx) {
    SubOp& so = subops_[so_idx];
    so.done = true;
    int host = so.replica ? replica_host_.at(so_idx) : so.component;
    start_next(t, host);

    RequestState& r = requests_[so.request];
    std::size_t comp = static_cast<std::size_t>(so.component);
    if (r.pair_done[comp]) return;  // the other copy already completed
    r.pair_done[comp] = 1;

    double latency = t - so.submit;
    metrics_.component_samples.emplace_back(so.submit, latency);
    if (run_.strategy == Strategy::Reissue) record_reissue_sample(latency);
    if (run_.strategy == Strategy::AccuracyTrader) {
      r.sets[comp] = so.sets;
      if (run_.record_outcomes)
        metrics_.outcomes.push_back(
            {so.request, so.component, latency, so.sets, so.synopsis_only});
    }
    r.last_finish = std::max(r.last_finish, t);
    --r.pending;
    if (r.pending == 0 && !r.finalized) finalize(so.request, r.last_finish);
  }

  void on_partial_deadline(double t, std::size_t req) {
    RequestState& r = requests_[req];
    if (r.finalized) return;
    for (std::size_t c = 0; c < static_cast<std::size_t>(n_); ++c)
      if (!r.pair_done[c]) r.sets[c] = kSkipped;
    finalize(req, t);
  }

  void finalize(std::size_t req, double complete) {
    RequestState& r = requests_[req];
    r.finalized = true;
    double loss = 0.0;
    switch (run_.strategy) {
      case Strategy::Basic:
      case Strategy::Reissue:
        loss = 0.0;  // exact results by construction
        break;
      case Strategy::Partial:
      case Strategy::AccuracyTrader:
        loss = provider_.accuracy_loss_pct(r.payload, r.sets);
        break;
    }
    metrics_.requests.push_back({req, r.payload, r.submit, complete, loss});
  }

  const SimRun& run_;
  const std::vector<Arrival>& arrivals_;
  WorkloadProvider& provider_;
  int n_ = 0;

  std::vector<InterferenceTimeline> timelines_;
  std::vector<std::deque<std::size_t>> queues_;
  std::vector<char> busy_;
  std::vector<SubOp> subops_;
  std::vector<RequestState> requests_;
  std::map<std::size_t, int> replica_host_;

  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> events_;
  std::uint64_t seq_ = 0;

  std::deque<double> reissue_history_;
  double threshold_ = 0.0;
  bool threshold_dirty_ = true;

  Metrics metrics_;
};

}  // namespace

Metrics simulate(const SimRun& run, const std::vector<Arrival>& arrivals,
                 WorkloadProvider& provider) {
  run.engine.validate();
  Sim sim(run, arrivals, provider);
  return sim();
}

}  // namespace atr
