#include "accuracytrader/bench.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace atr {

namespace fs = std::filesystem;

BenchScenario BenchScenario::from_file(const std::string& path) {
  return parse(KvConfig::from_file(path));
}

BenchScenario BenchScenario::parse(KvConfig cfg) {
  BenchScenario s;
  s.kind = parse_data_kind(cfg.get_string("workload", "cf"));
  s.n_components = static_cast<int>(cfg.get_i64("n_components", 8));
  s.seed = static_cast<std::uint64_t>(cfg.get_i64("seed", 42));

  s.data_path = cfg.get_string("data_path", "");
  s.requests_path = cfg.get_string("requests_path", "");
  s.testset_path = cfg.get_string("testset_path", "");
  s.synth_requests = static_cast<int>(cfg.get_i64("synth_requests", 200));
  s.known_fraction = cfg.get_double("known_fraction", 0.8);

  s.cf_synth.users = static_cast<int>(cfg.get_i64("synth_users", 2000));
  s.cf_synth.items = static_cast<int>(cfg.get_i64("synth_items", 200));
  s.cf_synth.clusters = static_cast<int>(cfg.get_i64("synth_clusters", 10));
  s.cf_synth.ratings_per_user = static_cast<int>(cfg.get_i64("synth_ratings_per_user", 40));
  s.cf_synth.noise_sigma = cfg.get_double("synth_noise", 0.3);
  s.cf_synth.seed = s.seed;

  s.corpus_synth.docs = static_cast<int>(cfg.get_i64("synth_docs", 2000));
  s.corpus_synth.topics = static_cast<int>(cfg.get_i64("synth_topics", 10));
  s.corpus_synth.vocab_per_topic = static_cast<int>(cfg.get_i64("synth_vocab_per_topic", 120));
  s.corpus_synth.shared_vocab = static_cast<int>(cfg.get_i64("synth_shared_vocab", 60));
  s.corpus_synth.terms_per_doc = static_cast<int>(cfg.get_i64("synth_terms_per_doc", 60));
  s.corpus_synth.topic_share = cfg.get_double("synth_topic_share", 0.8);
  s.corpus_synth.shared_share = cfg.get_double("synth_shared_share", 0.15);
  s.corpus_synth.query_shared_prob = cfg.get_double("synth_query_shared_prob", 0.35);
  s.corpus_synth.seed = s.seed;

  s.synopsis.compression_ratio = cfg.get_double("compression_ratio", 20.0);
  s.synopsis.svd.dims = static_cast<int>(cfg.get_i64("svd_dims", 3));
  s.synopsis.svd.iters_per_dim = static_cast<int>(cfg.get_i64("svd_iters", 100));
  s.synopsis.svd.learning_rate = cfg.get_double("svd_learning_rate", 0.002);
  s.synopsis.svd.regularization = cfg.get_double("svd_regularization", 0.02);
  s.synopsis.svd.seed = s.seed;
  s.synopsis.rtree_min = static_cast<int>(cfg.get_i64("rtree_min", 2));
  s.synopsis.rtree_max = static_cast<int>(cfg.get_i64("rtree_max", 8));
  s.synopsis.min_synopsis_size = static_cast<int>(cfg.get_i64("min_synopsis_size", 2));

  s.cf.min_overlap = static_cast<int>(cfg.get_i64("cf_min_overlap", 2));
  s.cf.mean_centered = cfg.get_bool("cf_mean_centered", true);
  s.search_k = static_cast<int>(cfg.get_i64("search_k", 10));
  s.global_stats = cfg.get_string("stats_mode", "local") == "global";

  s.strategies.clear();
  for (auto& name : cfg.get_list("strategies", {"basic", "reissue", "partial", "accuracytrader"}))
    s.strategies.push_back(parse_strategy(name));
  s.rates = cfg.get_double_list("rates", s.rates);
  s.requests_per_run = static_cast<std::size_t>(cfg.get_i64("requests_per_run", 5000));
  s.trace_path = cfg.get_string("trace_path", "");

  s.service.fixed_ms = cfg.get_double("cost_fixed_ms", 2.0);
  s.service.per_original_ms = cfg.get_double("cost_per_original_ms", 0.146);
  s.service.per_synopsis_point_ms = cfg.get_double("cost_per_synopsis_point_ms", 0.06);

  s.interference.enabled = cfg.get_bool("interference", true);
  s.interference.on_multiplier_median = cfg.get_double("interference_median", 1.5);
  s.interference.on_multiplier_sigma = cfg.get_double("interference_sigma", 0.4);
  s.interference.mean_on_ms = cfg.get_double("interference_mean_on_ms", 150.0);
  s.interference.mean_off_ms = cfg.get_double("interference_mean_off_ms", 350.0);
  s.interference.straggler_component = static_cast<int>(cfg.get_i64("straggler_component", -1));
  s.interference.straggler_multiplier = cfg.get_double("straggler_multiplier", 1.0);

  s.reissue.percentile = cfg.get_double("reissue_percentile", 95.0);
  s.reissue.window = static_cast<std::size_t>(cfg.get_i64("reissue_window", 1000));
  s.reissue.min_samples = static_cast<std::size_t>(cfg.get_i64("reissue_min_samples", 100));

  s.l_spe_ms = cfg.get_double("l_spe_ms", 100.0);
  s.i_max = cfg.get_i64("i_max", -1);
  s.i_max_fraction = cfg.get_double("i_max_fraction", 1.0);
  s.partial_deadline_ms = cfg.get_double("partial_deadline_ms", -1.0);
  s.window_ms = cfg.get_double("window_ms", 5000.0);
  s.dump_outcomes = cfg.get_bool("dump_outcomes", false);

  cfg.require_all_consumed();
  if (s.n_components < 1) throw UsageError("scenario: n_components must be >= 1");
  if (s.strategies.empty()) throw UsageError("scenario: no strategies configured");
  if (s.rates.empty() && s.trace_path.empty())
    throw UsageError("scenario: need rates or trace_path");
  return s;
}

// ---------------------------------------------------------------------------

std::unique_ptr<BenchWorkload> BenchWorkload::build(const BenchScenario& scenario) {
  std::vector<SynopsisState> states;
  std::vector<CfRequestRecord> cf_requests;
  std::vector<SearchRequest> queries;

  if (scenario.kind == DataKind::Numeric) {
    RatingMatrix m = scenario.data_path.empty()
                         ? gen_clustered_ratings(scenario.cf_synth)
                         : load_ratings(scenario.data_path, scenario.cf.scale);
    auto subsets = partition(m, scenario.n_components);
    for (auto& sub : subsets) {
      SynopsisBuildConfig cfg = scenario.synopsis;
      cfg.svd.seed = scenario.seed + static_cast<std::uint64_t>(sub.component_id);
      states.push_back(create_synopsis(std::move(sub), cfg));
    }
    cf_requests =
        scenario.requests_path.empty()
            ? gen_cf_requests(scenario.cf_synth, scenario.synth_requests, scenario.known_fraction,
                              scenario.seed + 17)
            : load_cf_requests(scenario.requests_path, scenario.testset_path);
  } else {
    Corpus corpus = scenario.data_path.empty() ? gen_clustered_corpus(scenario.corpus_synth)
                                               : load_corpus(scenario.data_path);
    auto subsets = partition(corpus, scenario.n_components);
    for (auto& sub : subsets) {
      SynopsisBuildConfig cfg = scenario.synopsis;
      cfg.svd.seed = scenario.seed + static_cast<std::uint64_t>(sub.component_id);
      states.push_back(create_synopsis(std::move(sub), cfg));
    }
    queries = scenario.requests_path.empty()
                  ? gen_queries(scenario.corpus_synth, scenario.synth_requests, 2, 4,
                                scenario.search_k, scenario.seed + 23)
                  : load_queries(scenario.requests_path, scenario.search_k);
  }
  return from_states(scenario, std::move(states), std::move(cf_requests), std::move(queries));
}

std::unique_ptr<BenchWorkload> BenchWorkload::from_states(BenchScenario scenario,
                                                          std::vector<SynopsisState> states,
                                                          std::vector<CfRequestRecord> cf_requests,
                                                          std::vector<SearchRequest> queries) {
  auto w = std::unique_ptr<BenchWorkload>(new BenchWorkload());
  w->scenario_ = std::move(scenario);
  w->states_ = std::move(states);
  w->cf_requests_ = std::move(cf_requests);
  w->queries_ = std::move(queries);
  if (w->states_.empty()) throw DataError("bench: no component states");

  if (w->scenario_.kind == DataKind::Text) {
    if (w->scenario_.global_stats) {
      Corpus merged;
      for (auto& st : w->states_)
        for (auto& [doc, counts] : st.raw.corpus.docs) merged.add_doc(doc, counts);
      CorpusStats global = corpus_stats(merged);
      w->stats_.assign(w->states_.size(), global);
    } else {
      for (auto& st : w->states_) w->stats_.push_back(corpus_stats(st.raw.corpus));
    }
    for (auto& q : w->queries_) w->payload_ids_.push_back(q.qid);
  } else {
    for (auto& r : w->cf_requests_) w->payload_ids_.push_back(r.request.user);
  }

  for (std::size_t i = 0; i < w->payload_ids_.size(); ++i) {
    if (!w->payload_pos_.emplace(w->payload_ids_[i], i).second)
      throw DataError("duplicate request id: " + w->payload_ids_[i]);
  }
  if (w->payload_ids_.empty()) throw DataError("no request payloads");
  return w;
}

std::size_t BenchWorkload::subset_size(int component) const {
  return states_[static_cast<std::size_t>(component)].raw.size();
}

std::size_t BenchWorkload::synopsis_size(int component) const {
  return states_[static_cast<std::size_t>(component)].synopsis.size();
}

const CorpusStats& BenchWorkload::stats(int component) const {
  return stats_[static_cast<std::size_t>(component)];
}

std::size_t BenchWorkload::payload_index(const PointId& payload) const {
  auto it = payload_pos_.find(payload);
  if (it == payload_pos_.end()) throw DataError("unknown request payload id: " + payload);
  return it->second;
}

std::int64_t BenchWorkload::resolved_i_max() const {
  if (scenario_.i_max >= 0) return scenario_.i_max;
  if (scenario_.i_max_fraction >= 1.0) return -1;
  double mean_m = 0.0;
  for (auto& st : states_) mean_m += static_cast<double>(st.synopsis.size());
  mean_m /= static_cast<double>(states_.size());
  return std::max<std::int64_t>(1, std::llround(scenario_.i_max_fraction * mean_m));
}

Trajectory BenchWorkload::build_trajectory(std::size_t pidx, int component) {
  const SynopsisState& st = states_[static_cast<std::size_t>(component)];
  Trajectory t;
  t.synopsis_points = st.synopsis.size();
  for (auto& [agg, members] : st.index.groups) t.set_sizes.emplace(agg, members.size());

  if (scenario_.kind == DataKind::Numeric) {
    const CfRequestRecord& rec = cf_requests_[pidx];
    CfComponentWorkload w(st, rec.request, scenario_.cf);
    t.correlations = w.process_synopsis();
    t.ranked = rank_by_correlation(t.correlations);
    t.cf_prefix.push_back(w.result().acc);
    for (AggId id : t.ranked) {
      w.improve(id);
      t.cf_prefix.push_back(w.result().acc);
    }
  } else {
    const SearchRequest& q = queries_[pidx];
    SearchComponentWorkload w(st, q, stats_[static_cast<std::size_t>(component)]);
    t.correlations = w.process_synopsis();
    t.ranked = rank_by_correlation(t.correlations);
    t.topk_prefix.push_back(w.result());
    for (AggId id : t.ranked) {
      w.improve(id);
      t.topk_prefix.push_back(w.result());
    }
  }
  return t;
}

const Trajectory& BenchWorkload::trajectory(const PointId& payload, int component) {
  std::size_t pidx = payload_index(payload);
  auto key = std::make_pair(pidx, component);
  auto it = trajectories_.find(key);
  if (it == trajectories_.end())
    it = trajectories_.emplace(key, build_trajectory(pidx, component)).first;
  return it->second;
}

std::unique_ptr<ComponentWorkload> BenchWorkload::component_workload(const PointId& payload,
                                                                     int component) {
  return std::make_unique<TrajectoryWorkload>(trajectory(payload, component));
}

std::map<ItemId, double> BenchWorkload::merged_cf_predictions(
    const PointId& payload, const std::vector<std::int64_t>& sets) {
  std::size_t pidx = payload_index(payload);
  const CfRequestRecord& rec = cf_requests_[pidx];
  CfResult merged;
  merged.acc.assign(rec.request.targets.size(), CfAccum{});
  for (int c = 0; c < n_components(); ++c) {
    std::int64_t s = sets[static_cast<std::size_t>(c)];
    if (s == kSkipped) continue;
    const Trajectory& t = trajectory(payload, c);
    std::size_t prefix = s == kFullExact ? t.ranked.size()
                                         : std::min<std::size_t>(static_cast<std::size_t>(s),
                                                                 t.ranked.size());
    const auto& acc = t.cf_prefix[prefix];
    for (std::size_t i = 0; i < acc.size(); ++i) merged.acc[i] += acc[i];
  }
  return finalize(merged, rec.request, scenario_.cf);
}

SearchResult BenchWorkload::merged_search_result(const PointId& payload,
                                                 const std::vector<std::int64_t>& sets) {
  std::size_t pidx = payload_index(payload);
  std::vector<SearchResult> parts;
  for (int c = 0; c < n_components(); ++c) {
    std::int64_t s = sets[static_cast<std::size_t>(c)];
    if (s == kSkipped) continue;
    const Trajectory& t = trajectory(payload, c);
    std::size_t prefix = s == kFullExact ? t.ranked.size()
                                         : std::min<std::size_t>(static_cast<std::size_t>(s),
                                                                 t.ranked.size());
    parts.push_back(t.topk_prefix[prefix]);
  }
  return merge_topk(parts, queries_[pidx].k);
}

double BenchWorkload::exact_cf_rmse(const PointId& payload) {
  std::size_t pidx = payload_index(payload);
  auto it = exact_rmse_.find(pidx);
  if (it == exact_rmse_.end()) {
    std::vector<std::int64_t> full(static_cast<std::size_t>(n_components()), kFullExact);
    auto preds = merged_cf_predictions(payload, full);
    it = exact_rmse_.emplace(pidx, rmse(preds, cf_requests_[pidx].actuals)).first;
  }
  return it->second;
}

const SearchResult& BenchWorkload::exact_topk(const PointId& payload) {
  std::size_t pidx = payload_index(payload);
  auto it = exact_topk_.find(pidx);
  if (it == exact_topk_.end()) {
    std::vector<std::int64_t> full(static_cast<std::size_t>(n_components()), kFullExact);
    it = exact_topk_.emplace(pidx, merged_search_result(payload, full)).first;
  }
  return it->second;
}

double BenchWorkload::accuracy_loss_pct(const PointId& payload,
                                        const std::vector<std::int64_t>& sets) {
  if (scenario_.kind == DataKind::Numeric) {
    bool any = false;
    for (auto s : sets)
      if (s != kSkipped) any = true;
    double approx_rmse;
    if (!any) {
      // Nothing arrived: fall back to the active user's mean prediction.
      const CfRequestRecord& rec = cf_requests_[payload_index(payload)];
      CfResult empty;
      empty.acc.assign(rec.request.targets.size(), CfAccum{});
      approx_rmse = rmse(finalize(empty, rec.request, scenario_.cf), rec.actuals);
    } else {
      approx_rmse = rmse(merged_cf_predictions(payload, sets),
                         cf_requests_[payload_index(payload)].actuals);
    }
    return accuracy_loss_cf(approx_rmse, exact_cf_rmse(payload));
  }
  SearchResult approx = merged_search_result(payload, sets);
  double acc = accuracy_search(approx, exact_topk(payload));
  return 100.0 * (1.0 - acc);
}

// ---------------------------------------------------------------------------

std::string summary_csv(const std::vector<BenchSummaryRow>& rows) {
  std::ostringstream out;
  out << "rate_rps,strategy,p999_latency_ms,mean_accuracy_loss_pct,request_count,reissues\n";
  for (auto& r : rows)
    out << format_double(r.rate_rps) << ',' << strategy_name(r.strategy) << ','
        << format_double(r.p999_latency_ms) << ',' << format_double(r.mean_loss_pct) << ','
        << r.request_count << ',' << r.reissues << '\n';
  return out.str();
}

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << content;
}

std::string outcomes_csv(const Metrics& m, Strategy strategy) {
  std::ostringstream out;
  out << "request_id,component_id,strategy,elapsed_ms,sets_processed,synopsis_only\n";
  for (auto& o : m.outcomes)
    out << o.request_index << ',' << o.component << ',' << strategy_name(strategy) << ','
        << format_double(o.elapsed_ms) << ',' << o.sets_processed << ','
        << (o.synopsis_only ? 1 : 0) << '\n';
  return out.str();
}

}  // namespace

std::vector<BenchSummaryRow> run_bench(BenchWorkload& workload, const std::string& out_dir) {
  const BenchScenario& sc = workload.scenario();
  fs::create_directories(out_dir);

  struct RunSpec {
    double rate;
    std::vector<Arrival> arrivals;
    std::string label;
  };
  std::vector<RunSpec> runs;
  if (!sc.trace_path.empty()) {
    runs.push_back({0.0, load_trace(sc.trace_path), "trace"});
  } else {
    for (double rate : sc.rates)
      runs.push_back({rate, constant_rate_arrivals(rate, sc.requests_per_run,
                                                   workload.payload_ids()),
                      "rate" + format_double(rate)});
  }

  std::vector<BenchSummaryRow> summary;
  for (auto& spec : runs) {
    std::string windows = "window_start_ms,strategy,p999_latency_ms,mean_accuracy_loss_pct,request_count\n";
    for (Strategy strategy : sc.strategies) {
      SimRun run;
      run.strategy = strategy;
      run.service = sc.service;
      run.interference = sc.interference;
      run.reissue = sc.reissue;
      run.engine.l_spe_ms = sc.l_spe_ms;
      run.engine.i_max = workload.resolved_i_max();
      run.partial_deadline_ms = sc.resolved_partial_deadline();
      run.seed = sc.seed;
      run.record_outcomes = sc.dump_outcomes && strategy == Strategy::AccuracyTrader;

      Metrics m = simulate(run, spec.arrivals, workload);

      std::string full = m.windows_csv(strategy_name(strategy), sc.window_ms);
      windows += full.substr(full.find('\n') + 1);  // drop per-call header

      if (run.record_outcomes)
        write_file((fs::path(out_dir) / ("outcomes_" + spec.label + "_" +
                                         strategy_name(strategy) + ".csv")).string(),
                   outcomes_csv(m, strategy));

      summary.push_back({spec.rate, strategy, m.p999_latency_ms(), m.mean_loss_pct(),
                         m.requests.size(), m.reissue_count});
    }
    write_file((fs::path(out_dir) / ("metrics_" + spec.label + ".csv")).string(), windows);
  }
  write_file((fs::path(out_dir) / "summary.csv").string(), summary_csv(summary));
  return summary;
}

// ---------------------------------------------------------------------------

double spearman_against_index(const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n < 2) throw UsageError("spearman: need at least 2 values");
  // Fractional ranks with ties averaged.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> rank(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  double mean_x = (static_cast<double>(n) + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double dx = static_cast<double>(k + 1) - mean_x;
    double dy = rank[k] - mean_x;  // ranks also average to (n+1)/2
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

RankEffectiveness rank_effectiveness(BenchWorkload& workload, std::size_t max_requests) {
  const BenchScenario& sc = workload.scenario();
  constexpr std::size_t kSections = 10;
  std::vector<double> fraction_sum(kSections, 0.0);
  std::vector<std::size_t> fraction_n(kSections, 0);

  std::size_t request_count = workload.payload_ids().size();
  if (max_requests > 0) request_count = std::min(request_count, max_requests);

  for (std::size_t pidx = 0; pidx < request_count; ++pidx) {
    const PointId& payload = workload.payload_ids()[pidx];
    // Search reference: the request's exact merged top-k.
    std::set<PointId> top_ids;
    if (sc.kind == DataKind::Text)
      for (auto& h : workload.exact_topk(payload).hits) top_ids.insert(h.id);

    for (int c = 0; c < workload.n_components(); ++c) {
      const Trajectory& t = workload.trajectory(payload, c);
      const SynopsisState& st = workload.state(c);
      const std::size_t m = t.ranked.size();
      if (m == 0) continue;
      std::vector<std::size_t> highly(kSections, 0), total(kSections, 0);
      for (std::size_t r = 0; r < m; ++r) {
        std::size_t s = r * kSections / m;  // rank r of m -> section
        const auto& members = st.index.groups.at(t.ranked[r]);
        for (const auto& member : members) {
          ++total[s];
          if (sc.kind == DataKind::Numeric) {
            const CfRequestRecord& rec = workload.cf_requests()[pidx];
            double w = pearson(rec.request.known, st.raw.ratings.ratings.at(member),
                               sc.cf.min_overlap);
            if (std::abs(w) > 0.8) ++highly[s];
          } else {
            if (top_ids.count(member)) ++highly[s];
          }
        }
      }
      for (std::size_t s = 0; s < kSections; ++s) {
        if (total[s] == 0) continue;
        fraction_sum[s] += static_cast<double>(highly[s]) / static_cast<double>(total[s]);
        fraction_n[s] += 1;
      }
    }
  }

  RankEffectiveness out;
  out.section_fraction.resize(kSections, 0.0);
  for (std::size_t s = 0; s < kSections; ++s)
    if (fraction_n[s] > 0)
      out.section_fraction[s] = fraction_sum[s] / static_cast<double>(fraction_n[s]);
  out.spearman_vs_section = spearman_against_index(out.section_fraction);
  return out;
}

}  // namespace atr
