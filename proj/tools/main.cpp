// accuracytrader CLI: synthetic data generation, offline synopsis management,
// the rank-effectiveness experiment and the strategy benchmark.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 invariant violation.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "accuracytrader/bench.hpp"
#include "accuracytrader/dataset.hpp"
#include "accuracytrader/kvconfig.hpp"
#include "accuracytrader/simulator.hpp"
#include "accuracytrader/synopsis.hpp"
#include "accuracytrader/synth.hpp"

namespace fs = std::filesystem;
using namespace atr;

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

std::string component_dir(const std::string& base, int component) {
  std::string num = std::to_string(component);
  return (fs::path(base) / ("component_" + std::string(3 - std::min<std::size_t>(3, num.size()), '0') + num)).string();
}

std::vector<SynopsisState> load_state_dir(const std::string& dir) {
  std::vector<SynopsisState> states;
  for (int c = 0;; ++c) {
    fs::path p = component_dir(dir, c);
    if (!fs::exists(p / "meta.kv")) break;
    states.push_back(load_state(p.string()));
  }
  if (states.empty()) throw DataError("no component states under " + dir);
  return states;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << content;
}

SynopsisBuildConfig synopsis_config(const std::string& config_path, std::uint64_t seed,
                                    RatingScale* scale) {
  KvConfig cfg = config_path.empty() ? KvConfig::from_string("", "<defaults>")
                                     : KvConfig::from_file(config_path);
  SynopsisBuildConfig out;
  out.compression_ratio = cfg.get_double("compression_ratio", 100.0);
  out.svd.dims = static_cast<int>(cfg.get_i64("svd_dims", 3));
  out.svd.iters_per_dim = static_cast<int>(cfg.get_i64("svd_iters", 100));
  out.svd.learning_rate = cfg.get_double("svd_learning_rate", 0.002);
  out.svd.regularization = cfg.get_double("svd_regularization", 0.02);
  out.svd.seed = seed;
  out.rtree_min = static_cast<int>(cfg.get_i64("rtree_min", 2));
  out.rtree_max = static_cast<int>(cfg.get_i64("rtree_max", 8));
  out.min_synopsis_size = static_cast<int>(cfg.get_i64("min_synopsis_size", 2));
  out.full_rereduce_on_update = cfg.get_bool("full_rereduce_on_update", false);
  if (scale) {
    scale->lo = cfg.get_double("scale_lo", 1.0);
    scale->hi = cfg.get_double("scale_hi", 5.0);
  }
  cfg.require_all_consumed();
  return out;
}

// ----------------------------- subcommands ---------------------------------

struct GenDataArgs {
  std::string workload = "cf";
  std::string out;
  std::uint64_t seed = 1;
  int requests = 200;
  double known_fraction = 0.8;
  CfSynthParams cf;
  CorpusSynthParams corpus;
  int query_min_terms = 2, query_max_terms = 4, k = 10;
};

int cmd_gen_data(const GenDataArgs& a) {
  fs::create_directories(a.out);
  if (parse_data_kind(a.workload) == DataKind::Numeric) {
    CfSynthParams p = a.cf;
    p.seed = a.seed;
    RatingMatrix m = gen_clustered_ratings(p);
    save_ratings(m, (fs::path(a.out) / "ratings.csv").string());
    auto requests = gen_cf_requests(p, a.requests, a.known_fraction, a.seed + 17);
    save_cf_requests(requests, (fs::path(a.out) / "active_ratings.csv").string(),
                     (fs::path(a.out) / "testset.csv").string());
    std::cout << "wrote " << m.users.size() << " users, " << m.rating_count() << " ratings, "
              << requests.size() << " requests to " << a.out << "\n";
  } else {
    CorpusSynthParams p = a.corpus;
    p.seed = a.seed;
    Corpus c = gen_clustered_corpus(p);
    save_corpus(c, (fs::path(a.out) / "corpus.tsv").string());
    auto queries = gen_queries(p, a.requests, a.query_min_terms, a.query_max_terms, a.k, a.seed + 23);
    save_queries(queries, (fs::path(a.out) / "queries.tsv").string());
    std::cout << "wrote " << c.doc_ids.size() << " docs, " << queries.size() << " queries to "
              << a.out << "\n";
  }
  return 0;
}

struct GenTraceArgs {
  std::string workload = "cf";
  std::string requests_path;
  std::string out;
  double rate = 20.0;
  std::size_t count = 1000;
  bool diurnal = false;
  int buckets = 24;
  double bucket_seconds = 60.0;
};

int cmd_gen_trace(const GenTraceArgs& a) {
  std::vector<PointId> ids;
  if (parse_data_kind(a.workload) == DataKind::Numeric) {
    auto requests = load_cf_requests(a.requests_path,
                                     (fs::path(a.requests_path).parent_path() / "testset.csv").string());
    for (auto& r : requests) ids.push_back(r.request.user);
  } else {
    for (auto& q : load_queries(a.requests_path, 10)) ids.push_back(q.qid);
  }
  std::vector<Arrival> arrivals =
      a.diurnal ? gen_diurnal_trace(a.rate, a.buckets, a.bucket_seconds, ids)
                : constant_rate_arrivals(a.rate, a.count, ids);
  save_trace(arrivals, a.out);
  std::cout << "wrote " << arrivals.size() << " arrivals to " << a.out << "\n";
  return 0;
}

struct BuildArgs {
  std::string data;
  std::string workload = "cf";
  int components = 8;
  std::string config;
  std::string out;
  std::uint64_t seed = 1;
};

int cmd_build_synopsis(const BuildArgs& a) {
  RatingScale scale;
  SynopsisBuildConfig base = synopsis_config(a.config, a.seed, &scale);
  DataKind kind = parse_data_kind(a.workload);

  std::vector<SubsetData> subsets;
  if (kind == DataKind::Numeric)
    subsets = partition(load_ratings(a.data, scale), a.components);
  else
    subsets = partition(load_corpus(a.data), a.components);

  fs::create_directories(a.out);
  std::string report = "component,subset_size,synopsis_points,depth,tree_height\n";
  for (auto& sub : subsets) {
    int comp = sub.component_id;
    SynopsisBuildConfig cfg = base;
    cfg.svd.seed = a.seed + static_cast<std::uint64_t>(comp);
    CreateTimings timings;
    SynopsisState st = create_synopsis(std::move(sub), cfg, &timings);
    audit_state(st);
    save_state(st, component_dir(a.out, comp));
    report += std::to_string(comp) + "," + std::to_string(st.raw.size()) + "," +
              std::to_string(st.synopsis.size()) + "," + std::to_string(st.depth()) + "," +
              std::to_string(st.tree.height()) + "\n";
    std::cout << "component " << comp << ": reduce " << format_double(timings.reduce_ms)
              << " ms, rtree " << format_double(timings.tree_ms) << " ms, aggregate "
              << format_double(timings.aggregate_ms) << " ms (m=" << st.synopsis.size() << ")\n";
  }
  write_file((fs::path(a.out) / "build_report.csv").string(), report);
  return 0;
}

struct UpdateArgs {
  std::string state;
  std::string changes;
  std::string out;  // empty: update in place
};

int cmd_update_synopsis(const UpdateArgs& a) {
  auto states = load_state_dir(a.state);
  auto changes = load_changes(a.changes, states.front().kind);
  for (auto& [comp, cs] : changes)
    if (comp < 0 || comp >= static_cast<int>(states.size()))
      throw DataError("changes reference unknown component " + std::to_string(comp));

  std::string out_dir = a.out.empty() ? a.state : a.out;
  fs::create_directories(out_dir);
  std::string report = "component,recomputed_points,copied_points,tree_nodes_touched,version\n";
  for (std::size_t c = 0; c < states.size(); ++c) {
    UpdateReport r;
    auto it = changes.find(static_cast<int>(c));
    auto t0 = std::chrono::steady_clock::now();
    if (it != changes.end())
      r = update_synopsis(states[c], it->second);
    else
      r = update_synopsis(states[c], ChangeSet{});
    double elapsed = ms_since(t0);
    audit_state(states[c]);
    save_state(states[c], component_dir(out_dir, static_cast<int>(c)));
    report += std::to_string(c) + "," + std::to_string(r.recomputed_points) + "," +
              std::to_string(r.copied_points) + "," + std::to_string(r.tree_nodes_touched) + "," +
              std::to_string(r.version) + "\n";
    std::cout << "component " << c << ": recomputed " << r.recomputed_points << ", copied "
              << r.copied_points << ", " << format_double(elapsed) << " ms\n";
  }
  write_file((fs::path(out_dir) / "update_report.csv").string(), report);
  return 0;
}

struct RankArgs {
  std::string state;
  std::string requests;
  std::string testset;
  std::string config;
  std::string out;
  std::size_t max_requests = 0;
};

int cmd_rank_effectiveness(const RankArgs& a) {
  auto states = load_state_dir(a.state);
  BenchScenario scenario;
  scenario.kind = states.front().kind;
  scenario.n_components = static_cast<int>(states.size());
  if (!a.config.empty()) {
    KvConfig cfg = KvConfig::from_file(a.config);
    scenario.cf.min_overlap = static_cast<int>(cfg.get_i64("cf_min_overlap", 2));
    scenario.cf.mean_centered = cfg.get_bool("cf_mean_centered", true);
    scenario.search_k = static_cast<int>(cfg.get_i64("search_k", 10));
    scenario.global_stats = cfg.get_string("stats_mode", "local") == "global";
    cfg.require_all_consumed();
  }

  std::vector<CfRequestRecord> cf_requests;
  std::vector<SearchRequest> queries;
  if (scenario.kind == DataKind::Numeric) {
    std::string testset = a.testset.empty()
                              ? (fs::path(a.requests).parent_path() / "testset.csv").string()
                              : a.testset;
    cf_requests = load_cf_requests(a.requests, testset);
  } else {
    queries = load_queries(a.requests, scenario.search_k);
  }
  auto workload = BenchWorkload::from_states(scenario, std::move(states), std::move(cf_requests),
                                             std::move(queries));
  RankEffectiveness r = rank_effectiveness(*workload, a.max_requests);

  fs::create_directories(a.out);
  std::string csv = "section,mean_highly_related_fraction\n";
  for (std::size_t s = 0; s < r.section_fraction.size(); ++s)
    csv += std::to_string(s + 1) + "," + format_double(r.section_fraction[s]) + "\n";
  write_file((fs::path(a.out) / "sections.csv").string(), csv);
  std::cout << "spearman(section, fraction) = " << format_double(r.spearman_vs_section) << "\n";
  return 0;
}

struct BenchArgs {
  std::string scenario;
  std::string out;
  std::int64_t seed_override = -1;
};

int cmd_bench(const BenchArgs& a) {
  BenchScenario scenario = BenchScenario::from_file(a.scenario);
  if (a.seed_override >= 0) {
    scenario.seed = static_cast<std::uint64_t>(a.seed_override);
    scenario.cf_synth.seed = scenario.seed;
    scenario.corpus_synth.seed = scenario.seed;
    scenario.synopsis.svd.seed = scenario.seed;
  }
  auto workload = BenchWorkload::build(scenario);
  auto summary = run_bench(*workload, a.out);
  std::cout << summary_csv(summary);
  return 0;
}

int cmd_audit(const std::string& state_dir) {
  auto states = load_state_dir(state_dir);
  for (auto& st : states) {
    audit_state(st);
    std::cout << "component " << st.component_id << ": ok (m=" << st.synopsis.size()
              << ", version=" << st.synopsis.version << ")\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Accuracy-aware approximate processing framework"};
  app.require_subcommand(1);

  GenDataArgs gd;
  auto* gen_data = app.add_subcommand("gen-data", "Generate a seeded synthetic dataset + requests");
  gen_data->add_option("--workload", gd.workload, "cf or search");
  gen_data->add_option("--out", gd.out)->required();
  gen_data->add_option("--seed", gd.seed);
  gen_data->add_option("--requests", gd.requests, "number of request payloads");
  gen_data->add_option("--known-fraction", gd.known_fraction);
  gen_data->add_option("--users", gd.cf.users);
  gen_data->add_option("--items", gd.cf.items);
  gen_data->add_option("--clusters", gd.cf.clusters);
  gen_data->add_option("--ratings-per-user", gd.cf.ratings_per_user);
  gen_data->add_option("--noise", gd.cf.noise_sigma);
  gen_data->add_option("--docs", gd.corpus.docs);
  gen_data->add_option("--topics", gd.corpus.topics);
  gen_data->add_option("--vocab-per-topic", gd.corpus.vocab_per_topic);
  gen_data->add_option("--shared-vocab", gd.corpus.shared_vocab);
  gen_data->add_option("--terms-per-doc", gd.corpus.terms_per_doc);
  gen_data->add_option("--query-shared-prob", gd.corpus.query_shared_prob);

  GenTraceArgs gt;
  auto* gen_trace = app.add_subcommand("gen-trace", "Generate an arrival trace file");
  gen_trace->add_option("--workload", gt.workload, "cf or search");
  gen_trace->add_option("--requests-path", gt.requests_path, "request payload file")->required();
  gen_trace->add_option("--out", gt.out)->required();
  gen_trace->add_option("--rate", gt.rate, "requests per second");
  gen_trace->add_option("--count", gt.count, "arrivals (constant-rate mode)");
  gen_trace->add_flag("--diurnal", gt.diurnal, "24-bucket diurnal shape");
  gen_trace->add_option("--buckets", gt.buckets);
  gen_trace->add_option("--bucket-seconds", gt.bucket_seconds);

  BuildArgs ba;
  auto* build = app.add_subcommand("build-synopsis", "Create per-component synopses");
  build->add_option("--data", ba.data)->required();
  build->add_option("--workload", ba.workload, "cf or search");
  build->add_option("--components", ba.components);
  build->add_option("--config", ba.config, "key=value synopsis config");
  build->add_option("--out", ba.out)->required();
  build->add_option("--seed", ba.seed);

  UpdateArgs ua;
  auto* update = app.add_subcommand("update-synopsis", "Apply a ChangeSet file to stored states");
  update->add_option("--state", ua.state)->required();
  update->add_option("--changes", ua.changes)->required();
  update->add_option("--out", ua.out, "output dir (default: in place)");

  RankArgs ra;
  auto* rank = app.add_subcommand("rank-effectiveness",
                                  "Per-section fraction of highly related originals");
  rank->add_option("--state", ra.state)->required();
  rank->add_option("--requests", ra.requests)->required();
  rank->add_option("--testset", ra.testset);
  rank->add_option("--config", ra.config);
  rank->add_option("--out", ra.out)->required();
  rank->add_option("--max-requests", ra.max_requests);

  BenchArgs be;
  auto* bench = app.add_subcommand("bench", "Run the strategy comparison benchmark");
  bench->add_option("--scenario", be.scenario)->required();
  bench->add_option("--out", be.out)->required();
  bench->add_option("--seed", be.seed_override, "override the scenario seed");

  std::string audit_dir;
  auto* audit = app.add_subcommand("audit", "Run the consistency audit on stored states");
  audit->add_option("--state", audit_dir)->required();

  try {
    app.parse(argc, argv);
    if (*gen_data) return cmd_gen_data(gd);
    if (*gen_trace) return cmd_gen_trace(gt);
    if (*build) return cmd_build_synopsis(ba);
    if (*update) return cmd_update_synopsis(ua);
    if (*rank) return cmd_rank_effectiveness(ra);
    if (*bench) return cmd_bench(be);
    if (*audit) return cmd_audit(audit_dir);
    return 2;
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const InvariantError& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 4;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
