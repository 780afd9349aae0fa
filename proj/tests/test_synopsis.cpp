#include <filesystem>
#include <set>

#include "accuracytrader/synopsis.hpp"
#include "accuracytrader/synth.hpp"
#include "doctest.h"
#include "oracle.hpp"

using namespace atr;
namespace fs = std::filesystem;

namespace {

SubsetData cf_subset(int users, int items, int clusters, std::uint64_t seed, int ratings = 20) {
  CfSynthParams p;
  p.users = users;
  p.items = items;
  p.clusters = clusters;
  p.ratings_per_user = ratings;
  p.seed = seed;
  SubsetData s;
  s.kind = DataKind::Numeric;
  s.ratings = gen_clustered_ratings(p);
  return s;
}

SubsetData text_subset(int docs, int topics, std::uint64_t seed) {
  CorpusSynthParams p;
  p.docs = docs;
  p.topics = topics;
  p.seed = seed;
  SubsetData s;
  s.kind = DataKind::Text;
  s.corpus = gen_clustered_corpus(p);
  return s;
}

SynopsisBuildConfig quick_cfg(double ratio = 10.0) {
  SynopsisBuildConfig cfg;
  cfg.compression_ratio = ratio;
  cfg.svd.iters_per_dim = 40;
  cfg.svd.seed = 3;
  return cfg;
}

void check_payloads_equal(const std::vector<AggregatedPoint>& a,
                          const std::vector<AggregatedPoint>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].payload == b[i].payload);
  }
}

ItemRatings perturbed(const ItemRatings& r, double delta) {
  ItemRatings out = r;
  for (auto& [item, v] : out) v = std::min(5.0, std::max(1.0, v + delta));
  return out;
}

}  // namespace

TEST_CASE("aggregate_numeric follows the rater-subset rule") {
  RatingMatrix m;
  m.add_user("u1", {{1, 4.0}});
  CHECK(aggregate_numeric({"u1"}, m).at(1) == MeanCount{4.0, 1});

  m.add_user("u2", {{1, 2.0}});
  RatingMatrix m2;
  m2.add_user("u1", {{1, 2.0}});
  m2.add_user("u2", {{1, 4.0}});
  CHECK(aggregate_numeric({"u1", "u2"}, m2).at(1) == MeanCount{3.0, 2});

  // Non-raters are excluded from the mean.
  RatingMatrix m3;
  m3.add_user("u1", {{1, 5.0}});
  m3.add_user("u2", {{2, 3.0}});
  m3.add_user("u3", {{1, 3.0}});
  auto agg = aggregate_numeric({"u1", "u2", "u3"}, m3);
  CHECK(agg.at(1) == MeanCount{4.0, 2});
  CHECK(agg.at(2) == MeanCount{3.0, 1});
}

TEST_CASE("aggregate_text merges counts") {
  Corpus c;
  c.add_doc("d1", {{"a", 2}});
  c.add_doc("d2", {{"a", 1}, {"b", 3}});
  auto agg = aggregate_text({"d1", "d2"}, c);
  CHECK(agg.counts.at("a") == 3);
  CHECK(agg.counts.at("b") == 3);
  CHECK(agg.pages == 2);

  auto single = aggregate_text({"d1"}, c);
  CHECK(single.counts == c.docs.at("d1"));

  Corpus disj;
  disj.add_doc("x", {{"p", 2}});
  disj.add_doc("y", {{"q", 5}});
  auto u = aggregate_text({"x", "y"}, disj);
  CHECK(u.counts.at("p") == 2);
  CHECK(u.counts.at("q") == 5);
}

TEST_CASE("create_synopsis on the Fig-2-style 12x5 dataset") {
  // Two obvious clusters of six rows; j=2; ratio picked so two nodes fit.
  SubsetData s;
  s.kind = DataKind::Numeric;
  for (int i = 0; i < 6; ++i) {
    double j = 0.05 * i;
    s.ratings.add_user("a" + std::to_string(i),
                       {{0, 5.0 - j}, {1, 4.5 - j}, {2, 4.8 - j}, {3, 1.0 + j}, {4, 1.2 + j}});
    s.ratings.add_user("b" + std::to_string(i),
                       {{0, 1.0 + j}, {1, 1.3 + j}, {2, 1.1 + j}, {3, 4.9 - j}, {4, 4.6 - j}});
  }
  SynopsisBuildConfig cfg;
  cfg.compression_ratio = 6.0;  // bound = 2 nodes
  cfg.svd.dims = 2;
  cfg.svd.iters_per_dim = 300;
  cfg.svd.learning_rate = 0.01;
  cfg.svd.seed = 1;
  SynopsisState st = create_synopsis(s, cfg);
  audit_state(st);
  REQUIRE(st.synopsis.size() == 2);
  for (auto& [agg, members] : st.index.groups) {
    CHECK(members.size() == 6);
    char first = members.front()[0];
    for (auto& m : members) CHECK(m[0] == first);  // clusters stay whole
  }
}

TEST_CASE("create_synopsis degenerates to one point for tiny subsets") {
  SubsetData s = cf_subset(40, 30, 2, 5);
  SynopsisBuildConfig cfg = quick_cfg(100.0);  // bound 0.4 -> root depth
  SynopsisState st = create_synopsis(s, cfg);
  audit_state(st);
  CHECK(st.synopsis.size() == 1);
  CHECK(st.depth() == 0);
}

TEST_CASE("constant column aggregates to the constant") {
  SubsetData s;
  s.kind = DataKind::Numeric;
  for (int u = 0; u < 30; ++u) {
    ItemRatings r{{99, 4.0}};
    r[u % 7] = 1.0 + 0.5 * (u % 5);
    s.ratings.add_user("u" + std::to_string(100 + u), r);
  }
  SynopsisState st = create_synopsis(s, quick_cfg(5.0));
  audit_state(st);
  for (auto& p : st.synopsis.points) {
    const auto& payload = std::get<AggregatedUser>(p.payload);
    CHECK(payload.at(99).mean == doctest::Approx(4.0));
  }
}

TEST_CASE("create_synopsis is deterministic and honors the compression bound") {
  SubsetData s = cf_subset(400, 80, 8, 21);
  SynopsisBuildConfig cfg = quick_cfg(20.0);
  SynopsisState a = create_synopsis(s, cfg);
  SynopsisState b = create_synopsis(s, cfg);
  check_payloads_equal(a.synopsis.points, b.synopsis.points);
  CHECK(a.index.groups == b.index.groups);
  CHECK(a.synopsis.size() <= 400 / 20);
  CHECK(a.depth() > 0);
}

TEST_CASE("update: empty ChangeSet only bumps the version") {
  SynopsisState st = create_synopsis(cf_subset(120, 40, 4, 9), quick_cfg());
  auto before = st.synopsis.points;
  UpdateReport r = update_synopsis(st, ChangeSet{});
  CHECK(r.recomputed_points == 0);
  CHECK(r.copied_points == before.size());
  CHECK(st.synopsis.version == 2);
  check_payloads_equal(st.synopsis.points, before);
  audit_state(st);
}

TEST_CASE("update: additions match a full re-aggregation oracle") {
  SynopsisState st = create_synopsis(cf_subset(200, 50, 5, 13), quick_cfg());
  ChangeSet cs;
  for (int i = 0; i < 2; ++i) {
    ItemRatings r;
    for (int j = 0; j < 10; ++j) r[j * 3] = 1.0 + (i + j) % 5;
    cs.added.emplace_back("zz" + std::to_string(i), r);
  }
  update_synopsis(st, cs);
  audit_state(st);
  auto fresh = oracle::reaggregate(st.index, st.raw);
  REQUIRE(fresh.size() == st.synopsis.points.size());
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    CHECK(fresh[i].id == st.synopsis.points[i].id);
    CHECK(fresh[i].payload == st.synopsis.points[i].payload);
  }
}

TEST_CASE("update: untouched aggregated points are copied bit-identically") {
  SynopsisState st = create_synopsis(cf_subset(300, 60, 6, 17), quick_cfg());
  auto before = st.synopsis.points;
  auto before_index = st.index.groups;

  // Modify one existing user only slightly: cluster-local change.
  PointId victim = st.raw.ratings.users[5];
  ChangeSet cs;
  cs.modified.emplace_back(victim, perturbed(st.raw.ratings.ratings.at(victim), 0.05));
  UpdateReport r = update_synopsis(st, cs);
  audit_state(st);
  CHECK(r.recomputed_points < before.size());

  std::map<AggId, const AggregatedPoint*> old_points;
  for (auto& p : before) old_points.emplace(p.id, &p);
  for (auto& p : st.synopsis.points) {
    auto oldp = old_points.find(p.id);
    if (oldp == old_points.end()) continue;
    auto old_members = before_index.find(p.id);
    bool same_members = old_members != before_index.end() &&
                        old_members->second == st.index.groups.at(p.id);
    bool contains_victim = false;
    for (auto& m : st.index.groups.at(p.id))
      if (m == victim) contains_victim = true;
    if (same_members && !contains_victim) {
      // bit-identical payload copy
      CHECK(p.payload == oldp->second->payload);
    }
  }
}

TEST_CASE("update: text additions and modifications stay consistent") {
  SynopsisState st = create_synopsis(text_subset(150, 5, 23), quick_cfg());
  ChangeSet cs;
  cs.added.emplace_back("zz1", TermCounts{{"t0w1", 3}, {"t0w2", 2}, {"newterm", 1}});
  PointId victim = st.raw.corpus.doc_ids[3];
  cs.modified.emplace_back(victim, TermCounts{{"t1w0", 4}, {"t1w5", 2}});
  UpdateReport r = update_synopsis(st, cs);
  CHECK(r.recomputed_points >= 1);
  audit_state(st);
  CHECK(st.raw.corpus.docs.at("zz1").at("newterm") == 1);
}

TEST_CASE("update rejects bad ChangeSets and leaves the state intact") {
  SynopsisState st = create_synopsis(cf_subset(80, 30, 3, 29), quick_cfg());
  auto before = st.synopsis.points;
  std::uint64_t version = st.synopsis.version;

  ChangeSet dup_add;
  dup_add.added.emplace_back(st.raw.ratings.users[0], ItemRatings{{1, 3.0}});
  CHECK_THROWS_AS(update_synopsis(st, dup_add), DataError);

  ChangeSet unknown_mod;
  unknown_mod.modified.emplace_back("ghost", ItemRatings{{1, 3.0}});
  CHECK_THROWS_AS(update_synopsis(st, unknown_mod), DataError);

  ChangeSet wrong_kind;
  wrong_kind.added.emplace_back("fresh", TermCounts{{"a", 1}});
  CHECK_THROWS_AS(update_synopsis(st, wrong_kind), DataError);

  CHECK(st.synopsis.version == version);
  check_payloads_equal(st.synopsis.points, before);
  audit_state(st);
}

TEST_CASE("additions recompute no more points than same-size modifications") {
  auto base = cf_subset(400, 60, 8, 31);
  SynopsisBuildConfig cfg = quick_cfg(20.0);

  SynopsisState add_state = create_synopsis(base, cfg);
  SynopsisState mod_state = create_synopsis(base, cfg);

  Rng rng(77);
  ChangeSet adds, mods;
  std::set<PointId> victims;
  for (int i = 0; i < 12; ++i) {
    ItemRatings r;
    for (int j = 0; j < 12; ++j)
      r[rng.uniform_int(0, 59)] = static_cast<double>(rng.uniform_int(1, 5));
    adds.added.emplace_back("new" + std::to_string(i), r);
    PointId victim;
    do {
      victim = base.ratings.users[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(base.ratings.users.size()) - 1))];
    } while (!victims.insert(victim).second);
    mods.modified.emplace_back(victim, perturbed(base.ratings.ratings.at(victim), 0.2));
  }
  UpdateReport ra = update_synopsis(add_state, adds);
  UpdateReport rm = update_synopsis(mod_state, mods);
  audit_state(add_state);
  audit_state(mod_state);
  CHECK(ra.recomputed_points <= rm.recomputed_points);
  // Cluster-local updates touch strictly fewer points than a full rebuild.
  CHECK(rm.recomputed_points < mod_state.synopsis.points.size());
}

TEST_CASE("state save/load round-trips byte-identically") {
  SynopsisState st = create_synopsis(cf_subset(150, 40, 5, 37), quick_cfg());
  fs::path dir = fs::temp_directory_path() / "atr_state_rt";
  fs::remove_all(dir);
  save_state(st, dir.string());
  SynopsisState back = load_state(dir.string());
  audit_state(back);
  check_payloads_equal(back.synopsis.points, st.synopsis.points);
  CHECK(back.index.groups == st.index.groups);
  CHECK(back.synopsis.version == st.synopsis.version);
  CHECK(back.stored_level == st.stored_level);

  fs::path dir2 = fs::temp_directory_path() / "atr_state_rt2";
  fs::remove_all(dir2);
  save_state(back, dir2.string());
  for (auto& name : {"meta.kv", "subset.csv", "features.csv", "colfeatures.csv", "rtree.txt",
                     "index.csv", "synopsis.txt"}) {
    std::ifstream a(dir / name), b(dir2 / name);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
  }

  // text state round-trip as well
  SynopsisState ts = create_synopsis(text_subset(120, 4, 41), quick_cfg());
  fs::path tdir = fs::temp_directory_path() / "atr_state_text";
  fs::remove_all(tdir);
  save_state(ts, tdir.string());
  SynopsisState tback = load_state(tdir.string());
  audit_state(tback);
  check_payloads_equal(tback.synopsis.points, ts.synopsis.points);
}

TEST_CASE("random ChangeSet sequences match the oracle after every step") {
  SynopsisState st = create_synopsis(cf_subset(250, 50, 5, 43), quick_cfg());
  Rng rng(17);
  int next_id = 0;
  for (int step = 0; step < 8; ++step) {
    ChangeSet cs;
    int adds = static_cast<int>(rng.uniform_int(0, 3));
    int mods = static_cast<int>(rng.uniform_int(0, 3));
    for (int i = 0; i < adds; ++i) {
      ItemRatings r;
      for (int j = 0; j < 10; ++j)
        r[rng.uniform_int(0, 49)] = static_cast<double>(rng.uniform_int(1, 5));
      cs.added.emplace_back("gen" + std::to_string(next_id++), r);
    }
    std::set<PointId> used;
    for (int i = 0; i < mods; ++i) {
      const auto& users = st.raw.ratings.users;
      PointId victim =
          users[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(users.size()) - 1))];
      if (!used.insert(victim).second) continue;
      cs.modified.emplace_back(victim, perturbed(st.raw.ratings.ratings.at(victim), 0.1 * step));
    }
    update_synopsis(st, cs);
    audit_state(st);
    auto fresh = oracle::reaggregate(st.index, st.raw);
    REQUIRE(fresh.size() == st.synopsis.points.size());
    for (std::size_t i = 0; i < fresh.size(); ++i)
      CHECK(fresh[i].payload == st.synopsis.points[i].payload);
  }
}
