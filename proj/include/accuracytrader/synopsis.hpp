#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "accuracytrader/common.hpp"
#include "accuracytrader/dataset.hpp"
#include "accuracytrader/dimred.hpp"
#include "accuracytrader/rtree.hpp"

namespace atr {

struct MeanCount {
  double mean = 0.0;
  std::int64_t count = 0;
  bool operator==(const MeanCount&) const = default;
};

// Per-item mean rating over the group members that rated the item.
using AggregatedUser = std::map<ItemId, MeanCount>;

// Merged term counts over the group members.
struct AggregatedPage {
  TermCounts counts;
  std::int64_t pages = 0;
  bool operator==(const AggregatedPage&) const = default;
};

struct AggregatedPoint {
  AggId id = 0;
  std::variant<AggregatedUser, AggregatedPage> payload;
  bool operator==(const AggregatedPoint&) const = default;
};

struct Synopsis {
  int component_id = 0;
  std::uint64_t version = 0;
  std::vector<AggregatedPoint> points;  // sorted by id

  const AggregatedPoint& point(AggId id) const;
  std::size_t size() const { return points.size(); }
};

struct SynopsisBuildConfig {
  SvdConfig svd;
  double compression_ratio = 100.0;
  int rtree_min = 2;
  int rtree_max = 8;
  int min_synopsis_size = 2;
  // When set, updates re-run the full reduction instead of projecting changed
  // rows onto the frozen column features.
  bool full_rereduce_on_update = false;
};

// Everything needed to serve and incrementally update one component:
// raw subset, reduced features, the R-tree, the index file and the synopsis,
// mutually consistent at all times.
struct SynopsisState {
  DataKind kind = DataKind::Numeric;
  int component_id = 0;
  SubsetData raw;
  FeatureMatrix features;
  RTree tree;
  IndexFile index;
  Synopsis synopsis;
  SynopsisBuildConfig cfg;
  int stored_level = 0;  // R-tree level of the synopsis nodes (0 = leaves)

  int depth() const;  // depth from the root corresponding to stored_level
};

// New content for a point: item ratings (numeric) or term counts (text).
using ChangeContent = std::variant<ItemRatings, TermCounts>;

struct ChangeSet {
  std::vector<std::pair<PointId, ChangeContent>> added;
  std::vector<std::pair<PointId, ChangeContent>> modified;

  bool empty() const { return added.empty() && modified.empty(); }
};

struct UpdateReport {
  std::size_t recomputed_points = 0;  // aggregated points rebuilt from raw data
  std::size_t copied_points = 0;      // aggregated points carried over bit-identically
  std::size_t tree_nodes_touched = 0;
  std::uint64_t version = 0;
};

AggregatedUser aggregate_numeric(const std::vector<PointId>& members, const RatingMatrix& m);
AggregatedPage aggregate_text(const std::vector<PointId>& members, const Corpus& c);

// Wall-clock cost of the three creation steps (reported, never serialized).
struct CreateTimings {
  double reduce_ms = 0.0;
  double tree_ms = 0.0;
  double aggregate_ms = 0.0;
};

// Offline creation: vectorize -> reduce -> R-tree -> depth selection ->
// index file -> aggregation. Deterministic given cfg.svd.seed.
SynopsisState create_synopsis(SubsetData subset, const SynopsisBuildConfig& cfg,
                              CreateTimings* timings = nullptr);

// Incremental update. Added points are projected into the frozen reduced
// space and inserted; modified points are deleted, re-projected and
// re-inserted. Only aggregated points whose member set or member content
// changed are recomputed; the rest are copied bit-identically. Throws with
// the state untouched if the ChangeSet is invalid.
UpdateReport update_synopsis(SynopsisState& state, const ChangeSet& changes);

// Consistency audit: R-tree invariants, index partition property, synopsis
// ids, payloads matching a fresh aggregation of current raw data.
void audit_state(const SynopsisState& state);

void save_state(const SynopsisState& state, const std::string& dir);
SynopsisState load_state(const std::string& dir);

void save_synopsis(const Synopsis& s, DataKind kind, const std::string& path);
Synopsis load_synopsis(const std::string& path, DataKind kind, int component_id,
                       std::uint64_t version, const IndexFile& index);

// Change files are TSV: component_id<TAB>add|modify<TAB>point_id<TAB>content
// where content is `item=rating ...` (cf) or `term term ...` (search).
std::map<int, ChangeSet> load_changes(const std::string& path, DataKind kind);
void save_changes(const std::map<int, ChangeSet>& changes, DataKind kind,
                  const std::string& path);

}  // namespace atr
