#include "accuracytrader/synopsis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "accuracytrader/kvconfig.hpp"

namespace atr {

namespace fs = std::filesystem;

const AggregatedPoint& Synopsis::point(AggId id) const {
  auto it = std::lower_bound(points.begin(), points.end(), id,
                             [](const AggregatedPoint& p, AggId v) { return p.id < v; });
  if (it == points.end() || it->id != id)
    throw InvariantError("synopsis: unknown aggregated point " + std::to_string(id));
  return *it;
}

int SynopsisState::depth() const { return tree.height() - 1 - stored_level; }

AggregatedUser aggregate_numeric(const std::vector<PointId>& members, const RatingMatrix& m) {
  if (members.empty()) throw InvariantError("aggregate_numeric: empty member set");
  AggregatedUser out;
  std::map<ItemId, double> sums;
  std::map<ItemId, std::int64_t> counts;
  // Ascending member order keeps floating-point sums reproducible.
  std::vector<PointId> sorted = members;
  std::sort(sorted.begin(), sorted.end());
  for (const auto& u : sorted) {
    auto it = m.ratings.find(u);
    if (it == m.ratings.end()) throw InvariantError("aggregate_numeric: unknown user " + u);
    for (auto& [item, rating] : it->second) {
      sums[item] += rating;
      ++counts[item];
    }
  }
  for (auto& [item, sum] : sums) out[item] = {sum / static_cast<double>(counts[item]), counts[item]};
  return out;
}

AggregatedPage aggregate_text(const std::vector<PointId>& members, const Corpus& c) {
  if (members.empty()) throw InvariantError("aggregate_text: empty member set");
  AggregatedPage out;
  out.pages = static_cast<std::int64_t>(members.size());
  for (const auto& d : members) {
    auto it = c.docs.find(d);
    if (it == c.docs.end()) throw InvariantError("aggregate_text: unknown doc " + d);
    for (auto& [term, count] : it->second) out.counts[term] += count;
  }
  return out;
}

namespace {

AggregatedPoint aggregate_group(const SynopsisState& st, AggId id,
                                const std::vector<PointId>& members) {
  AggregatedPoint p;
  p.id = id;
  if (st.kind == DataKind::Numeric)
    p.payload = aggregate_numeric(members, st.raw.ratings);
  else
    p.payload = aggregate_text(members, st.raw.corpus);
  return p;
}

std::vector<std::pair<std::string, double>> content_attrs(const ChangeContent& content) {
  std::vector<std::pair<std::string, double>> attrs;
  if (std::holds_alternative<ItemRatings>(content)) {
    for (auto& [item, rating] : std::get<ItemRatings>(content))
      attrs.emplace_back(std::to_string(item), rating);
  } else {
    for (auto& [term, count] : std::get<TermCounts>(content))
      attrs.emplace_back(term, static_cast<double>(count));
  }
  return attrs;
}

void rebuild_synopsis_points(SynopsisState& st) {
  st.synopsis.points.clear();
  for (auto& [agg, members] : st.index.groups)
    st.synopsis.points.push_back(aggregate_group(st, agg, members));
}

}  // namespace

SynopsisState create_synopsis(SubsetData subset, const SynopsisBuildConfig& cfg,
                              CreateTimings* timings) {
  if (subset.size() == 0) throw DataError("create_synopsis: empty subset");
  using clock = std::chrono::steady_clock;
  auto ms_since = [](clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };

  SynopsisState st;
  st.kind = subset.kind;
  st.component_id = subset.component_id;
  st.cfg = cfg;
  st.raw = std::move(subset);

  auto t0 = clock::now();
  NumericDataset nd = vectorize(st.raw);
  st.features = reduce(nd, cfg.svd);
  if (timings) timings->reduce_ms = ms_since(t0);

  t0 = clock::now();
  std::vector<ReducedPoint> pts;
  pts.reserve(st.features.row_ids.size());
  for (std::size_t i = 0; i < st.features.row_ids.size(); ++i)
    pts.push_back({st.features.row_ids[i], st.features.row_features[i]});
  st.tree = RTree::build(std::move(pts), cfg.rtree_min, cfg.rtree_max);

  int depth = st.tree.select_depth(st.raw.size(), cfg.compression_ratio);
  st.stored_level = st.tree.height() - 1 - depth;
  st.index = st.tree.index_at_depth(depth);
  if (timings) timings->tree_ms = ms_since(t0);

  t0 = clock::now();
  st.synopsis.component_id = st.component_id;
  st.synopsis.version = 1;
  rebuild_synopsis_points(st);
  if (timings) timings->aggregate_ms = ms_since(t0);
  return st;
}

UpdateReport update_synopsis(SynopsisState& st, const ChangeSet& changes) {
  // Validate fully before touching anything so errors leave the state intact.
  std::set<PointId> seen;
  auto check_content = [&](const PointId& id, const ChangeContent& content) {
    if (!seen.insert(id).second)
      throw DataError("changeset: point " + id + " appears twice");
    if (st.kind == DataKind::Numeric) {
      if (!std::holds_alternative<ItemRatings>(content))
        throw DataError("changeset: text content for numeric subset, point " + id);
      const auto& r = std::get<ItemRatings>(content);
      if (r.empty()) throw DataError("changeset: empty rating map for " + id);
      for (auto& [item, rating] : r)
        if (rating < st.raw.ratings.scale.lo || rating > st.raw.ratings.scale.hi)
          throw DataError("changeset: rating out of scale for " + id);
    } else {
      if (!std::holds_alternative<TermCounts>(content))
        throw DataError("changeset: numeric content for text subset, point " + id);
      const auto& t = std::get<TermCounts>(content);
      if (t.empty()) throw DataError("changeset: empty document for " + id);
      for (auto& [term, count] : t)
        if (count < 1) throw DataError("changeset: non-positive term count for " + id);
    }
  };
  for (auto& [id, content] : changes.added) {
    if (st.raw.contains(id)) throw DataError("changeset: added id already present: " + id);
    check_content(id, content);
  }
  for (auto& [id, content] : changes.modified) {
    if (!st.raw.contains(id)) throw DataError("changeset: modified id unknown: " + id);
    check_content(id, content);
  }

  UpdateReport report;
  std::set<AggId> touched_nodes;
  std::set<PointId> changed_content;

  if (st.cfg.full_rereduce_on_update && !changes.empty()) {
    // Heavyweight path: apply raw changes, then rebuild reduction and tree
    // from scratch. Every aggregated point is recomputed.
    for (auto& [id, content] : changes.added) {
      if (st.kind == DataKind::Numeric)
        st.raw.ratings.add_user(id, std::get<ItemRatings>(content));
      else
        st.raw.corpus.add_doc(id, std::get<TermCounts>(content));
    }
    for (auto& [id, content] : changes.modified) {
      if (st.kind == DataKind::Numeric)
        st.raw.ratings.replace_user(id, std::get<ItemRatings>(content));
      else
        st.raw.corpus.replace_doc(id, std::get<TermCounts>(content));
    }
    SubsetData raw = std::move(st.raw);
    std::uint64_t version = st.synopsis.version;
    SynopsisBuildConfig cfg = st.cfg;
    st = create_synopsis(std::move(raw), cfg);
    st.synopsis.version = version + 1;
    report.recomputed_points = st.synopsis.points.size();
    report.version = st.synopsis.version;
    return report;
  }

  for (auto& [id, content] : changes.modified) {
    auto influenced = st.tree.erase(id);
    touched_nodes.insert(influenced.begin(), influenced.end());
    st.features.drop_row(id);
    if (st.kind == DataKind::Numeric)
      st.raw.ratings.replace_user(id, std::get<ItemRatings>(content));
    else
      st.raw.corpus.replace_doc(id, std::get<TermCounts>(content));
    changed_content.insert(id);
  }
  for (auto& [id, content] : changes.added) {
    if (st.kind == DataKind::Numeric)
      st.raw.ratings.add_user(id, std::get<ItemRatings>(content));
    else
      st.raw.corpus.add_doc(id, std::get<TermCounts>(content));
    changed_content.insert(id);
  }

  auto reinsert = [&](const PointId& id, const ChangeContent& content) {
    auto coords = project_row(st.features, content_attrs(content), st.cfg.svd.regularization,
                              st.kind == DataKind::Text);
    st.features.set_row(id, coords);
    auto touched = st.tree.insert({id, std::move(coords)});
    touched_nodes.insert(touched.begin(), touched.end());
  };
  for (auto& [id, content] : changes.modified) reinsert(id, content);
  for (auto& [id, content] : changes.added) reinsert(id, content);

  // Keep the stored depth unless its node count drifted far from the size
  // bound (or the level vanished entirely).
  int depth = st.tree.height() - 1 - st.stored_level;
  double bound = static_cast<double>(st.raw.size()) / st.cfg.compression_ratio;
  bool reselect = depth < 0 || depth >= st.tree.height();
  if (!reselect) {
    auto counts = st.tree.nodes_per_depth();
    double c = static_cast<double>(counts[static_cast<std::size_t>(depth)]);
    if (c < 0.5 * bound || c > 2.0 * bound) reselect = true;
  }
  if (reselect) {
    depth = st.tree.select_depth(st.raw.size(), st.cfg.compression_ratio);
    st.stored_level = st.tree.height() - 1 - depth;
  }

  IndexFile new_index = st.tree.index_at_depth(depth);

  // Recompute only groups whose member set changed or that contain a point
  // with changed content; everything else is carried over bit-identically.
  std::vector<AggregatedPoint> new_points;
  new_points.reserve(new_index.groups.size());
  for (auto& [agg, members] : new_index.groups) {
    auto old = st.index.groups.find(agg);
    bool same_members = old != st.index.groups.end() && old->second == members;
    bool content_touched = false;
    if (same_members) {
      for (const auto& m : members)
        if (changed_content.count(m)) {
          content_touched = true;
          break;
        }
    }
    if (same_members && !content_touched) {
      new_points.push_back(st.synopsis.point(agg));
      ++report.copied_points;
    } else {
      new_points.push_back(aggregate_group(st, agg, members));
      ++report.recomputed_points;
    }
  }

  st.index = std::move(new_index);
  st.synopsis.points = std::move(new_points);
  ++st.synopsis.version;
  report.tree_nodes_touched = touched_nodes.size();
  report.version = st.synopsis.version;
  return report;
}

void audit_state(const SynopsisState& st) {
  st.tree.validate();
  st.index.validate_partition(st.raw.point_ids());

  if (st.synopsis.points.size() != st.index.groups.size())
    throw InvariantError("audit: synopsis size disagrees with index file");
  for (auto& p : st.synopsis.points)
    if (!st.index.groups.count(p.id))
      throw InvariantError("audit: synopsis point " + std::to_string(p.id) + " not in index");

  // Feature rows must cover exactly the raw points.
  for (const auto& id : st.raw.point_ids())
    if (!st.features.has_row(id)) throw InvariantError("audit: missing feature row for " + id);
  if (st.features.row_ids.size() != st.raw.size())
    throw InvariantError("audit: feature rows do not match subset size");

  int depth = st.depth();
  if (depth < 0 || depth >= st.tree.height())
    throw InvariantError("audit: stored level outside the tree");

  for (auto& p : st.synopsis.points) {
    const auto& members = st.index.groups.at(p.id);
    if (st.kind == DataKind::Numeric) {
      auto fresh = aggregate_numeric(members, st.raw.ratings);
      const auto& have = std::get<AggregatedUser>(p.payload);
      if (fresh.size() != have.size())
        throw InvariantError("audit: stale aggregated user " + std::to_string(p.id));
      auto it = have.begin();
      for (auto& [item, mc] : fresh) {
        if (it->first != item || it->second.count != mc.count ||
            std::abs(it->second.mean - mc.mean) > 1e-9)
          throw InvariantError("audit: stale aggregated user " + std::to_string(p.id));
        ++it;
      }
      for (auto& [item, mc] : have)
        if (mc.mean < st.raw.ratings.scale.lo - 1e-9 || mc.mean > st.raw.ratings.scale.hi + 1e-9)
          throw InvariantError("audit: aggregated mean outside rating scale");
    } else {
      auto fresh = aggregate_text(members, st.raw.corpus);
      if (!(fresh == std::get<AggregatedPage>(p.payload)))
        throw InvariantError("audit: stale aggregated page " + std::to_string(p.id));
    }
  }
}

// --------------------------- serialization ---------------------------------

void save_synopsis(const Synopsis& s, DataKind kind, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (auto& p : s.points) {
    out << p.id;
    if (kind == DataKind::Numeric) {
      for (auto& [item, mc] : std::get<AggregatedUser>(p.payload))
        out << ' ' << item << ':' << format_double(mc.mean) << ':' << mc.count;
    } else {
      for (auto& [term, count] : std::get<AggregatedPage>(p.payload).counts)
        out << ' ' << term << ':' << count;
    }
    out << '\n';
  }
}

Synopsis load_synopsis(const std::string& path, DataKind kind, int component_id,
                       std::uint64_t version, const IndexFile& index) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  Synopsis s;
  s.component_id = component_id;
  s.version = version;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tokens = split_ws(line);
    std::string ctx = path + ":" + std::to_string(lineno);
    AggregatedPoint p;
    p.id = parse_i64(tokens[0], ctx);
    if (kind == DataKind::Numeric) {
      AggregatedUser u;
      for (std::size_t i = 1; i < tokens.size(); ++i) {
        auto parts = split(tokens[i], ':');
        if (parts.size() != 3) throw DataError(ctx + ": expected item:mean:count");
        u[parse_i64(parts[0], ctx)] = {parse_double(parts[1], ctx), parse_i64(parts[2], ctx)};
      }
      p.payload = std::move(u);
    } else {
      AggregatedPage pg;
      for (std::size_t i = 1; i < tokens.size(); ++i) {
        // Terms may themselves contain ':'; the count is after the last one.
        std::size_t pos = tokens[i].rfind(':');
        if (pos == std::string::npos || pos == 0)
          throw DataError(ctx + ": expected term:count");
        pg.counts[tokens[i].substr(0, pos)] = parse_i64(tokens[i].substr(pos + 1), ctx);
      }
      // The page count is not part of the text format; it is the group size.
      auto git = index.groups.find(p.id);
      if (git == index.groups.end())
        throw DataError(ctx + ": aggregated point " + std::to_string(p.id) + " not in index");
      pg.pages = static_cast<std::int64_t>(git->second.size());
      p.payload = std::move(pg);
    }
    s.points.push_back(std::move(p));
  }
  std::sort(s.points.begin(), s.points.end(),
            [](const AggregatedPoint& a, const AggregatedPoint& b) { return a.id < b.id; });
  return s;
}

void save_state(const SynopsisState& st, const std::string& dir) {
  fs::create_directories(dir);
  std::ofstream meta(fs::path(dir) / "meta.kv");
  if (!meta) throw DataError("cannot write meta.kv in " + dir);
  meta << "kind = " << data_kind_name(st.kind) << '\n';
  meta << "component_id = " << st.component_id << '\n';
  meta << "version = " << st.synopsis.version << '\n';
  meta << "stored_level = " << st.stored_level << '\n';
  meta << "compression_ratio = " << format_double(st.cfg.compression_ratio) << '\n';
  meta << "svd_dims = " << st.cfg.svd.dims << '\n';
  meta << "svd_iters = " << st.cfg.svd.iters_per_dim << '\n';
  meta << "svd_learning_rate = " << format_double(st.cfg.svd.learning_rate) << '\n';
  meta << "svd_regularization = " << format_double(st.cfg.svd.regularization) << '\n';
  meta << "svd_seed = " << st.cfg.svd.seed << '\n';
  meta << "rtree_min = " << st.cfg.rtree_min << '\n';
  meta << "rtree_max = " << st.cfg.rtree_max << '\n';
  meta << "min_synopsis_size = " << st.cfg.min_synopsis_size << '\n';
  meta << "full_rereduce_on_update = " << (st.cfg.full_rereduce_on_update ? "on" : "off") << '\n';
  if (st.kind == DataKind::Numeric) {
    meta << "scale_lo = " << format_double(st.raw.ratings.scale.lo) << '\n';
    meta << "scale_hi = " << format_double(st.raw.ratings.scale.hi) << '\n';
    save_ratings(st.raw.ratings, (fs::path(dir) / "subset.csv").string());
  } else {
    save_corpus(st.raw.corpus, (fs::path(dir) / "subset.tsv").string());
  }
  st.features.save_rows_csv((fs::path(dir) / "features.csv").string());
  st.features.save_cols_csv((fs::path(dir) / "colfeatures.csv").string());
  st.tree.save((fs::path(dir) / "rtree.txt").string());
  st.index.save_csv((fs::path(dir) / "index.csv").string());
  save_synopsis(st.synopsis, st.kind, (fs::path(dir) / "synopsis.txt").string());
}

SynopsisState load_state(const std::string& dir) {
  KvConfig meta = KvConfig::from_file((fs::path(dir) / "meta.kv").string());
  SynopsisState st;
  st.kind = parse_data_kind(meta.require_string("kind"));
  st.component_id = static_cast<int>(meta.get_i64("component_id", 0));
  std::uint64_t version = static_cast<std::uint64_t>(meta.get_i64("version", 1));
  st.stored_level = static_cast<int>(meta.get_i64("stored_level", 0));
  st.cfg.compression_ratio = meta.get_double("compression_ratio", 100.0);
  st.cfg.svd.dims = static_cast<int>(meta.get_i64("svd_dims", 3));
  st.cfg.svd.iters_per_dim = static_cast<int>(meta.get_i64("svd_iters", 100));
  st.cfg.svd.learning_rate = meta.get_double("svd_learning_rate", 0.002);
  st.cfg.svd.regularization = meta.get_double("svd_regularization", 0.02);
  st.cfg.svd.seed = static_cast<std::uint64_t>(meta.get_i64("svd_seed", 1));
  st.cfg.rtree_min = static_cast<int>(meta.get_i64("rtree_min", 2));
  st.cfg.rtree_max = static_cast<int>(meta.get_i64("rtree_max", 8));
  st.cfg.min_synopsis_size = static_cast<int>(meta.get_i64("min_synopsis_size", 2));
  st.cfg.full_rereduce_on_update = meta.get_bool("full_rereduce_on_update", false);

  st.raw.kind = st.kind;
  st.raw.component_id = st.component_id;
  if (st.kind == DataKind::Numeric) {
    RatingScale scale{meta.get_double("scale_lo", 1.0), meta.get_double("scale_hi", 5.0)};
    st.raw.ratings = load_ratings((fs::path(dir) / "subset.csv").string(), scale);
  } else {
    st.raw.corpus = load_corpus((fs::path(dir) / "subset.tsv").string());
  }
  meta.require_all_consumed();

  st.features = FeatureMatrix::load_csv((fs::path(dir) / "features.csv").string(),
                                        (fs::path(dir) / "colfeatures.csv").string());
  st.tree = RTree::load_file((fs::path(dir) / "rtree.txt").string());
  int depth = st.tree.height() - 1 - st.stored_level;
  st.index = IndexFile::load_csv((fs::path(dir) / "index.csv").string(), depth);
  st.synopsis = load_synopsis((fs::path(dir) / "synopsis.txt").string(), st.kind,
                              st.component_id, version, st.index);
  return st;
}

std::map<int, ChangeSet> load_changes(const std::string& path, DataKind kind) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open changes file: " + path);
  std::map<int, ChangeSet> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::string ctx = path + ":" + std::to_string(lineno);
    auto cols = split(line, '\t');
    if (cols.size() != 4) throw DataError(ctx + ": expected component<TAB>op<TAB>id<TAB>content");
    int comp = static_cast<int>(parse_i64(cols[0], ctx + " component"));
    const std::string& op = cols[1];
    const PointId& id = cols[2];
    ChangeContent content;
    if (kind == DataKind::Numeric) {
      ItemRatings r;
      for (auto& tok : split_ws(cols[3])) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) throw DataError(ctx + ": expected item=rating");
        r[parse_i64(tok.substr(0, eq), ctx)] = parse_double(tok.substr(eq + 1), ctx);
      }
      content = std::move(r);
    } else {
      TermCounts t;
      for (auto& tok : split_ws(cols[3])) ++t[to_lower(tok)];
      content = std::move(t);
    }
    if (op == "add")
      out[comp].added.emplace_back(id, std::move(content));
    else if (op == "modify")
      out[comp].modified.emplace_back(id, std::move(content));
    else
      throw DataError(ctx + ": unknown op '" + op + "' (expected add or modify)");
  }
  return out;
}

void save_changes(const std::map<int, ChangeSet>& changes, DataKind kind,
                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  auto write_content = [&](const ChangeContent& content) {
    bool first = true;
    if (kind == DataKind::Numeric) {
      for (auto& [item, rating] : std::get<ItemRatings>(content)) {
        out << (first ? "" : " ") << item << '=' << format_double(rating);
        first = false;
      }
    } else {
      for (auto& [term, count] : std::get<TermCounts>(content))
        for (std::int64_t i = 0; i < count; ++i) {
          out << (first ? "" : " ") << term;
          first = false;
        }
    }
  };
  for (auto& [comp, cs] : changes) {
    for (auto& [id, content] : cs.added) {
      out << comp << "\tadd\t" << id << '\t';
      write_content(content);
      out << '\n';
    }
    for (auto& [id, content] : cs.modified) {
      out << comp << "\tmodify\t" << id << '\t';
      write_content(content);
      out << '\n';
    }
  }
}

}  // namespace atr
