#include "accuracytrader/rtree.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace atr {

void IndexFile::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (auto& [agg, members] : groups)
    for (auto& m : members) out << agg << ',' << m << '\n';
}

IndexFile IndexFile::load_csv(const std::string& path, int depth) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  IndexFile f;
  f.depth = depth;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() != 2)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected agg_id,member_id");
    f.groups[parse_i64(fields[0], path)].push_back(fields[1]);
  }
  for (auto& [agg, members] : f.groups) std::sort(members.begin(), members.end());
  return f;
}

void IndexFile::validate_partition(std::vector<PointId> universe) const {
  std::vector<PointId> all;
  for (auto& [agg, members] : groups) {
    if (members.empty()) throw InvariantError("index file: empty group " + std::to_string(agg));
    all.insert(all.end(), members.begin(), members.end());
  }
  std::sort(all.begin(), all.end());
  for (std::size_t i = 1; i < all.size(); ++i)
    if (all[i] == all[i - 1])
      throw InvariantError("index file: member in two groups: " + all[i]);
  std::sort(universe.begin(), universe.end());
  if (all != universe) throw InvariantError("index file: groups do not cover the id universe");
}

RTree::RTree(int min_entries, int max_entries)
    : min_entries_(min_entries), max_entries_(max_entries) {
  if (min_entries < 2 || max_entries < 2 * min_entries)
    throw UsageError("rtree: need 2 <= min_entries <= max_entries/2");
}

std::unique_ptr<RTree::Node> RTree::make_node(int level) {
  auto n = std::make_unique<Node>();
  n->id = next_node_id_++;
  n->level = level;
  return n;
}

double RTree::area(const std::vector<double>& lo, const std::vector<double>& hi) {
  double a = 1.0;
  for (std::size_t d = 0; d < lo.size(); ++d) a *= hi[d] - lo[d];
  return a;
}

void RTree::cover(std::vector<double>& lo, std::vector<double>& hi,
                  const std::vector<double>& plo, const std::vector<double>& phi) {
  for (std::size_t d = 0; d < lo.size(); ++d) {
    lo[d] = std::min(lo[d], plo[d]);
    hi[d] = std::max(hi[d], phi[d]);
  }
}

double RTree::enlargement(const Node& n, const std::vector<double>& plo,
                          const std::vector<double>& phi) {
  double before = area(n.lo, n.hi);
  std::vector<double> lo = n.lo, hi = n.hi;
  cover(lo, hi, plo, phi);
  return area(lo, hi) - before;
}

void RTree::recompute_box(Node* n) const {
  n->lo.assign(static_cast<std::size_t>(dims_), std::numeric_limits<double>::infinity());
  n->hi.assign(static_cast<std::size_t>(dims_), -std::numeric_limits<double>::infinity());
  if (n->level == 0) {
    for (auto& e : n->entries) cover(n->lo, n->hi, e.coords, e.coords);
  } else {
    for (auto& c : n->children) cover(n->lo, n->hi, c->lo, c->hi);
  }
}

RTree RTree::build(std::vector<ReducedPoint> points, int min_entries, int max_entries) {
  RTree t(min_entries, max_entries);
  if (points.empty()) throw DataError("rtree build: no points");
  std::sort(points.begin(), points.end(),
            [](const ReducedPoint& a, const ReducedPoint& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < points.size(); ++i)
    if (points[i].id == points[i - 1].id)
      throw DataError("rtree build: duplicate point id " + points[i].id);
  for (auto& p : points) t.insert(p);
  return t;
}

int RTree::height() const { return root_ ? root_->level + 1 : 0; }

const std::vector<double>& RTree::coords_of(const PointId& id) const {
  auto it = points_.find(id);
  if (it == points_.end()) throw DataError("rtree: unknown point id " + id);
  return it->second;
}

std::vector<PointId> RTree::point_ids() const {
  std::vector<PointId> out;
  out.reserve(points_.size());
  for (auto& [id, c] : points_) out.push_back(id);
  return out;
}

RTree::Node* RTree::choose_child(Node* node, const std::vector<double>& coords) const {
  Node* best = nullptr;
  double best_enl = 0.0, best_area = 0.0;
  for (auto& c : node->children) {
    double enl = enlargement(*c, coords, coords);
    double ar = area(c->lo, c->hi);
    if (!best || enl < best_enl || (enl == best_enl && ar < best_area) ||
        (enl == best_enl && ar == best_area && c->id < best->id)) {
      best = c.get();
      best_enl = enl;
      best_area = ar;
    }
  }
  return best;
}

// Quadratic split over an item list with bounding boxes. Returns the indices
// assigned to the second group; ties resolve on iteration order so the split
// is deterministic even for co-located points.
namespace {

struct SplitItem {
  const std::vector<double>* lo;
  const std::vector<double>* hi;
};

std::vector<bool> quadratic_split(const std::vector<SplitItem>& items, int min_entries) {
  const std::size_t n = items.size();
  auto box_area = [](const std::vector<double>& lo, const std::vector<double>& hi) {
    double a = 1.0;
    for (std::size_t d = 0; d < lo.size(); ++d) a *= hi[d] - lo[d];
    return a;
  };
  auto pair_waste = [&](std::size_t i, std::size_t j) {
    std::vector<double> lo = *items[i].lo, hi = *items[i].hi;
    for (std::size_t d = 0; d < lo.size(); ++d) {
      lo[d] = std::min(lo[d], (*items[j].lo)[d]);
      hi[d] = std::max(hi[d], (*items[j].hi)[d]);
    }
    return box_area(lo, hi) - box_area(*items[i].lo, *items[i].hi) -
           box_area(*items[j].lo, *items[j].hi);
  };

  std::size_t seed1 = 0, seed2 = 1;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double w = pair_waste(i, j);
      if (w > best) {
        best = w;
        seed1 = i;
        seed2 = j;
      }
    }

  struct Group {
    std::vector<double> lo, hi;
    std::size_t count = 0;
  };
  Group g[2];
  std::vector<int> assign(n, -1);
  auto add = [&](int gi, std::size_t idx) {
    assign[idx] = gi;
    auto& grp = g[gi];
    if (grp.count == 0) {
      grp.lo = *items[idx].lo;
      grp.hi = *items[idx].hi;
    } else {
      for (std::size_t d = 0; d < grp.lo.size(); ++d) {
        grp.lo[d] = std::min(grp.lo[d], (*items[idx].lo)[d]);
        grp.hi[d] = std::max(grp.hi[d], (*items[idx].hi)[d]);
      }
    }
    ++grp.count;
  };
  add(0, seed1);
  add(1, seed2);

  std::size_t remaining = n - 2;
  while (remaining > 0) {
    // If one group must absorb everything left to reach the minimum, do so.
    for (int gi = 0; gi < 2; ++gi) {
      if (g[gi].count + remaining == static_cast<std::size_t>(min_entries)) {
        for (std::size_t i = 0; i < n; ++i)
          if (assign[i] < 0) add(gi, i);
        remaining = 0;
      }
    }
    if (remaining == 0) break;

    auto group_enlargement = [&](const Group& grp, std::size_t idx) {
      std::vector<double> lo = grp.lo, hi = grp.hi;
      for (std::size_t d = 0; d < lo.size(); ++d) {
        lo[d] = std::min(lo[d], (*items[idx].lo)[d]);
        hi[d] = std::max(hi[d], (*items[idx].hi)[d]);
      }
      return box_area(lo, hi) - box_area(grp.lo, grp.hi);
    };

    std::size_t pick = n;
    double pick_pref = -1.0;
    double pick_d[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      if (assign[i] >= 0) continue;
      double d0 = group_enlargement(g[0], i);
      double d1 = group_enlargement(g[1], i);
      double pref = std::abs(d0 - d1);
      if (pick == n || pref > pick_pref) {
        pick = i;
        pick_pref = pref;
        pick_d[0] = d0;
        pick_d[1] = d1;
      }
    }
    int gi;
    if (pick_d[0] != pick_d[1]) {
      gi = pick_d[0] < pick_d[1] ? 0 : 1;
    } else {
      double a0 = box_area(g[0].lo, g[0].hi), a1 = box_area(g[1].lo, g[1].hi);
      if (a0 != a1)
        gi = a0 < a1 ? 0 : 1;
      else
        gi = g[0].count <= g[1].count ? 0 : 1;
    }
    add(gi, pick);
    --remaining;
  }

  std::vector<bool> second(n);
  for (std::size_t i = 0; i < n; ++i) second[i] = assign[i] == 1;
  return second;
}

}  // namespace

std::unique_ptr<RTree::Node> RTree::split_leaf(Node* node, std::set<AggId>& influenced) {
  std::vector<SplitItem> items;
  items.reserve(node->entries.size());
  for (auto& e : node->entries) items.push_back({&e.coords, &e.coords});
  auto second = quadratic_split(items, min_entries_);

  auto sibling = make_node(0);
  std::vector<Entry> keep;
  for (std::size_t i = 0; i < node->entries.size(); ++i) {
    if (second[i])
      sibling->entries.push_back(std::move(node->entries[i]));
    else
      keep.push_back(std::move(node->entries[i]));
  }
  node->entries = std::move(keep);
  recompute_box(node);
  recompute_box(sibling.get());
  influenced.insert(node->id);
  influenced.insert(sibling->id);
  return sibling;
}

std::unique_ptr<RTree::Node> RTree::split_internal(Node* node, std::set<AggId>& influenced) {
  std::vector<SplitItem> items;
  items.reserve(node->children.size());
  for (auto& c : node->children) items.push_back({&c->lo, &c->hi});
  auto second = quadratic_split(items, min_entries_);

  auto sibling = make_node(node->level);
  std::vector<std::unique_ptr<Node>> keep;
  for (std::size_t i = 0; i < node->children.size(); ++i) {
    if (second[i])
      sibling->children.push_back(std::move(node->children[i]));
    else
      keep.push_back(std::move(node->children[i]));
  }
  node->children = std::move(keep);
  recompute_box(node);
  recompute_box(sibling.get());
  influenced.insert(node->id);
  influenced.insert(sibling->id);
  return sibling;
}

std::unique_ptr<RTree::Node> RTree::insert_rec(Node* node, Entry& e,
                                               std::set<AggId>& influenced) {
  influenced.insert(node->id);  // member set grows along the whole path
  if (node->level == 0) {
    node->entries.push_back(std::move(e));
    recompute_box(node);
    if (node->entries.size() > static_cast<std::size_t>(max_entries_))
      return split_leaf(node, influenced);
    return nullptr;
  }
  Node* child = choose_child(node, e.coords);
  auto sibling = insert_rec(child, e, influenced);
  if (sibling) node->children.push_back(std::move(sibling));
  recompute_box(node);
  if (node->children.size() > static_cast<std::size_t>(max_entries_))
    return split_internal(node, influenced);
  return nullptr;
}

std::unique_ptr<RTree::Node> RTree::insert_entry(Entry e, std::set<AggId>& influenced) {
  if (!root_) {
    root_ = make_node(0);
    root_->entries.push_back(std::move(e));
    recompute_box(root_.get());
    influenced.insert(root_->id);
    return nullptr;
  }
  auto sibling = insert_rec(root_.get(), e, influenced);
  if (sibling) {
    auto new_root = make_node(root_->level + 1);
    new_root->children.push_back(std::move(root_));
    new_root->children.push_back(std::move(sibling));
    recompute_box(new_root.get());
    influenced.insert(new_root->id);
    root_ = std::move(new_root);
  }
  return nullptr;
}

std::set<AggId> RTree::insert(const ReducedPoint& p) {
  for (double c : p.coords)
    if (!std::isfinite(c)) throw DataError("rtree insert: non-finite coordinate for " + p.id);
  if (points_.count(p.id)) throw DataError("rtree insert: duplicate point id " + p.id);
  if (dims_ == 0) dims_ = static_cast<int>(p.coords.size());
  if (static_cast<int>(p.coords.size()) != dims_)
    throw DataError("rtree insert: dimension mismatch for " + p.id);

  std::set<AggId> influenced;
  insert_entry(Entry{p.id, p.coords}, influenced);
  points_.emplace(p.id, p.coords);
  return influenced;
}

bool RTree::find_path(Node* node, const PointId& id, const std::vector<double>& coords,
                      std::vector<Node*>& path) const {
  path.push_back(node);
  if (node->level == 0) {
    for (auto& e : node->entries)
      if (e.id == id) return true;
    path.pop_back();
    return false;
  }
  for (auto& c : node->children) {
    bool inside = true;
    for (std::size_t d = 0; d < coords.size(); ++d)
      if (coords[d] < c->lo[d] || coords[d] > c->hi[d]) {
        inside = false;
        break;
      }
    if (inside && find_path(c.get(), id, coords, path)) return true;
  }
  path.pop_back();
  return false;
}

void RTree::collect_entries(const Node* node, std::vector<Entry>& out) {
  if (node->level == 0) {
    out.insert(out.end(), node->entries.begin(), node->entries.end());
  } else {
    for (auto& c : node->children) collect_entries(c.get(), out);
  }
}

std::set<AggId> RTree::erase(const PointId& id) {
  auto pit = points_.find(id);
  if (pit == points_.end()) throw DataError("rtree erase: unknown point id " + id);

  std::vector<Node*> path;
  if (!find_path(root_.get(), id, pit->second, path))
    throw InvariantError("rtree erase: point " + id + " not reachable through boxes");

  std::set<AggId> influenced;
  std::set<AggId> dead;
  for (Node* n : path) influenced.insert(n->id);

  Node* leaf = path.back();
  leaf->entries.erase(std::find_if(leaf->entries.begin(), leaf->entries.end(),
                                   [&](const Entry& e) { return e.id == id; }));
  points_.erase(pit);

  // Condense bottom-up: underfull non-root nodes are dissolved and their
  // points reinserted at leaf level, which preserves depth balance.
  std::vector<Entry> orphans;
  for (std::size_t i = path.size(); i-- > 1;) {
    Node* node = path[i];
    Node* parent = path[i - 1];
    if (node->fanout() < static_cast<std::size_t>(min_entries_)) {
      collect_entries(node, orphans);
      auto it = std::find_if(parent->children.begin(), parent->children.end(),
                             [&](const std::unique_ptr<Node>& c) { return c.get() == node; });
      std::vector<Entry> sub;
      collect_entries(it->get(), sub);
      // Record every dissolved node id in the subtree.
      std::vector<const Node*> stack{it->get()};
      while (!stack.empty()) {
        const Node* n = stack.back();
        stack.pop_back();
        dead.insert(n->id);
        for (auto& c : n->children) stack.push_back(c.get());
      }
      parent->children.erase(it);
    } else {
      recompute_box(node);
    }
  }
  if (!root_->entries.empty() || !root_->children.empty()) recompute_box(root_.get());

  while (root_ && root_->level > 0 && root_->children.size() == 1) {
    root_ = std::move(root_->children.front());
  }
  if (root_ && root_->level == 0 && root_->entries.empty()) root_.reset();

  std::sort(orphans.begin(), orphans.end(),
            [](const Entry& a, const Entry& b) { return a.id < b.id; });
  for (auto& e : orphans) insert_entry(std::move(e), influenced);

  for (AggId d : dead) influenced.erase(d);
  return influenced;
}

std::vector<std::size_t> RTree::nodes_per_depth() const {
  if (!root_) return {};
  std::vector<std::size_t> counts(static_cast<std::size_t>(height()), 0);
  std::vector<const Node*> stack{root_.get()};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    ++counts[static_cast<std::size_t>(root_->level - n->level)];
    for (auto& c : n->children) stack.push_back(c.get());
  }
  return counts;
}

int RTree::select_depth(std::size_t subset_size, double compression_ratio) const {
  if (!(compression_ratio > 1.0)) throw UsageError("select_depth: compression_ratio must be > 1");
  if (!root_) throw InvariantError("select_depth: empty tree");
  double bound = static_cast<double>(subset_size) / compression_ratio;
  auto counts = nodes_per_depth();
  int best = 0;
  for (int d = 0; d < static_cast<int>(counts.size()); ++d)
    if (static_cast<double>(counts[static_cast<std::size_t>(d)]) <= bound) best = d;
  return best;
}

IndexFile RTree::index_at_depth(int depth) const {
  if (!root_ || depth < 0 || depth >= height())
    throw DataError("index_at_depth: depth " + std::to_string(depth) + " out of range");
  int target_level = root_->level - depth;
  IndexFile f;
  f.depth = depth;
  std::vector<const Node*> stack{root_.get()};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (n->level == target_level) {
      std::vector<Entry> entries;
      collect_entries(n, entries);
      auto& members = f.groups[n->id];
      members.reserve(entries.size());
      for (auto& e : entries) members.push_back(e.id);
      std::sort(members.begin(), members.end());
    } else {
      for (auto& c : n->children) stack.push_back(c.get());
    }
  }
  return f;
}

void RTree::validate_rec(const Node* node, int expected_level, std::size_t& leaf_entries) const {
  if (node->level != expected_level)
    throw InvariantError("rtree: depth balance violated at node " + std::to_string(node->id));
  bool is_root = node == root_.get();
  std::size_t fan = node->fanout();
  if (!is_root && fan < static_cast<std::size_t>(min_entries_))
    throw InvariantError("rtree: underfull node " + std::to_string(node->id));
  if (fan > static_cast<std::size_t>(max_entries_))
    throw InvariantError("rtree: overfull node " + std::to_string(node->id));
  if (is_root && node->level > 0 && node->children.size() < 2)
    throw InvariantError("rtree: internal root with fewer than 2 children");

  std::vector<double> lo(static_cast<std::size_t>(dims_), std::numeric_limits<double>::infinity());
  std::vector<double> hi(static_cast<std::size_t>(dims_), -std::numeric_limits<double>::infinity());
  if (node->level == 0) {
    for (auto& e : node->entries) {
      cover(lo, hi, e.coords, e.coords);
      auto it = points_.find(e.id);
      if (it == points_.end() || it->second != e.coords)
        throw InvariantError("rtree: membership map out of sync for " + e.id);
      ++leaf_entries;
    }
  } else {
    for (auto& c : node->children) {
      validate_rec(c.get(), expected_level - 1, leaf_entries);
      cover(lo, hi, c->lo, c->hi);
    }
  }
  if (lo != node->lo || hi != node->hi)
    throw InvariantError("rtree: loose bounding box at node " + std::to_string(node->id));
}

void RTree::validate() const {
  if (!root_) {
    if (!points_.empty()) throw InvariantError("rtree: empty tree with tracked points");
    return;
  }
  std::size_t leaf_entries = 0;
  validate_rec(root_.get(), root_->level, leaf_entries);
  if (leaf_entries != points_.size())
    throw InvariantError("rtree: entry count disagrees with membership map");
}

void RTree::save(std::ostream& out) const {
  out << "rtree v1\n";
  out << "params " << min_entries_ << ' ' << max_entries_ << ' ' << dims_ << ' ' << next_node_id_
      << '\n';
  out << "root " << (root_ ? 1 : 0) << '\n';
  if (root_) save_node(out, root_.get());
}

void RTree::save_node(std::ostream& out, const Node* n) const {
  out << "node " << n->id << ' ' << n->level << ' ' << n->fanout() << '\n';
  if (n->level == 0) {
    for (auto& e : n->entries) {
      out << "point " << e.id;
      for (double c : e.coords) out << ' ' << format_double(c);
      out << '\n';
    }
  } else {
    for (auto& c : n->children) save_node(out, c.get());
  }
}

void RTree::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  save(out);
}

std::unique_ptr<RTree::Node> RTree::load_node(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("rtree load: truncated file");
  auto fields = split_ws(line);
  if (fields.size() != 4 || fields[0] != "node")
    throw DataError("rtree load: expected node line, got '" + line + "'");
  auto n = std::make_unique<Node>();
  n->id = parse_i64(fields[1], "rtree node id");
  n->level = static_cast<int>(parse_i64(fields[2], "rtree node level"));
  std::size_t fan = static_cast<std::size_t>(parse_i64(fields[3], "rtree node fanout"));
  if (n->level == 0) {
    for (std::size_t i = 0; i < fan; ++i) {
      if (!std::getline(in, line)) throw DataError("rtree load: truncated leaf");
      auto pf = split_ws(line);
      if (pf.size() < 2 || pf[0] != "point")
        throw DataError("rtree load: expected point line, got '" + line + "'");
      Entry e;
      e.id = pf[1];
      for (std::size_t d = 2; d < pf.size(); ++d)
        e.coords.push_back(parse_double(pf[d], "rtree point coord"));
      if (static_cast<int>(e.coords.size()) != dims_)
        throw DataError("rtree load: coordinate dimension mismatch for " + e.id);
      points_.emplace(e.id, e.coords);
      n->entries.push_back(std::move(e));
    }
  } else {
    for (std::size_t i = 0; i < fan; ++i) n->children.push_back(load_node(in));
  }
  recompute_box(n.get());
  return n;
}

RTree RTree::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "rtree v1") throw DataError("rtree load: bad header");
  if (!std::getline(in, line)) throw DataError("rtree load: missing params");
  auto params = split_ws(line);
  if (params.size() != 5 || params[0] != "params") throw DataError("rtree load: bad params line");
  RTree t(static_cast<int>(parse_i64(params[1], "rtree params")),
          static_cast<int>(parse_i64(params[2], "rtree params")));
  t.dims_ = static_cast<int>(parse_i64(params[3], "rtree params"));
  t.next_node_id_ = parse_i64(params[4], "rtree params");
  if (!std::getline(in, line)) throw DataError("rtree load: missing root line");
  auto root_hdr = split_ws(line);
  if (root_hdr.size() != 2 || root_hdr[0] != "root") throw DataError("rtree load: bad root line");
  if (parse_i64(root_hdr[1], "rtree root") == 1) t.root_ = t.load_node(in);
  t.validate();
  return t;
}

RTree RTree::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return load(in);
}

}  // namespace atr
