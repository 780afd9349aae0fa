#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "accuracytrader/common.hpp"

namespace atr {

struct ReducedPoint {
  PointId id;
  std::vector<double> coords;
};

// Mapping from each aggregated data point (an R-tree node at the selected
// depth) to the original points it covers. Entries are nonempty, pairwise
// disjoint, and partition the indexed id universe.
struct IndexFile {
  int depth = 0;
  std::map<AggId, std::vector<PointId>> groups;  // member lists kept sorted

  void save_csv(const std::string& path) const;
  static IndexFile load_csv(const std::string& path, int depth);
  // Throws InvariantError unless groups exactly partition `universe`.
  void validate_partition(std::vector<PointId> universe) const;
};

// Depth-balanced R-tree over low-dimensional points (Guttman, quadratic
// split). Construction, insertion and deletion are deterministic: ties in
// seed picking, subtree choice and group assignment all break on stored
// order, and orphaned points are reinserted in sorted-id order.
//
// Node ids are stable for the node's lifetime and never reused, so synopsis
// updates can detect which aggregated points survived a change.
class RTree {
 public:
  RTree() = default;
  RTree(int min_entries, int max_entries);

  RTree(RTree&&) noexcept = default;
  RTree& operator=(RTree&&) noexcept = default;
  RTree(const RTree&) = delete;
  RTree& operator=(const RTree&) = delete;

  // Sequential insertion in sorted-id order.
  static RTree build(std::vector<ReducedPoint> points, int min_entries, int max_entries);

  // Both return the ids of nodes whose member set or bounding box changed.
  std::set<AggId> insert(const ReducedPoint& p);
  std::set<AggId> erase(const PointId& id);

  bool contains(const PointId& id) const { return points_.count(id) != 0; }
  const std::vector<double>& coords_of(const PointId& id) const;
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  int height() const;
  int min_entries() const { return min_entries_; }
  int max_entries() const { return max_entries_; }
  std::vector<PointId> point_ids() const;

  // Node count per depth, 0 = root.
  std::vector<std::size_t> nodes_per_depth() const;

  // Deepest depth whose node count does not exceed subset_size /
  // compression_ratio; 0 if even the root violates the bound.
  int select_depth(std::size_t subset_size, double compression_ratio) const;

  IndexFile index_at_depth(int depth) const;

  // Full invariant suite: balance, fanout, tight bounding boxes, membership
  // bookkeeping. Throws InvariantError on the first violation.
  void validate() const;

  void save(std::ostream& out) const;
  void save(const std::string& path) const;
  static RTree load(std::istream& in);
  static RTree load_file(const std::string& path);

 private:
  struct Entry {
    PointId id;
    std::vector<double> coords;
  };
  struct Node {
    AggId id = 0;
    int level = 0;  // 0 = leaf
    std::vector<double> lo, hi;
    std::vector<std::unique_ptr<Node>> children;  // level > 0
    std::vector<Entry> entries;                   // level == 0
    std::size_t fanout() const { return level == 0 ? entries.size() : children.size(); }
  };

  std::unique_ptr<Node> make_node(int level);
  void recompute_box(Node* n) const;
  static double area(const std::vector<double>& lo, const std::vector<double>& hi);
  static void cover(std::vector<double>& lo, std::vector<double>& hi,
                    const std::vector<double>& plo, const std::vector<double>& phi);
  static double enlargement(const Node& n, const std::vector<double>& plo,
                            const std::vector<double>& phi);

  std::unique_ptr<Node> insert_entry(Entry e, std::set<AggId>& influenced);
  std::unique_ptr<Node> insert_rec(Node* node, Entry& e, std::set<AggId>& influenced);
  std::unique_ptr<Node> split_leaf(Node* node, std::set<AggId>& influenced);
  std::unique_ptr<Node> split_internal(Node* node, std::set<AggId>& influenced);
  Node* choose_child(Node* node, const std::vector<double>& coords) const;
  bool find_path(Node* node, const PointId& id, const std::vector<double>& coords,
                 std::vector<Node*>& path) const;
  static void collect_entries(const Node* node, std::vector<Entry>& out);
  void validate_rec(const Node* node, int expected_level, std::size_t& leaf_entries) const;
  void save_node(std::ostream& out, const Node* n) const;
  std::unique_ptr<Node> load_node(std::istream& in);

  std::unique_ptr<Node> root_;
  std::map<PointId, std::vector<double>> points_;
  int min_entries_ = 2;
  int max_entries_ = 8;
  int dims_ = 0;
  AggId next_node_id_ = 1;
};

}  // namespace atr
