#pragma once

#include <map>
#include <string>
#include <vector>

#include "accuracytrader/common.hpp"

namespace atr {

enum class DataKind { Numeric, Text };

DataKind parse_data_kind(const std::string& s);
std::string data_kind_name(DataKind k);

struct RatingScale {
  double lo = 1.0;
  double hi = 5.0;
};

using ItemRatings = std::map<ItemId, double>;

// Sparse user-item rating matrix. Users and items lists are kept sorted; the
// per-user maps are the primary storage.
struct RatingMatrix {
  std::vector<PointId> users;
  std::vector<ItemId> items;
  std::map<PointId, ItemRatings> ratings;
  RatingScale scale;

  std::size_t rating_count() const;
  // Matrix restricted to the given users (items list recomputed).
  RatingMatrix restrict_to(const std::vector<PointId>& user_ids) const;
  void add_user(const PointId& user, const ItemRatings& r);
  void replace_user(const PointId& user, const ItemRatings& r);
};

using TermCounts = std::map<Term, std::int64_t>;

struct Corpus {
  std::vector<PointId> doc_ids;
  std::map<PointId, TermCounts> docs;

  Corpus restrict_to(const std::vector<PointId>& ids) const;
  void add_doc(const PointId& id, const TermCounts& counts);
  void replace_doc(const PointId& id, const TermCounts& counts);
};

// One component's share of the input data. Self-contained so per-component
// states can be persisted and updated independently.
struct SubsetData {
  DataKind kind = DataKind::Numeric;
  int component_id = 0;
  RatingMatrix ratings;  // used when kind == Numeric
  Corpus corpus;         // used when kind == Text

  std::vector<PointId> point_ids() const;
  std::size_t size() const;
  bool contains(const PointId& id) const;
};

// u x v numeric dataset fed to dimensionality reduction. Column names are
// term strings for text data and decimal item ids for numeric data. Rows
// store nonzero cells only; `dense` says whether missing cells are true
// zeros (text occurrence counts) or unobserved (ratings).
struct NumericDataset {
  std::vector<PointId> row_ids;
  std::vector<std::string> col_names;
  // Per row: (column index, value), sorted by column index.
  std::vector<std::vector<std::pair<std::int32_t, double>>> rows;
  bool dense = false;

  std::size_t nnz() const;
};

// Loaders. Formats:
//   ratings: UTF-8 CSV `user_id,item_id,rating`, no header
//   corpus:  UTF-8, one document per line `doc_id<TAB>term term ...`
RatingMatrix load_ratings(const std::string& path, RatingScale scale = {});
Corpus load_corpus(const std::string& path);
void save_ratings(const RatingMatrix& m, const std::string& path);
void save_corpus(const Corpus& c, const std::string& path);

// Round-robin over point ids in sorted order; sizes differ by at most one.
std::vector<std::vector<PointId>> partition_ids(const std::vector<PointId>& ids, int n);
std::vector<SubsetData> partition(const RatingMatrix& m, int n);
std::vector<SubsetData> partition(const Corpus& c, int n);

NumericDataset vectorize(const SubsetData& subset);

}  // namespace atr
