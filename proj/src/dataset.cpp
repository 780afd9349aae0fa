#include "accuracytrader/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace atr {

DataKind parse_data_kind(const std::string& s) {
  std::string v = to_lower(s);
  if (v == "cf" || v == "numeric") return DataKind::Numeric;
  if (v == "search" || v == "text") return DataKind::Text;
  throw UsageError("unknown workload kind '" + s + "' (expected cf or search)");
}

std::string data_kind_name(DataKind k) {
  return k == DataKind::Numeric ? "cf" : "search";
}

std::size_t RatingMatrix::rating_count() const {
  std::size_t n = 0;
  for (auto& [u, r] : ratings) n += r.size();
  return n;
}

RatingMatrix RatingMatrix::restrict_to(const std::vector<PointId>& user_ids) const {
  RatingMatrix out;
  out.scale = scale;
  std::set<ItemId> items;
  for (const auto& u : user_ids) {
    auto it = ratings.find(u);
    if (it == ratings.end()) throw InvariantError("restrict_to: unknown user " + u);
    out.ratings.emplace(u, it->second);
    out.users.push_back(u);
    for (auto& [item, v] : it->second) items.insert(item);
  }
  std::sort(out.users.begin(), out.users.end());
  out.items.assign(items.begin(), items.end());
  return out;
}

void RatingMatrix::add_user(const PointId& user, const ItemRatings& r) {
  if (!ratings.emplace(user, r).second)
    throw DataError("add_user: user already present: " + user);
  users.insert(std::lower_bound(users.begin(), users.end(), user), user);
  for (auto& [item, v] : r) {
    auto it = std::lower_bound(items.begin(), items.end(), item);
    if (it == items.end() || *it != item) items.insert(it, item);
  }
}

void RatingMatrix::replace_user(const PointId& user, const ItemRatings& r) {
  auto it = ratings.find(user);
  if (it == ratings.end()) throw DataError("replace_user: unknown user " + user);
  it->second = r;
  for (auto& [item, v] : r) {
    auto pos = std::lower_bound(items.begin(), items.end(), item);
    if (pos == items.end() || *pos != item) items.insert(pos, item);
  }
}

Corpus Corpus::restrict_to(const std::vector<PointId>& ids) const {
  Corpus out;
  for (const auto& d : ids) {
    auto it = docs.find(d);
    if (it == docs.end()) throw InvariantError("restrict_to: unknown doc " + d);
    out.docs.emplace(d, it->second);
    out.doc_ids.push_back(d);
  }
  std::sort(out.doc_ids.begin(), out.doc_ids.end());
  return out;
}

void Corpus::add_doc(const PointId& id, const TermCounts& counts) {
  if (counts.empty()) throw DataError("add_doc: empty document " + id);
  if (!docs.emplace(id, counts).second) throw DataError("add_doc: duplicate doc id " + id);
  doc_ids.insert(std::lower_bound(doc_ids.begin(), doc_ids.end(), id), id);
}

void Corpus::replace_doc(const PointId& id, const TermCounts& counts) {
  auto it = docs.find(id);
  if (it == docs.end()) throw DataError("replace_doc: unknown doc " + id);
  if (counts.empty()) throw DataError("replace_doc: empty document " + id);
  it->second = counts;
}

std::vector<PointId> SubsetData::point_ids() const {
  return kind == DataKind::Numeric ? ratings.users : corpus.doc_ids;
}

std::size_t SubsetData::size() const {
  return kind == DataKind::Numeric ? ratings.users.size() : corpus.doc_ids.size();
}

bool SubsetData::contains(const PointId& id) const {
  if (kind == DataKind::Numeric) return ratings.ratings.count(id) != 0;
  return corpus.docs.count(id) != 0;
}

std::size_t NumericDataset::nnz() const {
  std::size_t n = 0;
  for (auto& r : rows) n += r.size();
  return n;
}

RatingMatrix load_ratings(const std::string& path, RatingScale scale) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ratings file: " + path);
  RatingMatrix m;
  m.scale = scale;
  std::set<ItemId> items;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string ctx = path + ":" + std::to_string(lineno);
    auto fields = split(line, ',');
    if (fields.size() != 3) throw DataError(ctx + ": expected user_id,item_id,rating");
    PointId user = fields[0];
    if (user.empty() || user.find_first_of(" \t") != std::string::npos)
      throw DataError(ctx + ": bad user id '" + user + "'");
    ItemId item = parse_i64(fields[1], ctx + " item_id");
    double rating = parse_double(fields[2], ctx + " rating");
    if (rating < scale.lo || rating > scale.hi)
      throw DataError(ctx + ": rating " + fields[2] + " outside scale [" +
                      format_double(scale.lo) + "," + format_double(scale.hi) + "]");
    auto& per_user = m.ratings[user];
    if (!per_user.emplace(item, rating).second)
      throw DataError(ctx + ": duplicate rating for (user " + user + ", item " +
                      std::to_string(item) + ")");
    items.insert(item);
  }
  for (auto& [u, r] : m.ratings) m.users.push_back(u);
  m.items.assign(items.begin(), items.end());
  return m;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path);
  Corpus c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string ctx = path + ":" + std::to_string(lineno);
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(ctx + ": expected doc_id<TAB>terms");
    PointId doc = line.substr(0, tab);
    if (doc.empty()) throw DataError(ctx + ": empty doc id");
    if (doc.find(',') != std::string::npos || doc.find_first_of(" \t") != std::string::npos)
      throw DataError(ctx + ": doc id must not contain commas or whitespace");
    auto terms = split_ws(std::string_view(line).substr(tab + 1));
    if (terms.empty()) throw DataError(ctx + ": empty document " + doc);
    TermCounts counts;
    for (auto& t : terms) ++counts[to_lower(t)];
    if (c.docs.count(doc)) throw DataError(ctx + ": duplicate doc id " + doc);
    c.docs.emplace(doc, std::move(counts));
    c.doc_ids.push_back(doc);
  }
  std::sort(c.doc_ids.begin(), c.doc_ids.end());
  return c;
}

void save_ratings(const RatingMatrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (auto& [user, per_user] : m.ratings)
    for (auto& [item, rating] : per_user)
      out << user << ',' << item << ',' << format_double(rating) << '\n';
}

void save_corpus(const Corpus& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (auto& [doc, counts] : c.docs) {
    out << doc << '\t';
    bool first = true;
    for (auto& [term, count] : counts) {
      for (std::int64_t i = 0; i < count; ++i) {
        if (!first) out << ' ';
        out << term;
        first = false;
      }
    }
    out << '\n';
  }
}

std::vector<std::vector<PointId>> partition_ids(const std::vector<PointId>& ids, int n) {
  if (n < 1) throw UsageError("partition: n must be >= 1");
  if (ids.empty()) throw DataError("partition: empty dataset");
  if (static_cast<std::size_t>(n) > ids.size())
    throw DataError("partition: n=" + std::to_string(n) + " exceeds point count " +
                    std::to_string(ids.size()));
  std::vector<PointId> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::vector<PointId>> out(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < sorted.size(); ++i)
    out[i % static_cast<std::size_t>(n)].push_back(std::move(sorted[i]));
  return out;
}

std::vector<SubsetData> partition(const RatingMatrix& m, int n) {
  auto parts = partition_ids(m.users, n);
  std::vector<SubsetData> out;
  out.reserve(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    SubsetData s;
    s.kind = DataKind::Numeric;
    s.component_id = static_cast<int>(i);
    s.ratings = m.restrict_to(parts[i]);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<SubsetData> partition(const Corpus& c, int n) {
  auto parts = partition_ids(c.doc_ids, n);
  std::vector<SubsetData> out;
  out.reserve(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    SubsetData s;
    s.kind = DataKind::Text;
    s.component_id = static_cast<int>(i);
    s.corpus = c.restrict_to(parts[i]);
    out.push_back(std::move(s));
  }
  return out;
}

NumericDataset vectorize(const SubsetData& subset) {
  NumericDataset d;
  if (subset.kind == DataKind::Numeric) {
    const auto& m = subset.ratings;
    d.row_ids = m.users;
    d.col_names.reserve(m.items.size());
    std::map<ItemId, std::int32_t> col_of;
    for (auto item : m.items) {
      col_of.emplace(item, static_cast<std::int32_t>(d.col_names.size()));
      d.col_names.push_back(std::to_string(item));
    }
    d.rows.reserve(d.row_ids.size());
    for (const auto& u : d.row_ids) {
      std::vector<std::pair<std::int32_t, double>> row;
      for (auto& [item, rating] : m.ratings.at(u))
        row.emplace_back(col_of.at(item), rating);
      d.rows.push_back(std::move(row));
    }
  } else {
    const auto& c = subset.corpus;
    d.dense = true;  // a missing term means occurrence count zero
    d.row_ids = c.doc_ids;
    std::map<Term, std::int32_t> col_of;
    for (auto& [doc, counts] : c.docs)
      for (auto& [term, count] : counts)
        col_of.emplace(term, 0);
    for (auto& [term, idx] : col_of) {
      idx = static_cast<std::int32_t>(d.col_names.size());
      d.col_names.push_back(term);
    }
    d.rows.reserve(d.row_ids.size());
    for (const auto& doc : d.row_ids) {
      std::vector<std::pair<std::int32_t, double>> row;
      for (auto& [term, count] : c.docs.at(doc))
        row.emplace_back(col_of.at(term), static_cast<double>(count));
      d.rows.push_back(std::move(row));
    }
  }
  return d;
}

}  // namespace atr
