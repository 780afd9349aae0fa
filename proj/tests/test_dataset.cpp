#include <filesystem>
#include <fstream>
#include <set>

#include "accuracytrader/dataset.hpp"
#include "doctest.h"

using namespace atr;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  fs::path p = fs::temp_directory_path() / name;
  std::ofstream out(p);
  out << content;
  return p.string();
}

}  // namespace

TEST_CASE("load_ratings ingests triples") {
  auto path = write_temp("atr_ratings_basic.csv", "1,10,4.0\n2,10,3.0\n");
  RatingMatrix m = load_ratings(path);
  CHECK(m.users.size() == 2);
  CHECK(m.items.size() == 1);
  CHECK(m.rating_count() == 2);
  CHECK(m.ratings.at("1").at(10) == 4.0);
}

TEST_CASE("load_ratings: empty file gives empty matrix") {
  auto path = write_temp("atr_ratings_empty.csv", "");
  RatingMatrix m = load_ratings(path);
  CHECK(m.users.empty());
  CHECK(m.items.empty());
}

TEST_CASE("load_ratings rejects duplicates, bad lines and out-of-scale values") {
  auto dup = write_temp("atr_ratings_dup.csv", "1,10,4.0\n1,10,4.0\n");
  CHECK_THROWS_AS(load_ratings(dup), DataError);
  auto bad = write_temp("atr_ratings_bad.csv", "1,10\n");
  CHECK_THROWS_WITH_AS(load_ratings(bad), doctest::Contains(":1"), DataError);
  auto oos = write_temp("atr_ratings_oos.csv", "1,10,9.5\n");
  CHECK_THROWS_AS(load_ratings(oos), DataError);
}

TEST_CASE("load_corpus counts occurrences") {
  auto path = write_temp("atr_corpus_basic.tsv", "d1\ta b a\n");
  Corpus c = load_corpus(path);
  CHECK(c.docs.at("d1").at("a") == 2);
  CHECK(c.docs.at("d1").at("b") == 1);
}

TEST_CASE("load_corpus: vocabulary is the union over docs") {
  auto path = write_temp("atr_corpus_union.tsv", "d1\ta b\nd2\tc d\n");
  Corpus c = load_corpus(path);
  SubsetData s;
  s.kind = DataKind::Text;
  s.corpus = c;
  NumericDataset nd = vectorize(s);
  CHECK(nd.col_names == std::vector<std::string>{"a", "b", "c", "d"});
}

TEST_CASE("load_corpus rejects empty docs and duplicate ids") {
  auto empty = write_temp("atr_corpus_empty.tsv", "d1\t\n");
  CHECK_THROWS_AS(load_corpus(empty), DataError);
  auto dup = write_temp("atr_corpus_dup.tsv", "d1\ta\nd1\tb\n");
  CHECK_THROWS_AS(load_corpus(dup), DataError);
}

TEST_CASE("partition balances round-robin over sorted ids") {
  RatingMatrix m;
  for (int u = 0; u < 6; ++u) m.add_user("u" + std::to_string(u), {{1, 3.0}});
  auto parts = partition(m, 3);
  REQUIRE(parts.size() == 3);
  for (auto& p : parts) CHECK(p.ratings.users.size() == 2);

  Corpus c;
  for (int d = 0; d < 7; ++d) c.add_doc("d" + std::to_string(d), {{"t", 1}});
  auto cparts = partition(c, 3);
  CHECK(cparts[0].corpus.doc_ids.size() == 3);
  CHECK(cparts[1].corpus.doc_ids.size() == 2);
  CHECK(cparts[2].corpus.doc_ids.size() == 2);
}

TEST_CASE("partition with n=1 is the identity; n > points errors") {
  RatingMatrix m;
  m.add_user("a", {{1, 2.0}});
  m.add_user("b", {{2, 3.0}});
  auto parts = partition(m, 1);
  REQUIRE(parts.size() == 1);
  CHECK(parts[0].ratings.users == m.users);
  CHECK_THROWS_AS(partition(m, 3), DataError);
}

TEST_CASE("partition is a bijection on point ids") {
  Corpus c;
  for (int d = 0; d < 53; ++d) c.add_doc("doc" + std::to_string(d), {{"x", 1}});
  auto parts = partition(c, 4);
  std::multiset<PointId> seen;
  for (auto& p : parts)
    for (auto& id : p.corpus.doc_ids) seen.insert(id);
  std::multiset<PointId> want(c.doc_ids.begin(), c.doc_ids.end());
  CHECK(seen == want);
}

TEST_CASE("vectorize: text rows sum to the document token count") {
  SubsetData s;
  s.kind = DataKind::Text;
  s.corpus.add_doc("d1", {{"a", 2}, {"b", 1}});
  s.corpus.add_doc("d2", {{"b", 3}});
  NumericDataset nd = vectorize(s);
  CHECK(nd.dense);
  REQUIRE(nd.row_ids == std::vector<PointId>{"d1", "d2"});
  REQUIRE(nd.col_names == std::vector<std::string>{"a", "b"});
  // d1 -> [2,1], d2 -> [0,3] with the zero implicit
  double sum1 = 0, sum2 = 0;
  for (auto& [c, v] : nd.rows[0]) sum1 += v;
  for (auto& [c, v] : nd.rows[1]) sum2 += v;
  CHECK(sum1 == 3.0);
  CHECK(sum2 == 3.0);
  CHECK(nd.rows[1].size() == 1);
  CHECK(nd.rows[1][0].first == 1);
}

TEST_CASE("vectorize passes numeric subsets through") {
  SubsetData s;
  s.kind = DataKind::Numeric;
  s.ratings.add_user("u1", {{10, 4.0}, {20, 2.0}});
  NumericDataset nd = vectorize(s);
  CHECK_FALSE(nd.dense);
  CHECK(nd.nnz() == 2);
  CHECK(nd.col_names == std::vector<std::string>{"10", "20"});
}

TEST_CASE("vectorize of empty subset is 0x0") {
  SubsetData s;
  s.kind = DataKind::Text;
  NumericDataset nd = vectorize(s);
  CHECK(nd.row_ids.empty());
  CHECK(nd.col_names.empty());
}

TEST_CASE("loaders are deterministic") {
  auto path = write_temp("atr_ratings_det.csv", "7,1,2.5\n3,2,1.0\n7,2,4.5\n");
  RatingMatrix a = load_ratings(path);
  RatingMatrix b = load_ratings(path);
  CHECK(a.users == b.users);
  CHECK(a.items == b.items);
  CHECK(a.ratings == b.ratings);
}
