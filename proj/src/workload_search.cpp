#include "accuracytrader/workload_search.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace atr {

void SearchRequest::validate() const {
  if (terms.empty()) throw DataError("search request " + qid + ": no query terms");
  if (k < 1) throw DataError("search request " + qid + ": k must be >= 1");
}

std::vector<PointId> SearchResult::ids() const {
  std::vector<PointId> out;
  out.reserve(hits.size());
  for (auto& h : hits) out.push_back(h.id);
  return out;
}

double CorpusStats::idf(const Term& t) const {
  auto it = df.find(t);
  if (it == df.end() || it->second == 0) return 0.0;
  return std::log(1.0 + static_cast<double>(doc_count) / static_cast<double>(it->second));
}

CorpusStats corpus_stats(const Corpus& c) {
  CorpusStats s;
  s.doc_count = static_cast<std::int64_t>(c.doc_ids.size());
  for (auto& [doc, counts] : c.docs)
    for (auto& [term, count] : counts) ++s.df[term];
  return s;
}

namespace {

double tfidf_norm(const TermCounts& counts, const CorpusStats& stats) {
  double s = 0.0;
  for (auto& [term, count] : counts) {
    double w = static_cast<double>(count) * stats.idf(term);
    s += w * w;
  }
  return std::sqrt(s);
}

double tfidf_dot(const TermCounts& counts, const SearchRequest& q, const CorpusStats& stats) {
  double dot = 0.0;
  for (auto& term : q.terms) {
    auto it = counts.find(term);
    if (it == counts.end()) continue;
    dot += static_cast<double>(it->second) * stats.idf(term);
  }
  return dot;
}

}  // namespace

double score_doc(const TermCounts& doc, const SearchRequest& q, const CorpusStats& stats) {
  double dot = tfidf_dot(doc, q, stats);
  if (dot == 0.0) return 0.0;
  double norm = tfidf_norm(doc, stats);
  return norm > 0.0 ? dot / norm : 0.0;
}

double score_aggregated(const AggregatedPage& page, const SearchRequest& q,
                        const CorpusStats& stats) {
  return score_doc(page.counts, q, stats);
}

void sort_hits(std::vector<ScoredDoc>& hits) {
  std::sort(hits.begin(), hits.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
}

InvertedIndex::InvertedIndex(const Corpus& c, const CorpusStats& stats) : stats_(stats) {
  doc_count_ = static_cast<std::int64_t>(c.doc_ids.size());
  for (auto& [doc, counts] : c.docs) {
    for (auto& [term, count] : counts) postings_[term].emplace_back(doc, count);
    norms_[doc] = tfidf_norm(counts, stats_);
  }
  for (auto& [term, plist] : postings_)
    std::sort(plist.begin(), plist.end());
}

SearchResult InvertedIndex::search(const SearchRequest& q) const {
  q.validate();
  std::map<PointId, double> dot;
  for (auto& term : q.terms) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    double idf = stats_.idf(term);
    if (idf == 0.0) continue;
    for (auto& [doc, count] : it->second) dot[doc] += static_cast<double>(count) * idf;
  }
  std::vector<ScoredDoc> hits;
  hits.reserve(dot.size());
  for (auto& [doc, d] : dot) {
    if (d == 0.0) continue;
    double norm = norms_.at(doc);
    hits.push_back({doc, norm > 0.0 ? d / norm : 0.0, false});
  }
  sort_hits(hits);
  if (static_cast<int>(hits.size()) > q.k) hits.resize(static_cast<std::size_t>(q.k));
  return {std::move(hits)};
}

SearchResult search_exact(const InvertedIndex& index, const SearchRequest& q) {
  return index.search(q);
}

SearchResult merge_topk(const std::vector<SearchResult>& results, int k) {
  if (k < 1) throw UsageError("merge_topk: k must be >= 1");
  std::vector<ScoredDoc> all;
  for (auto& r : results) all.insert(all.end(), r.hits.begin(), r.hits.end());
  sort_hits(all);
  if (static_cast<int>(all.size()) > k) all.resize(static_cast<std::size_t>(k));
  return {std::move(all)};
}

double accuracy_search(const SearchResult& retrieved, const SearchResult& actual) {
  if (actual.hits.empty()) return retrieved.hits.empty() ? 1.0 : 0.0;
  std::set<PointId> actual_ids;
  for (auto& h : actual.hits) actual_ids.insert(h.id);
  std::size_t overlap = 0;
  for (auto& h : retrieved.hits)
    if (!h.aggregated && actual_ids.count(h.id)) ++overlap;
  return static_cast<double>(overlap) / static_cast<double>(actual_ids.size());
}

}  // namespace atr
