#pragma once

#include <map>
#include <string>
#include <vector>

#include "accuracytrader/common.hpp"
#include "accuracytrader/dataset.hpp"
#include "accuracytrader/synopsis.hpp"

namespace atr {

struct SearchRequest {
  PointId qid;
  std::vector<Term> terms;
  int k = 10;

  void validate() const;
};

struct ScoredDoc {
  PointId id;
  double score = 0.0;
  bool aggregated = false;  // placeholder entry standing in for a group

  bool operator==(const ScoredDoc&) const = default;
};

// Ranked hits, scores non-increasing, ties broken by ascending id.
struct SearchResult {
  std::vector<ScoredDoc> hits;

  std::vector<PointId> ids() const;
};

// Document-frequency statistics; per-component by default, optionally shared
// across components.
struct CorpusStats {
  std::int64_t doc_count = 0;
  std::map<Term, std::int64_t> df;

  double idf(const Term& t) const;
};

CorpusStats corpus_stats(const Corpus& c);

// tf-idf cosine: sum over query terms of tf(term,doc) * idf(term), divided
// by the norm of the document's tf-idf vector.
double score_doc(const TermCounts& doc, const SearchRequest& q, const CorpusStats& stats);

// Same scoring function applied to the merged term map of an aggregated
// page, normalized by the merged map's own norm.
double score_aggregated(const AggregatedPage& page, const SearchRequest& q,
                        const CorpusStats& stats);

// Term -> postings (doc id, count), postings sorted by doc id; norms
// precomputed against the supplied stats.
class InvertedIndex {
 public:
  InvertedIndex() = default;
  InvertedIndex(const Corpus& c, const CorpusStats& stats);

  SearchResult search(const SearchRequest& q) const;
  std::int64_t doc_count() const { return doc_count_; }
  const CorpusStats& stats() const { return stats_; }

 private:
  std::map<Term, std::vector<std::pair<PointId, std::int64_t>>> postings_;
  std::map<PointId, double> norms_;
  std::int64_t doc_count_ = 0;
  CorpusStats stats_;
};

SearchResult search_exact(const InvertedIndex& index, const SearchRequest& q);

// Global top-k across per-component results, same ordering rule.
SearchResult merge_topk(const std::vector<SearchResult>& results, int k);

// |retrieved ∩ actual| / |actual|; placeholders never match real ids.
double accuracy_search(const SearchResult& retrieved, const SearchResult& actual);

// Shared ordering rule: descending score, ascending id.
void sort_hits(std::vector<ScoredDoc>& hits);

}  // namespace atr
