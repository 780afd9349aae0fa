#pragma once

#include <string>
#include <vector>

#include "accuracytrader/common.hpp"
#include "accuracytrader/dataset.hpp"
#include "accuracytrader/simulator.hpp"
#include "accuracytrader/workload_cf.hpp"
#include "accuracytrader/workload_search.hpp"

namespace atr {

// Clustered rating matrix: k user clusters, each with a per-item rating
// profile; user ratings are the profile plus Gaussian noise, clamped to the
// scale. Active users for requests are drawn from the same model but held
// out of the matrix.
struct CfSynthParams {
  int users = 2000;
  int items = 200;
  int clusters = 10;
  int ratings_per_user = 40;
  double noise_sigma = 0.3;
  RatingScale scale;
  std::uint64_t seed = 1;
};

RatingMatrix gen_clustered_ratings(const CfSynthParams& p);

struct CfRequestRecord {
  CfRequest request;
  ItemRatings actuals;  // held-out ratings for the target items
};

std::vector<CfRequestRecord> gen_cf_requests(const CfSynthParams& p, int count,
                                             double known_fraction, std::uint64_t seed);

// Clustered corpus: k topic vocabularies plus a shared vocabulary; documents
// draw most tokens from their own topic, some from the shared pool, and a
// small leak from other topics.
struct CorpusSynthParams {
  int docs = 2000;
  int topics = 10;
  int vocab_per_topic = 120;
  int shared_vocab = 60;
  int terms_per_doc = 60;
  double topic_share = 0.8;
  double shared_share = 0.15;
  // Probability that a generated query carries one shared-vocabulary term,
  // which lets documents of foreign topics reach the exact top-k now and
  // then.
  double query_shared_prob = 0.35;
  std::uint64_t seed = 1;
};

Corpus gen_clustered_corpus(const CorpusSynthParams& p);

std::vector<SearchRequest> gen_queries(const CorpusSynthParams& p, int count, int min_terms,
                                       int max_terms, int k, std::uint64_t seed);

// Request files.
void save_cf_requests(const std::vector<CfRequestRecord>& requests,
                      const std::string& active_path, const std::string& testset_path);
std::vector<CfRequestRecord> load_cf_requests(const std::string& active_path,
                                              const std::string& testset_path);
void save_queries(const std::vector<SearchRequest>& queries, const std::string& path);
std::vector<SearchRequest> load_queries(const std::string& path, int k);

// 24-bucket diurnal arrival trace; arrivals are evenly spaced within each
// bucket, so per-bucket counts match the shaped rate up to rounding.
std::vector<Arrival> gen_diurnal_trace(double base_rate_rps, int buckets, double bucket_seconds,
                                       const std::vector<PointId>& payload_cycle);

}  // namespace atr
