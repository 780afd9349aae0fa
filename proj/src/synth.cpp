#include "accuracytrader/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace atr {

namespace {

std::string padded(const char* prefix, int n, int width) {
  std::string num = std::to_string(n);
  std::string out(prefix);
  out.append(static_cast<std::size_t>(std::max(0, width - static_cast<int>(num.size()))), '0');
  out += num;
  return out;
}

// Cluster rating profiles: integer-ish levels spread over the scale so
// intra-cluster correlation dominates noise.
std::vector<std::vector<double>> make_profiles(const CfSynthParams& p, Rng& rng) {
  std::vector<std::vector<double>> profiles(static_cast<std::size_t>(p.clusters));
  for (auto& prof : profiles) {
    prof.resize(static_cast<std::size_t>(p.items));
    for (auto& v : prof)
      v = static_cast<double>(rng.uniform_int(static_cast<std::int64_t>(p.scale.lo),
                                              static_cast<std::int64_t>(p.scale.hi)));
  }
  return profiles;
}

ItemRatings sample_user_ratings(const CfSynthParams& p,
                                const std::vector<double>& profile, int count, Rng& rng) {
  std::vector<int> idx(static_cast<std::size_t>(p.items));
  for (int i = 0; i < p.items; ++i) idx[static_cast<std::size_t>(i)] = i;
  rng.shuffle(idx);
  ItemRatings out;
  for (int i = 0; i < count && i < p.items; ++i) {
    int item = idx[static_cast<std::size_t>(i)];
    double v = profile[static_cast<std::size_t>(item)] + p.noise_sigma * rng.normal();
    out[item] = std::clamp(v, p.scale.lo, p.scale.hi);
  }
  return out;
}

}  // namespace

RatingMatrix gen_clustered_ratings(const CfSynthParams& p) {
  if (p.users < 1 || p.items < 1 || p.clusters < 1)
    throw UsageError("cf synth: users, items and clusters must be >= 1");
  Rng root(p.seed);
  Rng prof_rng = root.derive("cf/profiles");
  auto profiles = make_profiles(p, prof_rng);
  Rng rng = root.derive("cf/users");

  RatingMatrix m;
  m.scale = p.scale;
  std::set<ItemId> items;
  for (int u = 0; u < p.users; ++u) {
    int cluster = u % p.clusters;
    ItemRatings r =
        sample_user_ratings(p, profiles[static_cast<std::size_t>(cluster)], p.ratings_per_user, rng);
    PointId id = padded("u", u, 6);
    for (auto& [item, v] : r) items.insert(item);
    m.ratings.emplace(std::move(id), std::move(r));
  }
  for (auto& [u, r] : m.ratings) m.users.push_back(u);
  m.items.assign(items.begin(), items.end());
  return m;
}

std::vector<CfRequestRecord> gen_cf_requests(const CfSynthParams& p, int count,
                                             double known_fraction, std::uint64_t seed) {
  if (count < 1) throw UsageError("cf requests: count must be >= 1");
  if (!(known_fraction > 0.0 && known_fraction < 1.0))
    throw UsageError("cf requests: known_fraction must be in (0,1)");
  Rng root(p.seed);
  Rng prof_rng = root.derive("cf/profiles");
  auto profiles = make_profiles(p, prof_rng);
  Rng rng = Rng(seed).derive("cf/actives");

  std::vector<CfRequestRecord> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    int cluster = static_cast<int>(rng.uniform_int(0, p.clusters - 1));
    ItemRatings all =
        sample_user_ratings(p, profiles[static_cast<std::size_t>(cluster)], p.ratings_per_user, rng);
    std::vector<ItemId> items;
    items.reserve(all.size());
    for (auto& [item, v] : all) items.push_back(item);
    rng.shuffle(items);
    std::size_t known_count = static_cast<std::size_t>(
        std::max<std::int64_t>(1, std::llround(known_fraction * static_cast<double>(items.size()))));
    if (known_count >= items.size()) known_count = items.size() - 1;

    CfRequestRecord rec;
    rec.request.user = padded("a", i, 6);
    for (std::size_t j = 0; j < items.size(); ++j) {
      if (j < known_count)
        rec.request.known.emplace(items[j], all.at(items[j]));
      else {
        rec.request.targets.push_back(items[j]);
        rec.actuals.emplace(items[j], all.at(items[j]));
      }
    }
    std::sort(rec.request.targets.begin(), rec.request.targets.end());
    rec.request.validate();
    out.push_back(std::move(rec));
  }
  return out;
}

Corpus gen_clustered_corpus(const CorpusSynthParams& p) {
  if (p.docs < 1 || p.topics < 1 || p.vocab_per_topic < 1)
    throw UsageError("corpus synth: docs, topics and vocab must be >= 1");
  Rng rng = Rng(p.seed).derive("corpus/docs");

  auto topic_term = [&](int topic, int j) { return "t" + std::to_string(topic) + "w" + std::to_string(j); };
  auto shared_term = [&](int j) { return "cw" + std::to_string(j); };
  // Quadratic skew keeps a few head terms frequent, like real vocabularies.
  auto skewed = [&](int n) {
    double u = rng.uniform();
    return static_cast<int>(u * u * static_cast<double>(n));
  };

  Corpus c;
  for (int d = 0; d < p.docs; ++d) {
    int topic = d % p.topics;
    TermCounts counts;
    for (int t = 0; t < p.terms_per_doc; ++t) {
      double u = rng.uniform();
      Term term;
      if (u < p.topic_share) {
        // Uniform within the topic vocabulary keeps same-topic documents
        // nearly parallel, which is what the reduction step must recover.
        term = topic_term(topic, static_cast<int>(rng.uniform_int(0, p.vocab_per_topic - 1)));
      } else if (u < p.topic_share + p.shared_share && p.shared_vocab > 0) {
        term = shared_term(skewed(p.shared_vocab));
      } else {
        int other = static_cast<int>(rng.uniform_int(0, p.topics - 1));
        term = topic_term(other, skewed(p.vocab_per_topic));
      }
      ++counts[term];
    }
    c.docs.emplace(padded("d", d, 6), std::move(counts));
  }
  for (auto& [d, counts] : c.docs) c.doc_ids.push_back(d);
  return c;
}

std::vector<SearchRequest> gen_queries(const CorpusSynthParams& p, int count, int min_terms,
                                       int max_terms, int k, std::uint64_t seed) {
  if (count < 1 || min_terms < 1 || max_terms < min_terms)
    throw UsageError("queries: bad count or term bounds");
  Rng rng = Rng(seed).derive("corpus/queries");
  auto skewed = [&](int n) {
    double u = rng.uniform();
    return static_cast<int>(u * u * static_cast<double>(n));
  };
  std::vector<SearchRequest> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    int topic = static_cast<int>(rng.uniform_int(0, p.topics - 1));
    int nterms = static_cast<int>(rng.uniform_int(min_terms, max_terms));
    SearchRequest q;
    q.qid = padded("q", i, 5);
    q.k = k;
    std::set<Term> seen;
    bool with_shared = p.shared_vocab > 0 && rng.uniform() < p.query_shared_prob;
    for (int t = 0; t < nterms; ++t) {
      Term term;
      if (with_shared && t == nterms - 1)
        term = "cw" + std::to_string(skewed(p.shared_vocab));
      else
        term = "t" + std::to_string(topic) + "w" + std::to_string(skewed(p.vocab_per_topic));
      if (seen.insert(term).second) q.terms.push_back(term);
    }
    q.validate();
    out.push_back(std::move(q));
  }
  return out;
}

void save_cf_requests(const std::vector<CfRequestRecord>& requests,
                      const std::string& active_path, const std::string& testset_path) {
  std::ofstream test(testset_path);
  if (!test) throw DataError("cannot write " + testset_path);
  std::ofstream active(active_path);
  if (!active) throw DataError("cannot write " + active_path);
  for (auto& rec : requests) {
    for (auto& [item, v] : rec.request.known)
      active << rec.request.user << ',' << item << ',' << format_double(v) << '\n';
    for (auto& [item, v] : rec.actuals)
      test << rec.request.user << ',' << item << ',' << format_double(v) << '\n';
  }
}

std::vector<CfRequestRecord> load_cf_requests(const std::string& active_path,
                                              const std::string& testset_path) {
  RatingMatrix actives = load_ratings(active_path, RatingScale{-1e18, 1e18});
  RatingMatrix tests = load_ratings(testset_path, RatingScale{-1e18, 1e18});
  std::vector<CfRequestRecord> out;
  for (const auto& user : actives.users) {
    auto tit = tests.ratings.find(user);
    if (tit == tests.ratings.end())
      throw DataError("cf requests: no test-set rows for active user " + user);
    CfRequestRecord rec;
    rec.request.user = user;
    rec.request.known = actives.ratings.at(user);
    for (auto& [item, v] : tit->second) {
      rec.request.targets.push_back(item);
      rec.actuals.emplace(item, v);
    }
    rec.request.validate();
    out.push_back(std::move(rec));
  }
  return out;
}

void save_queries(const std::vector<SearchRequest>& queries, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (auto& q : queries) {
    out << q.qid << '\t';
    for (std::size_t i = 0; i < q.terms.size(); ++i) out << (i ? " " : "") << q.terms[i];
    out << '\n';
  }
}

std::vector<SearchRequest> load_queries(const std::string& path, int k) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open queries file: " + path);
  std::vector<SearchRequest> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected qid<TAB>terms");
    SearchRequest q;
    q.qid = line.substr(0, tab);
    q.k = k;
    for (auto& t : split_ws(std::string_view(line).substr(tab + 1))) q.terms.push_back(to_lower(t));
    q.validate();
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<Arrival> gen_diurnal_trace(double base_rate_rps, int buckets, double bucket_seconds,
                                       const std::vector<PointId>& payload_cycle) {
  if (buckets < 1 || !(base_rate_rps > 0) || !(bucket_seconds > 0))
    throw UsageError("diurnal trace: bad parameters");
  if (payload_cycle.empty()) throw UsageError("diurnal trace: no payloads");
  static const double kShape[24] = {0.35, 0.30, 0.25, 0.22, 0.20, 0.25, 0.35, 0.50,
                                    0.70, 0.85, 0.95, 1.00, 0.98, 0.95, 0.90, 0.88,
                                    0.90, 0.95, 1.00, 0.95, 0.85, 0.70, 0.55, 0.45};
  std::vector<Arrival> out;
  std::size_t next_payload = 0;
  for (int b = 0; b < buckets; ++b) {
    double shape = kShape[(static_cast<std::size_t>(b) * 24 / static_cast<std::size_t>(buckets)) % 24];
    double rate = base_rate_rps * shape;
    auto count = static_cast<std::size_t>(std::llround(rate * bucket_seconds));
    if (count == 0) continue;
    double start = static_cast<double>(b) * bucket_seconds * 1000.0;
    double spacing = bucket_seconds * 1000.0 / static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) {
      out.push_back({start + spacing * static_cast<double>(i),
                     payload_cycle[next_payload % payload_cycle.size()]});
      ++next_payload;
    }
  }
  return out;
}

}  // namespace atr
