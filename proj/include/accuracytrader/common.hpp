#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace atr {

// Identifier of an original data point (a user or a document).
using PointId = std::string;
// Rating-matrix column identifier.
using ItemId = std::int64_t;
// Token of a text corpus.
using Term = std::string;
// Identifier of an aggregated data point (stable R-tree node id).
using AggId = std::int64_t;

// Malformed or inconsistent input data (exit code 3 at the CLI).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Bad command-line / configuration usage (exit code 2 at the CLI).
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// A violated internal invariant (exit code 4 at the CLI).
struct InvariantError : std::logic_error {
  explicit InvariantError(const std::string& what) : std::logic_error(what) {}
};

// ---------------------------------------------------------------------------
// Deterministic random source.
//
// All stochastic pieces (synthetic data, interference processes, request
// sampling) draw from this wrapper instead of std:: distributions, whose
// output is implementation-defined. Everything is pinned to the mt19937_64
// bit stream, so identical seeds give identical artifacts on any platform.
// ---------------------------------------------------------------------------
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed), seed_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw InvariantError("uniform_int: empty range");
    std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(gen_());  // full range
    return lo + static_cast<std::int64_t>(gen_() % span);
  }

  double exponential(double mean) { return -mean * std::log(1.0 - uniform()); }

  double normal() {
    // Box-Muller; one sample per call keeps the stream position obvious.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  // Lognormal parameterized by its median and shape sigma.
  double lognormal_median(double median, double sigma) {
    return median * std::exp(sigma * normal());
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j =
          static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derived, decorrelated stream for a named sub-purpose. Only the seed and
  // the tag enter the derivation, not the parent's stream position.
  Rng derive(std::string_view tag) const {
    std::uint64_t h = 0xcbf29ce484222325ull ^ seed_;
    for (char c : tag) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
    return Rng(h);
  }

 private:
  std::mt19937_64 gen_;
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Locale-independent number formatting / parsing.
//
// format_double produces the shortest string that round-trips the exact
// double, so serialized states reload bit-identically and re-runs are
// byte-identical.
// ---------------------------------------------------------------------------
std::string format_double(double v);
double parse_double(std::string_view s, const std::string& context);
std::int64_t parse_i64(std::string_view s, const std::string& context);

std::vector<std::string> split(std::string_view s, char delim);
std::vector<std::string> split_ws(std::string_view s);
std::string to_lower(std::string_view s);

}  // namespace atr
