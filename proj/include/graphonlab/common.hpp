#pragma once

// Shared plumbing: deterministic RNG streams, numeric error type, small
// statistics helpers. Everything downstream assumes the variate mappings
// here are byte-stable across runs of the same binary, so the std
// distributions (implementation-defined sequences) are not used.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace graphonlab {

// Raised when an iterative numeric routine fails to converge.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

namespace rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derived seed for an independent stream. Streams are identified by up to
// three indices (e.g. (base, class, trial)); identical tuples give identical
// streams regardless of scheduling.
inline std::uint64_t derive(std::uint64_t base, std::uint64_t a,
                            std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t h = splitmix64(base ^ 0x6a09e667f3bcc908ULL);
  h = splitmix64(h ^ splitmix64(a));
  h = splitmix64(h ^ splitmix64(b + 0x3c6ef372fe94f82bULL));
  h = splitmix64(h ^ splitmix64(c + 0xa54ff53a5f1d36f1ULL));
  return h;
}

inline std::mt19937_64 engine(std::uint64_t seed) { return std::mt19937_64(seed); }

// Uniform double in [0,1) with 53 random bits.
inline double uniform01(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Uniform in (0,1): relevant for latent coordinates, which the sampling
// model draws from the open interval.
inline double uniform_open01(std::mt19937_64& g) {
  double u;
  do {
    u = uniform01(g);
  } while (u == 0.0);
  return u;
}

inline double uniform(std::mt19937_64& g, double lo, double hi) {
  return lo + (hi - lo) * uniform01(g);
}

// Box-Muller; one value per call, no state carried.
inline double gaussian(std::mt19937_64& g) {
  double u1 = uniform_open01(g);
  double u2 = uniform01(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

// Fisher-Yates using uniform index draws.
template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& g) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(g() % i);
    std::swap(v[i - 1], v[j]);
  }
}

// k distinct indices out of n, order not meaningful.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                           std::mt19937_64& g) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k && i < n; ++i) {
    std::size_t j = i + static_cast<std::size_t>(g() % (n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k < n ? k : n);
  return idx;
}

}  // namespace rng

namespace stats {

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Population standard deviation; reps in the estimators are the whole
// population of repetitions, not a sample from one.
inline double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace stats

}  // namespace graphonlab
