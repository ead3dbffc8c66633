#pragma once

// Wasserstein-type discrepancy between pooled token distributions: exact 1D
// W1 plus a sliced estimator with shared random projections.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "graphonlab/common.hpp"
#include "graphonlab/spectral.hpp"

namespace graphonlab {

struct TokenCloud {
  Eigen::MatrixXd points;  // rows = tokens, cols = d; uniform weights

  int size() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
};

// Pool all node tokens of a set of token matrices into one cloud
// (node-equal weighting).
inline TokenCloud pool_tokens(const std::vector<TokenMatrix>& mats) {
  if (mats.empty()) throw std::invalid_argument("pool_tokens: empty set");
  int d = mats.front().dim();
  long rows = 0;
  for (const auto& m : mats) {
    if (m.dim() != d) throw std::invalid_argument("pool_tokens: inconsistent token dimension");
    rows += m.rows();
  }
  TokenCloud c;
  c.points.resize(rows, d);
  long at = 0;
  for (const auto& m : mats) {
    c.points.middleRows(at, m.rows()) = m.tokens;
    at += m.rows();
  }
  return c;
}

// Exact 1D W1 between empirical distributions. Equal lengths: mean absolute
// difference of the sorted sequences. Unequal lengths: both quantile
// functions evaluated at the midpoints (i+1/2)/m of the smaller count m --
// a deterministic stand-in for uniform subsampling (the signature carries
// no RNG seed).
inline double exact_w1_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("exact_w1_1d: empty input");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a.size() == b.size()) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
  }
  std::size_t m = std::min(a.size(), b.size());
  auto quantile = [](const std::vector<double>& v, double t) {
    auto i = static_cast<std::size_t>(t * static_cast<double>(v.size()));
    return v[std::min(i, v.size() - 1)];
  };
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double t = (static_cast<double>(i) + 0.5) / static_cast<double>(m);
    s += std::abs(quantile(a, t) - quantile(b, t));
  }
  return s / static_cast<double>(m);
}

// Sliced W1: average over n_proj random unit directions of the exact 1D W1
// of the projected clouds. Directions are shared between the two clouds
// within each draw, which is what makes the slice a valid metric.
inline double sliced_w1(const TokenCloud& a, const TokenCloud& b, int n_proj,
                        std::uint64_t seed) {
  if (a.size() == 0 || b.size() == 0) throw std::invalid_argument("sliced_w1: empty cloud");
  if (a.dim() != b.dim()) throw std::invalid_argument("sliced_w1: dimension mismatch");
  if (n_proj < 1) throw std::invalid_argument("sliced_w1: need n_proj >= 1");
  const int d = a.dim();
  auto g = rng::engine(seed);
  double total = 0.0;
  for (int p = 0; p < n_proj; ++p) {
    Eigen::VectorXd theta(d);
    double nrm = 0.0;
    do {
      for (int i = 0; i < d; ++i) theta(i) = rng::gaussian(g);
      nrm = theta.norm();
    } while (nrm == 0.0);
    theta /= nrm;
    Eigen::VectorXd pa = a.points * theta;
    Eigen::VectorXd pb = b.points * theta;
    total += exact_w1_1d(std::vector<double>(pa.data(), pa.data() + pa.size()),
                         std::vector<double>(pb.data(), pb.data() + pb.size()));
  }
  return total / n_proj;
}

struct DiscrepancyEstimate {
  double mean = 0.0;
  double std = 0.0;
  int subsample_used = 0;  // after clamping to the smaller pool
  bool clamped = false;
};

namespace detail {

inline TokenCloud subsample_cloud(const TokenCloud& c, int m, std::mt19937_64& g) {
  auto idx = rng::sample_without_replacement(static_cast<std::size_t>(c.size()),
                                             static_cast<std::size_t>(m), g);
  TokenCloud out;
  out.points.resize(static_cast<long>(idx.size()), c.dim());
  for (std::size_t i = 0; i < idx.size(); ++i)
    out.points.row(static_cast<long>(i)) = c.points.row(static_cast<long>(idx[i]));
  return out;
}

// Graph-equal weighting: draw a graph uniformly, then one of its nodes
// uniformly, with replacement.
inline TokenCloud resample_graph_equal(const std::vector<TokenMatrix>& mats, int m,
                                       std::mt19937_64& g) {
  TokenCloud out;
  out.points.resize(m, mats.front().dim());
  for (int i = 0; i < m; ++i) {
    const auto& t = mats[g() % mats.size()];
    out.points.row(i) = t.tokens.row(static_cast<long>(g() % t.rows()));
  }
  return out;
}

}  // namespace detail

// Train/test token-distribution discrepancy: pool node tokens per side,
// subsample without replacement, sliced W1; repeated `reps` times with
// derived seeds. Oversized subsample requests clamp to the pool and set
// the flag.
inline DiscrepancyEstimate dataset_token_discrepancy(const std::vector<TokenMatrix>& train,
                                                     const std::vector<TokenMatrix>& test,
                                                     int subsample, int n_proj, int reps,
                                                     std::uint64_t seed,
                                                     bool graph_equal = false) {
  if (train.empty() || test.empty())
    throw std::invalid_argument("dataset_token_discrepancy: empty side");
  if (reps < 1) throw std::invalid_argument("dataset_token_discrepancy: need reps >= 1");
  TokenCloud pa = pool_tokens(train);
  TokenCloud pb = pool_tokens(test);
  if (pa.dim() != pb.dim())
    throw std::invalid_argument("dataset_token_discrepancy: dimension mismatch");

  DiscrepancyEstimate out;
  int m = std::min({subsample, pa.size(), pb.size()});
  out.clamped = (m < subsample);
  out.subsample_used = m;

  std::vector<double> vals(reps);
  for (int r = 0; r < reps; ++r) {
    auto g = rng::engine(rng::derive(seed, static_cast<std::uint64_t>(r)));
    TokenCloud sa = graph_equal ? detail::resample_graph_equal(train, m, g)
                                : detail::subsample_cloud(pa, m, g);
    TokenCloud sb = graph_equal ? detail::resample_graph_equal(test, m, g)
                                : detail::subsample_cloud(pb, m, g);
    vals[r] = sliced_w1(sa, sb, n_proj, rng::derive(seed, static_cast<std::uint64_t>(r), 1));
  }
  out.mean = stats::mean(vals);
  out.std = stats::stddev(vals);
  return out;
}

}  // namespace graphonlab
