#pragma once

// Graphon kernels and evaluation sampling.
//
// A graphon is a symmetric kernel W:[0,1]^2 -> [0,1]. Three variants:
//   Fourier : W(x,y) = rho + sum_r lambda_r phi_r(x) phi_r(y) with
//             phi = sqrt(2) cos(2 pi m x) or sqrt(2) sin(2 pi m x).
//   Step    : piecewise constant on a uniform b x b partition, cells
//             right-open [(i-1)/b, i/b) with the last cell closed at 1.
//   Grid    : same representation as Step; tags a grid discretization of
//             some other kernel rather than an induced/estimated one.
//
// Graphs are sampled by evaluation: latents u_i ~ Unif(0,1) i.i.d. and
// A_ij = W(u_i,u_j) for i != j, A_ii = 0. No Bernoulli realization.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "graphonlab/common.hpp"

namespace graphonlab {

enum class GraphonKind { fourier, step, grid };

struct FourierTerm {
  int basis_index = 1;  // m >= 1
  bool is_sin = false;  // false: sqrt2*cos(2 pi m x), true: sqrt2*sin(2 pi m x)
  double coeff = 0.0;
};

inline double fourier_basis(int basis_index, bool is_sin, double x) {
  constexpr double two_pi = 6.283185307179586476925287;
  double a = two_pi * basis_index * x;
  return is_sin ? std::sqrt(2.0) * std::sin(a) : std::sqrt(2.0) * std::cos(a);
}

class Graphon {
 public:
  static Graphon fourier(double rho, std::vector<FourierTerm> terms) {
    if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("graphon: rho must lie in (0,1)");
    Graphon w;
    w.kind_ = GraphonKind::fourier;
    w.rho_ = rho;
    w.terms_ = std::move(terms);
    return w;
  }

  static Graphon step(Eigen::MatrixXd values) { return piecewise(std::move(values), GraphonKind::step); }
  static Graphon grid(Eigen::MatrixXd values) { return piecewise(std::move(values), GraphonKind::grid); }

  GraphonKind kind() const { return kind_; }
  double rho() const { return rho_; }
  const std::vector<FourierTerm>& terms() const { return terms_; }
  const Eigen::MatrixXd& values() const { return values_; }

  // Native partition resolution; 0 for Fourier (no intrinsic grid).
  int resolution() const {
    return kind_ == GraphonKind::fourier ? 0 : static_cast<int>(values_.rows());
  }

  double operator()(double x, double y) const {
    if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0))
      throw std::invalid_argument("graphon: coordinate outside [0,1]");
    double v;
    if (kind_ == GraphonKind::fourier) {
      v = rho_;
      for (const auto& t : terms_)
        v += t.coeff * fourier_basis(t.basis_index, t.is_sin, x) *
             fourier_basis(t.basis_index, t.is_sin, y);
    } else {
      v = values_(cell_index(x), cell_index(y));
    }
    // Construction keeps the kernel in [0,1] analytically; rounding may
    // poke a few ulp outside.
    return std::clamp(v, 0.0, 1.0);
  }

  int cell_index(double x) const {
    int b = static_cast<int>(values_.rows());
    int i = static_cast<int>(std::floor(x * b));
    return std::min(i, b - 1);
  }

 private:
  static Graphon piecewise(Eigen::MatrixXd values, GraphonKind kind) {
    if (values.rows() < 1 || values.rows() != values.cols())
      throw std::invalid_argument("graphon: step values must be square and nonempty");
    if ((values - values.transpose()).cwiseAbs().maxCoeff() != 0.0)
      throw std::invalid_argument("graphon: step values must be symmetric");
    if (values.minCoeff() < 0.0 || values.maxCoeff() > 1.0)
      throw std::invalid_argument("graphon: step values must lie in [0,1]");
    Graphon w;
    w.kind_ = kind;
    w.values_ = std::move(values);
    return w;
  }

  GraphonKind kind_ = GraphonKind::fourier;
  double rho_ = 0.5;
  std::vector<FourierTerm> terms_;
  Eigen::MatrixXd values_;
};

// Low-rank Fourier graphon with random coefficients. Terms pair up as
// (m=1,cos), (m=1,sin), (m=2,cos), ... Coefficients are uniform on
// [-coeff_scale, coeff_scale] and rescaled onto the boundedness budget
// sum|lambda| <= min(rho, 1-rho)/2 exactly when the raw draw exceeds it.
inline Graphon make_fourier_graphon(double rho, int num_terms, double coeff_scale,
                                    std::uint64_t seed) {
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("make_fourier_graphon: rho must lie in (0,1)");
  if (num_terms < 0) throw std::invalid_argument("make_fourier_graphon: num_terms must be >= 0");
  if (!(coeff_scale > 0.0)) throw std::invalid_argument("make_fourier_graphon: coeff_scale must be > 0");

  auto g = rng::engine(seed);
  std::vector<FourierTerm> terms(num_terms);
  double abs_sum = 0.0;
  for (int r = 0; r < num_terms; ++r) {
    terms[r].basis_index = r / 2 + 1;
    terms[r].is_sin = (r % 2 == 1);
    terms[r].coeff = rng::uniform(g, -coeff_scale, coeff_scale);
    abs_sum += std::abs(terms[r].coeff);
  }
  double budget = 0.5 * std::min(rho, 1.0 - rho);
  if (abs_sum > budget && abs_sum > 0.0) {
    double s = budget / abs_sum;
    for (auto& t : terms) t.coeff *= s;
  }
  return Graphon::fourier(rho, std::move(terms));
}

// --- Grid evaluation -------------------------------------------------------

// Kernel values at the m x m cell centers c_i = (i - 1/2)/m. The Fourier
// variant goes through a rank-R product instead of m^2 pointwise sums.
inline Eigen::MatrixXd grid_values(const Graphon& w, int m) {
  if (m < 1) throw std::invalid_argument("grid_values: grid must be >= 1");
  Eigen::MatrixXd k(m, m);
  if (w.kind() == GraphonKind::fourier) {
    const auto& terms = w.terms();
    int nr = static_cast<int>(terms.size());
    Eigen::MatrixXd phi(m, nr);
    for (int r = 0; r < nr; ++r)
      for (int i = 0; i < m; ++i)
        phi(i, r) = fourier_basis(terms[r].basis_index, terms[r].is_sin, (i + 0.5) / m);
    Eigen::VectorXd lam(nr);
    for (int r = 0; r < nr; ++r) lam(r) = terms[r].coeff;
    k.setConstant(w.rho());
    if (nr > 0) k.noalias() += phi * lam.asDiagonal() * phi.transpose();
    k = k.cwiseMax(0.0).cwiseMin(1.0);
  } else {
    int b = w.resolution();
    if (m < b) throw std::invalid_argument("grid_values: grid below native resolution");
    for (int i = 0; i < m; ++i) {
      int ci = std::min(static_cast<int>(std::floor((i + 0.5) / m * b)), b - 1);
      for (int j = 0; j < m; ++j) {
        int cj = std::min(static_cast<int>(std::floor((j + 0.5) / m * b)), b - 1);
        k(i, j) = w.values()(ci, cj);
      }
    }
  }
  return k;
}

// Smallest grid that is exact for both kernels when possible: the lcm of
// the native step resolutions (rounded up to `target` by multiples),
// capped at `cap`. A non-divisible cap only occurs past the cap, where the
// error is accepted as controlled.
inline int choose_common_grid(const Graphon& a, const Graphon& b, int target = 2048,
                              int cap = 4096) {
  long ra = std::max(1, a.resolution());
  long rb = std::max(1, b.resolution());
  long l = std::lcm(ra, rb);
  if (l > cap) return cap;
  long g = l;
  if (g < target) {
    g = ((target + l - 1) / l) * l;  // round target up to a multiple of lcm
    if (g > cap) g = (cap / l) * l;  // largest multiple still under the cap
  }
  return static_cast<int>(g);
}

// --- Sampled graphs ---------------------------------------------------------

struct SampledGraph {
  int n = 0;
  Eigen::VectorXd latents;    // empty when unknown (ingested data)
  Eigen::MatrixXd adjacency;  // symmetric, zero diagonal, entries in [0,1]
  int label = 0;
  std::uint64_t source_seed = 0;

  Eigen::MatrixXd shift() const { return adjacency / static_cast<double>(n); }

  void validate() const {
    if (n < 1 || adjacency.rows() != n || adjacency.cols() != n)
      throw std::invalid_argument("sampled graph: adjacency shape mismatch");
    if ((adjacency - adjacency.transpose()).cwiseAbs().maxCoeff() != 0.0)
      throw std::invalid_argument("sampled graph: adjacency must be symmetric");
    if (adjacency.diagonal().cwiseAbs().maxCoeff() != 0.0)
      throw std::invalid_argument("sampled graph: diagonal must be zero");
    if (adjacency.minCoeff() < 0.0 || adjacency.maxCoeff() > 1.0)
      throw std::invalid_argument("sampled graph: entries must lie in [0,1]");
    if (latents.size() != 0 && latents.size() != n)
      throw std::invalid_argument("sampled graph: latent count mismatch");
  }
};

inline SampledGraph sample_graph(const Graphon& w, int n, int label, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("sample_graph: need n >= 2");
  auto g = rng::engine(seed);
  SampledGraph out;
  out.n = n;
  out.label = label;
  out.source_seed = seed;
  out.latents.resize(n);
  for (int i = 0; i < n; ++i) out.latents(i) = rng::uniform_open01(g);

  out.adjacency.resize(n, n);
  if (w.kind() == GraphonKind::fourier) {
    const auto& terms = w.terms();
    int nr = static_cast<int>(terms.size());
    Eigen::MatrixXd phi(n, nr);
    for (int r = 0; r < nr; ++r)
      for (int i = 0; i < n; ++i)
        phi(i, r) = fourier_basis(terms[r].basis_index, terms[r].is_sin, out.latents(i));
    Eigen::VectorXd lam(nr);
    for (int r = 0; r < nr; ++r) lam(r) = terms[r].coeff;
    out.adjacency.setConstant(w.rho());
    if (nr > 0) out.adjacency.noalias() += phi * lam.asDiagonal() * phi.transpose();
    // symmetrize: a*b and b*a round identically, but keep this exact by
    // construction for the bitwise symmetry invariant
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) out.adjacency(j, i) = out.adjacency(i, j);
    out.adjacency = out.adjacency.cwiseMax(0.0).cwiseMin(1.0);
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double v = w(out.latents(i), out.latents(j));
        out.adjacency(i, j) = v;
        out.adjacency(j, i) = v;
      }
  }
  out.adjacency.diagonal().setZero();
  return out;
}

// Induced step graphon W_Delta: resolution n with cell value n*Delta = A.
inline Graphon induce_step_graphon(const SampledGraph& g) {
  return Graphon::step(g.adjacency);
}

inline SampledGraph permute_graph(const SampledGraph& g, const std::vector<int>& order) {
  SampledGraph out;
  out.n = g.n;
  out.label = g.label;
  out.source_seed = g.source_seed;
  if (g.latents.size() > 0) {
    out.latents.resize(g.n);
    for (int i = 0; i < g.n; ++i) out.latents(i) = g.latents(order[i]);
  }
  out.adjacency.resize(g.n, g.n);
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) out.adjacency(i, j) = g.adjacency(order[i], order[j]);
  return out;
}

// Reorder nodes so latents ascend (the paper's pi_u).
inline SampledGraph sort_by_latents(const SampledGraph& g) {
  if (g.latents.size() != g.n)
    throw std::invalid_argument("sort_by_latents: graph has no latent coordinates");
  std::vector<int> order(g.n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return g.latents(a) < g.latents(b); });
  return permute_graph(g, order);
}

// Reorder nodes by ascending weighted degree, ties by original index.
// Canonical alignment when latents are unknown.
inline SampledGraph degree_sort(const SampledGraph& g) {
  Eigen::VectorXd deg = g.adjacency.rowwise().sum();
  std::vector<int> order(g.n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return deg(a) < deg(b); });
  return permute_graph(g, order);
}

// --- Distances --------------------------------------------------------------

namespace detail {

inline void check_grid_pre(const Graphon& a, const Graphon& b, int grid) {
  int need = std::max(a.resolution(), b.resolution());
  if (grid < need)
    throw std::invalid_argument("distance: grid below native kernel resolution");
}

}  // namespace detail

// L2([0,1]^2) distance of the two kernels discretized at cell centers.
inline double kernel_l2_distance(const Graphon& a, const Graphon& b, int grid) {
  detail::check_grid_pre(a, b, grid);
  Eigen::MatrixXd d = grid_values(a, grid) - grid_values(b, grid);
  double m = static_cast<double>(grid);
  return std::sqrt(d.squaredNorm() / (m * m));
}

// Spectral norm of the discretized integral-operator difference: the m x m
// kernel difference acts as D/m on step functions. Power iteration on D^2
// with a residual stop; dense fallback when it stalls (|lambda_1| ~ |lambda_2|).
inline double spectral_norm_scaled(const Eigen::MatrixXd& d, double rel_tol = 1e-8,
                                   int max_iters = 10000, bool allow_fallback = true) {
  const int m = static_cast<int>(d.rows());
  double scale = d.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;

  auto g = rng::engine(rng::derive(0x9e3779b9u, static_cast<std::uint64_t>(m)));
  Eigen::VectorXd v(m);
  for (int i = 0; i < m; ++i) v(i) = rng::gaussian(g);
  v = (d * v).eval();  // enrich toward large |lambda|
  double nv = v.norm();
  if (nv == 0.0) return 0.0;
  v /= nv;

  for (int it = 1; it <= max_iters; ++it) {
    Eigen::VectorXd w = d * v;
    Eigen::VectorXd z = d * w;
    double mu = w.squaredNorm();  // v' D^2 v
    double res = (z - mu * v).norm();
    if (mu > 0.0 && res <= rel_tol * mu)
      return std::sqrt(mu) / static_cast<double>(m);
    double nz = z.norm();
    if (nz == 0.0) return 0.0;
    v = z / nz;
  }
  if (!allow_fallback)
    throw NumericError("spectral norm: power iteration did not converge after " +
                       std::to_string(max_iters) + " iterations");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff() / static_cast<double>(m);
}

inline double operator_norm_distance(const Graphon& a, const Graphon& b, int grid,
                                     bool allow_fallback = true) {
  detail::check_grid_pre(a, b, grid);
  Eigen::MatrixXd d = grid_values(a, grid) - grid_values(b, grid);
  return spectral_norm_scaled(d, 1e-8, 10000, allow_fallback);
}

// --- Estimation -------------------------------------------------------------

// Network-histogram style estimator: degree-sort each graph, block-average
// its adjacency onto a b x b step matrix (cells split node indices as
// evenly as possible), then average cells across graphs. Diagonal cells
// keep the zero-diagonal dilution of the sampled graphs; documented, not
// corrected.
inline Graphon estimate_graphon_from_graphs(const std::vector<SampledGraph>& graphs, int b) {
  if (graphs.empty()) throw std::invalid_argument("estimate_graphon: empty graph set");
  if (b < 2) throw std::invalid_argument("estimate_graphon: resolution must be >= 2");
  for (const auto& g : graphs)
    if (g.n < b) throw std::invalid_argument("estimate_graphon: resolution exceeds graph size");

  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(b, b);
  for (const auto& g : graphs) {
    SampledGraph s = degree_sort(g);
    std::vector<int> lo(b + 1);
    for (int t = 0; t <= b; ++t) lo[t] = static_cast<int>(static_cast<long>(t) * s.n / b);
    for (int p = 0; p < b; ++p)
      for (int q = 0; q < b; ++q) {
        double sum = s.adjacency.block(lo[p], lo[q], lo[p + 1] - lo[p], lo[q + 1] - lo[q]).sum();
        double cnt = static_cast<double>(lo[p + 1] - lo[p]) * (lo[q + 1] - lo[q]);
        acc(p, q) += sum / cnt;
      }
  }
  acc /= static_cast<double>(graphs.size());
  return Graphon::step(acc);
}

// --- Perturbation -----------------------------------------------------------

// Adds two fresh Fourier terms at unused basis indices, scaled so the
// analytic L2 norm of the added kernel equals level*delta, then uniformly
// shrunk (if needed) until the perturbed kernel stays in [0,1] on a
// 1024-grid. level = 0 returns the input unchanged.
inline Graphon perturb_graphon(const Graphon& w, int level, double delta, std::uint64_t seed) {
  if (w.kind() != GraphonKind::fourier)
    throw std::invalid_argument("perturb_graphon: input must be a Fourier graphon");
  if (level < 0) throw std::invalid_argument("perturb_graphon: level must be >= 0");
  if (level == 0) return w;

  int max_m = 0;
  for (const auto& t : w.terms()) max_m = std::max(max_m, t.basis_index);

  auto g = rng::engine(seed);
  std::vector<FourierTerm> fresh(2);
  fresh[0] = {max_m + 1, false, rng::uniform(g, -1.0, 1.0)};
  fresh[1] = {max_m + 1, true, rng::uniform(g, -1.0, 1.0)};
  // {phi_r (x) phi_r} is orthonormal in L2([0,1]^2), so ||P||_L2 = ||mu||_2.
  double norm = std::hypot(fresh[0].coeff, fresh[1].coeff);
  double target = level * delta;
  for (auto& t : fresh) t.coeff *= target / norm;

  const int m = 1024;
  Eigen::MatrixXd base = grid_values(w, m);
  Eigen::MatrixXd pert(m, m);
  {
    Eigen::MatrixXd phi(m, 2);
    for (int r = 0; r < 2; ++r)
      for (int i = 0; i < m; ++i)
        phi(i, r) = fourier_basis(fresh[r].basis_index, fresh[r].is_sin, (i + 0.5) / m);
    Eigen::Vector2d mu(fresh[0].coeff, fresh[1].coeff);
    pert.noalias() = phi * mu.asDiagonal() * phi.transpose();
  }
  double shrink = 1.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      double p = pert(i, j);
      if (p > 0.0) shrink = std::min(shrink, (1.0 - base(i, j)) / p);
      else if (p < 0.0) shrink = std::min(shrink, base(i, j) / -p);
    }
  shrink = std::max(shrink, 0.0);

  std::vector<FourierTerm> terms = w.terms();
  for (auto& t : fresh) {
    t.coeff *= shrink;
    terms.push_back(t);
  }
  return Graphon::fourier(w.rho(), std::move(terms));
}

}  // namespace graphonlab
