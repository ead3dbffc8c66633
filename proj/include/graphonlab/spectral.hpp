#pragma once

// Eigendecomposition under the scaled inner product <x,y>_n = x'y/n and the
// spectral positional encodings built on it.
//
// Columns of a Spectrum have Euclidean norm sqrt(n), so (1/n) U'U = I and
// Delta = U diag(lambda) U' / n. Token selection takes the k eigenpairs of
// largest |lambda| (ties: larger algebraic value, then lower index in the
// ascending-ordered spectrum); sign is fixed per column so the entry of
// largest absolute value is positive.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "graphonlab/graphon.hpp"

namespace graphonlab {

enum class SpectrumOrdering { ascending, descending_abs };

struct Spectrum {
  Eigen::VectorXd eigenvalues;   // stored ascending
  Eigen::MatrixXd eigenvectors;  // columns, Euclidean norm sqrt(n)
  SpectrumOrdering ordering_tag = SpectrumOrdering::ascending;

  int n() const { return static_cast<int>(eigenvalues.size()); }
};

enum class TokenKind { eig, proj, spe };

inline const char* token_kind_name(TokenKind k) {
  switch (k) {
    case TokenKind::eig: return "eig";
    case TokenKind::proj: return "proj";
    default: return "spe";
  }
}

struct TokenMatrix {
  Eigen::MatrixXd tokens;  // n x d
  TokenKind kind = TokenKind::eig;
  int k_used = 0;
  double readout_norm = 0.0;  // ||r||_L2 for proj tokens, else 0

  int rows() const { return static_cast<int>(tokens.rows()); }
  int dim() const { return static_cast<int>(tokens.cols()); }
};

// Eigendecompose a symmetric matrix, optionally jittered for conditioning:
// pairs of (delta + jitter I) are computed and the jitter is subtracted
// from the returned eigenvalues.
inline Spectrum sym_eigendecompose(const Eigen::MatrixXd& delta, double jitter = 0.0) {
  const int n = static_cast<int>(delta.rows());
  if (n < 1 || delta.cols() != n)
    throw std::invalid_argument("sym_eigendecompose: matrix must be square");
  if ((delta - delta.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("sym_eigendecompose: matrix is not symmetric");

  Eigen::MatrixXd a = delta;
  if (jitter != 0.0) a.diagonal().array() += jitter;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  if (es.info() != Eigen::Success)
    throw NumericError("sym_eigendecompose: eigensolver failed");

  Spectrum s;
  s.eigenvalues = es.eigenvalues();
  if (jitter != 0.0) s.eigenvalues.array() -= jitter;
  s.eigenvectors = es.eigenvectors() * std::sqrt(static_cast<double>(n));
  for (int c = 0; c < n; ++c) {
    int arg = 0;
    double best = std::abs(s.eigenvectors(0, c));
    for (int r = 1; r < n; ++r) {
      double v = std::abs(s.eigenvectors(r, c));
      if (v > best) {
        best = v;
        arg = r;
      }
    }
    if (s.eigenvectors(arg, c) < 0.0) s.eigenvectors.col(c) = -s.eigenvectors.col(c);
  }
  return s;
}

// Indices into the ascending spectrum picking the k leading eigenpairs by
// descending |lambda|; size is min(k, n).
inline std::vector<int> top_k_indices(const Spectrum& s, int k) {
  const int n = s.n();
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    double aa = std::abs(s.eigenvalues(a)), ab = std::abs(s.eigenvalues(b));
    if (aa != ab) return aa > ab;
    return s.eigenvalues(a) > s.eigenvalues(b);
  });
  idx.resize(std::min(k, n));
  return idx;
}

// Eig-PE: the selected eigenvectors stacked as columns. Columns past n are
// zero when k > n, keeping token width fixed across a dataset.
inline TokenMatrix eig_pe(const Spectrum& s, int k) {
  if (k < 1) throw std::invalid_argument("eig_pe: k must be >= 1");
  const int n = s.n();
  auto sel = top_k_indices(s, k);
  TokenMatrix t;
  t.kind = TokenKind::eig;
  t.k_used = static_cast<int>(sel.size());
  t.tokens = Eigen::MatrixXd::Zero(n, k);
  for (int c = 0; c < static_cast<int>(sel.size()); ++c)
    t.tokens.col(c) = s.eigenvectors.col(sel[c]);
  return t;
}

inline TokenMatrix eig_pe(const SampledGraph& g, int k, double jitter = 0.0) {
  return eig_pe(sym_eigendecompose(g.shift(), jitter), k);
}

// Proj-PE: Pi_k R with Pi_k = (1/n) U_k U_k'. Basis rotations inside the
// selected eigenspace leave the output unchanged.
inline TokenMatrix proj_pe(const Spectrum& s, int k, const Eigen::MatrixXd& readout) {
  const int n = s.n();
  if (k < 1 || k > n) throw std::invalid_argument("proj_pe: need 1 <= k <= n");
  if (readout.rows() != n) throw std::invalid_argument("proj_pe: readout row count mismatch");
  auto sel = top_k_indices(s, k);
  Eigen::MatrixXd uk(n, k);
  for (int c = 0; c < k; ++c) uk.col(c) = s.eigenvectors.col(sel[c]);
  TokenMatrix t;
  t.kind = TokenKind::proj;
  t.k_used = k;
  t.tokens = uk * (uk.transpose() * readout) / static_cast<double>(n);
  t.readout_norm = readout.norm() / std::sqrt(static_cast<double>(n));
  return t;
}

inline TokenMatrix proj_pe(const SampledGraph& g, int k, const Eigen::MatrixXd& readout,
                           double jitter = 0.0) {
  return proj_pe(sym_eigendecompose(g.shift(), jitter), k, readout);
}

// Spectrum of the discretized graphon operator: the grid x grid kernel
// matrix acts as K/m, whose eigenpairs are exact for step kernels whenever
// the grid is a multiple of the native resolution.
inline Spectrum graphon_spectrum(const Graphon& w, int grid, double jitter = 0.0) {
  if (w.resolution() > 0 && grid % w.resolution() != 0)
    throw std::invalid_argument("graphon_spectrum: grid must be a multiple of the step resolution");
  Eigen::MatrixXd k = grid_values(w, grid);
  return sym_eigendecompose(k / static_cast<double>(grid), jitter);
}

// Graphon-side PE as step-function tokens at the grid resolution, with the
// same selection and sign conventions as the graph side.
inline TokenMatrix graphon_pe(const Graphon& w, int k, int grid, TokenKind kind,
                              const Eigen::MatrixXd* readout = nullptr, double jitter = 0.0) {
  Spectrum s = graphon_spectrum(w, grid, jitter);
  if (kind == TokenKind::eig) return eig_pe(s, k);
  if (kind == TokenKind::proj) {
    if (readout == nullptr) throw std::invalid_argument("graphon_pe: proj kind needs a readout");
    return proj_pe(s, k, *readout);
  }
  throw std::invalid_argument("graphon_pe: spe tokens are produced by the trainable module");
}

// --- Stability constants ----------------------------------------------------

struct StabilityConstants {
  std::vector<double> per_gap;  // gamma_l for the selected l <= k
  double subspace_gap = 0.0;    // gamma_k between the selected block and the rest
  double c_eig = 0.0;           // sqrt(k) * max_l 1/gamma_l, O(1) factor = 1
  double c_proj = 0.0;          // B / gamma_k
  double proxy = 0.0;           // log10(sqrt(k) / min gap)
};

// Gap structure of the k selected eigenpairs. Zero gaps flag the constants
// as +infinity rather than throwing, so sweeps can proceed.
inline StabilityConstants eigengaps(const Spectrum& s, int k, double readout_norm = 0.0) {
  const int n = s.n();
  if (k < 1 || k > n) throw std::invalid_argument("eigengaps: need 1 <= k <= n");
  auto sel = top_k_indices(s, k);
  std::vector<bool> in_sel(n, false);
  for (int i : sel) in_sel[i] = true;

  const double inf = std::numeric_limits<double>::infinity();
  StabilityConstants out;
  out.per_gap.resize(k);
  for (int c = 0; c < k; ++c) {
    double g = inf;
    for (int j = 0; j < n; ++j)
      if (j != sel[c]) g = std::min(g, std::abs(s.eigenvalues(sel[c]) - s.eigenvalues(j)));
    out.per_gap[c] = g;
  }
  out.subspace_gap = inf;
  for (int c = 0; c < k; ++c)
    for (int j = 0; j < n; ++j)
      if (!in_sel[j])
        out.subspace_gap =
            std::min(out.subspace_gap, std::abs(s.eigenvalues(sel[c]) - s.eigenvalues(j)));

  double min_gap = *std::min_element(out.per_gap.begin(), out.per_gap.end());
  double rk = std::sqrt(static_cast<double>(k));
  out.c_eig = (min_gap == 0.0) ? inf : rk / min_gap;
  double b = (readout_norm > 0.0) ? readout_norm : rk;
  out.c_proj = (out.subspace_gap == 0.0) ? inf : b / out.subspace_gap;
  out.proxy = (min_gap == 0.0) ? inf : std::log10(rk / min_gap);
  return out;
}

// --- Token distances --------------------------------------------------------

namespace detail {

// Walk the common refinement of two uniform partitions (n1 and n2 cells)
// and accumulate f(i, j, length) over each refined interval. Boundaries
// are compared in integer units of 1/(n1*n2), so the walk is exact.
template <typename F>
void common_refinement_walk(int n1, int n2, F&& f) {
  long total = static_cast<long>(n1) * n2;
  long pos = 0;
  int i = 0, j = 0;
  while (pos < total) {
    long end1 = static_cast<long>(i + 1) * n2;
    long end2 = static_cast<long>(j + 1) * n1;
    long next = std::min(end1, end2);
    f(i, j, static_cast<double>(next - pos) / static_cast<double>(total));
    if (end1 == next) ++i;
    if (end2 == next) ++j;
    pos = next;
  }
}

}  // namespace detail

// L2([0,1]) distance between token matrices viewed as step functions. Equal
// row counts reduce to sqrt(mean squared row difference); unequal counts
// are lifted onto the common refinement (requires as_step).
inline double token_l2_distance(const TokenMatrix& a, const TokenMatrix& b, bool as_step = true) {
  if (a.dim() != b.dim())
    throw std::invalid_argument("token_l2_distance: column counts differ");
  const int n1 = a.rows(), n2 = b.rows();
  if (n1 == n2) {
    return std::sqrt((a.tokens - b.tokens).squaredNorm() / static_cast<double>(n1));
  }
  if (!as_step)
    throw std::invalid_argument("token_l2_distance: row counts differ and as_step is false");
  double sumsq = 0.0;
  detail::common_refinement_walk(n1, n2, [&](int i, int j, double len) {
    sumsq += len * (a.tokens.row(i) - b.tokens.row(j)).squaredNorm();
  });
  return std::sqrt(sumsq);
}

// Column-wise sign alignment of eigenvector tokens against a reference, in
// the step-function inner product. The Davis-Kahan bounds fix signs by
// <phi_tilde, phi> >= 0; measurements against a reference use that choice.
inline TokenMatrix align_token_signs(const TokenMatrix& t, const TokenMatrix& ref) {
  if (t.dim() != ref.dim())
    throw std::invalid_argument("align_token_signs: column counts differ");
  TokenMatrix out = t;
  Eigen::VectorXd dots = Eigen::VectorXd::Zero(t.dim());
  detail::common_refinement_walk(t.rows(), ref.rows(), [&](int i, int j, double len) {
    for (int c = 0; c < t.dim(); ++c) dots(c) += len * t.tokens(i, c) * ref.tokens(j, c);
  });
  for (int c = 0; c < t.dim(); ++c)
    if (dots(c) < 0.0) out.tokens.col(c) = -out.tokens.col(c);
  return out;
}

}  // namespace graphonlab
