#pragma once

// Minimal trainable backbones with hand-written reverse-mode gradients:
// MLP stacks, a DeepSets readout, GIN-style message passing with sum
// aggregation (n*Delta = A), and a learnable SPE tokenizer. Architectures
// are fixed and small, so gradients are spelled out and checked against
// finite differences instead of pulling in an autodiff dependency.
//
// Parameters live in one flat named-tensor store per model; the optimizer
// and checkpoint code only ever see that store.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "graphonlab/common.hpp"
#include "graphonlab/spectral.hpp"

namespace graphonlab {

// --- Parameter store ---------------------------------------------------------

struct NamedTensors {
  std::vector<std::string> names;
  std::vector<Eigen::MatrixXd> values;

  int add(const std::string& name, long rows, long cols) {
    names.push_back(name);
    values.emplace_back(Eigen::MatrixXd::Zero(rows, cols));
    return static_cast<int>(values.size()) - 1;
  }
  Eigen::MatrixXd& operator[](int i) { return values[static_cast<std::size_t>(i)]; }
  const Eigen::MatrixXd& operator[](int i) const { return values[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return values.size(); }

  Eigen::MatrixXd& at(const std::string& name) {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return values[i];
    throw std::invalid_argument("named tensor not found: " + name);
  }

  NamedTensors zeros_like() const {
    NamedTensors z;
    z.names = names;
    z.values.reserve(values.size());
    for (const auto& v : values) z.values.emplace_back(Eigen::MatrixXd::Zero(v.rows(), v.cols()));
    return z;
  }
  void set_zero() {
    for (auto& v : values) v.setZero();
  }
  bool all_finite() const {
    for (const auto& v : values)
      if (!v.allFinite()) return false;
    return true;
  }
};

// --- MLP stack (affine-ReLU-...-affine over row batches) ----------------------

struct MlpRef {
  std::vector<int> w;  // w[l]: (d_{l+1} x d_l)
  std::vector<int> b;  // b[l]: (1 x d_{l+1})
  std::vector<int> dims;
};

inline MlpRef mlp_add(NamedTensors& store, const std::string& prefix,
                      const std::vector<int>& dims) {
  if (dims.size() < 2) throw std::invalid_argument("mlp_add: need at least [in, out]");
  MlpRef r;
  r.dims = dims;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    r.w.push_back(store.add(prefix + ".w" + std::to_string(l), dims[l + 1], dims[l]));
    r.b.push_back(store.add(prefix + ".b" + std::to_string(l), 1, dims[l + 1]));
  }
  return r;
}

inline void mlp_glorot_init(NamedTensors& store, const MlpRef& r, std::mt19937_64& g) {
  for (std::size_t l = 0; l < r.w.size(); ++l) {
    auto& w = store[r.w[l]];
    double lim = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (long i = 0; i < w.rows(); ++i)
      for (long j = 0; j < w.cols(); ++j) w(i, j) = rng::uniform(g, -lim, lim);
    store[r.b[l]].setZero();
  }
}

struct MlpCache {
  std::vector<Eigen::MatrixXd> act;  // act[0] = input, act[l] = output of layer l-1 post-ReLU
};

inline Eigen::MatrixXd mlp_forward(const NamedTensors& store, const MlpRef& r,
                                   const Eigen::MatrixXd& x, MlpCache* cache = nullptr) {
  if (x.cols() != r.dims.front())
    throw std::invalid_argument("mlp_forward: input dimension mismatch");
  if (cache) {
    cache->act.clear();
    cache->act.push_back(x);
  }
  Eigen::MatrixXd h = x;
  const std::size_t nl = r.w.size();
  for (std::size_t l = 0; l < nl; ++l) {
    Eigen::MatrixXd z = h * store[r.w[l]].transpose();
    z.rowwise() += store[r.b[l]].row(0);
    if (l + 1 < nl) {
      h = z.cwiseMax(0.0);
      if (cache) cache->act.push_back(h);
    } else {
      h = std::move(z);
    }
  }
  return h;
}

// Returns d(loss)/d(input); accumulates parameter gradients into `grads`.
inline Eigen::MatrixXd mlp_backward(const NamedTensors& store, const MlpRef& r,
                                    const MlpCache& cache, const Eigen::MatrixXd& dout,
                                    NamedTensors& grads) {
  const std::size_t nl = r.w.size();
  Eigen::MatrixXd dz = dout;
  for (std::size_t li = nl; li-- > 0;) {
    const Eigen::MatrixXd& a = cache.act[li];  // input to layer li
    grads[r.w[li]].noalias() += dz.transpose() * a;
    grads[r.b[li]].row(0) += dz.colwise().sum();
    if (li == 0) return dz * store[r.w[li]];
    Eigen::MatrixXd da = dz * store[r.w[li]];
    // ReLU mask from the cached post-activation
    dz = ((cache.act[li].array() > 0.0).cast<double>() * da.array()).matrix();
  }
  return dz;  // unreachable
}

// Single-vector convenience used by the gradient-check oracles.
inline Eigen::VectorXd mlp_forward_vec(const NamedTensors& store, const MlpRef& r,
                                       const Eigen::VectorXd& x) {
  return mlp_forward(store, r, x.transpose()).row(0).transpose();
}

// --- Loss ---------------------------------------------------------------------

inline Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

inline double cross_entropy(const Eigen::VectorXd& logits, int label,
                            Eigen::VectorXd* dlogits = nullptr) {
  if (label < 0 || label >= logits.size())
    throw std::invalid_argument("cross_entropy: label out of range");
  double m = logits.maxCoeff();
  double lse = m + std::log((logits.array() - m).exp().sum());
  if (dlogits) {
    *dlogits = softmax(logits);
    (*dlogits)(label) -= 1.0;
  }
  return lse - logits(label);
}

// --- Model --------------------------------------------------------------------

enum class ModelKind { deepsets, gin };

struct ModelConfig {
  ModelKind kind = ModelKind::deepsets;
  int input_dim = 32;  // token width fed to the backbone
  int hidden = 256;
  int num_classes = 8;
  int gin_layers = 3;
  bool spe = false;  // learnable tokenizer in front (DeepSets only)
  int spe_k = 32;
  int spe_m = 32;
  bool spe_mlp = true;
};

struct Model {
  ModelConfig config;
  NamedTensors store;
  MlpRef phi, rho;                  // DeepSets
  std::vector<MlpRef> gin_mlps;     // GIN layer MLPs
  int head_w = -1, head_b = -1;     // GIN linear head
  int spe_a = -1, spe_b = -1;       // sigmoid gate parameters (1 x m)
  MlpRef spe_channel;               // optional channel-wise MLP after V*Z
};

inline Model make_model(const ModelConfig& cfg, std::uint64_t seed) {
  Model m;
  m.config = cfg;
  auto g = rng::engine(seed);
  int d_in = cfg.input_dim;
  if (cfg.spe) {
    if (cfg.kind != ModelKind::deepsets)
      throw std::invalid_argument("make_model: learnable spe tokenizer is paired with deepsets");
    m.spe_a = m.store.add("spe.a", 1, cfg.spe_m);
    m.spe_b = m.store.add("spe.b", 1, cfg.spe_m);
    for (int j = 0; j < cfg.spe_m; ++j) {
      m.store[m.spe_a](0, j) = rng::uniform(g, -3.0, 3.0);
      m.store[m.spe_b](0, j) = rng::uniform(g, -1.0, 1.0);
    }
    if (cfg.spe_mlp) {
      m.spe_channel = mlp_add(m.store, "spe.mlp", {cfg.spe_m, cfg.spe_m, cfg.spe_m});
      mlp_glorot_init(m.store, m.spe_channel, g);
    }
    d_in = cfg.spe_m;
  }
  if (cfg.kind == ModelKind::deepsets) {
    m.phi = mlp_add(m.store, "phi", {d_in, cfg.hidden, cfg.hidden});
    m.rho = mlp_add(m.store, "rho", {cfg.hidden, cfg.hidden, cfg.num_classes});
    mlp_glorot_init(m.store, m.phi, g);
    mlp_glorot_init(m.store, m.rho, g);
  } else {
    int prev = d_in;
    for (int l = 0; l < cfg.gin_layers; ++l) {
      m.gin_mlps.push_back(mlp_add(m.store, "gin.l" + std::to_string(l),
                                   {prev, cfg.hidden, cfg.hidden}));
      mlp_glorot_init(m.store, m.gin_mlps.back(), g);
      prev = cfg.hidden;
    }
    m.head_w = m.store.add("head.w", cfg.num_classes, cfg.hidden);
    m.head_b = m.store.add("head.b", 1, cfg.num_classes);
    auto& w = m.store[m.head_w];
    double lim = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (long i = 0; i < w.rows(); ++i)
      for (long j = 0; j < w.cols(); ++j) w(i, j) = rng::uniform(g, -lim, lim);
  }
  return m;
}

// One graph's view for the model: precomputed tokens for fixed PEs, the
// eigen block for SPE, the adjacency for message passing. Pointers borrow
// from the owning dataset.
struct TrainItem {
  const Eigen::MatrixXd* tokens = nullptr;     // n x d
  const Eigen::MatrixXd* adjacency = nullptr;  // n x n, message passing only
  const Eigen::MatrixXd* vk = nullptr;         // n x k eigenvector block (spe)
  const Eigen::VectorXd* lam = nullptr;        // k min-max-normalized eigenvalues (spe)
  int label = 0;
};

// Selected eigen block + per-graph min-max normalized eigenvalues for the
// SPE tokenizer. A degenerate range (n = 1 or all equal) normalizes to 0.
struct SpeInputs {
  Eigen::MatrixXd vk;
  Eigen::VectorXd lam_norm;
};

inline SpeInputs spe_inputs(const Spectrum& s, int k) {
  if (k < 1 || k > s.n()) throw std::invalid_argument("spe_inputs: need 1 <= k <= n");
  auto sel = top_k_indices(s, k);
  SpeInputs out;
  out.vk.resize(s.n(), k);
  out.lam_norm.resize(k);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int c = 0; c < k; ++c) {
    out.vk.col(c) = s.eigenvectors.col(sel[c]);
    double v = s.eigenvalues(sel[c]);
    out.lam_norm(c) = v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi > lo)
    out.lam_norm = (out.lam_norm.array() - lo) / (hi - lo);
  else
    out.lam_norm.setZero();
  return out;
}

struct ForwardCache {
  Eigen::MatrixXd spe_z;       // k x m gate matrix
  Eigen::MatrixXd spe_vz;      // n x m tokens before the channel MLP
  MlpCache spe_mlp;
  Eigen::MatrixXd tokens;      // what the backbone consumed (spe path)
  MlpCache phi;
  Eigen::MatrixXd pooled;      // 1 x hidden
  MlpCache rho;
  std::vector<MlpCache> gin;   // per layer
  Eigen::MatrixXd gin_last;    // output of the last GIN layer
};

namespace detail {

inline Eigen::MatrixXd spe_tokens_forward(const Model& m, const TrainItem& item,
                                          ForwardCache* cache) {
  if (!item.vk || !item.lam) throw std::invalid_argument("spe: item lacks eigen inputs");
  const Eigen::MatrixXd& v = *item.vk;
  const Eigen::VectorXd& lam = *item.lam;
  const int k = static_cast<int>(lam.size());
  const int mw = m.config.spe_m;
  Eigen::MatrixXd z(k, mw);
  for (int l = 0; l < k; ++l)
    for (int j = 0; j < mw; ++j)
      z(l, j) = 1.0 / (1.0 + std::exp(-(m.store[m.spe_a](0, j) * lam(l) + m.store[m.spe_b](0, j))));
  Eigen::MatrixXd t = v * z;
  Eigen::MatrixXd out =
      m.config.spe_mlp ? mlp_forward(m.store, m.spe_channel, t, cache ? &cache->spe_mlp : nullptr)
                       : t;
  if (cache) {
    cache->spe_z = std::move(z);
    cache->spe_vz = std::move(t);
  }
  return out;
}

inline void spe_tokens_backward(const Model& m, const TrainItem& item, const ForwardCache& cache,
                                const Eigen::MatrixXd& dtokens, NamedTensors& grads) {
  Eigen::MatrixXd dt = m.config.spe_mlp
                           ? mlp_backward(m.store, m.spe_channel, cache.spe_mlp, dtokens, grads)
                           : dtokens;
  Eigen::MatrixXd dz = item.vk->transpose() * dt;  // k x m
  const Eigen::VectorXd& lam = *item.lam;
  for (int l = 0; l < dz.rows(); ++l)
    for (int j = 0; j < dz.cols(); ++j) {
      double s = cache.spe_z(l, j);
      double dpre = dz(l, j) * s * (1.0 - s);
      grads[m.spe_a](0, j) += dpre * lam(l);
      grads[m.spe_b](0, j) += dpre;
    }
}

}  // namespace detail

// Graph-level logits. DeepSets: rho(mean_i phi(t_i)). GIN: three rounds of
// x <- MLP(x + A x) (epsilon = 0, A = n*Delta gives weighted sum
// aggregation), mean pooling, linear head.
inline Eigen::VectorXd model_forward(const Model& m, const TrainItem& item,
                                     ForwardCache* cache = nullptr) {
  Eigen::MatrixXd toks;
  const Eigen::MatrixXd* x = item.tokens;
  if (m.config.spe) {
    toks = detail::spe_tokens_forward(m, item, cache);
    if (cache) cache->tokens = toks;
    x = cache ? &cache->tokens : &toks;
  }
  if (!x) throw std::invalid_argument("model_forward: item lacks tokens");

  if (m.config.kind == ModelKind::deepsets) {
    Eigen::MatrixXd h = mlp_forward(m.store, m.phi, *x, cache ? &cache->phi : nullptr);
    Eigen::MatrixXd pooled = h.colwise().mean();
    if (cache) cache->pooled = pooled;
    Eigen::MatrixXd logits = mlp_forward(m.store, m.rho, pooled, cache ? &cache->rho : nullptr);
    return logits.row(0).transpose();
  }

  if (!item.adjacency) throw std::invalid_argument("model_forward: gin needs the adjacency");
  const Eigen::MatrixXd& a = *item.adjacency;
  Eigen::MatrixXd h = *x;
  if (cache) cache->gin.resize(m.gin_mlps.size());
  for (std::size_t l = 0; l < m.gin_mlps.size(); ++l) {
    Eigen::MatrixXd agg = h + a * h;
    h = mlp_forward(m.store, m.gin_mlps[l], agg, cache ? &cache->gin[l] : nullptr);
  }
  if (cache) cache->gin_last = h;
  Eigen::MatrixXd pooled = h.colwise().mean();
  if (cache) cache->pooled = pooled;
  Eigen::VectorXd logits =
      m.store[m.head_w] * pooled.row(0).transpose() + m.store[m.head_b].row(0).transpose();
  return logits;
}

// Backward from d(loss)/d(logits); fills `grads` (accumulating) and returns
// d(loss)/d(input tokens) for callers that chain into a tokenizer.
inline Eigen::MatrixXd model_backward(const Model& m, const TrainItem& item,
                                      const ForwardCache& cache, const Eigen::VectorXd& dlogits,
                                      NamedTensors& grads) {
  Eigen::MatrixXd dtokens;
  if (m.config.kind == ModelKind::deepsets) {
    Eigen::MatrixXd dpooled = mlp_backward(m.store, m.rho, cache.rho, dlogits.transpose(), grads);
    long n = cache.phi.act[0].rows();
    Eigen::MatrixXd dh = Eigen::MatrixXd::Ones(n, 1) * (dpooled / static_cast<double>(n));
    dtokens = mlp_backward(m.store, m.phi, cache.phi, dh, grads);
  } else {
    const Eigen::MatrixXd& a = *item.adjacency;
    long n = cache.gin_last.rows();
    grads[m.head_w].noalias() += dlogits * cache.pooled.row(0);
    grads[m.head_b].row(0) += dlogits.transpose();
    Eigen::MatrixXd dh =
        Eigen::MatrixXd::Ones(n, 1) * (dlogits.transpose() * m.store[m.head_w] / static_cast<double>(n));
    for (std::size_t l = m.gin_mlps.size(); l-- > 0;) {
      Eigen::MatrixXd dagg = mlp_backward(m.store, m.gin_mlps[l], cache.gin[l], dh, grads);
      dh = dagg + a * dagg;  // A symmetric
    }
    dtokens = dh;
  }
  if (m.config.spe) detail::spe_tokens_backward(m, item, cache, dtokens, grads);
  return dtokens;
}

// Standalone SPE token op (differentiable path exercised via model_backward).
inline TokenMatrix spe_tokens(const Model& m, const Spectrum& s, int k) {
  SpeInputs in = spe_inputs(s, k);
  TrainItem item;
  item.vk = &in.vk;
  item.lam = &in.lam_norm;
  TokenMatrix t;
  t.kind = TokenKind::spe;
  t.k_used = k;
  t.tokens = detail::spe_tokens_forward(m, item, nullptr);
  return t;
}

// --- Adam ---------------------------------------------------------------------

struct AdamState {
  std::vector<Eigen::MatrixXd> m, v;
  long step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

inline AdamState make_adam_state(const NamedTensors& params) {
  AdamState s;
  for (const auto& p : params.values) {
    s.m.emplace_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
    s.v.emplace_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
  }
  return s;
}

// Standard Adam with decoupled weight decay applied multiplicatively before
// the update.
inline void adam_step(AdamState& st, NamedTensors& params, const NamedTensors& grads, double lr,
                      double wd) {
  if (params.size() != grads.size() || params.size() != st.m.size())
    throw std::invalid_argument("adam_step: store shape mismatch");
  ++st.step;
  double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params.values[i];
    const auto& g = grads.values[i];
    if (wd != 0.0) p *= (1.0 - lr * wd);
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * g;
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * g.cwiseProduct(g);
    p.array() -= lr * (st.m[i].array() / bc1) / ((st.v[i].array() / bc2).sqrt() + st.eps);
  }
}

// --- Training loop ------------------------------------------------------------

struct TrainConfig {
  double learning_rate = 5e-4;
  double weight_decay = 1e-4;
  int epochs = 100;
  std::uint64_t seed = 0;
  TokenKind pe_kind = TokenKind::eig;
  int k = 32;
  int hidden = 256;
  int spe_m = 32;

  void validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("train config: learning_rate must be > 0");
    if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
    if (weight_decay < 0.0) throw std::invalid_argument("train config: weight_decay must be >= 0");
  }
};

struct EpochRecord {
  int epoch = 0;
  double train_err = 0.0;  // running misclassification over the epoch's updates
  double val_err = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochRecord> history;
  bool aborted = false;
  std::string abort_reason;
};

inline int predict_label(const Eigen::VectorXd& logits) {
  int arg = 0;
  logits.maxCoeff(&arg);
  return arg;
}

inline double eval_error(const Model& m, const std::vector<TrainItem>& items) {
  if (items.empty()) return 0.0;
  long wrong = 0;
  for (const auto& it : items)
    if (predict_label(model_forward(m, it)) != it.label) ++wrong;
  return static_cast<double>(wrong) / static_cast<double>(items.size());
}

// Cross-entropy training, one graph per update, deterministic shuffling per
// (seed, epoch). A non-finite loss aborts with a diagnostic record instead
// of training through the damage.
inline TrainResult train_model(const ModelConfig& mcfg, const TrainConfig& tcfg,
                               const std::vector<TrainItem>& train_items,
                               const std::vector<TrainItem>& val_items) {
  tcfg.validate();
  if (train_items.empty()) throw std::invalid_argument("train_model: empty training set");

  TrainResult out;
  out.model = make_model(mcfg, rng::derive(tcfg.seed, 0x1717));
  AdamState adam = make_adam_state(out.model.store);
  NamedTensors grads = out.model.store.zeros_like();

  std::vector<std::size_t> order(train_items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    auto g = rng::engine(rng::derive(tcfg.seed, 0xE90C, static_cast<std::uint64_t>(epoch)));
    rng::shuffle(order, g);
    double loss_sum = 0.0;
    long wrong = 0;
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
      const TrainItem& it = train_items[order[oi]];
      ForwardCache cache;
      Eigen::VectorXd logits = model_forward(out.model, it, &cache);
      Eigen::VectorXd dlogits;
      double loss = cross_entropy(logits, it.label, &dlogits);
      if (!std::isfinite(loss)) {
        out.aborted = true;
        out.abort_reason = "non-finite loss at epoch " + std::to_string(epoch) + ", update " +
                           std::to_string(oi);
        return out;
      }
      loss_sum += loss;
      if (predict_label(logits) != it.label) ++wrong;
      grads.set_zero();
      model_backward(out.model, it, cache, dlogits, grads);
      adam_step(adam, out.model.store, grads, tcfg.learning_rate, tcfg.weight_decay);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(order.size());
    rec.train_err = static_cast<double>(wrong) / static_cast<double>(order.size());
    rec.val_err = eval_error(out.model, val_items);
    out.history.push_back(rec);
    if (!out.model.store.all_finite()) {
      out.aborted = true;
      out.abort_reason = "non-finite parameters after epoch " + std::to_string(epoch);
      return out;
    }
  }
  return out;
}

// --- Evaluation ---------------------------------------------------------------

struct EvalItem {
  TrainItem item;
  int size = 0;
};

struct ErrorReport {
  double overall = 0.0;
  std::vector<std::pair<int, double>> per_size;  // ascending size -> error
  double id_error = 0.0, ood_error = 0.0;
  long id_count = 0, ood_count = 0, total = 0;
};

inline ErrorReport evaluate(const Model& m, const std::vector<EvalItem>& items,
                            const std::vector<int>& id_sizes, const std::vector<int>& ood_sizes) {
  ErrorReport rep;
  std::vector<std::pair<int, std::pair<long, long>>> by_size;  // size -> (wrong, count)
  long wrong_total = 0, id_wrong = 0, ood_wrong = 0;
  for (const auto& e : items) {
    bool wrong = predict_label(model_forward(m, e.item)) != e.item.label;
    auto it = std::find_if(by_size.begin(), by_size.end(),
                           [&](const auto& p) { return p.first == e.size; });
    if (it == by_size.end()) {
      by_size.push_back({e.size, {0, 0}});
      it = by_size.end() - 1;
    }
    it->second.second += 1;
    if (wrong) {
      it->second.first += 1;
      ++wrong_total;
    }
    bool is_id = std::find(id_sizes.begin(), id_sizes.end(), e.size) != id_sizes.end();
    bool is_ood = std::find(ood_sizes.begin(), ood_sizes.end(), e.size) != ood_sizes.end();
    if (is_id) {
      ++rep.id_count;
      if (wrong) ++id_wrong;
    }
    if (is_ood) {
      ++rep.ood_count;
      if (wrong) ++ood_wrong;
    }
  }
  rep.total = static_cast<long>(items.size());
  rep.overall = rep.total ? static_cast<double>(wrong_total) / rep.total : 0.0;
  std::sort(by_size.begin(), by_size.end());
  for (const auto& [size, wc] : by_size)
    rep.per_size.push_back({size, static_cast<double>(wc.first) / wc.second});
  rep.id_error = rep.id_count ? static_cast<double>(id_wrong) / rep.id_count : 0.0;
  rep.ood_error = rep.ood_count ? static_cast<double>(ood_wrong) / rep.ood_count : 0.0;
  return rep;
}

// --- Empirical Lipschitz constant ----------------------------------------------

struct LipschitzEstimate {
  std::vector<double> per_point;      // max finite-difference ratio per point
  std::vector<double> std_per_point;  // std across repeated direction batches
  double global = 0.0;                // max over points
  int n_dirs = 0;
  double epsilon = 0.0;
};

// max_k ||f(x + eps v_k) - f(x)|| / eps over random unit directions. The
// per-point estimate uses the first batch of n_dirs directions (so nested
// n_dirs give nondecreasing estimates for a fixed seed); extra batches only
// feed the reported std.
template <typename Fn>
LipschitzEstimate lipschitz_estimate(Fn&& f, const std::vector<Eigen::VectorXd>& points,
                                     double epsilon, int n_dirs, std::uint64_t seed,
                                     int batches = 5) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("lipschitz_estimate: epsilon must be > 0");
  if (n_dirs < 1 || batches < 1) throw std::invalid_argument("lipschitz_estimate: bad counts");
  LipschitzEstimate out;
  out.n_dirs = n_dirs;
  out.epsilon = epsilon;
  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    const Eigen::VectorXd& x = points[pi];
    Eigen::VectorXd fx = f(x);
    auto g = rng::engine(rng::derive(seed, pi));
    std::vector<double> batch_max;
    for (int bb = 0; bb < batches; ++bb) {
      double best = 0.0;
      for (int k = 0; k < n_dirs; ++k) {
        Eigen::VectorXd v(x.size());
        double nrm = 0.0;
        do {
          for (long i = 0; i < v.size(); ++i) v(i) = rng::gaussian(g);
          nrm = v.norm();
        } while (nrm == 0.0);
        v /= nrm;
        double ratio = (f(x + epsilon * v) - fx).norm() / epsilon;
        best = std::max(best, ratio);
      }
      batch_max.push_back(best);
    }
    out.per_point.push_back(batch_max.front());
    out.std_per_point.push_back(stats::stddev(batch_max));
  }
  for (double v : out.per_point) out.global = std::max(out.global, v);
  return out;
}

}  // namespace graphonlab
