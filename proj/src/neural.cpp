#include "pcmmap/neural.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "pcmmap/threads.hpp"

namespace pcmmap {

namespace {

constexpr double kSigmoidClamp = 1e-12;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Disjoint substream index ranges so one training seed drives every stream.
constexpr std::uint64_t kInitStream = 0x0100'0000'0000ull;
constexpr std::uint64_t kShuffleStream = 0x0200'0000'0000ull;
constexpr std::uint64_t kDropoutStream = 0x0300'0000'0000ull;
constexpr std::uint64_t kCvStream = 0x0400'0000'0000ull;

SplitMix64 dropout_rng(std::uint64_t seed, int epoch, int position) {
  return SplitMix64::substream(
      seed, kDropoutStream + static_cast<std::uint64_t>(epoch) * 0x1'0000'0000ull +
                static_cast<std::uint64_t>(position));
}

double sigmoid_clamped(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return std::clamp(s, kSigmoidClamp, 1.0 - kSigmoidClamp);
}

void check_shapes(const MlpModel& m) {
  if (m.dims.size() < 2) throw InvalidSpec("model needs at least [N, M] dims");
  if (m.layers.size() != m.dims.size() - 1)
    throw ShapeMismatch("layer count does not match dims");
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const MlpLayer& layer = m.layers[l];
    if (layer.in != m.dims[l] || layer.out != m.dims[l + 1] ||
        layer.w.size() != static_cast<std::size_t>(layer.in) * layer.out ||
        layer.b.size() != static_cast<std::size_t>(layer.out))
      throw ShapeMismatch("layer " + std::to_string(l) + " has wrong shape");
  }
}

struct ExampleResult {
  bool skipped = false;
  double loss = 0.0;
  double nll = 0.0;
  double entropy = 0.0;
  std::vector<double> dl_dq;
  ForwardCache cache;
};

// Mean log-likelihood of rounded Eval-mode predictions over up to `cap`
// rows; -inf scores are excluded, and the mean is -inf if none are finite.
double mean_rounded_ll(const Circuit& c, const VariablePartition& p,
                       const MlpModel& m,
                       const std::vector<const std::vector<std::uint8_t>*>& rows,
                       std::size_t cap) {
  double sum = 0.0;
  int n_finite = 0;
  const std::size_t n = std::min(rows.size(), cap);
  for (std::size_t i = 0; i < n; ++i) {
    const SoftAssignment qc = forward(m, *rows[i], RunMode::Eval);
    Assignment e;
    for (std::size_t j = 0; j < p.evidence.size(); ++j)
      e.set(p.evidence[j], (*rows[i])[j] != 0);
    const double s = score(c, e, round_soft(qc, p.query));
    if (std::isfinite(s)) {
      sum += s;
      ++n_finite;
    }
  }
  return n_finite > 0 ? sum / n_finite : kNegInf;
}

std::vector<int> shuffled_indices(int n, SplitMix64 rng) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n - 1; i > 0; --i)
    std::swap(perm[i], perm[static_cast<int>(
                   rng.below(static_cast<std::uint64_t>(i) + 1))]);
  return perm;
}

}  // namespace

Gradients Gradients::zeros_like(const MlpModel& m) {
  Gradients g;
  for (const MlpLayer& layer : m.layers) {
    g.w.emplace_back(layer.w.size(), 0.0);
    g.b.emplace_back(layer.b.size(), 0.0);
  }
  return g;
}

void Gradients::add(const Gradients& g) {
  for (std::size_t l = 0; l < w.size(); ++l) {
    for (std::size_t i = 0; i < w[l].size(); ++i) w[l][i] += g.w[l][i];
    for (std::size_t i = 0; i < b[l].size(); ++i) b[l][i] += g.b[l][i];
  }
}

void Gradients::scale(double s) {
  for (auto& layer : w)
    for (double& x : layer) x *= s;
  for (auto& layer : b)
    for (double& x : layer) x *= s;
}

double Gradients::squared_norm() const {
  double acc = 0.0;
  for (const auto& layer : w)
    for (double x : layer) acc += x * x;
  for (const auto& layer : b)
    for (double x : layer) acc += x * x;
  return acc;
}

AdamState AdamState::zeros_like(const MlpModel& m) {
  AdamState s;
  for (const MlpLayer& layer : m.layers) {
    s.mw.emplace_back(layer.w.size(), 0.0);
    s.vw.emplace_back(layer.w.size(), 0.0);
    s.mb.emplace_back(layer.b.size(), 0.0);
    s.vb.emplace_back(layer.b.size(), 0.0);
  }
  return s;
}

MlpModel init_model(const std::vector<int>& dims, std::uint64_t seed) {
  if (dims.size() < 2) throw InvalidSpec("dims must be at least [N, M]");
  for (int d : dims)
    if (d < 1) throw InvalidSpec("every layer width must be >= 1");
  MlpModel m;
  m.dims = dims;
  m.meta_seed = seed;
  SplitMix64 rng = SplitMix64::substream(seed, kInitStream);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    MlpLayer layer;
    layer.in = dims[l];
    layer.out = dims[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    layer.w.resize(static_cast<std::size_t>(layer.in) * layer.out);
    for (double& x : layer.w) x = rng.uniform(-bound, bound);
    // Biases share the scheme so all-zero inputs do not park every unit
    // exactly on the ReLU kink.
    layer.b.resize(layer.out);
    for (double& x : layer.b) x = rng.uniform(-bound, bound);
    m.layers.push_back(std::move(layer));
  }
  return m;
}

SoftAssignment forward(const MlpModel& m, std::span<const std::uint8_t> e_bits,
                       RunMode mode, SplitMix64* rng, ForwardCache* cache) {
  check_shapes(m);
  if (static_cast<int>(e_bits.size()) != m.input_dim())
    throw DimensionMismatch("input has length " +
                            std::to_string(e_bits.size()) + ", expected " +
                            std::to_string(m.input_dim()));
  const std::size_t L = m.layers.size();
  std::vector<double> a(e_bits.begin(), e_bits.end());
  if (cache) {
    cache->dims = m.dims;
    cache->activations.assign(1, a);
    cache->pre.clear();
    cache->dropout_mask.assign(L >= 1 ? L - 1 : 0, {});
  }
  for (std::size_t l = 0; l < L; ++l) {
    const MlpLayer& layer = m.layers[l];
    std::vector<double> z(layer.out);
    for (int o = 0; o < layer.out; ++o) {
      double acc = layer.b[o];
      const double* wrow = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) acc += wrow[i] * a[i];
      z[o] = acc;
    }
    if (cache) cache->pre.push_back(z);
    if (l + 1 < L) {
      for (double& x : z) x = x > 0 ? x : 0.0;
      if (mode == RunMode::Train && m.dropout_rate > 0.0) {
        if (!rng)
          throw InvalidSpec("Train-mode forward with dropout needs an rng");
        std::vector<double> mask(z.size());
        const double keep = 1.0 - m.dropout_rate;
        for (std::size_t i = 0; i < z.size(); ++i) {
          mask[i] = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
          z[i] *= mask[i];
        }
        if (cache) cache->dropout_mask[l] = std::move(mask);
      }
    } else {
      for (double& x : z) x = sigmoid_clamped(x);
    }
    a = std::move(z);
    if (cache) cache->activations.push_back(a);
  }
  return a;
}

Gradients backward(const MlpModel& m, const ForwardCache& cache,
                   std::span<const double> dL_dq) {
  check_shapes(m);
  const std::size_t L = m.layers.size();
  if (cache.dims != m.dims || cache.activations.size() != L + 1 ||
      cache.pre.size() != L)
    throw StaleCache("forward cache does not match the model");
  if (static_cast<int>(dL_dq.size()) != m.output_dim())
    throw DimensionMismatch("output gradient has wrong length");

  Gradients g = Gradients::zeros_like(m);
  const std::vector<double>& q = cache.activations.back();
  std::vector<double> delta(q.size());
  for (std::size_t i = 0; i < q.size(); ++i)
    delta[i] = dL_dq[i] * q[i] * (1.0 - q[i]);  // sigmoid chain

  for (std::size_t l = L; l-- > 0;) {
    const MlpLayer& layer = m.layers[l];
    const std::vector<double>& a_prev = cache.activations[l];
    for (int o = 0; o < layer.out; ++o) {
      double* gw = g.w[l].data() + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) gw[i] = delta[o] * a_prev[i];
      g.b[l][o] = delta[o];
    }
    if (l == 0) break;
    std::vector<double> prev(layer.in, 0.0);
    for (int o = 0; o < layer.out; ++o) {
      const double* wrow = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) prev[i] += wrow[i] * delta[o];
    }
    const std::vector<double>& mask = cache.dropout_mask[l - 1];
    if (!mask.empty())
      for (std::size_t i = 0; i < prev.size(); ++i) prev[i] *= mask[i];
    const std::vector<double>& z_prev = cache.pre[l - 1];
    for (std::size_t i = 0; i < prev.size(); ++i)
      if (!(z_prev[i] > 0)) prev[i] = 0.0;  // ReLU gate
    delta = std::move(prev);
  }
  return g;
}

double current_learning_rate(const TrainConfig& cfg, int epoch) {
  if (cfg.decay_interval <= 0) return cfg.learning_rate;
  return cfg.learning_rate *
         std::pow(cfg.lr_decay, epoch / cfg.decay_interval);
}

void adam_step(MlpModel& m, const Gradients& g, AdamState& state,
               const TrainConfig& cfg) {
  check_shapes(m);
  if (g.w.size() != m.layers.size() || state.mw.size() != m.layers.size())
    throw ShapeMismatch("gradient/state layer count does not match the model");
  state.step += 1;
  const double lr = current_learning_rate(cfg, state.epoch);
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, state.step);
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, state.step);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    if (g.w[l].size() != m.layers[l].w.size() ||
        g.b[l].size() != m.layers[l].b.size())
      throw ShapeMismatch("gradient shape does not match layer " +
                          std::to_string(l));
    auto update = [&](std::vector<double>& theta, const std::vector<double>& grad,
                      std::vector<double>& mm, std::vector<double>& vv) {
      for (std::size_t i = 0; i < theta.size(); ++i) {
        mm[i] = cfg.adam_beta1 * mm[i] + (1.0 - cfg.adam_beta1) * grad[i];
        vv[i] = cfg.adam_beta2 * vv[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
        const double mhat = mm[i] / bc1;
        const double vhat = vv[i] / bc2;
        theta[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
      }
    };
    update(m.layers[l].w, g.w[l], state.mw[l], state.vw[l]);
    update(m.layers[l].b, g.b[l], state.mb[l], state.vb[l]);
  }
}

namespace {

// Shared epoch driver. per_example computes loss parts and dL/dq for one row
// (given its Train-mode forward output); it may mark the example skipped.
template <typename Rows, typename PerExample>
TrainResult run_training(const Circuit& c, const VariablePartition& p,
                         const Rows& rows, const TrainConfig& cfg, int threads,
                         PerExample per_example) {
  std::vector<int> dims;
  dims.push_back(p.n());
  for (int h : cfg.hidden_dims) dims.push_back(h);
  dims.push_back(p.m());

  TrainResult result;
  result.model = init_model(dims, cfg.seed);
  result.model.dropout_rate = cfg.dropout_rate;
  result.model.meta_alpha = cfg.alpha;
  for (int v : p.evidence)
    result.model.meta_evidence.push_back(c.variables()[v]);
  for (int v : p.query) result.model.meta_query.push_back(c.variables()[v]);

  const int n = static_cast<int>(rows.size());
  if (n == 0) throw InvalidSpec("training needs at least one example");
  const int batch_size = std::max(1, cfg.batch_size);
  const int T = resolve_threads(threads);

  std::vector<const std::vector<std::uint8_t>*> row_ptrs;
  row_ptrs.reserve(n);
  for (int i = 0; i < n; ++i) row_ptrs.push_back(&rows[i].bits());

  AdamState adam = AdamState::zeros_like(result.model);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    adam.epoch = epoch;
    const std::vector<int> perm = shuffled_indices(
        n, SplitMix64::substream(cfg.seed,
                                 kShuffleStream + static_cast<std::uint64_t>(epoch)));
    double loss_sum = 0.0, nll_sum = 0.0, entropy_sum = 0.0;
    double grad_norm_sum = 0.0;
    int n_processed = 0, n_skipped = 0, n_batches = 0;

    for (int start = 0; start < n; start += batch_size) {
      const int bsz = std::min(batch_size, n - start);
      std::vector<ExampleResult> results(bsz);
#pragma omp parallel for schedule(static) num_threads(T)
      for (int k = 0; k < bsz; ++k) {
        const int row = perm[start + k];
        SplitMix64 rng = dropout_rng(cfg.seed, epoch, start + k);
        ExampleResult& res = results[k];
        SoftAssignment qc = forward(result.model, rows[row].bits(),
                                    RunMode::Train, &rng, &res.cache);
        per_example(row, qc, res);
      }
      Gradients batch_grad = Gradients::zeros_like(result.model);
      int n_ok = 0;
      for (int k = 0; k < bsz; ++k) {
        ExampleResult& res = results[k];
        if (res.skipped) {
          ++n_skipped;
          continue;
        }
        batch_grad.add(backward(result.model, res.cache, res.dl_dq));
        loss_sum += res.loss;
        nll_sum += res.nll;
        entropy_sum += res.entropy;
        ++n_ok;
      }
      n_processed += n_ok;
      if (n_ok > 0) {
        batch_grad.scale(1.0 / n_ok);
        grad_norm_sum += std::sqrt(batch_grad.squared_norm());
        ++n_batches;
        adam_step(result.model, batch_grad, adam, cfg);
      }
    }

    EpochStats stats;
    stats.n_processed = n_processed;
    stats.n_skipped = n_skipped;
    if (n_processed > 0) {
      stats.mean_loss = loss_sum / n_processed;
      stats.mean_nll = nll_sum / n_processed;
      stats.mean_entropy = entropy_sum / n_processed;
    }
    stats.grad_norm = n_batches > 0 ? grad_norm_sum / n_batches : 0.0;
    stats.val_mean_ll = mean_rounded_ll(c, p, result.model, row_ptrs, 200);
    result.history.push_back(stats);
  }
  return result;
}

struct DatasetRowView {
  const EvidenceDataset* data;
  int index;
  const std::vector<std::uint8_t>& bits() const { return data->rows[index]; }
};

struct LabeledRowView {
  const LabeledExample* ex;
  const std::vector<std::uint8_t>& bits() const { return ex->evidence_bits; }
};

}  // namespace

TrainResult train_ssmp(const Circuit& c, const VariablePartition& p,
                       const EvidenceDataset& data, const TrainConfig& cfg,
                       int threads) {
  if (data.variable_indices != p.evidence)
    throw InvalidPartition("dataset columns do not match the evidence set");
  std::vector<DatasetRowView> rows;
  rows.reserve(data.n());
  for (int i = 0; i < data.n(); ++i) rows.push_back({&data, i});

  return run_training(
      c, p, rows, cfg, threads,
      [&](int row, const SoftAssignment& qc, ExampleResult& res) {
        try {
          const QpcContext ctx(c, p, data.row_assignment(row));
          const LossValue lv = ctx.loss(qc, cfg.alpha);
          res.loss = lv.total;
          res.nll = lv.nll;
          res.entropy = lv.entropy_term;
          res.dl_dq = ctx.grad_loss(qc, cfg.alpha);
        } catch (const NonpositiveCircuitValue&) {
          res.skipped = true;
        }
      });
}

TrainResult train_supervised(const Circuit& c, const VariablePartition& p,
                             const std::vector<LabeledExample>& data,
                             SupervisedLoss loss_kind, const TrainConfig& cfg,
                             int threads) {
  for (const LabeledExample& ex : data) {
    if (static_cast<int>(ex.evidence_bits.size()) != p.n() ||
        static_cast<int>(ex.query_bits.size()) != p.m())
      throw DimensionMismatch("labeled example shape does not match partition");
  }
  std::vector<LabeledRowView> rows;
  rows.reserve(data.size());
  for (const LabeledExample& ex : data) rows.push_back({&ex});

  return run_training(
      c, p, rows, cfg, threads,
      [&](int row, const SoftAssignment& qc, ExampleResult& res) {
        const std::vector<std::uint8_t>& label = data[row].query_bits;
        res.dl_dq.resize(qc.size());
        double loss = 0.0;
        for (std::size_t j = 0; j < qc.size(); ++j) {
          const double diff = qc[j] - static_cast<double>(label[j]);
          if (loss_kind == SupervisedLoss::MSE) {
            loss += diff * diff;
            res.dl_dq[j] = 2.0 * diff;
          } else {
            loss += std::abs(diff);
            res.dl_dq[j] = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
          }
        }
        res.loss = loss;
        res.nll = loss;
        res.entropy = 0.0;
      });
}

AlphaCv cross_validate_alpha(const Circuit& c, const VariablePartition& p,
                             const EvidenceDataset& data,
                             std::span<const double> grid, int folds,
                             const TrainConfig& cfg, int threads) {
  if (grid.empty()) throw InvalidSpec("alpha grid must not be empty");
  if (folds < 2) throw InvalidSpec("cross validation needs at least 2 folds");
  const int n = data.n();
  if (folds > n) throw InvalidSpec("more folds than rows");

  const std::vector<int> perm =
      shuffled_indices(n, SplitMix64::substream(cfg.seed, kCvStream));
  auto fold_range = [&](int f) {
    return std::pair<int, int>{f * n / folds, (f + 1) * n / folds};
  };

  AlphaCv out;
  out.grid.assign(grid.begin(), grid.end());
  for (double alpha : grid) {
    double score_sum = 0.0;
    for (int f = 0; f < folds; ++f) {
      const auto [lo, hi] = fold_range(f);
      EvidenceDataset train_split;
      train_split.variables = data.variables;
      train_split.variable_indices = data.variable_indices;
      train_split.circuit_hash = data.circuit_hash;
      train_split.seed = data.seed;
      for (int i = 0; i < n; ++i)
        if (i < lo || i >= hi) train_split.rows.push_back(data.rows[perm[i]]);

      TrainConfig fold_cfg = cfg;
      fold_cfg.alpha = alpha;
      const TrainResult r = train_ssmp(c, p, train_split, fold_cfg, threads);

      double fold_sum = 0.0;
      for (int i = lo; i < hi; ++i) {
        const std::vector<std::uint8_t>& bits = data.rows[perm[i]];
        const SoftAssignment qc = forward(r.model, bits, RunMode::Eval);
        Assignment e = data.row_assignment(perm[i]);
        fold_sum += score(c, e, round_soft(qc, p.query));
      }
      score_sum += fold_sum / std::max(1, hi - lo);
    }
    out.mean_scores.push_back(score_sum / folds);
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < out.grid.size(); ++i) {
    if (out.mean_scores[i] > out.mean_scores[best] ||
        (out.mean_scores[i] == out.mean_scores[best] &&
         out.grid[i] < out.grid[best]))
      best = i;
  }
  out.best_alpha = out.grid[best];
  return out;
}

MmapSolution predict_mmap(const MlpModel& m, const MmapProblem& p) {
  const auto t0 = std::chrono::steady_clock::now();
  if (m.input_dim() != p.partition.n() || m.output_dim() != p.partition.m())
    throw DimensionMismatch("model dims do not match the problem partition");
  if (!m.meta_evidence.empty() || !m.meta_query.empty()) {
    const Circuit& c = *p.circuit;
    auto names = [&](const std::vector<int>& vars) {
      std::vector<std::string> out;
      for (int v : vars) out.push_back(c.variables()[v]);
      return out;
    };
    if (m.meta_evidence != names(p.partition.evidence) ||
        m.meta_query != names(p.partition.query))
      throw DimensionMismatch(
          "model was trained for a different evidence/query partition");
  }
  std::vector<std::uint8_t> bits(p.partition.n());
  for (std::size_t j = 0; j < p.partition.evidence.size(); ++j)
    bits[j] = *p.evidence.get(p.partition.evidence[j]) ? 1 : 0;
  const SoftAssignment qc = forward(m, bits, RunMode::Eval);
  MmapSolution out;
  out.q = round_soft(qc, p.partition.query);
  out.log_score = score(*p.circuit, p.evidence, out.q);
  out.method = "ssmp";
  out.elapsed = std::chrono::steady_clock::now() - t0;
  return out;
}

std::string model_to_json(const MlpModel& m) {
  nlohmann::json doc;
  doc["dims"] = m.dims;
  nlohmann::json layers = nlohmann::json::array();
  for (const MlpLayer& layer : m.layers) {
    nlohmann::json w = nlohmann::json::array();
    for (int o = 0; o < layer.out; ++o)
      w.push_back(std::vector<double>(
          layer.w.begin() + static_cast<std::size_t>(o) * layer.in,
          layer.w.begin() + static_cast<std::size_t>(o + 1) * layer.in));
    layers.push_back({{"w", std::move(w)}, {"b", layer.b}});
  }
  doc["layers"] = std::move(layers);
  doc["dropout"] = m.dropout_rate;
  doc["meta"] = {{"alpha", m.meta_alpha}, {"seed", m.meta_seed}};
  if (!m.meta_evidence.empty()) doc["meta"]["evidence"] = m.meta_evidence;
  if (!m.meta_query.empty()) doc["meta"]["query"] = m.meta_query;
  return doc.dump();
}

MlpModel model_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid model JSON: ") + e.what());
  }
  try {
    MlpModel m;
    m.dims = doc.at("dims").get<std::vector<int>>();
    if (m.dims.size() < 2) throw ParseError("model dims must be [N, ..., M]");
    for (const auto& layer_json : doc.at("layers")) {
      MlpLayer layer;
      const auto& w = layer_json.at("w");
      layer.out = static_cast<int>(w.size());
      layer.in = layer.out > 0 ? static_cast<int>(w.at(0).size()) : 0;
      for (const auto& row : w) {
        if (static_cast<int>(row.size()) != layer.in)
          throw ParseError("ragged weight matrix in model");
        for (const auto& x : row) layer.w.push_back(x.get<double>());
      }
      layer.b = layer_json.at("b").get<std::vector<double>>();
      m.layers.push_back(std::move(layer));
    }
    if (doc.contains("dropout")) m.dropout_rate = doc.at("dropout").get<double>();
    if (doc.contains("meta")) {
      const auto& meta = doc.at("meta");
      if (meta.contains("alpha")) m.meta_alpha = meta.at("alpha").get<double>();
      if (meta.contains("seed"))
        m.meta_seed = meta.at("seed").get<std::uint64_t>();
      if (meta.contains("evidence"))
        m.meta_evidence = meta.at("evidence").get<std::vector<std::string>>();
      if (meta.contains("query"))
        m.meta_query = meta.at("query").get<std::vector<std::string>>();
    }
    check_shapes(m);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed model document: ") + e.what());
  } catch (const ShapeMismatch& e) {
    throw ParseError(std::string("inconsistent model document: ") + e.what());
  }
}

MlpModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

}  // namespace pcmmap
