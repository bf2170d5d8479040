#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcmmap/circuit.hpp"
#include "pcmmap/mmap.hpp"
#include "pcmmap/qpc.hpp"
#include "pcmmap/sampler.hpp"

namespace pcmmap {

struct MlpLayer {
  int in = 0;
  int out = 0;
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;  // out
};

// Feed-forward network mapping evidence bits to a soft query assignment.
// ReLU hidden layers, sigmoid output (clamped to stay strictly inside (0,1)),
// inverted dropout so Eval mode needs no rescaling.
struct MlpModel {
  std::vector<int> dims;  // [N, h_1, ..., h_L, M]
  std::vector<MlpLayer> layers;
  double dropout_rate = 0.0;
  double meta_alpha = 0.0;
  std::uint64_t meta_seed = 0;
  // Variable names of the partition the model was trained for. When present,
  // predict_mmap refuses problems over a different partition: two partitions
  // can share (N, M) while meaning entirely different variables.
  std::vector<std::string> meta_evidence;
  std::vector<std::string> meta_query;

  int input_dim() const { return dims.front(); }
  int output_dim() const { return dims.back(); }
};

struct TrainConfig {
  std::vector<int> hidden_dims{32, 32};
  double alpha = 0.0;
  double learning_rate = 1e-3;
  double lr_decay = 0.9;
  int decay_interval = 10;  // epochs between decay steps
  int epochs = 50;
  int batch_size = 128;
  double dropout_rate = 0.0;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct EpochStats {
  double mean_loss = 0.0;
  double mean_nll = 0.0;
  double mean_entropy = 0.0;  // entropy_term averaged over processed examples
  double grad_norm = 0.0;     // mean L2 norm of the batch-mean gradient
  // Mean log-likelihood of rounded predictions over (a capped prefix of) the
  // training rows; -inf scores excluded from the mean.
  double val_mean_ll = 0.0;
  int n_processed = 0;
  int n_skipped = 0;
};
using TrainHistory = std::vector<EpochStats>;

enum class RunMode { Train, Eval };

struct ForwardCache {
  std::vector<int> dims;
  std::vector<std::vector<double>> activations;  // a[0]=input, a[L]=output
  std::vector<std::vector<double>> pre;          // z per layer
  std::vector<std::vector<double>> dropout_mask; // per hidden layer, scaled
};

struct Gradients {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;

  static Gradients zeros_like(const MlpModel& m);
  void add(const Gradients& g);
  void scale(double s);
  double squared_norm() const;
};

struct AdamState {
  std::vector<std::vector<double>> mw, vw, mb, vb;
  std::int64_t step = 0;
  int epoch = 0;

  static AdamState zeros_like(const MlpModel& m);
};

// Fan-in scaled uniform init: weights and biases ~ U(-1/sqrt(fan_in),
// 1/sqrt(fan_in)). Deterministic in the seed.
MlpModel init_model(const std::vector<int>& dims, std::uint64_t seed);

// rng is only consumed in Train mode with dropout_rate > 0.
SoftAssignment forward(const MlpModel& m, std::span<const std::uint8_t> e_bits,
                       RunMode mode, SplitMix64* rng = nullptr,
                       ForwardCache* cache = nullptr);

// Exact reverse-mode gradients of the scalar loss whose output gradient is
// dL_dq. Throws StaleCache if the cache does not match the model shape.
Gradients backward(const MlpModel& m, const ForwardCache& cache,
                   std::span<const double> dL_dq);

// Textbook Adam with bias correction; the learning rate is
// learning_rate * lr_decay^(epoch / decay_interval), from state.epoch.
void adam_step(MlpModel& m, const Gradients& g, AdamState& state,
               const TrainConfig& cfg);
double current_learning_rate(const TrainConfig& cfg, int epoch);

struct LabeledExample {
  std::vector<std::uint8_t> evidence_bits;
  std::vector<std::uint8_t> query_bits;
};

enum class SupervisedLoss { MSE, MAE };

struct TrainResult {
  MlpModel model;
  TrainHistory history;
};

// Self-supervised training: per minibatch, forward each evidence row, pull
// dL/dq^c out of the query-specific circuit, backprop through the network,
// Adam step on the batch mean. Examples whose evidence has probability 0
// under the circuit are skipped and counted. Deterministic in cfg.seed for
// any thread count.
TrainResult train_ssmp(const Circuit& c, const VariablePartition& p,
                       const EvidenceDataset& data, const TrainConfig& cfg,
                       int threads = 0);

TrainResult train_supervised(const Circuit& c, const VariablePartition& p,
                             const std::vector<LabeledExample>& data,
                             SupervisedLoss loss_kind, const TrainConfig& cfg,
                             int threads = 0);

struct AlphaCv {
  double best_alpha = 0.0;
  std::vector<double> grid;
  std::vector<double> mean_scores;  // one per grid entry
};

// Deterministic k-fold cross validation over the alpha grid; fold scores are
// mean validation log-likelihoods of rounded predictions. Ties prefer the
// smaller alpha.
AlphaCv cross_validate_alpha(const Circuit& c, const VariablePartition& p,
                             const EvidenceDataset& data,
                             std::span<const double> grid, int folds,
                             const TrainConfig& cfg, int threads = 0);

// Eval-mode forward, round with [q > 0.5] (ties to 0), score with the true
// circuit marginal.
MmapSolution predict_mmap(const MlpModel& m, const MmapProblem& p);

std::string model_to_json(const MlpModel& m);
MlpModel model_from_json(const std::string& text);
MlpModel load_model(const std::string& path);

}  // namespace pcmmap
