#pragma once

#include "chaos/autodiff.hpp"
#include "chaos/dataset.hpp"
#include "chaos/model.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace chaos {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OptimizerKind { Adam, Sgd };

struct TrainConfig {
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 400;
  int batch_size = 500;
  /// Stop once the test loss has not improved for this many epochs.
  int patience = 50;
  int samples_per_mu = 2000;
  std::uint64_t seed = 0;
  int threads = 1;
  /// Gradient shards are fixed-size so results do not depend on `threads`.
  int shard_size = 125;
  std::ostream* progress = nullptr;
};

struct EpochRecord {
  int epoch = 0;
  double train_rmse = 0.0;  // running value over the epoch's batches
  double test_rmse = 0.0;
  double grad_norm = 0.0;   // mean over batches
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_test_rmse = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;  // parameters of the best test epoch
  TrainLog log;
};

/// sqrt(mean((pred - label)^2)) over every scalar entry.
double rmse(const Eigen::Ref<const Eigen::MatrixXd>& preds, const Eigen::Ref<const Eigen::MatrixXd>& labels);

struct LossGradient {
  double rmse = 0.0;
  ad::Gradients gradients;
};

/// RMSE over the batch and its gradient. Shards accumulate the sum of squared
/// errors, which is additive; the chain rule through the square root is
/// applied after the reduction.
LossGradient rmse_gradient(const Checkpoint& ckpt, const Batch& batch, int threads = 1, int shard_size = 125);

/// Forward-only RMSE of a checkpoint on a batch, chunked to bound memory.
double evaluate_rmse(const Checkpoint& ckpt, const Batch& batch, int chunk = 5000);

class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& config) : config_(config) {}
  void step(ad::ParamMap& params, const ad::Gradients& grads);

 private:
  TrainConfig config_;
  ad::ParamMap first_, second_;
  int t_ = 0;
};

/// Mini-batch descent over all mu values pooled together. `train_pool` is
/// subsampled to `samples_per_mu` per mu with the config seed.
TrainResult train(Checkpoint initial, const Dataset& train_pool, const Dataset& test, const TrainConfig& config);

void write_log_csv(const TrainLog& log, const std::filesystem::path& path);

/// One sweep point per value, `seeds` independent runs each.
struct SweepPoint {
  double value = 0.0;
  std::vector<double> rmse;   // per seed
  std::vector<double> score;  // per seed, from the scorer (e.g. L_LE)
  double rmse_mean = 0.0, rmse_std = 0.0, score_mean = 0.0, score_std = 0.0;
};

struct SweepSpec {
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;
  /// Builds the initial model for (value, seed).
  std::function<Checkpoint(double value, std::uint64_t seed)> make_model;
  std::function<double(const Checkpoint&)> scorer;
  TrainConfig config;
  int threads = 1;
};

std::vector<SweepPoint> sweep(const SweepSpec& spec, const Dataset& train_pool, const Dataset& test);

/// Sample standard deviation; NaN for fewer than two values.
double sample_std(const std::vector<double>& v);
double mean(const std::vector<double>& v);

void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& axis,
                     const std::filesystem::path& path);

}  // namespace chaos
