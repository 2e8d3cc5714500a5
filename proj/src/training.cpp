#include "chaos/training.hpp"

#include "chaos/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>

namespace chaos {

double rmse(const Eigen::Ref<const Eigen::MatrixXd>& preds, const Eigen::Ref<const Eigen::MatrixXd>& labels) {
  if (preds.size() == 0) throw std::invalid_argument("rmse of an empty set");
  if (preds.rows() != labels.rows() || preds.cols() != labels.cols()) {
    throw std::invalid_argument("rmse: prediction/label shape mismatch");
  }
  return std::sqrt((preds - labels).squaredNorm() / static_cast<double>(preds.size()));
}

namespace {

Batch slice(const Batch& b, Eigen::Index start, Eigen::Index count) {
  return {b.features.middleCols(start, count), b.labels.middleCols(start, count), b.mus.segment(start, count)};
}

double squared_error_gradient(const Checkpoint& ckpt, const Batch& shard, ad::Gradients& grads) {
  ad::Tape tape;
  const ad::Var y = forward(tape, ckpt, tape.constant(shard.features), shard.mus);
  const ad::Var sse = ad::sum(ad::square(ad::sub(y, tape.constant(shard.labels))));
  grads = tape.backward(sse);
  return sse.scalar();
}

}  // namespace

LossGradient rmse_gradient(const Checkpoint& ckpt, const Batch& batch, int threads, int shard_size) {
  if (batch.size() == 0) throw std::invalid_argument("rmse_gradient on an empty batch");
  shard_size = std::max(1, shard_size);
  const Eigen::Index n = batch.size();
  const auto shards = static_cast<std::size_t>((n + shard_size - 1) / shard_size);
  std::vector<ad::Gradients> grads(shards);
  std::vector<double> sse(shards, 0.0);
  parallel_for(shards, threads, [&](std::size_t s) {
    const Eigen::Index start = static_cast<Eigen::Index>(s) * shard_size;
    const Eigen::Index count = std::min<Eigen::Index>(shard_size, n - start);
    sse[s] = squared_error_gradient(ckpt, slice(batch, start, count), grads[s]);
  });
  LossGradient out;
  double total = 0.0;
  for (std::size_t s = 0; s < shards; ++s) {
    total += sse[s];
    for (auto& [name, g] : grads[s]) {
      auto [it, inserted] = out.gradients.emplace(name, g);
      if (!inserted) it->second += g;
    }
  }
  const double scalars = static_cast<double>(batch.labels.size());
  out.rmse = std::sqrt(total / scalars);
  const double factor = out.rmse > 0.0 ? 1.0 / (2.0 * scalars * out.rmse) : 0.0;
  for (auto& [name, g] : out.gradients) g *= factor;
  return out;
}

double evaluate_rmse(const Checkpoint& ckpt, const Batch& batch, int chunk) {
  if (batch.size() == 0) throw std::invalid_argument("evaluate_rmse on an empty batch");
  double sse = 0.0;
  for (Eigen::Index start = 0; start < batch.size(); start += chunk) {
    const Eigen::Index count = std::min<Eigen::Index>(chunk, batch.size() - start);
    const Batch b = slice(batch, start, count);
    sse += (predict_batch(ckpt, b.features, b.mus) - b.labels).squaredNorm();
  }
  return std::sqrt(sse / static_cast<double>(batch.labels.size()));
}

void Optimizer::step(ad::ParamMap& params, const ad::Gradients& grads) {
  ++t_;
  for (auto& [name, p] : params) {
    auto it = grads.find(name);
    if (it == grads.end()) continue;
    const Eigen::MatrixXd& g = it->second;
    if (config_.optimizer == OptimizerKind::Sgd) {
      p -= config_.learning_rate * g;
      continue;
    }
    auto& m = first_[name];
    auto& v = second_[name];
    if (m.size() == 0) {
      m = Eigen::MatrixXd::Zero(p.rows(), p.cols());
      v = Eigen::MatrixXd::Zero(p.rows(), p.cols());
    }
    m = config_.beta1 * m + (1.0 - config_.beta1) * g;
    v = config_.beta2 * v + (1.0 - config_.beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(config_.beta1, t_);
    const double c2 = 1.0 - std::pow(config_.beta2, t_);
    p.array() -= config_.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + config_.epsilon);
  }
}

TrainResult train(Checkpoint initial, const Dataset& train_pool, const Dataset& test, const TrainConfig& config) {
  if (!(config.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (config.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (config.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  validate(initial);
  if (initial.kind() == ModelKind::Oracle) throw std::invalid_argument("the oracle model is not trainable");
  if (train_pool.system != initial.system || test.system != initial.system) {
    throw std::invalid_argument("dataset system does not match model");
  }
  if (train_pool.window != initial.window || test.window != initial.window) {
    throw std::invalid_argument("dataset window does not match model");
  }

  const Dataset ds = subsample_per_mu(train_pool, config.samples_per_mu, config.seed);
  const Batch test_batch = to_batch(test);
  const std::size_t n = ds.samples.size();
  if (n == 0) throw std::invalid_argument("empty training set");

  Checkpoint current = std::move(initial);
  current.meta.seed = config.seed;
  ad::ParamMap params = parameters(current);
  Optimizer optimizer(config);
  auto rng = make_stream(config.seed, 4);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  result.checkpoint = current;
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  const auto t0 = std::chrono::steady_clock::now();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sse = 0.0, norm_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t count = std::min<std::size_t>(config.batch_size, n - start);
      const Batch batch = to_batch(ds.samples, std::span(order).subspan(start, count));
      const LossGradient lg = rmse_gradient(current, batch, config.threads, config.shard_size);
      if (!std::isfinite(lg.rmse)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batches));
      }
      double norm2 = 0.0;
      for (const auto& [name, g] : lg.gradients) {
        if (!g.allFinite()) throw ad::NonFiniteGradient(name);
        norm2 += g.squaredNorm();
      }
      optimizer.step(params, lg.gradients);
      assign(current, params);
      sse += lg.rmse * lg.rmse * static_cast<double>(batch.labels.size());
      norm_sum += std::sqrt(norm2);
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_rmse = std::sqrt(sse / static_cast<double>(n * current.dim()));
    rec.test_rmse = evaluate_rmse(current, test_batch);
    if (!std::isfinite(rec.test_rmse)) throw TrainingError("non-finite test loss at epoch " + std::to_string(epoch));
    rec.grad_norm = norm_sum / static_cast<double>(batches);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.epochs.push_back(rec);
    if (config.progress) {
      *config.progress << "epoch " << epoch << " train L " << rec.train_rmse << " test L " << rec.test_rmse
                       << " |g| " << rec.grad_norm << " (" << std::fixed << std::setprecision(1) << rec.seconds
                       << " s)" << std::defaultfloat << std::setprecision(6) << '\n';
    }
    if (rec.test_rmse < best) {
      best = rec.test_rmse;
      stale = 0;
      result.checkpoint = current;
      result.checkpoint.meta.best_epoch = epoch;
      result.checkpoint.meta.final_train_rmse = rec.train_rmse;
      result.checkpoint.meta.final_test_rmse = rec.test_rmse;
      result.log.best_epoch = epoch;
      result.log.best_test_rmse = rec.test_rmse;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  result.checkpoint.meta.epochs = static_cast<int>(result.log.epochs.size());
  return result;
}

void write_log_csv(const TrainLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::ios_base::failure("cannot open '" + path.string() + "' for writing");
  out << "epoch,L_train,L_test,grad_norm,seconds\n" << std::setprecision(17);
  for (const auto& r : log.epochs) {
    out << r.epoch << ',' << r.train_rmse << ',' << r.test_rmse << ',' << r.grad_norm << ',' << r.seconds << '\n';
  }
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::vector<SweepPoint> sweep(const SweepSpec& spec, const Dataset& train_pool, const Dataset& test) {
  if (spec.values.empty() || spec.seeds.empty()) throw std::invalid_argument("sweep needs values and seeds");
  const std::size_t runs = spec.values.size() * spec.seeds.size();
  std::vector<double> rmses(runs), scores(runs);
  parallel_for(runs, spec.threads, [&](std::size_t r) {
    const double value = spec.values[r / spec.seeds.size()];
    const std::uint64_t seed = spec.seeds[r % spec.seeds.size()];
    TrainConfig cfg = spec.config;
    cfg.seed = seed;
    cfg.threads = 1;
    const TrainResult res = train(spec.make_model(value, seed), train_pool, test, cfg);
    rmses[r] = res.log.best_test_rmse;
    scores[r] = spec.scorer ? spec.scorer(res.checkpoint) : std::numeric_limits<double>::quiet_NaN();
  });
  std::vector<SweepPoint> points;
  for (std::size_t v = 0; v < spec.values.size(); ++v) {
    SweepPoint p;
    p.value = spec.values[v];
    for (std::size_t s = 0; s < spec.seeds.size(); ++s) {
      p.rmse.push_back(rmses[v * spec.seeds.size() + s]);
      p.score.push_back(scores[v * spec.seeds.size() + s]);
    }
    p.rmse_mean = mean(p.rmse);
    p.rmse_std = sample_std(p.rmse);
    p.score_mean = mean(p.score);
    p.score_std = sample_std(p.score);
    points.push_back(std::move(p));
  }
  return points;
}

void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& axis,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::ios_base::failure("cannot open '" + path.string() + "' for writing");
  out << axis << ",L_mean,L_std,L_LE_mean,L_LE_std,runs\n" << std::setprecision(10);
  for (const auto& p : points) {
    out << p.value << ',' << p.rmse_mean << ',' << p.rmse_std << ',' << p.score_mean << ',' << p.score_std << ','
        << p.rmse.size() << '\n';
  }
}

}  // namespace chaos
