#pragma once

// Uniform view over the three predictor kinds: the exact map itself (oracle),
// the simulated circuit, and the LSTM. Evaluation only talks to this layer.

#include "chaos/adqc.hpp"
#include "chaos/autodiff.hpp"
#include "chaos/dataset.hpp"
#include "chaos/encoding.hpp"
#include "chaos/lstm.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace chaos {

inline constexpr int kCheckpointSchema = 1;

enum class ModelKind { Oracle, Adqc, Lstm };
std::string to_string(ModelKind k);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OracleModel {
  bool operator==(const OracleModel&) const = default;
};

using ModelParams = std::variant<OracleModel, AdqcParams, LstmParams>;

struct TrainingMeta {
  std::uint64_t seed = 0;
  int epochs = 0;
  int best_epoch = 0;
  double final_train_rmse = 0.0;
  double final_test_rmse = 0.0;

  bool operator==(const TrainingMeta&) const = default;
};

struct Checkpoint {
  std::string preset;
  System system = System::Logistic1D;
  int window = 8;  // M states per sample
  double beta = kBeta2D;
  ModelParams model;
  std::optional<EncoderParams> encoder;
  TrainingMeta meta;

  ModelKind kind() const { return static_cast<ModelKind>(model.index()); }
  bool mu_tuned() const { return encoder.has_value(); }
  int dim() const { return dimension(system); }
  int feature_count() const { return window * dim(); }
  MapSpec map(double mu) const;

  static Checkpoint oracle(System system);

  bool operator==(const Checkpoint&) const = default;
};

void validate(const Checkpoint& ckpt);

/// Trainable parameters by name ("encoder.theta", "adqc.gate.3", ...).
ad::ParamMap parameters(const Checkpoint& ckpt);
void assign(Checkpoint& ckpt, const ad::ParamMap& params);

/// Records the model on `tape`. `features` is (M * dim) x B; returns dim x B.
/// Throws for the oracle, which has nothing to differentiate.
ad::Var forward(ad::Tape& tape, const Checkpoint& ckpt, ad::Var features,
                const Eigen::Ref<const Eigen::RowVectorXd>& mus);

/// Next-state predictions for a batch of windows.
Eigen::MatrixXd predict_batch(const Checkpoint& ckpt, const Eigen::Ref<const Eigen::MatrixXd>& features,
                              const Eigen::Ref<const Eigen::RowVectorXd>& mus);

/// Jacobian of each prediction with respect to the latest state of its
/// window: (dim*dim) x B, column b holding J_b in column-major order.
Eigen::MatrixXd derivative_batch(const Checkpoint& ckpt, const Eigen::Ref<const Eigen::MatrixXd>& features,
                                 const Eigen::Ref<const Eigen::RowVectorXd>& mus);

Eigen::VectorXd predict_window(const Checkpoint& ckpt, const Eigen::Ref<const Eigen::VectorXd>& window,
                               double mu);
Eigen::MatrixXd derivative_window(const Checkpoint& ckpt, const Eigen::Ref<const Eigen::VectorXd>& window,
                                  double mu);

/// True when mu lies outside the span of the grid the model was trained on.
bool is_extrapolation(const std::vector<double>& grid, double mu);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace chaos
