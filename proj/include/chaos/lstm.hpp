#pragma once

// Stacked LSTM with a sigmoid read-out head.

#include "chaos/autodiff.hpp"
#include "chaos/encoding.hpp"

#include <Eigen/Dense>

#include <random>
#include <vector>

namespace chaos {

struct LstmLayer {
  // Gate blocks stacked in the order input, forget, cell, output.
  Eigen::MatrixXd w_input;   // 4H x d_in
  Eigen::MatrixXd w_hidden;  // 4H x H
  Eigen::VectorXd bias;      // 4H

  bool operator==(const LstmLayer&) const = default;
};

struct LstmParams {
  int input_dim = 1;
  int hidden_dim = 8;
  int output_dim = 1;
  int sequence_length = 8;
  std::vector<LstmLayer> layers;
  Eigen::MatrixXd head_weight;  // d_out x H
  Eigen::VectorXd head_bias;    // d_out

  int n_layers() const { return static_cast<int>(layers.size()); }

  /// Weights U(-1/sqrt(H), 1/sqrt(H)); biases zero except forget = 1.
  static LstmParams initial(int input_dim, int hidden_dim, int n_layers, int output_dim, int sequence_length,
                            std::mt19937_64& rng);
  static LstmParams zeros(int input_dim, int hidden_dim, int n_layers, int output_dim, int sequence_length);

  bool operator==(const LstmParams&) const = default;
};

void validate(const LstmParams& p);

struct LstmState {
  Eigen::MatrixXd h;  // H x B
  Eigen::MatrixXd c;  // H x B
};

/// One cell update for a single layer: i, f, o = sigmoid, g = tanh,
/// c' = f*c + i*g, h' = o*tanh(c').
LstmState lstm_step(const Eigen::Ref<const Eigen::MatrixXd>& x, const LstmState& state, const LstmLayer& layer);

struct LstmLayerVars {
  ad::Var w_input, w_hidden, bias;
};
struct LstmVars {
  std::vector<LstmLayerVars> layers;
  ad::Var head_weight, head_bias;
  int hidden_dim = 0;
};

LstmVars bind(ad::Tape& tape, const LstmParams& params, const std::string& prefix = "lstm");

struct LstmCellVars {
  ad::Var h, c;
};
LstmCellVars lstm_step(const LstmLayerVars& layer, ad::Var x, const LstmCellVars& state);

/// Runs the stack over `inputs` (each d_in x B) and applies the head to the
/// last hidden state: sigmoid(W h + b), d_out x B.
ad::Var forward(const LstmVars& lstm, const std::vector<ad::Var>& inputs);

/// Splits a feature block (n_features x B) into the model's input sequence.
/// Raw inputs take consecutive groups of `input_dim` rows; with an encoder,
/// every scalar feature becomes one encoded d-vector.
std::vector<ad::Var> lstm_inputs(const LstmParams& params, ad::Var features,
                                 const Eigen::Ref<const Eigen::RowVectorXd>& mus, const EncoderVars* encoder);

}  // namespace chaos
