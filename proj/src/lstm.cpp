#include "chaos/lstm.hpp"

#include <cmath>
#include <stdexcept>

namespace chaos {

LstmParams LstmParams::zeros(int input_dim, int hidden_dim, int n_layers, int output_dim, int sequence_length) {
  if (input_dim < 1 || hidden_dim < 1 || n_layers < 1 || output_dim < 1 || sequence_length < 1) {
    throw std::invalid_argument("LSTM dimensions must be positive");
  }
  LstmParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.output_dim = output_dim;
  p.sequence_length = sequence_length;
  for (int l = 0; l < n_layers; ++l) {
    const int in = l == 0 ? input_dim : hidden_dim;
    p.layers.push_back({Eigen::MatrixXd::Zero(4 * hidden_dim, in), Eigen::MatrixXd::Zero(4 * hidden_dim, hidden_dim),
                        Eigen::VectorXd::Zero(4 * hidden_dim)});
  }
  p.head_weight = Eigen::MatrixXd::Zero(output_dim, hidden_dim);
  p.head_bias = Eigen::VectorXd::Zero(output_dim);
  return p;
}

LstmParams LstmParams::initial(int input_dim, int hidden_dim, int n_layers, int output_dim, int sequence_length,
                               std::mt19937_64& rng) {
  LstmParams p = zeros(input_dim, hidden_dim, n_layers, output_dim, sequence_length);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  std::uniform_real_distribution<double> uniform(-bound, bound);
  auto fill = [&](Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = uniform(rng);
  };
  for (auto& layer : p.layers) {
    fill(layer.w_input);
    fill(layer.w_hidden);
    layer.bias.segment(hidden_dim, hidden_dim).setOnes();
  }
  fill(p.head_weight);
  return p;
}

void validate(const LstmParams& p) {
  const int h = p.hidden_dim;
  if (p.layers.empty()) throw std::invalid_argument("LSTM needs at least one layer");
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& layer = p.layers[l];
    const int in = l == 0 ? p.input_dim : h;
    if (layer.w_input.rows() != 4 * h || layer.w_input.cols() != in || layer.w_hidden.rows() != 4 * h ||
        layer.w_hidden.cols() != h || layer.bias.size() != 4 * h) {
      throw std::invalid_argument("LSTM layer " + std::to_string(l) + " has inconsistent shapes");
    }
  }
  if (p.head_weight.rows() != p.output_dim || p.head_weight.cols() != h || p.head_bias.size() != p.output_dim) {
    throw std::invalid_argument("LSTM head has inconsistent shapes");
  }
}

namespace {

Eigen::ArrayXXd sigmoid_array(const Eigen::ArrayXXd& z) { return 1.0 / (1.0 + (-z).exp()); }

}  // namespace

LstmState lstm_step(const Eigen::Ref<const Eigen::MatrixXd>& x, const LstmState& state, const LstmLayer& layer) {
  const Eigen::Index h = state.h.rows();
  const Eigen::MatrixXd z =
      (layer.w_input * x + layer.w_hidden * state.h).colwise() + layer.bias;
  const Eigen::ArrayXXd i = sigmoid_array(z.middleRows(0, h).array());
  const Eigen::ArrayXXd f = sigmoid_array(z.middleRows(h, h).array());
  const Eigen::ArrayXXd g = z.middleRows(2 * h, h).array().tanh();
  const Eigen::ArrayXXd o = sigmoid_array(z.middleRows(3 * h, h).array());
  LstmState next;
  next.c = (f * state.c.array() + i * g).matrix();
  next.h = (o * next.c.array().tanh()).matrix();
  return next;
}

LstmVars bind(ad::Tape& tape, const LstmParams& params, const std::string& prefix) {
  validate(params);
  LstmVars v;
  v.hidden_dim = params.hidden_dim;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const std::string p = prefix + "." + std::to_string(l);
    const auto& layer = params.layers[l];
    v.layers.push_back({tape.parameter(p + ".w_input", layer.w_input),
                        tape.parameter(p + ".w_hidden", layer.w_hidden), tape.parameter(p + ".bias", layer.bias)});
  }
  v.head_weight = tape.parameter(prefix + ".head.weight", params.head_weight);
  v.head_bias = tape.parameter(prefix + ".head.bias", params.head_bias);
  return v;
}

LstmCellVars lstm_step(const LstmLayerVars& layer, ad::Var x, const LstmCellVars& state) {
  const Eigen::Index h = state.h.rows();
  const Eigen::Index batch = x.cols();
  const ad::Var z = ad::add(ad::add(ad::matmul(layer.w_input, x), ad::matmul(layer.w_hidden, state.h)),
                            ad::broadcast_cols(layer.bias, batch));
  const ad::Var i = ad::sigmoid(ad::rows(z, 0, h));
  const ad::Var f = ad::sigmoid(ad::rows(z, h, h));
  const ad::Var g = ad::tanh(ad::rows(z, 2 * h, h));
  const ad::Var o = ad::sigmoid(ad::rows(z, 3 * h, h));
  const ad::Var c = ad::add(ad::mul(f, state.c), ad::mul(i, g));
  return {ad::mul(o, ad::tanh(c)), c};
}

ad::Var forward(const LstmVars& lstm, const std::vector<ad::Var>& inputs) {
  if (inputs.empty()) throw std::invalid_argument("LSTM needs a non-empty input sequence");
  ad::Tape& tape = *inputs.front().tape();
  const Eigen::Index batch = inputs.front().cols();
  std::vector<ad::Var> sequence = inputs;
  for (const auto& layer : lstm.layers) {
    LstmCellVars state{tape.constant(Eigen::MatrixXd::Zero(lstm.hidden_dim, batch)),
                       tape.constant(Eigen::MatrixXd::Zero(lstm.hidden_dim, batch))};
    for (auto& x : sequence) {
      state = lstm_step(layer, x, state);
      x = state.h;
    }
  }
  const ad::Var logits = ad::add(ad::matmul(lstm.head_weight, sequence.back()),
                                 ad::broadcast_cols(lstm.head_bias, batch));
  return ad::sigmoid(logits);
}

std::vector<ad::Var> lstm_inputs(const LstmParams& params, ad::Var features,
                                 const Eigen::Ref<const Eigen::RowVectorXd>& mus, const EncoderVars* encoder) {
  std::vector<ad::Var> seq;
  const Eigen::Index n = features.rows();
  if (encoder != nullptr) {
    if (encoder->d != params.input_dim) throw std::invalid_argument("encoder dimension must equal LSTM input dim");
    if (n != params.sequence_length) throw std::invalid_argument("feature count does not match sequence length");
    const ad::Var mu_features = feature_map(features.tape()->constant(mus), encoder->theta, encoder->d);
    for (Eigen::Index t = 0; t < n; ++t) seq.push_back(encode(*encoder, ad::rows(features, t, 1), mu_features));
  } else {
    if (n != params.sequence_length * params.input_dim) {
      throw std::invalid_argument("feature count does not match sequence length x input dim");
    }
    for (int t = 0; t < params.sequence_length; ++t) {
      seq.push_back(ad::rows(features, t * params.input_dim, params.input_dim));
    }
  }
  return seq;
}

}  // namespace chaos
