#include "chaos/model.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>

namespace chaos {

using nlohmann::json;

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Oracle: return "oracle";
    case ModelKind::Adqc: return "adqc";
    case ModelKind::Lstm: return "lstm";
  }
  return "unknown";
}

MapSpec Checkpoint::map(double mu) const {
  return system == System::Logistic1D ? MapSpec::logistic1d(mu) : MapSpec::logistic2d(mu, beta);
}

Checkpoint Checkpoint::oracle(System system) {
  Checkpoint c;
  c.preset = "oracle-" + to_string(system);
  c.system = system;
  c.window = default_window(system);
  c.model = OracleModel{};
  return c;
}

void validate(const Checkpoint& ckpt) {
  if (ckpt.window < 1) throw CheckpointError("checkpoint window must be >= 1");
  if (ckpt.encoder) validate(*ckpt.encoder);
  if (const auto* a = std::get_if<AdqcParams>(&ckpt.model)) {
    validate(*a);
    if (!ckpt.encoder) throw CheckpointError("circuit models need an encoder");
    if (a->layout.n_sites != ckpt.feature_count()) throw CheckpointError("circuit sites must equal feature count");
    if (ckpt.encoder->dim() != a->layout.d) throw CheckpointError("encoder dimension must match circuit");
  } else if (const auto* l = std::get_if<LstmParams>(&ckpt.model)) {
    validate(*l);
    if (l->output_dim != ckpt.dim()) throw CheckpointError("LSTM output dim must equal system dimension");
    const int expected = ckpt.encoder ? ckpt.feature_count() : ckpt.window;
    if (l->sequence_length != expected) throw CheckpointError("LSTM sequence length does not match window");
    if (!ckpt.encoder && l->input_dim != ckpt.dim()) throw CheckpointError("raw LSTM input dim must equal system dim");
  }
}

ad::ParamMap parameters(const Checkpoint& ckpt) {
  ad::ParamMap p;
  if (ckpt.encoder) {
    p["encoder.theta"] = Eigen::MatrixXd::Constant(1, 1, ckpt.encoder->theta);
    p["encoder.T"] = ckpt.encoder->tensor;
  }
  if (const auto* a = std::get_if<AdqcParams>(&ckpt.model)) {
    for (std::size_t g = 0; g < a->latent_gates.size(); ++g) {
      p["adqc.gate." + std::to_string(g)] = a->latent_gates[g];
    }
  } else if (const auto* l = std::get_if<LstmParams>(&ckpt.model)) {
    for (std::size_t k = 0; k < l->layers.size(); ++k) {
      const std::string pre = "lstm." + std::to_string(k);
      p[pre + ".w_input"] = l->layers[k].w_input;
      p[pre + ".w_hidden"] = l->layers[k].w_hidden;
      p[pre + ".bias"] = l->layers[k].bias;
    }
    p["lstm.head.weight"] = l->head_weight;
    p["lstm.head.bias"] = l->head_bias;
  }
  return p;
}

void assign(Checkpoint& ckpt, const ad::ParamMap& params) {
  auto take = [&](const std::string& name, auto& target) {
    auto it = params.find(name);
    if (it == params.end()) throw CheckpointError("missing parameter '" + name + "'");
    if (it->second.rows() != target.rows() || it->second.cols() != target.cols()) {
      throw CheckpointError("shape mismatch for parameter '" + name + "'");
    }
    target = it->second;
  };
  if (ckpt.encoder) {
    Eigen::MatrixXd theta(1, 1);
    take("encoder.theta", theta);
    ckpt.encoder->theta = theta(0, 0);
    take("encoder.T", ckpt.encoder->tensor);
  }
  if (auto* a = std::get_if<AdqcParams>(&ckpt.model)) {
    for (std::size_t g = 0; g < a->latent_gates.size(); ++g) take("adqc.gate." + std::to_string(g), a->latent_gates[g]);
  } else if (auto* l = std::get_if<LstmParams>(&ckpt.model)) {
    for (std::size_t k = 0; k < l->layers.size(); ++k) {
      const std::string pre = "lstm." + std::to_string(k);
      take(pre + ".w_input", l->layers[k].w_input);
      take(pre + ".w_hidden", l->layers[k].w_hidden);
      take(pre + ".bias", l->layers[k].bias);
    }
    take("lstm.head.weight", l->head_weight);
    take("lstm.head.bias", l->head_bias);
  }
}

ad::Var forward(ad::Tape& tape, const Checkpoint& ckpt, ad::Var features,
                const Eigen::Ref<const Eigen::RowVectorXd>& mus) {
  if (features.rows() != ckpt.feature_count()) throw CheckpointError("window length does not match checkpoint");
  if (features.cols() != mus.size()) throw CheckpointError("one mu per window required");
  std::optional<EncoderVars> enc;
  if (ckpt.encoder) enc = bind(tape, *ckpt.encoder);
  if (const auto* a = std::get_if<AdqcParams>(&ckpt.model)) {
    if (!enc) throw CheckpointError("circuit models need an encoder");
    const AdqcVars circuit = bind(tape, *a);
    return forward(*enc, circuit, features, mus, readout_sites(ckpt.system, a->layout.n_sites));
  }
  if (const auto* l = std::get_if<LstmParams>(&ckpt.model)) {
    const LstmVars vars = bind(tape, *l);
    return forward(vars, lstm_inputs(*l, features, mus, enc ? &*enc : nullptr));
  }
  throw CheckpointError("the oracle model has no differentiable forward pass");
}

Eigen::MatrixXd predict_batch(const Checkpoint& ckpt, const Eigen::Ref<const Eigen::MatrixXd>& features,
                              const Eigen::Ref<const Eigen::RowVectorXd>& mus) {
  const int dim = ckpt.dim();
  if (features.rows() != ckpt.feature_count()) throw CheckpointError("window length does not match checkpoint");
  if (features.cols() != mus.size()) throw CheckpointError("one mu per window required");
  if (ckpt.kind() == ModelKind::Oracle) {
    Eigen::MatrixXd out(dim, features.cols());
    for (Eigen::Index b = 0; b < features.cols(); ++b) {
      out.col(b) = step(ckpt.map(mus(b)), features.col(b).tail(dim));
    }
    return out;
  }
  ad::Tape tape(false);
  return forward(tape, ckpt, tape.constant(features), mus).value();
}

Eigen::MatrixXd derivative_batch(const Checkpoint& ckpt, const Eigen::Ref<const Eigen::MatrixXd>& features,
                                 const Eigen::Ref<const Eigen::RowVectorXd>& mus) {
  const int dim = ckpt.dim();
  const Eigen::Index batch = features.cols();
  if (features.rows() != ckpt.feature_count()) throw CheckpointError("window length does not match checkpoint");
  if (batch != mus.size()) throw CheckpointError("one mu per window required");
  Eigen::MatrixXd out(dim * dim, batch);
  if (ckpt.kind() == ModelKind::Oracle) {
    for (Eigen::Index b = 0; b < batch; ++b) {
      const Eigen::MatrixXd j = jacobian(ckpt.map(mus(b)), features.col(b).tail(dim));
      out.col(b) = Eigen::Map<const Eigen::VectorXd>(j.data(), dim * dim);
    }
    return out;
  }
  ad::Tape tape(false);
  const ad::Var x = tape.input(features);
  const ad::Var y = forward(tape, ckpt, x, mus);
  const Eigen::Index last = features.rows() - dim;
  for (int r = 0; r < dim; ++r) {
    Eigen::MatrixXd seed = Eigen::MatrixXd::Zero(dim, batch);
    seed.row(r).setOnes();
    tape.backward(y, seed);
    const Eigen::MatrixXd adj = tape.adjoint(x);
    // Column-major J: entry (r, c) lives at c * dim + r.
    for (int c = 0; c < dim; ++c) out.row(c * dim + r) = adj.row(last + c);
  }
  return out;
}

Eigen::VectorXd predict_window(const Checkpoint& ckpt, const Eigen::Ref<const Eigen::VectorXd>& window, double mu) {
  return predict_batch(ckpt, window, Eigen::RowVectorXd::Constant(1, mu)).col(0);
}

Eigen::MatrixXd derivative_window(const Checkpoint& ckpt, const Eigen::Ref<const Eigen::VectorXd>& window,
                                  double mu) {
  const int dim = ckpt.dim();
  const Eigen::VectorXd flat = derivative_batch(ckpt, window, Eigen::RowVectorXd::Constant(1, mu)).col(0);
  return Eigen::Map<const Eigen::MatrixXd>(flat.data(), dim, dim);
}

bool is_extrapolation(const std::vector<double>& grid, double mu) {
  if (grid.empty()) return true;
  const auto [lo, hi] = std::minmax_element(grid.begin(), grid.end());
  return mu < *lo || mu > *hi;
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw CheckpointError("matrix payload size mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

json to_json(const Checkpoint& c) {
  json j = {{"schema", kCheckpointSchema}, {"kind", to_string(c.kind())}, {"preset", c.preset},
            {"system", to_string(c.system)}, {"M", c.window}, {"beta", c.beta}};
  j["training"] = {{"seed", c.meta.seed},
                   {"epochs", c.meta.epochs},
                   {"best_epoch", c.meta.best_epoch},
                   {"final_train_L", c.meta.final_train_rmse},
                   {"final_test_L", c.meta.final_test_rmse}};
  if (c.encoder) {
    j["encoder"] = {{"d", c.encoder->dim()}, {"theta", c.encoder->theta}, {"T", matrix_to_json(c.encoder->tensor)}};
  } else {
    j["encoder"] = nullptr;
  }
  if (const auto* a = std::get_if<AdqcParams>(&c.model)) {
    j["layout"] = {{"n_sites", a->layout.n_sites}, {"d", a->layout.d}, {"n_layers", a->layout.n_layers}};
    json gates = json::array();
    for (const auto& g : a->latent_gates) gates.push_back(matrix_to_json(g));
    j["latent_gates"] = gates;
  } else if (const auto* l = std::get_if<LstmParams>(&c.model)) {
    json layers = json::array();
    for (const auto& layer : l->layers) {
      layers.push_back({{"w_input", matrix_to_json(layer.w_input)},
                        {"w_hidden", matrix_to_json(layer.w_hidden)},
                        {"bias", matrix_to_json(layer.bias)}});
    }
    j["lstm"] = {{"input_dim", l->input_dim},
                 {"hidden_dim", l->hidden_dim},
                 {"output_dim", l->output_dim},
                 {"sequence_length", l->sequence_length},
                 {"layers", layers},
                 {"head_weight", matrix_to_json(l->head_weight)},
                 {"head_bias", matrix_to_json(l->head_bias)}};
  }
  return j;
}

Checkpoint from_json(const json& j) {
  const int schema = j.at("schema").get<int>();
  if (schema != kCheckpointSchema) throw CheckpointError("unsupported checkpoint schema " + std::to_string(schema));
  Checkpoint c;
  c.preset = j.value("preset", std::string{});
  c.system = system_from_string(j.at("system").get<std::string>());
  c.window = j.at("M").get<int>();
  c.beta = j.value("beta", kBeta2D);
  const json& t = j.at("training");
  c.meta = {t.at("seed").get<std::uint64_t>(), t.at("epochs").get<int>(), t.at("best_epoch").get<int>(),
            t.at("final_train_L").get<double>(), t.at("final_test_L").get<double>()};
  if (!j.at("encoder").is_null()) {
    const json& e = j.at("encoder");
    c.encoder = EncoderParams{e.at("theta").get<double>(), matrix_from_json(e.at("T"))};
  }
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "oracle") {
    c.model = OracleModel{};
  } else if (kind == "adqc") {
    AdqcParams a;
    const json& lay = j.at("layout");
    a.layout = {lay.at("n_sites").get<int>(), lay.at("d").get<int>(), lay.at("n_layers").get<int>()};
    for (const json& g : j.at("latent_gates")) a.latent_gates.push_back(matrix_from_json(g));
    c.model = std::move(a);
  } else if (kind == "lstm") {
    const json& s = j.at("lstm");
    LstmParams l;
    l.input_dim = s.at("input_dim").get<int>();
    l.hidden_dim = s.at("hidden_dim").get<int>();
    l.output_dim = s.at("output_dim").get<int>();
    l.sequence_length = s.at("sequence_length").get<int>();
    for (const json& layer : s.at("layers")) {
      l.layers.push_back({matrix_from_json(layer.at("w_input")), matrix_from_json(layer.at("w_hidden")),
                          matrix_from_json(layer.at("bias"))});
    }
    l.head_weight = matrix_from_json(s.at("head_weight"));
    l.head_bias = matrix_from_json(s.at("head_bias"));
    c.model = std::move(l);
  } else {
    throw CheckpointError("unknown checkpoint kind '" + kind + "'");
  }
  validate(c);
  return c;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  validate(ckpt);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::ios_base::failure("cannot open '" + path.string() + "' for writing");
  out << to_json(ckpt).dump(1) << '\n';
  if (!out) throw std::ios_base::failure("write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open checkpoint '" + path.string() + "'");
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace chaos
