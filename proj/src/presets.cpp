#include "chaos/presets.hpp"

#include "chaos/dataset.hpp"

#include <stdexcept>

namespace chaos {

namespace {

ExperimentPreset adqc(System system) {
  ExperimentPreset p;
  p.name = "adqc-" + to_string(system) + "-mu";
  p.system = system;
  p.kind = ModelKind::Adqc;
  p.window = default_window(system);
  p.n_sites = 8;
  return p;
}

ExperimentPreset lstm(System system, bool mu_tuned) {
  ExperimentPreset p;
  p.name = "lstm-" + to_string(system) + (mu_tuned ? "-mu" : "-raw");
  p.system = system;
  p.kind = ModelKind::Lstm;
  p.mu_tuned = mu_tuned;
  p.window = default_window(system);
  p.n_layers = 1;
  p.hidden_dim = 8;
  const int features = p.window * dimension(system);
  p.input_dim = mu_tuned ? p.d : dimension(system);
  p.sequence_length = mu_tuned ? features : p.window;
  return p;
}

}  // namespace

const std::vector<ExperimentPreset>& presets() {
  static const std::vector<ExperimentPreset> all = {
      adqc(System::Logistic1D),        adqc(System::Logistic2D),
      lstm(System::Logistic1D, false), lstm(System::Logistic1D, true),
      lstm(System::Logistic2D, false), lstm(System::Logistic2D, true),
  };
  return all;
}

const ExperimentPreset& find_preset(const std::string& name) {
  for (const auto& p : presets()) {
    if (p.name == name) return p;
  }
  throw std::invalid_argument("unknown preset '" + name + "'");
}

Checkpoint initialize(const ExperimentPreset& preset, std::uint64_t seed) {
  auto rng = make_stream(seed, 8);
  Checkpoint c;
  c.preset = preset.name;
  c.system = preset.system;
  c.window = preset.window;
  c.meta.seed = seed;
  if (preset.mu_tuned) c.encoder = EncoderParams::initial(preset.d, rng);
  if (preset.kind == ModelKind::Adqc) {
    c.model = AdqcParams::initial(CircuitLayout{preset.n_sites, preset.d, preset.n_layers}, rng);
  } else {
    c.model = LstmParams::initial(preset.input_dim, preset.hidden_dim, preset.n_layers, dimension(preset.system),
                                  preset.sequence_length, rng);
  }
  validate(c);
  return c;
}

}  // namespace chaos
