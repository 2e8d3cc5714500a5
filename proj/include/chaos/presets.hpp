#pragma once

#include "chaos/dynamics.hpp"
#include "chaos/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace chaos {

/// Named experiment configurations, `{model}-{1d|2d}-{raw|mu}`.
struct ExperimentPreset {
  std::string name;
  System system = System::Logistic1D;
  ModelKind kind = ModelKind::Adqc;
  bool mu_tuned = true;
  int window = 8;           // M states per sample
  int d = 3;                // local / encoded dimension
  int n_layers = 4;         // circuit layers or stacked LSTM layers
  int n_sites = 8;          // circuit only
  int input_dim = 1;        // LSTM only
  int hidden_dim = 8;       // LSTM only
  int sequence_length = 8;  // LSTM only
};

const std::vector<ExperimentPreset>& presets();
/// Throws std::invalid_argument for unknown names.
const ExperimentPreset& find_preset(const std::string& name);

/// Freshly initialized, untrained checkpoint for the preset.
Checkpoint initialize(const ExperimentPreset& preset, std::uint64_t seed);

}  // namespace chaos
