#pragma once

// Simulated variational circuit on a chain of qudits.
//
// Each encoded feature vector is normalised and placed on its own site; the
// product state is acted on by a brick wall of two-site gates, each the
// polar factor (U V^T) of an unconstrained latent matrix. Predictions are the
// probabilities of finding target sites in level 0.

#include "chaos/autodiff.hpp"
#include "chaos/dynamics.hpp"
#include "chaos/encoding.hpp"

#include <Eigen/Dense>

#include <random>
#include <stdexcept>
#include <vector>

namespace chaos {

class EmbeddingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GatePlacement {
  int layer = 0;  // 0-based
  int site = 0;   // acts on (site, site + 1), 0-based
};

/// Layer l (0-based) places gates on (0,1), (2,3), ... when l is even and on
/// (1,2), (3,4), ... when l is odd.
struct CircuitLayout {
  int n_sites = 8;
  int d = 3;
  int n_layers = 4;

  std::vector<GatePlacement> gates() const;
  std::size_t gate_count() const { return gates().size(); }
  Eigen::Index state_size() const;

  bool operator==(const CircuitLayout&) const = default;
};

void validate(const CircuitLayout& layout);

/// Row-major amplitudes: site 0 is the most significant index.
struct StateTensor {
  Eigen::VectorXd amplitudes;
  int n_sites = 0;
  int d = 0;
};

struct AdqcParams {
  CircuitLayout layout;
  std::vector<Eigen::MatrixXd> latent_gates;  // (d^2 x d^2), one per placement

  /// Identity plus N(0, 0.01^2) noise on every entry.
  static AdqcParams initial(const CircuitLayout& layout, std::mt19937_64& rng);
  static AdqcParams identity(const CircuitLayout& layout);

  bool operator==(const AdqcParams&) const = default;
};

void validate(const AdqcParams& params);

/// Readout sites: last site (1D), penultimate and last (2D).
std::vector<int> readout_sites(System system, int n_sites);

StateTensor embed(const Eigen::Ref<const Eigen::MatrixXd>& site_vectors);
Eigen::MatrixXd unitarize(const Eigen::Ref<const Eigen::MatrixXd>& latent);
StateTensor apply_circuit(const StateTensor& state, const std::vector<Eigen::MatrixXd>& latent_gates,
                          const CircuitLayout& layout);
/// Marginal probability of level 0 on each target, normalised by the total.
Eigen::VectorXd readout(const StateTensor& state, const std::vector<int>& targets);

/// Gates that can influence the targets, and the first site they touch.
/// Gates outside this cone cancel in the readout, so simulating sites
/// [first_site, n_sites) with only these gates is exact for product inputs.
struct LightCone {
  int first_site = 0;
  std::vector<std::size_t> gates;  // indices into layout.gates(), in order
};
LightCone light_cone(const CircuitLayout& layout, const std::vector<int>& targets);

/// Full dense pipeline: encode every feature, embed, run every gate, read out.
Eigen::VectorXd predict_dense(const Sample& sample, const EncoderParams& encoder, const AdqcParams& params,
                              System system);

struct AdqcVars {
  std::vector<ad::Var> latent;
  CircuitLayout layout;
};
AdqcVars bind(ad::Tape& tape, const AdqcParams& params, const std::string& prefix = "adqc.gate");

/// Batched, differentiable prediction over the light cone of the readout.
/// `features` is n_sites x B, `mus` has B entries; the result is |targets| x B.
ad::Var forward(const EncoderVars& enc, const AdqcVars& circuit, ad::Var features,
                const Eigen::Ref<const Eigen::RowVectorXd>& mus, const std::vector<int>& targets);

}  // namespace chaos
