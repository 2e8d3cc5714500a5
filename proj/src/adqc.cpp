#include "chaos/adqc.hpp"

#include <algorithm>
#include <set>

namespace chaos {

namespace {

Eigen::Index ipow(Eigen::Index base, int exp) {
  Eigen::Index r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

}  // namespace

std::vector<GatePlacement> CircuitLayout::gates() const {
  std::vector<GatePlacement> out;
  for (int l = 0; l < n_layers; ++l) {
    for (int s = l % 2; s + 1 < n_sites; s += 2) out.push_back({l, s});
  }
  return out;
}

Eigen::Index CircuitLayout::state_size() const { return ipow(d, n_sites); }

void validate(const CircuitLayout& layout) {
  if (layout.n_sites < 2) throw std::invalid_argument("circuit needs at least two sites");
  if (layout.d < 2) throw std::invalid_argument("circuit local dimension must be >= 2");
  if (layout.n_layers < 1) throw std::invalid_argument("circuit needs at least one layer");
}

AdqcParams AdqcParams::identity(const CircuitLayout& layout) {
  validate(layout);
  const Eigen::Index q = layout.d * layout.d;
  return {layout, std::vector<Eigen::MatrixXd>(layout.gate_count(), Eigen::MatrixXd::Identity(q, q))};
}

AdqcParams AdqcParams::initial(const CircuitLayout& layout, std::mt19937_64& rng) {
  AdqcParams p = identity(layout);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (auto& g : p.latent_gates) {
    for (Eigen::Index i = 0; i < g.size(); ++i) g(i) += noise(rng);
  }
  return p;
}

void validate(const AdqcParams& params) {
  validate(params.layout);
  if (params.latent_gates.size() != params.layout.gate_count()) {
    throw std::invalid_argument("latent gate count does not match layout");
  }
  const Eigen::Index q = params.layout.d * params.layout.d;
  for (const auto& g : params.latent_gates) {
    if (g.rows() != q || g.cols() != q) throw std::invalid_argument("latent gate must be d^2 x d^2");
    if (!g.allFinite()) throw std::invalid_argument("non-finite latent gate");
  }
}

std::vector<int> readout_sites(System system, int n_sites) {
  if (system == System::Logistic1D) return {n_sites - 1};
  return {n_sites - 2, n_sites - 1};
}

StateTensor embed(const Eigen::Ref<const Eigen::MatrixXd>& site_vectors) {
  const auto d = static_cast<int>(site_vectors.rows());
  const auto n = static_cast<int>(site_vectors.cols());
  if (n < 1) throw EmbeddingError("no site vectors");
  Eigen::VectorXd psi = Eigen::VectorXd::Ones(1);
  for (int s = 0; s < n; ++s) {
    const double norm = site_vectors.col(s).norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw EmbeddingError("site " + std::to_string(s) + " has a zero or non-finite encoded vector");
    }
    const Eigen::VectorXd v = site_vectors.col(s) / norm;
    Eigen::VectorXd next(psi.size() * d);
    for (Eigen::Index i = 0; i < psi.size(); ++i) next.segment(i * d, d) = psi(i) * v;
    psi = std::move(next);
  }
  return {std::move(psi), n, d};
}

Eigen::MatrixXd unitarize(const Eigen::Ref<const Eigen::MatrixXd>& latent) { return ad::polar_factor(latent); }

StateTensor apply_circuit(const StateTensor& state, const std::vector<Eigen::MatrixXd>& latent_gates,
                          const CircuitLayout& layout) {
  validate(layout);
  if (state.n_sites != layout.n_sites || state.d != layout.d || state.amplitudes.size() != layout.state_size()) {
    throw std::invalid_argument("state shape does not match circuit layout");
  }
  const auto placements = layout.gates();
  if (latent_gates.size() != placements.size()) throw std::invalid_argument("latent gate count mismatch");
  Eigen::MatrixXd psi = state.amplitudes;
  for (std::size_t g = 0; g < placements.size(); ++g) {
    const int s = placements[g].site;
    psi = ad::two_site_forward(psi, unitarize(latent_gates[g]), ipow(layout.d, s),
                               ipow(layout.d, layout.n_sites - s - 2));
  }
  return {psi.col(0), state.n_sites, state.d};
}

namespace {

// Rows of a (d^n)-long amplitude vector whose digit at `pos` is zero.
std::vector<Eigen::Index> level_zero_rows(int n_sites, int d, int pos) {
  const Eigen::Index total = ipow(d, n_sites);
  const Eigen::Index stride = ipow(d, n_sites - 1 - pos);
  std::vector<Eigen::Index> rows;
  rows.reserve(static_cast<std::size_t>(total / d));
  for (Eigen::Index i = 0; i < total; ++i) {
    if ((i / stride) % d == 0) rows.push_back(i);
  }
  return rows;
}

}  // namespace

Eigen::VectorXd readout(const StateTensor& state, const std::vector<int>& targets) {
  const double total = state.amplitudes.squaredNorm();
  Eigen::VectorXd y(static_cast<Eigen::Index>(targets.size()));
  for (std::size_t k = 0; k < targets.size(); ++k) {
    if (targets[k] < 0 || targets[k] >= state.n_sites) throw std::out_of_range("readout target site");
    double p = 0.0;
    for (Eigen::Index r : level_zero_rows(state.n_sites, state.d, targets[k])) {
      p += state.amplitudes(r) * state.amplitudes(r);
    }
    y(static_cast<Eigen::Index>(k)) = p / total;
  }
  return y;
}

LightCone light_cone(const CircuitLayout& layout, const std::vector<int>& targets) {
  const auto placements = layout.gates();
  std::set<int> support(targets.begin(), targets.end());
  std::vector<std::size_t> needed;
  for (std::size_t g = placements.size(); g-- > 0;) {
    const int s = placements[g].site;
    if (support.contains(s) || support.contains(s + 1)) {
      needed.push_back(g);
      support.insert(s);
      support.insert(s + 1);
    }
  }
  std::reverse(needed.begin(), needed.end());
  return {support.empty() ? layout.n_sites : *support.begin(), std::move(needed)};
}

Eigen::VectorXd predict_dense(const Sample& sample, const EncoderParams& encoder, const AdqcParams& params,
                              System system) {
  validate(params);
  if (sample.features.size() != params.layout.n_sites) {
    throw std::invalid_argument("sample feature count does not match circuit sites");
  }
  const StateTensor psi = embed(encode_sample(sample, encoder));
  const StateTensor out = apply_circuit(psi, params.latent_gates, params.layout);
  return readout(out, readout_sites(system, params.layout.n_sites));
}

AdqcVars bind(ad::Tape& tape, const AdqcParams& params, const std::string& prefix) {
  validate(params);
  AdqcVars v;
  v.layout = params.layout;
  for (std::size_t g = 0; g < params.latent_gates.size(); ++g) {
    v.latent.push_back(tape.parameter(prefix + "." + std::to_string(g), params.latent_gates[g]));
  }
  return v;
}

ad::Var forward(const EncoderVars& enc, const AdqcVars& circuit, ad::Var features,
                const Eigen::Ref<const Eigen::RowVectorXd>& mus, const std::vector<int>& targets) {
  const CircuitLayout& layout = circuit.layout;
  if (enc.d != layout.d) throw std::invalid_argument("encoder dimension does not match circuit");
  if (features.rows() != layout.n_sites || features.cols() != mus.size()) {
    throw std::invalid_argument("features must be n_sites x batch");
  }
  ad::Tape& tape = *features.tape();
  const int d = layout.d;
  const LightCone cone = light_cone(layout, targets);
  const int first = cone.first_site;
  const int span = layout.n_sites - first;

  const ad::Var mu_features = feature_map(tape.constant(mus), enc.theta, d);
  ad::Var psi;
  for (int s = first; s < layout.n_sites; ++s) {
    const ad::Var v = encode(enc, ad::rows(features, s, 1), mu_features);
    const ad::Var norm2 = ad::colsum(ad::square(v));
    if (!(norm2.value().array() > 0.0).all() || !norm2.value().allFinite()) {
      throw EmbeddingError("site " + std::to_string(s) + " has a zero or non-finite encoded vector");
    }
    const ad::Var unit = ad::div(v, ad::broadcast_rows(ad::sqrt(norm2), d));
    psi = s == first ? unit : ad::khatri_rao(psi, unit);
  }

  const auto placements = layout.gates();
  for (std::size_t g : cone.gates) {
    const int s = placements[g].site - first;
    psi = ad::apply_two_site(psi, ad::unitarize(circuit.latent[g]), ipow(d, s), ipow(d, span - s - 2));
  }

  const ad::Var prob = ad::square(psi);
  const ad::Var total = ad::colsum(prob);
  std::vector<ad::Var> outs;
  for (int t : targets) {
    if (t < first || t >= layout.n_sites) throw std::out_of_range("readout target site");
    const ad::Var marginal = ad::colsum(ad::gather_rows(prob, level_zero_rows(span, d, t - first)));
    outs.push_back(ad::div(marginal, total));
  }
  return ad::vstack(outs);
}

}  // namespace chaos
