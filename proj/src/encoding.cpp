#include "chaos/encoding.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace chaos {

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

EncoderParams EncoderParams::initial(int d, std::mt19937_64& rng) {
  if (d < 2) throw std::invalid_argument("encoder dimension must be >= 2");
  std::normal_distribution<double> normal(0.0, 1.0 / d);
  EncoderParams p;
  p.theta = 1.0;
  p.tensor.resize(d * d, d);
  for (Eigen::Index i = 0; i < p.tensor.size(); ++i) p.tensor(i) = normal(rng);
  return p;
}

EncoderParams EncoderParams::zeros(int d) {
  if (d < 2) throw std::invalid_argument("encoder dimension must be >= 2");
  return {1.0, Eigen::MatrixXd::Zero(d * d, d)};
}

void validate(const EncoderParams& p) {
  if (p.dim() < 2 || p.tensor.rows() != p.dim() * p.dim()) {
    throw std::invalid_argument("encoder tensor must be (d*d) x d with d >= 2");
  }
  if (!std::isfinite(p.theta) || !p.tensor.allFinite()) throw std::invalid_argument("non-finite encoder params");
}

Eigen::VectorXd feature_map(double a, double theta, int d) {
  if (d < 2) throw std::invalid_argument("feature_map needs d >= 2");
  const double angle = theta * std::numbers::pi / 2.0 * a;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::VectorXd xi(d);
  for (int j = 0; j < d; ++j) {
    xi(j) = std::sqrt(binomial(d - 1, j)) * std::pow(c, d - 1 - j) * std::pow(s, j);
  }
  return xi;
}

Eigen::VectorXd encode(double x, double mu, const EncoderParams& params) {
  const int d = params.dim();
  const Eigen::VectorXd xi_x = feature_map(x, params.theta, d);
  const Eigen::VectorXd xi_mu = feature_map(mu, params.theta, d);
  Eigen::VectorXd pair(d * d);
  for (int i = 0; i < d; ++i) pair.segment(i * d, d) = xi_x(i) * xi_mu;
  return params.tensor.transpose() * pair;
}

Eigen::MatrixXd encode_sample(const Sample& s, const EncoderParams& params) {
  Eigen::MatrixXd out(params.dim(), s.features.size());
  for (Eigen::Index t = 0; t < s.features.size(); ++t) out.col(t) = encode(s.features(t), s.mu, params);
  return out;
}

ad::Var feature_map(ad::Var a, ad::Var theta, int d) {
  if (d < 2) throw std::invalid_argument("feature_map needs d >= 2");
  const ad::Var angle = scalar_mul(theta, ad::scale(a, std::numbers::pi / 2.0));
  const ad::Var c = ad::cos(angle);
  const ad::Var s = ad::sin(angle);
  std::vector<ad::Var> rows;
  rows.reserve(d);
  for (int j = 0; j < d; ++j) {
    rows.push_back(ad::scale(ad::mul(ad::powi(c, d - 1 - j), ad::powi(s, j)), std::sqrt(binomial(d - 1, j))));
  }
  return ad::vstack(rows);
}

EncoderVars bind(ad::Tape& tape, const EncoderParams& params, const std::string& prefix) {
  validate(params);
  return {tape.parameter(prefix + ".theta", Eigen::MatrixXd::Constant(1, 1, params.theta)),
          tape.parameter(prefix + ".T", params.tensor), params.dim()};
}

ad::Var encode(const EncoderVars& enc, ad::Var x, ad::Var mu_features) {
  const ad::Var xi_x = feature_map(x, enc.theta, enc.d);
  const ad::Var pair = ad::khatri_rao(xi_x, mu_features);
  return ad::matmul(ad::transpose(enc.tensor), pair);
}

}  // namespace chaos
