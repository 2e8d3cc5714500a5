#pragma once

// Hyper-parameter-aware pre-processing: each scalar feature x of a sample
// with parameter mu becomes the d-vector
//
//   v_k = sum_ij xi_i(x; theta) xi_j(mu; theta) T_ijk,
//   xi_j(a; theta) = sqrt(C(d-1, j-1)) cos(theta pi a / 2)^(d-j) sin(theta pi a / 2)^(j-1).

#include "chaos/autodiff.hpp"
#include "chaos/dataset.hpp"

#include <Eigen/Dense>

#include <random>

namespace chaos {

struct EncoderParams {
  double theta = 1.0;
  /// T stored as a (d*d) x d matrix: row i*d + j, column k holds T_ijk.
  Eigen::MatrixXd tensor;

  int dim() const { return static_cast<int>(tensor.cols()); }
  double& at(int i, int j, int k) { return tensor(i * dim() + j, k); }
  double at(int i, int j, int k) const { return tensor(i * dim() + j, k); }

  /// theta = 1, T_ijk ~ N(0, (1/d)^2).
  static EncoderParams initial(int d, std::mt19937_64& rng);
  static EncoderParams zeros(int d);

  bool operator==(const EncoderParams&) const = default;
};

void validate(const EncoderParams& p);

Eigen::VectorXd feature_map(double a, double theta, int d);
Eigen::VectorXd encode(double x, double mu, const EncoderParams& params);
/// One column per scalar feature, in feature order.
Eigen::MatrixXd encode_sample(const Sample& s, const EncoderParams& params);

/// Differentiable versions. `a` is a 1 x N row; the result is d x N.
ad::Var feature_map(ad::Var a, ad::Var theta, int d);

struct EncoderVars {
  ad::Var theta;
  ad::Var tensor;
  int d = 3;
};

EncoderVars bind(ad::Tape& tape, const EncoderParams& params, const std::string& prefix = "encoder");

/// x: 1 x N feature values; mu_features: d x N feature maps of each column's mu.
ad::Var encode(const EncoderVars& enc, ad::Var x, ad::Var mu_features);

}  // namespace chaos
