#pragma once

#include "chaos/autodiff.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <functional>
#include <random>

namespace chaos::check {

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = n(rng);
  return m;
}

inline Eigen::MatrixXd uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = u(rng);
  return m;
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

using Builder = std::function<ad::Var(ad::Tape&, const std::map<std::string, ad::Var>&)>;

/// Records `build` with every entry of `params` as a named parameter and
/// returns the reverse-mode gradients of the scalar it produces.
inline ad::Gradients reverse_gradient(const Builder& build, const ad::ParamMap& params) {
  ad::Tape tape;
  std::map<std::string, ad::Var> vars;
  for (const auto& [name, value] : params) vars.emplace(name, tape.parameter(name, value));
  return tape.backward(build(tape, vars));
}

inline double evaluate(const Builder& build, const ad::ParamMap& params) {
  ad::Tape tape(false);
  std::map<std::string, ad::Var> vars;
  for (const auto& [name, value] : params) vars.emplace(name, tape.constant(value));
  return build(tape, vars).scalar();
}

/// Relative error of each parameter's gradient in the max norm,
/// |a - b|_inf / max(|a|_inf, |b|_inf, floor), worst over the parameters of
/// `b`. Parameters missing from `a` count as zero gradients.
inline double block_relative_error(const ad::Gradients& a, const ad::Gradients& b, double floor = 1e-8) {
  double worst = 0.0;
  for (const auto& [name, gb] : b) {
    auto it = a.find(name);
    const Eigen::MatrixXd ga = it == a.end() ? Eigen::MatrixXd::Zero(gb.rows(), gb.cols()) : it->second;
    const double scale = std::max({ga.cwiseAbs().maxCoeff(), gb.cwiseAbs().maxCoeff(), floor});
    worst = std::max(worst, (ga - gb).cwiseAbs().maxCoeff() / scale);
  }
  return worst;
}

/// Reverse mode against central differences with step h.
inline double gradient_error(const Builder& build, const ad::ParamMap& params, double h = 1e-6) {
  const auto analytic = reverse_gradient(build, params);
  const auto numeric = ad::fd_gradient([&](const ad::ParamMap& p) { return evaluate(build, p); }, params, h);
  return block_relative_error(analytic, numeric);
}

/// sum(w .* v), turning any node into a scalar with a fixed weighting.
inline ad::Var project(ad::Var v, const Eigen::MatrixXd& w) { return ad::sum(ad::mul(v, v.tape()->constant(w))); }

}  // namespace chaos::check
