#pragma once

// Reverse-mode differentiation over dense Eigen matrices.
//
// A Tape records every operation eagerly: the forward value is computed when
// the op is called and a backward closure is stored alongside it. Nodes are
// appended in evaluation order, so reverse iteration is a valid topological
// order for the adjoint sweep.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace chaos::ad {

using Matrix = Eigen::MatrixXd;
using Gradients = std::map<std::string, Matrix>;
using ParamMap = std::map<std::string, Matrix>;

/// Raised when an adjoint turns out NaN or infinite. `parameter()` names the
/// offending parameter.
class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(std::string parameter);
  const std::string& parameter() const { return parameter_; }

 private:
  std::string parameter_;
};

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& adjoint)>;

  /// With track_parameters = false, parameter() records plain constants,
  /// which skips parameter adjoints when only input sensitivities are needed.
  explicit Tape(bool track_parameters = true) : track_parameters_(track_parameters) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Differentiable leaf without a name (e.g. model inputs).
  Var input(Matrix value);
  Var parameter(const std::string& name, Matrix value);

  /// Records a derived node. `backward` receives the node's adjoint and is
  /// only invoked when some input requires a gradient.
  Var record(Matrix value, std::span<const Var> inputs, Backward backward);

  /// Full sweep from a 1x1 node; returns gradients of every named parameter.
  /// Throws NonFiniteGradient if any of them is not finite.
  Gradients backward(Var loss);
  /// Sweep seeded with an arbitrary upstream adjoint of `output`.
  void backward(Var output, const Matrix& seed);

  /// Adjoint of a node after the last sweep (zeros if it was not reached).
  Matrix adjoint(Var v) const;
  Gradients parameter_gradients() const;

  void accumulate(Var v, const Matrix& contribution);
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix adjoint;
    Backward backward;
    bool requires_grad = false;
    std::string name;
  };
  std::vector<Node> nodes_;
  bool track_parameters_ = true;
};

// Elementwise arithmetic (operands must share a shape).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double factor);
/// s * a for a 1x1 node s.
Var scalar_mul(Var s, Var a);

// Linear algebra.
Var matmul(Var a, Var b);
Var transpose(Var a);

// Elementwise functions.
Var sin(Var a);
Var cos(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
/// Subgradient 0 where the value is 0, so sqrt of a vanishing loss has a
/// well-defined zero gradient.
Var sqrt(Var a);
Var log(Var a);
Var square(Var a);
Var powi(Var a, int exponent);

// Reductions and broadcasts.
Var sum(Var a);
Var colsum(Var a);
/// (m x 1) -> (m x cols), repeating the column.
Var broadcast_cols(Var column, Eigen::Index cols);
/// (1 x n) -> (rows x n), repeating the row.
Var broadcast_rows(Var row, Eigen::Index rows);

// Structural.
Var rows(Var a, Eigen::Index start, Eigen::Index count);
Var vstack(std::span<const Var> parts);
Var gather_cols(Var a, std::vector<Eigen::Index> index);
Var gather_rows(Var a, std::vector<Eigen::Index> index);
/// Column-wise Kronecker product: out(i*q + j, c) = a(i, c) * b(j, c).
Var khatri_rao(Var a, Var b);

/// Applies a (q x q) gate to the middle index of each column viewed as a
/// row-major (left, q, right) tensor.
Var apply_two_site(Var state, Var gate, Eigen::Index left, Eigen::Index right);

/// Polar factor U V^T of a square matrix via SVD, with its adjoint.
Var unitarize(Var latent);

// Kernels shared by the tape ops and the plain (tape-free) circuit API.

Matrix two_site_forward(const Matrix& state, const Matrix& gate,
                        Eigen::Index left, Eigen::Index right);

/// Ĝ = U V^T from G = U S V^T.
Matrix polar_factor(const Matrix& latent);

/// Adjoint of G given the adjoint of Ĝ. With M = U^T Ḡ V the result is
/// U X V^T, X_ij = (M_ij - M_ji) / (s_i + s_j). Denominators below 1e-10
/// are clamped and counted (see polar_regularization_count).
Matrix svd_unitarize_vjp(const Matrix& latent, const Matrix& upstream);

/// Tangent of Ĝ along a perturbation direction of G.
Matrix svd_unitarize_jvp(const Matrix& latent, const Matrix& direction);

/// Number of clamped denominators since program start (all threads).
std::size_t polar_regularization_count();

/// Central differences (f(p + h) - f(p - h)) / 2h for every scalar entry.
Gradients fd_gradient(const std::function<double(const ParamMap&)>& f,
                      const ParamMap& params, double h);

/// Largest |a - b| / max(|a|, |b|, floor) over every entry of every
/// parameter present in both maps.
double max_relative_error(const Gradients& a, const Gradients& b,
                          double floor = 1e-8);

}  // namespace chaos::ad
