#pragma once

// Logistic maps in one and two dimensions, plus their exact Lyapunov spectra.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace chaos {

enum class System { Logistic1D, Logistic2D };

inline int dimension(System s) { return s == System::Logistic1D ? 1 : 2; }
std::string to_string(System s);
System system_from_string(const std::string& name);

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// 1D: x -> mu x (1 - x), 0 <= mu <= 4.
/// 2D: x -> 4 mu x (1 - x) + beta x', x' -> 4 mu x' (1 - x') + beta x,
///     with 0 < mu <= 0.9, beta >= 0 and mu + beta <= 1.
struct MapSpec {
  System kind = System::Logistic1D;
  double mu = 4.0;
  double beta = 0.1;

  static MapSpec logistic1d(double mu) { return {System::Logistic1D, mu, 0.0}; }
  static MapSpec logistic2d(double mu, double beta = 0.1) { return {System::Logistic2D, mu, beta}; }
};

/// Throws DomainError when mu or beta is out of range for the map kind.
void validate(const MapSpec& spec);

/// Columns are consecutive states.
struct Trajectory {
  Eigen::MatrixXd states;
  double mu = 0.0;

  Eigen::Index length() const { return states.cols(); }
};

struct LyapunovSpectrum {
  Eigen::VectorXd exponents;  // sorted descending
  int steps = 0;
  int burn_in = 0;
};

inline constexpr int kDefaultLyapunovSteps = 264;
inline constexpr int kDefaultLyapunovBurnIn = 200;
inline constexpr double kLogFloor = 1e-300;

namespace detail {
void check_state(double x);
}

/// One application of the map. Both 2D components are updated from the same
/// input state. Scalar-templated so it runs under Eigen's AutoDiffScalar.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> step(const MapSpec& spec,
                                                                 const Eigen::MatrixBase<Derived>& state) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index dim = dimension(spec.kind);
  if (state.size() != dim) throw DomainError("state dimension does not match map");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> next(dim);
  if (spec.kind == System::Logistic1D) {
    const Scalar& x = state(0);
    next(0) = spec.mu * x * (Scalar(1) - x);
  } else {
    const Scalar& x = state(0);
    const Scalar& y = state(1);
    const double r = 4.0 * spec.mu;
    next(0) = r * x * (Scalar(1) - x) + spec.beta * y;
    next(1) = r * y * (Scalar(1) - y) + spec.beta * x;
  }
  return next;
}

/// Validating overload for plain doubles.
Eigen::VectorXd step_checked(const MapSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& state);

/// 1D: 1x1 matrix mu (1 - 2x). 2D: [[4mu(1-2x), beta], [beta, 4mu(1-2x')]].
Eigen::MatrixXd jacobian(const MapSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& state);

/// States x0, f(x0), ..., f^steps(x0).
Trajectory trajectory(const MapSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x0, int steps);

/// Streams Jacobians along an orbit and accumulates log stretching rates.
/// One dimension sums ln|J|; higher dimensions propagate an orthogonal frame
/// (A = J Q, A = Q' R with R_kk >= 0) and sum ln R_kk. Logs are floored at
/// kLogFloor.
class LyapunovAccumulator {
 public:
  explicit LyapunovAccumulator(Eigen::Index dim);

  void push(const Eigen::Ref<const Eigen::MatrixXd>& jac);
  Eigen::Index count() const { return count_; }
  const Eigen::MatrixXd& frame() const { return q_; }
  /// Accumulated sums divided by count, sorted descending.
  Eigen::VectorXd exponents() const;

 private:
  Eigen::MatrixXd q_;
  Eigen::VectorXd sums_;
  Eigen::Index count_ = 0;
};

/// Q R factorisation with R's diagonal forced non-negative.
void qr_positive(const Eigen::Ref<const Eigen::MatrixXd>& a, Eigen::MatrixXd& q, Eigen::MatrixXd& r);

/// Runs `burn_in` steps from x0, then averages over the next `steps` states.
LyapunovSpectrum lyapunov_true(const MapSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x0,
                               int steps = kDefaultLyapunovSteps,
                               int burn_in = kDefaultLyapunovBurnIn);

}  // namespace chaos
