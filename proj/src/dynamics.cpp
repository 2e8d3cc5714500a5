#include "chaos/dynamics.hpp"

#include <algorithm>
#include <functional>

namespace chaos {

std::string to_string(System s) { return s == System::Logistic1D ? "1d" : "2d"; }

System system_from_string(const std::string& name) {
  if (name == "1d" || name == "1D") return System::Logistic1D;
  if (name == "2d" || name == "2D") return System::Logistic2D;
  throw std::invalid_argument("unknown system '" + name + "' (expected 1d or 2d)");
}

void validate(const MapSpec& spec) {
  if (!std::isfinite(spec.mu) || !std::isfinite(spec.beta)) throw DomainError("non-finite map parameter");
  if (spec.kind == System::Logistic1D) {
    if (spec.mu < 0.0 || spec.mu > 4.0) throw DomainError("1D logistic map needs 0 <= mu <= 4");
  } else {
    if (spec.mu <= 0.0 || spec.mu > 0.9) throw DomainError("2D logistic map needs 0 < mu <= 0.9");
    if (spec.beta < 0.0 || spec.mu + spec.beta > 1.0) {
      throw DomainError("2D logistic map needs beta >= 0 and mu + beta <= 1");
    }
  }
}

namespace detail {
void check_state(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("state component outside [0, 1]");
}
}  // namespace detail

Eigen::VectorXd step_checked(const MapSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& state) {
  validate(spec);
  if (state.size() != dimension(spec.kind)) throw DomainError("state dimension does not match map");
  for (Eigen::Index i = 0; i < state.size(); ++i) detail::check_state(state(i));
  return step(spec, state);
}

Eigen::MatrixXd jacobian(const MapSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& state) {
  validate(spec);
  if (state.size() != dimension(spec.kind)) throw DomainError("state dimension does not match map");
  for (Eigen::Index i = 0; i < state.size(); ++i) detail::check_state(state(i));
  if (spec.kind == System::Logistic1D) {
    return Eigen::MatrixXd::Constant(1, 1, spec.mu * (1.0 - 2.0 * state(0)));
  }
  const double r = 4.0 * spec.mu;
  Eigen::MatrixXd j(2, 2);
  j << r * (1.0 - 2.0 * state(0)), spec.beta, spec.beta, r * (1.0 - 2.0 * state(1));
  return j;
}

Trajectory trajectory(const MapSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x0, int steps) {
  if (steps < 1) throw std::invalid_argument("trajectory needs steps >= 1");
  validate(spec);
  const Eigen::Index dim = dimension(spec.kind);
  if (x0.size() != dim) throw DomainError("state dimension does not match map");
  Trajectory traj;
  traj.mu = spec.mu;
  traj.states.resize(dim, steps + 1);
  traj.states.col(0) = x0;
  for (Eigen::Index i = 0; i < dim; ++i) detail::check_state(x0(i));
  for (int t = 0; t < steps; ++t) {
    traj.states.col(t + 1) = step(spec, traj.states.col(t));
    for (Eigen::Index i = 0; i < dim; ++i) {
      if (!(traj.states(i, t + 1) >= 0.0 && traj.states(i, t + 1) <= 1.0)) {
        throw DomainError("trajectory left [0, 1]");
      }
    }
  }
  return traj;
}

void qr_positive(const Eigen::Ref<const Eigen::MatrixXd>& a, Eigen::MatrixXd& q, Eigen::MatrixXd& r) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  q = qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
  r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index k = 0; k < r.rows(); ++k) {
    if (r(k, k) < 0.0) {
      r.row(k) *= -1.0;
      q.col(k) *= -1.0;
    }
  }
}

LyapunovAccumulator::LyapunovAccumulator(Eigen::Index dim)
    : q_(Eigen::MatrixXd::Identity(dim, dim)), sums_(Eigen::VectorXd::Zero(dim)) {}

void LyapunovAccumulator::push(const Eigen::Ref<const Eigen::MatrixXd>& jac) {
  if (jac.rows() != q_.rows() || jac.cols() != q_.cols()) {
    throw std::invalid_argument("LyapunovAccumulator: Jacobian shape mismatch");
  }
  if (q_.rows() == 1) {
    sums_(0) += std::log(std::max(std::abs(jac(0, 0)), kLogFloor));
  } else {
    Eigen::MatrixXd q, r;
    qr_positive(jac * q_, q, r);
    for (Eigen::Index k = 0; k < r.rows(); ++k) sums_(k) += std::log(std::max(r(k, k), kLogFloor));
    q_ = std::move(q);
  }
  ++count_;
}

Eigen::VectorXd LyapunovAccumulator::exponents() const {
  if (count_ == 0) throw std::logic_error("LyapunovAccumulator: no Jacobians pushed");
  Eigen::VectorXd out = sums_ / static_cast<double>(count_);
  std::sort(out.data(), out.data() + out.size(), std::greater<>());
  return out;
}

LyapunovSpectrum lyapunov_true(const MapSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x0, int steps,
                               int burn_in) {
  if (steps < 1) throw std::invalid_argument("lyapunov_true needs T >= 1");
  if (burn_in < 0) throw std::invalid_argument("lyapunov_true needs burn_in >= 0");
  validate(spec);
  const Eigen::Index dim = dimension(spec.kind);
  if (x0.size() != dim) throw DomainError("state dimension does not match map");
  Eigen::VectorXd x = x0;
  for (int t = 0; t < burn_in; ++t) x = step(spec, x);
  LyapunovAccumulator acc(dim);
  for (int t = 0; t < steps; ++t) {
    acc.push(jacobian(spec, x));
    x = step(spec, x);
  }
  return {acc.exponents(), steps, burn_in};
}

}  // namespace chaos
