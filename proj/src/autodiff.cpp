#include "chaos/autodiff.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <utility>

namespace chaos::ad {

NonFiniteGradient::NonFiniteGradient(std::string parameter)
    : std::runtime_error("non-finite gradient for parameter '" + parameter + "'"),
      parameter_(std::move(parameter)) {}

const Matrix& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw std::logic_error("Var::scalar on a non-1x1 node");
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::input(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, true, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const std::string& name, Matrix value) {
  if (!track_parameters_) return constant(std::move(value));
  nodes_.push_back(Node{std::move(value), {}, {}, true, name});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::span<const Var> inputs, Backward backward) {
  bool needs = false;
  for (const Var& in : inputs) {
    if (in.tape() != this) throw std::logic_error("operands recorded on different tapes");
    needs = needs || nodes_[in.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : Backward{}, needs, {}});
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(Var v, const Matrix& contribution) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return;
  if (n.adjoint.size() == 0) {
    n.adjoint = contribution;
  } else {
    n.adjoint += contribution;
  }
}

void Tape::backward(Var output, const Matrix& seed) {
  if (seed.rows() != output.rows() || seed.cols() != output.cols()) {
    throw std::invalid_argument("backward seed shape mismatch");
  }
  for (Node& n : nodes_) n.adjoint.resize(0, 0);
  accumulate(output, seed);
  for (std::size_t i = output.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.adjoint.size() == 0) continue;
    // Closures only accumulate into earlier nodes, so n.adjoint stays put.
    n.backward(*this, n.adjoint);
  }
}

Gradients Tape::backward(Var loss) {
  if (loss.value().size() != 1) throw std::invalid_argument("backward(loss) needs a 1x1 node");
  backward(loss, Matrix::Ones(1, 1));
  Gradients g = parameter_gradients();
  for (const auto& [name, grad] : g) {
    if (!grad.allFinite()) throw NonFiniteGradient(name);
  }
  return g;
}

Matrix Tape::adjoint(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.adjoint.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.adjoint;
}

Gradients Tape::parameter_gradients() const {
  Gradients g;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.name.empty()) continue;
    Matrix adj = n.adjoint.size() == 0 ? Matrix::Zero(n.value.rows(), n.value.cols()) : n.adjoint;
    auto [it, inserted] = g.emplace(n.name, adj);
    if (!inserted) it->second += adj;
  }
  return g;
}

namespace {

void require_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

template <typename Forward, typename Derivative>
Var unary(Var a, Forward forward, Derivative derivative) {
  Matrix out = forward(a.value());
  const Var in[] = {a};
  return a.tape()->record(std::move(out), in, [a, derivative](Tape& t, const Matrix& g) {
    t.accumulate(a, derivative(a.value(), g));
  });
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  const Var in[] = {a, b};
  return a.tape()->record(a.value() + b.value(), in, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  const Var in[] = {a, b};
  return a.tape()->record(a.value() - b.value(), in, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  const Var in[] = {a, b};
  return a.tape()->record(a.value().cwiseProduct(b.value()), in, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(b.value()));
    if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var div(Var a, Var b) {
  require_same_shape(a, b, "div");
  const Var in[] = {a, b};
  return a.tape()->record(a.value().cwiseQuotient(b.value()), in, [a, b](Tape& t, const Matrix& g) {
    const Matrix ga = g.cwiseQuotient(b.value());
    if (t.requires_grad(a)) t.accumulate(a, ga);
    if (t.requires_grad(b)) {
      t.accumulate(b, -ga.cwiseProduct(a.value()).cwiseQuotient(b.value()));
    }
  });
}

Var scale(Var a, double factor) {
  return unary(
      a, [factor](const Matrix& x) -> Matrix { return factor * x; },
      [factor](const Matrix&, const Matrix& g) -> Matrix { return factor * g; });
}

Var scalar_mul(Var s, Var a) {
  if (s.value().size() != 1) throw std::invalid_argument("scalar_mul: s must be 1x1");
  const Var in[] = {s, a};
  return a.tape()->record(s.scalar() * a.value(), in, [s, a](Tape& t, const Matrix& g) {
    if (t.requires_grad(s)) {
      t.accumulate(s, Matrix::Constant(1, 1, g.cwiseProduct(a.value()).sum()));
    }
    if (t.requires_grad(a)) t.accumulate(a, s.scalar() * g);
  });
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  const Var in[] = {a, b};
  return a.tape()->record(a.value() * b.value(), in, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

Var transpose(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.transpose(); },
      [](const Matrix&, const Matrix& g) -> Matrix { return g.transpose(); });
}

Var sin(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.array().sin().matrix(); },
      [](const Matrix& x, const Matrix& g) -> Matrix { return g.cwiseProduct(x.array().cos().matrix()); });
}

Var cos(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.array().cos().matrix(); },
      [](const Matrix& x, const Matrix& g) -> Matrix {
        return -g.cwiseProduct(x.array().sin().matrix());
      });
}

Var tanh(Var a) {
  Matrix y = a.value().array().tanh().matrix();
  const Var in[] = {a};
  Tape* t = a.tape();
  const std::size_t out_id = t->size();
  return t->record(std::move(y), in, [a, out_id](Tape& tp, const Matrix& g) {
    const Matrix& y = tp.value(out_id);
    tp.accumulate(a, g.cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

Var sigmoid(Var a) {
  Matrix y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  const Var in[] = {a};
  Tape* t = a.tape();
  const std::size_t out_id = t->size();
  return t->record(std::move(y), in, [a, out_id](Tape& tp, const Matrix& g) {
    const Matrix& y = tp.value(out_id);
    tp.accumulate(a, g.cwiseProduct((y.array() * (1.0 - y.array())).matrix()));
  });
}

Var sqrt(Var a) {
  Matrix y = a.value().array().sqrt().matrix();
  const Var in[] = {a};
  Tape* t = a.tape();
  const std::size_t out_id = t->size();
  return t->record(std::move(y), in, [a, out_id](Tape& tp, const Matrix& g) {
    const Matrix& y = tp.value(out_id);
    Matrix d = g;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      d(i) = y(i) > 0.0 ? g(i) / (2.0 * y(i)) : 0.0;
    }
    tp.accumulate(a, d);
  });
}

Var log(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.array().log().matrix(); },
      [](const Matrix& x, const Matrix& g) -> Matrix { return g.cwiseQuotient(x); });
}

Var square(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.array().square().matrix(); },
      [](const Matrix& x, const Matrix& g) -> Matrix { return 2.0 * g.cwiseProduct(x); });
}

Var powi(Var a, int exponent) {
  if (exponent < 0) throw std::invalid_argument("powi: negative exponent");
  return unary(
      a,
      [exponent](const Matrix& x) -> Matrix {
        if (exponent == 0) return Matrix::Ones(x.rows(), x.cols());
        return x.array().pow(exponent).matrix();
      },
      [exponent](const Matrix& x, const Matrix& g) -> Matrix {
        if (exponent == 0) return Matrix::Zero(x.rows(), x.cols());
        if (exponent == 1) return g;
        return (g.array() * exponent * x.array().pow(exponent - 1)).matrix();
      });
}

Var sum(Var a) {
  const Eigen::Index r = a.rows(), c = a.cols();
  return unary(
      a, [](const Matrix& x) -> Matrix { return Matrix::Constant(1, 1, x.sum()); },
      [r, c](const Matrix&, const Matrix& g) -> Matrix { return Matrix::Constant(r, c, g(0, 0)); });
}

Var colsum(Var a) {
  const Eigen::Index r = a.rows();
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.colwise().sum(); },
      [r](const Matrix&, const Matrix& g) -> Matrix { return g.replicate(r, 1); });
}

Var broadcast_cols(Var column, Eigen::Index cols) {
  if (column.cols() != 1) throw std::invalid_argument("broadcast_cols: expected a column");
  return unary(
      column, [cols](const Matrix& x) -> Matrix { return x.replicate(1, cols); },
      [](const Matrix&, const Matrix& g) -> Matrix { return g.rowwise().sum(); });
}

Var broadcast_rows(Var row, Eigen::Index rows) {
  if (row.rows() != 1) throw std::invalid_argument("broadcast_rows: expected a row");
  return unary(
      row, [rows](const Matrix& x) -> Matrix { return x.replicate(rows, 1); },
      [](const Matrix&, const Matrix& g) -> Matrix { return g.colwise().sum(); });
}

Var rows(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw std::out_of_range("rows: slice out of range");
  }
  const Eigen::Index r = a.rows();
  return unary(
      a, [start, count](const Matrix& x) -> Matrix { return x.middleRows(start, count); },
      [r, start, count](const Matrix& x, const Matrix& g) -> Matrix {
        Matrix d = Matrix::Zero(r, x.cols());
        d.middleRows(start, count) = g;
        return d;
      });
}

Var vstack(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("vstack: no parts");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index total = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("vstack: column mismatch");
    total += p.rows();
  }
  Matrix out(total, cols);
  Eigen::Index offset = 0;
  for (const Var& p : parts) {
    out.middleRows(offset, p.rows()) = p.value();
    offset += p.rows();
  }
  std::vector<Var> copy(parts.begin(), parts.end());
  return parts.front().tape()->record(std::move(out), parts, [copy](Tape& t, const Matrix& g) {
    Eigen::Index off = 0;
    for (const Var& p : copy) {
      if (t.requires_grad(p)) t.accumulate(p, g.middleRows(off, p.rows()));
      off += p.rows();
    }
  });
}

Var gather_cols(Var a, std::vector<Eigen::Index> index) {
  Matrix out(a.rows(), static_cast<Eigen::Index>(index.size()));
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] < 0 || index[k] >= a.cols()) throw std::out_of_range("gather_cols: index");
    out.col(static_cast<Eigen::Index>(k)) = a.value().col(index[k]);
  }
  const Var in[] = {a};
  return a.tape()->record(std::move(out), in, [a, index = std::move(index)](Tape& t, const Matrix& g) {
    Matrix d = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t k = 0; k < index.size(); ++k) d.col(index[k]) += g.col(static_cast<Eigen::Index>(k));
    t.accumulate(a, d);
  });
}

Var gather_rows(Var a, std::vector<Eigen::Index> index) {
  Matrix out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] < 0 || index[k] >= a.rows()) throw std::out_of_range("gather_rows: index");
    out.row(static_cast<Eigen::Index>(k)) = a.value().row(index[k]);
  }
  const Var in[] = {a};
  return a.tape()->record(std::move(out), in, [a, index = std::move(index)](Tape& t, const Matrix& g) {
    Matrix d = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t k = 0; k < index.size(); ++k) d.row(index[k]) += g.row(static_cast<Eigen::Index>(k));
    t.accumulate(a, d);
  });
}

Var khatri_rao(Var a, Var b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("khatri_rao: column mismatch");
  const Eigen::Index p = a.rows(), q = b.rows(), n = a.cols();
  Matrix out(p * q, n);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index i = 0; i < p; ++i) out.col(c).segment(i * q, q) = av(i, c) * bv.col(c);
  }
  const Var in[] = {a, b};
  return a.tape()->record(std::move(out), in, [a, b, p, q, n](Tape& t, const Matrix& g) {
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    if (t.requires_grad(a)) {
      Matrix da(p, n);
      for (Eigen::Index c = 0; c < n; ++c) {
        for (Eigen::Index i = 0; i < p; ++i) da(i, c) = g.col(c).segment(i * q, q).dot(bv.col(c));
      }
      t.accumulate(a, da);
    }
    if (t.requires_grad(b)) {
      Matrix db = Matrix::Zero(q, n);
      for (Eigen::Index c = 0; c < n; ++c) {
        for (Eigen::Index i = 0; i < p; ++i) db.col(c) += av(i, c) * g.col(c).segment(i * q, q);
      }
      t.accumulate(b, db);
    }
  });
}

// Each column of `state` is a row-major (left, q, right) tensor. In memory
// that is a column-major (right, q, left) array, so for a fixed `l` the slab
// is a column-major (right x q) matrix X and the update is X <- X G^T.
Matrix two_site_forward(const Matrix& state, const Matrix& gate, Eigen::Index left,
                        Eigen::Index right) {
  const Eigen::Index q = gate.rows();
  if (gate.cols() != q || state.rows() != left * q * right) {
    throw std::invalid_argument("apply_two_site: shape mismatch");
  }
  Matrix out(state.rows(), state.cols());
  if (right == 1) {
    // Whole batch is one (q x left*cols) matrix.
    Eigen::Map<const Matrix> in(state.data(), q, left * state.cols());
    Eigen::Map<Matrix> o(out.data(), q, left * state.cols());
    o.noalias() = gate * in;
    return out;
  }
  const Matrix gt = gate.transpose();
  const Eigen::Index slabs = left * state.cols();
  const Eigen::Index slab = q * right;
  for (Eigen::Index s = 0; s < slabs; ++s) {
    Eigen::Map<const Matrix> x(state.data() + s * slab, right, q);
    Eigen::Map<Matrix> y(out.data() + s * slab, right, q);
    y.noalias() = x * gt;
  }
  return out;
}

Var apply_two_site(Var state, Var gate, Eigen::Index left, Eigen::Index right) {
  Matrix out = two_site_forward(state.value(), gate.value(), left, right);
  const Var in[] = {state, gate};
  return state.tape()->record(std::move(out), in, [state, gate, left, right](Tape& t, const Matrix& g) {
    const Matrix& sv = state.value();
    const Matrix& gv = gate.value();
    const Eigen::Index q = gv.rows();
    const bool need_state = t.requires_grad(state);
    const bool need_gate = t.requires_grad(gate);
    if (right == 1) {
      Eigen::Map<const Matrix> x(sv.data(), q, left * sv.cols());
      Eigen::Map<const Matrix> gy(g.data(), q, left * sv.cols());
      if (need_state) {
        Matrix ds(sv.rows(), sv.cols());
        Eigen::Map<Matrix>(ds.data(), q, left * sv.cols()).noalias() = gv.transpose() * gy;
        t.accumulate(state, ds);
      }
      if (need_gate) t.accumulate(gate, gy * x.transpose());
      return;
    }
    const Eigen::Index slabs = left * sv.cols();
    const Eigen::Index slab = q * right;
    Matrix ds = need_state ? Matrix(sv.rows(), sv.cols()) : Matrix();
    Matrix dg = Matrix::Zero(q, q);
    for (Eigen::Index s = 0; s < slabs; ++s) {
      Eigen::Map<const Matrix> x(sv.data() + s * slab, right, q);
      Eigen::Map<const Matrix> gy(g.data() + s * slab, right, q);
      if (need_state) Eigen::Map<Matrix>(ds.data() + s * slab, right, q).noalias() = gy * gv;
      // y = x G^T  =>  dG = dy^T x
      if (need_gate) dg.noalias() += gy.transpose() * x;
    }
    if (need_state) t.accumulate(state, ds);
    if (need_gate) t.accumulate(gate, dg);
  });
}

namespace {

std::atomic<std::size_t> g_polar_clamps{0};

struct Svd {
  Matrix u, v;
  Eigen::VectorXd s;
};

Svd svd_of(const Matrix& latent) {
  if (latent.rows() != latent.cols()) throw std::invalid_argument("unitarize: matrix must be square");
  if (!latent.allFinite()) throw std::runtime_error("unitarize: non-finite latent gate");
  Eigen::JacobiSVD<Matrix> svd(latent, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) throw std::runtime_error("unitarize: SVD did not converge");
  return {svd.matrixU(), svd.matrixV(), svd.singularValues()};
}

double clamped_inverse(double denom) {
  constexpr double kFloor = 1e-10;
  if (std::abs(denom) < kFloor) {
    g_polar_clamps.fetch_add(1, std::memory_order_relaxed);
    denom = denom < 0.0 ? -kFloor : kFloor;
  }
  return 1.0 / denom;
}

}  // namespace

Matrix polar_factor(const Matrix& latent) {
  const Svd f = svd_of(latent);
  return f.u * f.v.transpose();
}

Matrix svd_unitarize_vjp(const Matrix& latent, const Matrix& upstream) {
  const Svd f = svd_of(latent);
  const Matrix m = f.u.transpose() * upstream * f.v;
  const Eigen::Index n = m.rows();
  Matrix x = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      x(i, j) = (m(i, j) - m(j, i)) * clamped_inverse(f.s(i) + f.s(j));
    }
  }
  return f.u * x * f.v.transpose();
}

Matrix svd_unitarize_jvp(const Matrix& latent, const Matrix& direction) {
  const Svd f = svd_of(latent);
  const Matrix a = f.u.transpose() * direction * f.v;
  const Eigen::Index n = a.rows();
  Matrix omega = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      omega(i, j) = (a(i, j) - a(j, i)) * clamped_inverse(f.s(i) + f.s(j));
    }
  }
  return f.u * omega * f.v.transpose();
}

std::size_t polar_regularization_count() { return g_polar_clamps.load(); }

Var unitarize(Var latent) {
  const Var in[] = {latent};
  return latent.tape()->record(polar_factor(latent.value()), in, [latent](Tape& t, const Matrix& g) {
    t.accumulate(latent, svd_unitarize_vjp(latent.value(), g));
  });
}

Gradients fd_gradient(const std::function<double(const ParamMap&)>& f, const ParamMap& params,
                      double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_gradient: h must be positive");
  Gradients out;
  ParamMap work = params;
  for (auto& [name, value] : work) {
    Matrix grad(value.rows(), value.cols());
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      const double saved = value(i);
      value(i) = saved + h;
      const double fp = f(work);
      value(i) = saved - h;
      const double fm = f(work);
      value(i) = saved;
      grad(i) = (fp - fm) / (2.0 * h);
    }
    out.emplace(name, std::move(grad));
  }
  return out;
}

double max_relative_error(const Gradients& a, const Gradients& b, double floor) {
  double worst = 0.0;
  for (const auto& [name, ga] : a) {
    auto it = b.find(name);
    if (it == b.end()) continue;
    const Matrix& gb = it->second;
    if (ga.rows() != gb.rows() || ga.cols() != gb.cols()) {
      throw std::invalid_argument("max_relative_error: shape mismatch for " + name);
    }
    for (Eigen::Index i = 0; i < ga.size(); ++i) {
      const double denom = std::max({std::abs(ga(i)), std::abs(gb(i)), floor});
      worst = std::max(worst, std::abs(ga(i) - gb(i)) / denom);
    }
  }
  return worst;
}

}  // namespace chaos::ad
