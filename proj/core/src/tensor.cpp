#include "transpol/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "transpol/errors.hpp"

namespace transpol::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

thread_local Tape* g_active_tape = nullptr;

std::size_t product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void check_rank(const Shape& shape) {
  if (shape.size() > 3) {
    throw DimensionError("tensor rank " + std::to_string(shape.size()) + " exceeds 3: " +
                         to_string(shape));
  }
}

std::size_t rows_of(const Shape& s) {
  if (s.empty()) return 1;
  return product(s) / s.back();
}

std::size_t cols_of(const Shape& s) { return s.empty() ? 1 : s.back(); }

bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (g_active_tape == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

Tensor make_result(const Shape& shape, std::vector<double> values, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  node->leaf = !requires_grad;
  return Tensor::wrap(std::move(node));
}

void record(const Tensor& out, Tape::Backward fn) {
  g_active_tape->record(out.node(), std::move(fn));
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor operand");
}

enum class Layout { same, row_broadcast };

Layout binary_layout(const Tensor& a, const Tensor& b, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  if (a.shape() == b.shape()) return Layout::same;
  const bool row = (b.rank() == 1 || (b.rank() == 2 && b.shape()[0] == 1)) && a.rank() >= 1 &&
                   b.cols() == a.cols();
  if (row) return Layout::row_broadcast;
  throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                       to_string(b.shape()));
}

// Elementwise binary op; Fwd(x, y) -> z, Da(x, y, z) and Db(x, y, z) are local partials.
template <typename Fwd, typename Da, typename Db>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, Fwd fwd, Da da, Db db) {
  const Layout layout = binary_layout(a, b, op);
  const std::size_t n = a.size();
  const std::size_t cols = a.cols();
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<double> out(n);
  if (layout == Layout::same) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[i], bv[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[i], bv[i % cols]);
  }
  const bool track = tracking({&a, &b});
  Tensor result = make_result(a.shape(), std::move(out), track);
  if (track) {
    auto an = a.node();
    auto bn = b.node();
    Node* on = result.node().get();
    record(result, [an, bn, on, layout, cols, da, db]() {
      const std::size_t size = on->value.size();
      const auto bidx = [&](std::size_t i) { return layout == Layout::same ? i : i % cols; };
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < size; ++i) {
          an->grad[i] += on->grad[i] * da(an->value[i], bn->value[bidx(i)], on->value[i]);
        }
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < size; ++i) {
          bn->grad[bidx(i)] += on->grad[i] * db(an->value[i], bn->value[bidx(i)], on->value[i]);
        }
      }
    });
  }
  return result;
}

// Elementwise unary op; D(x, z) is the local derivative.
template <typename Fwd, typename D>
Tensor unary(const Tensor& a, const char* op, Fwd fwd, D d) {
  require_defined(a, op);
  const auto av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  const bool track = tracking({&a});
  Tensor result = make_result(a.shape(), std::move(out), track);
  if (track) {
    auto an = a.node();
    Node* on = result.node().get();
    record(result, [an, on, d]() {
      an->ensure_grad();
      for (std::size_t i = 0; i < on->value.size(); ++i) {
        an->grad[i] += on->grad[i] * d(an->value[i], on->value[i]);
      }
    });
  }
  return result;
}

}  // namespace

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(const Shape& shape) { return filled(shape, 0.0); }

Tensor Tensor::filled(const Shape& shape, double value) {
  check_rank(shape);
  return make_result(shape, std::vector<double>(product(shape), value), false);
}

Tensor Tensor::from(const Shape& shape, std::vector<double> values) {
  check_rank(shape);
  if (values.size() != product(shape)) {
    throw DimensionError("tensor data length " + std::to_string(values.size()) +
                         " does not match shape " + to_string(shape));
  }
  return make_result(shape, std::move(values), false);
}

Tensor Tensor::scalar(double value) { return from({}, {value}); }

Tensor Tensor::parameter(const Shape& shape, std::vector<double> values) {
  Tensor t = from(shape, std::move(values));
  t.node_->requires_grad = true;
  t.node_->leaf = true;
  return t;
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->value.size(); }
std::size_t Tensor::rows() const { return rows_of(node_->shape); }
std::size_t Tensor::cols() const { return cols_of(node_->shape); }
std::span<const double> Tensor::data() const { return node_->value; }
std::span<double> Tensor::mutable_data() { return node_->value; }

double Tensor::item() const {
  if (size() != 1) {
    throw ContractError("item() on tensor of shape " + to_string(shape()));
  }
  return node_->value[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  return node_->value[row * cols() + col];
}

std::span<const double> Tensor::grad() const { return node_->grad; }

std::span<double> Tensor::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  if (!node_->leaf) throw ContractError("set_requires_grad on a non-leaf tensor");
  node_->requires_grad = on;
}

bool Tensor::is_leaf() const { return node_->leaf; }

Tensor Tensor::detach() const { return make_result(shape(), node_->value, false); }

Tensor Tensor::clone() const {
  Tensor t = make_result(shape(), node_->value, false);
  t.node_->requires_grad = node_->requires_grad && node_->leaf;
  return t;
}

// ---------------------------------------------------------------------------
// Tape

void Tape::record(std::shared_ptr<Node> output, Backward backward) {
  records_.push_back({std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " +
                        (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
  }
  if (records_.empty()) throw ContractError("backward on an empty tape");

  for (auto& r : records_) {
    if (!r.output->grad.empty()) std::fill(r.output->grad.begin(), r.output->grad.end(), 0.0);
  }
  Node* root = loss.node().get();
  root->ensure_grad();
  root->grad[0] += 1.0;

  // Recording order is a topological order, so the reverse visits each node
  // after all of its consumers.
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (it->output->grad.empty()) continue;
    it->backward();
  }
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradGuard::NoGradGuard() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradGuard::~NoGradGuard() { g_active_tape = previous_; }

Tape* active_tape() { return g_active_tape; }

// ---------------------------------------------------------------------------
// Binary

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double z) { return -z / y; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul: shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
  const auto m = static_cast<Eigen::Index>(a.shape()[0]);
  const auto k = static_cast<Eigen::Index>(a.shape()[1]);
  const auto n = static_cast<Eigen::Index>(b.shape()[1]);
  std::vector<double> out(static_cast<std::size_t>(m * n));
  MatMap(out.data(), m, n).noalias() =
      ConstMatMap(a.data().data(), m, k) * ConstMatMap(b.data().data(), k, n);

  const bool track = tracking({&a, &b});
  Tensor result = make_result({a.shape()[0], b.shape()[1]}, std::move(out), track);
  if (track) {
    auto an = a.node();
    auto bn = b.node();
    Node* on = result.node().get();
    record(result, [an, bn, on, m, k, n]() {
      ConstMatMap g(on->grad.data(), m, n);
      if (an->requires_grad) {
        an->ensure_grad();
        MatMap(an->grad.data(), m, k).noalias() += g * ConstMatMap(bn->value.data(), k, n).transpose();
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        MatMap(bn->grad.data(), k, n).noalias() += ConstMatMap(an->value.data(), m, k).transpose() * g;
      }
    });
  }
  return result;
}

// ---------------------------------------------------------------------------
// Unary

Tensor neg(const Tensor& a) {
  return unary(a, "neg", [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, "scale", [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return unary(
      a, "add_scalar", [offset](double x) { return x + offset; },
      [](double, double) { return 1.0; });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](double, double z) { return 1.0 - z * z; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a, "sigmoid",
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double z) { return z * (1.0 - z); });
}

Tensor exp(const Tensor& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double z) { return z; });
}

Tensor log(const Tensor& a) {
  return unary(
      a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
  return unary(
      a, "sqrt", [](double x) { return std::sqrt(x); },
      [](double, double z) { return z > 0.0 ? 0.5 / z : 0.0; });
}

Tensor square(const Tensor& a) {
  return unary(
      a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor clamp_min(const Tensor& a, double floor) {
  return unary(
      a, "clamp_min", [floor](double x) { return x < floor ? floor : x; },
      [floor](double x, double) { return x < floor ? 0.0 : 1.0; });
}

// ---------------------------------------------------------------------------
// Structural

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat: no operands");
  const Tensor& first = parts.front();
  require_defined(first, "concat");
  const std::size_t rows = first.rows();
  Shape lead(first.shape().begin(), first.shape().end() - (first.rank() > 0 ? 1 : 0));
  std::size_t total_cols = 0;
  bool track = false;
  for (const Tensor& p : parts) {
    require_defined(p, "concat");
    Shape p_lead(p.shape().begin(), p.shape().end() - (p.rank() > 0 ? 1 : 0));
    if (p.rank() != first.rank() || p_lead != lead) {
      throw DimensionError("concat: shape mismatch " + to_string(first.shape()) + " vs " +
                           to_string(p.shape()));
    }
    total_cols += p.cols();
    track = track || p.requires_grad();
  }
  track = track && g_active_tape != nullptr;

  std::vector<double> out(rows * total_cols);
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t c = p.cols();
    const auto pv = p.data();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(r * c), c,
                  out.begin() + static_cast<std::ptrdiff_t>(r * total_cols + offset));
    }
    offset += c;
  }
  Shape shape = lead;
  shape.push_back(total_cols);
  Tensor result = make_result(shape, std::move(out), track);
  if (track) {
    std::vector<std::shared_ptr<Node>> nodes;
    nodes.reserve(parts.size());
    for (const Tensor& p : parts) nodes.push_back(p.node());
    Node* on = result.node().get();
    record(result, [nodes, on, rows, total_cols]() {
      std::size_t off = 0;
      for (const auto& pn : nodes) {
        const std::size_t c = cols_of(pn->shape);
        if (pn->requires_grad) {
          pn->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < c; ++j) {
              pn->grad[r * c + j] += on->grad[r * total_cols + off + j];
            }
          }
        }
        off += c;
      }
    });
  }
  return result;
}

Tensor concat(std::initializer_list<Tensor> parts) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor slice(const Tensor& a, std::size_t begin, std::size_t end) {
  require_defined(a, "slice");
  const std::size_t cols = a.cols();
  if (a.rank() == 0 || begin >= end || end > cols) {
    throw DimensionError("slice: columns [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range for shape " + to_string(a.shape()));
  }
  const std::size_t rows = a.rows();
  const std::size_t width = end - begin;
  const auto av = a.data();
  std::vector<double> out(rows * width);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.begin() + static_cast<std::ptrdiff_t>(r * cols + begin), width,
                out.begin() + static_cast<std::ptrdiff_t>(r * width));
  }
  Shape shape = a.shape();
  shape.back() = width;
  const bool track = tracking({&a});
  Tensor result = make_result(shape, std::move(out), track);
  if (track) {
    auto an = a.node();
    Node* on = result.node().get();
    record(result, [an, on, rows, cols, begin, width]() {
      an->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < width; ++j) {
          an->grad[r * cols + begin + j] += on->grad[r * width + j];
        }
      }
    });
  }
  return result;
}

Tensor sum(const Tensor& a) {
  require_defined(a, "sum");
  const auto av = a.data();
  const double total = std::accumulate(av.begin(), av.end(), 0.0);
  const bool track = tracking({&a});
  Tensor result = make_result({}, {total}, track);
  if (track) {
    auto an = a.node();
    Node* on = result.node().get();
    record(result, [an, on]() {
      an->ensure_grad();
      const double g = on->grad[0];
      for (double& v : an->grad) v += g;
    });
  }
  return result;
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor gaussian_sample(const Tensor& mu, const Tensor& var, const Tensor& eps) {
  require_defined(mu, "gaussian_sample");
  require_defined(var, "gaussian_sample");
  require_defined(eps, "gaussian_sample");
  if (mu.shape() != var.shape() || mu.shape() != eps.shape()) {
    throw DimensionError("gaussian_sample: shape mismatch " + to_string(mu.shape()) + " vs " +
                         to_string(var.shape()) + " vs " + to_string(eps.shape()));
  }
  const auto m = mu.data();
  const auto v = var.data();
  const auto e = eps.data();
  std::vector<double> out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!(v[i] >= 0.0)) {
      throw ContractError("gaussian_sample: negative variance " + std::to_string(v[i]) +
                          " at index " + std::to_string(i));
    }
    out[i] = m[i] + std::sqrt(v[i]) * e[i];
  }
  const bool track = tracking({&mu, &var});
  Tensor result = make_result(mu.shape(), std::move(out), track);
  if (track) {
    auto mn = mu.node();
    auto vn = var.node();
    auto en = eps.node();
    Node* on = result.node().get();
    record(result, [mn, vn, en, on]() {
      const std::size_t n = on->value.size();
      if (mn->requires_grad) {
        mn->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) mn->grad[i] += on->grad[i];
      }
      if (vn->requires_grad) {
        vn->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          const double sd = std::sqrt(vn->value[i]);
          if (sd > 0.0) vn->grad[i] += on->grad[i] * en->value[i] / (2.0 * sd);
        }
      }
    });
  }
  return result;
}

Tensor reparam_sample(const Tensor& mu, const Tensor& var, RngStream& rng) {
  require_defined(mu, "reparam_sample");
  std::vector<double> eps(mu.size());
  rng.fill_normal(eps);
  return gaussian_sample(mu, var, Tensor::from(mu.shape(), std::move(eps)));
}

}  // namespace transpol::ad
