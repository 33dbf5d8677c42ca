#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "transpol/rng.hpp"

// Dense float64 tensors with tape-based reverse-mode differentiation.
//
// Operations record themselves on the thread's active Tape (see TapeScope) when
// at least one operand requires a gradient. Tensors are row-major with rank <= 3;
// every operation works on the "matrix view" rows() x cols(), where cols() is the
// last extent. Broadcasting is limited to a single row ([1, n] or [n]) against the
// leading batch dimension.
namespace transpol::ad {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

struct Node;

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape);
  static Tensor filled(const Shape& shape, double value);
  static Tensor from(const Shape& shape, std::vector<double> values);
  static Tensor scalar(double value);
  /// Leaf that accumulates gradients.
  static Tensor parameter(const Shape& shape, std::vector<double> values);

  [[nodiscard]] bool defined() const { return node_ != nullptr; }
  [[nodiscard]] const Shape& shape() const;
  [[nodiscard]] std::size_t rank() const { return shape().size(); }
  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] std::size_t rows() const;
  [[nodiscard]] std::size_t cols() const;

  [[nodiscard]] std::span<const double> data() const;
  [[nodiscard]] std::span<double> mutable_data();
  [[nodiscard]] double item() const;
  [[nodiscard]] double at(std::size_t row, std::size_t col) const;

  /// Empty span until a gradient has been accumulated.
  [[nodiscard]] std::span<const double> grad() const;
  [[nodiscard]] std::span<double> mutable_grad();
  void zero_grad();

  [[nodiscard]] bool requires_grad() const;
  void set_requires_grad(bool on);
  [[nodiscard]] bool is_leaf() const;

  /// Same values, cut from the graph.
  [[nodiscard]] Tensor detach() const;
  /// Independent copy of the values (a fresh leaf with the same requires_grad flag).
  [[nodiscard]] Tensor clone() const;

  [[nodiscard]] const std::shared_ptr<Node>& node() const { return node_; }
  static Tensor wrap(std::shared_ptr<Node> node) { return Tensor(std::move(node)); }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  std::shared_ptr<Node> node_;
};

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

/// Ordered record of differentiable operations for one forward pass.
class Tape {
 public:
  using Backward = std::function<void()>;

  void record(std::shared_ptr<Node> output, Backward backward);

  /// Populates grad on every reachable leaf. Leaf gradients accumulate across
  /// calls; intermediate gradients are recomputed from scratch each call.
  /// Throws ContractError for a non-scalar loss or an empty tape.
  void backward(const Tensor& loss);

  void clear() { records_.clear(); }
  [[nodiscard]] std::size_t size() const { return records_.size(); }

 private:
  struct Record {
    std::shared_ptr<Node> output;
    Backward backward;
  };
  std::vector<Record> records_;
};

/// Makes `tape` the active tape of this thread for the scope's lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Suspends recording (forward values only) for the scope's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

// Binary elementwise ops accept equal shapes or a single-row right operand.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor matmul(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor square(const Tensor& a);
Tensor clamp_min(const Tensor& a, double floor);

/// Concatenation along the last axis; all parts share the leading extents.
Tensor concat(std::span<const Tensor> parts);
Tensor concat(std::initializer_list<Tensor> parts);
/// Columns [begin, end) of the last axis.
Tensor slice(const Tensor& a, std::size_t begin, std::size_t end);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// mu + sqrt(var) * eps with eps treated as a constant. Gradients reach mu and var.
/// Throws ContractError for negative variance.
Tensor gaussian_sample(const Tensor& mu, const Tensor& var, const Tensor& eps);
/// Reparameterized sample with eps drawn from `rng`.
Tensor reparam_sample(const Tensor& mu, const Tensor& var, RngStream& rng);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

}  // namespace transpol::ad
