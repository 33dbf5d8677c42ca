#include "transpol/nets.hpp"

#include <cmath>

#include "transpol/errors.hpp"

namespace transpol {

namespace {

// Keeps squashed actions strictly inside (-u_max, u_max) even where tanh rounds to 1.
constexpr double kSquashMargin = 1.0 - 1e-9;

ad::Tensor uniform_parameter(const ad::Shape& shape, double bound, RngStream& rng) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (double& x : v) x = bound * (2.0 * rng.uniform() - 1.0);
  return ad::Tensor::parameter(shape, std::move(v));
}

ad::Tensor constant_parameter(const ad::Shape& shape, double value) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return ad::Tensor::parameter(shape, std::vector<double>(n, value));
}

void check_batch(const ad::Tensor& a, std::size_t a_cols, const ad::Tensor& b, std::size_t b_cols,
                 const char* what) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != a_cols || b.cols() != b_cols ||
      a.rows() != b.rows()) {
    throw DimensionError(std::string(what) + ": expected [B, " + std::to_string(a_cols) + "] and [B, " +
                         std::to_string(b_cols) + "], got " + ad::to_string(a.shape()) + " and " +
                         ad::to_string(b.shape()));
  }
}

void check_hidden(const ad::Tensor& h, std::size_t batch, std::size_t hidden, const char* what) {
  if (h.rank() != 2 || h.rows() != batch || h.cols() != hidden) {
    throw DimensionError(std::string(what) + ": hidden state shape " + ad::to_string(h.shape()) +
                         " does not match [" + std::to_string(batch) + ", " + std::to_string(hidden) +
                         "]");
  }
}

std::size_t hidden_from(const Checkpoint& ckpt, const std::string& prefix) {
  const auto& w_hh = ckpt.get(prefix + ".gru.w_hh");
  if (w_hh.shape.size() != 2) throw FormatError(prefix + ".gru.w_hh must be rank 2");
  return static_cast<std::size_t>(w_hh.shape[0]);
}

// Copies values and requires_grad flags; both lists come from same-shaped models.
void copy_parameters(const ParameterList& source, const ParameterList& target) {
  for (std::size_t i = 0; i < source.size(); ++i) {
    ad::Tensor dst = target[i].tensor;
    auto src = source[i].tensor.data();
    std::copy(src.begin(), src.end(), dst.mutable_data().begin());
    dst.set_requires_grad(source[i].tensor.requires_grad());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// GruCell

GruCell::GruCell(std::size_t input_size, std::size_t hidden_size, RngStream& init)
    : input_size_(input_size), hidden_size_(hidden_size) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  w_ih_ = uniform_parameter({input_size, 3 * hidden_size}, bound, init);
  w_hh_ = uniform_parameter({hidden_size, 3 * hidden_size}, bound, init);
  b_ih_ = uniform_parameter({1, 3 * hidden_size}, bound, init);
  b_hh_ = uniform_parameter({1, 3 * hidden_size}, bound, init);
}

ad::Tensor GruCell::forward(const ad::Tensor& x, const ad::Tensor& h) const {
  const std::size_t H = hidden_size_;
  const ad::Tensor gi = ad::matmul(x, w_ih_) + b_ih_;
  const ad::Tensor gh = ad::matmul(h, w_hh_) + b_hh_;
  const ad::Tensor r = ad::sigmoid(ad::slice(gi, 0, H) + ad::slice(gh, 0, H));
  const ad::Tensor z = ad::sigmoid(ad::slice(gi, H, 2 * H) + ad::slice(gh, H, 2 * H));
  const ad::Tensor n = ad::tanh(ad::slice(gi, 2 * H, 3 * H) + r * ad::slice(gh, 2 * H, 3 * H));
  // (1 - z) * n + z * h
  return n + z * (h - n);
}

void GruCell::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".w_ih", w_ih_});
  out.push_back({prefix + ".w_hh", w_hh_});
  out.push_back({prefix + ".b_ih", b_ih_});
  out.push_back({prefix + ".b_hh", b_hh_});
}

// ---------------------------------------------------------------------------
// GaussianHead

GaussianHead::GaussianHead(std::size_t input_size, std::size_t output_size, RngStream& init,
                           double logvar_bias)
    : output_size_(output_size) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(input_size));
  w_mean_ = uniform_parameter({input_size, output_size}, bound, init);
  b_mean_ = constant_parameter({1, output_size}, 0.0);
  w_logvar_ = uniform_parameter({input_size, output_size}, bound, init);
  b_logvar_ = constant_parameter({1, output_size}, logvar_bias);
}

GaussianOutput GaussianHead::forward(const ad::Tensor& h) const {
  GaussianOutput out;
  out.mean = ad::matmul(h, w_mean_) + b_mean_;
  out.log_var = ad::matmul(h, w_logvar_) + b_logvar_;
  out.var = ad::exp(out.log_var);
  return out;
}

void GaussianHead::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".w_mean", w_mean_});
  out.push_back({prefix + ".b_mean", b_mean_});
  out.push_back({prefix + ".w_logvar", w_logvar_});
  out.push_back({prefix + ".b_logvar", b_logvar_});
}

// ---------------------------------------------------------------------------
// Parameter persistence

void store_parameters(Checkpoint& ckpt, const std::string& prefix, const ParameterList& params) {
  for (const auto& p : params) {
    std::vector<std::uint64_t> shape(p.tensor.shape().begin(), p.tensor.shape().end());
    auto data = p.tensor.data();
    ckpt.put(prefix + "." + p.name, std::move(shape), std::vector<double>(data.begin(), data.end()));
  }
}

void restore_parameters(const Checkpoint& ckpt, const std::string& prefix, const ParameterList& params) {
  for (const auto& p : params) {
    const std::string key = prefix + "." + p.name;
    if (!ckpt.contains(key)) throw FormatError("checkpoint is missing parameter '" + key + "'");
    const auto& a = ckpt.get(key);
    const std::vector<std::uint64_t> expected(p.tensor.shape().begin(), p.tensor.shape().end());
    if (a.shape != expected) {
      std::string got = "[";
      for (std::size_t i = 0; i < a.shape.size(); ++i) got += (i ? ", " : "") + std::to_string(a.shape[i]);
      got += "]";
      throw DimensionError("parameter '" + key + "' has shape " + got + " in checkpoint but model expects " +
                           ad::to_string(p.tensor.shape()));
    }
  }
  for (const auto& p : params) {
    const auto& a = ckpt.get(prefix + "." + p.name);
    ad::Tensor dst = p.tensor;
    std::copy(a.data.begin(), a.data.end(), dst.mutable_data().begin());
  }
}

std::size_t parameter_count(const ParameterList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.size();
  return n;
}

// ---------------------------------------------------------------------------
// TransitionModel

TransitionModel::TransitionModel(std::size_t hidden_size, RngStream init, NetInit options) {
  if (hidden_size == 0) throw RangeError("transition hidden size must be positive");
  gru_ = GruCell(kStateDim + kControlDim, hidden_size, init);
  head_ = GaussianHead(hidden_size, kStateDim, init, options.logvar_bias);
}

TransitionModel TransitionModel::clone() const {
  TransitionModel copy(hidden_size(), RngStream(0));
  copy_parameters(parameters(), copy.parameters());
  return copy;
}

ad::Tensor TransitionModel::initial_hidden(std::size_t batch) const {
  return ad::Tensor::zeros({batch, hidden_size()});
}

TransitionStep TransitionModel::forward(const ad::Tensor& y_prev, const ad::Tensor& u_prev,
                                        const ad::Tensor& hidden) const {
  check_batch(y_prev, kStateDim, u_prev, kControlDim, "transition_forward");
  check_hidden(hidden, y_prev.rows(), hidden_size(), "transition_forward");
  const ad::Tensor h = gru_.forward(ad::concat({y_prev, u_prev}), hidden);
  GaussianOutput g = head_.forward(h);
  return {std::move(g.mean), std::move(g.var), h};
}

StatePrediction TransitionModel::predict_state(const ad::Tensor& y_prev, const ad::Tensor& u_prev,
                                               const ad::Tensor& hidden, RngStream& rng) const {
  std::vector<double> eps(y_prev.rows() * kStateDim);
  rng.fill_normal(eps);
  return predict_state(y_prev, u_prev, hidden, ad::Tensor::from({y_prev.rows(), kStateDim}, std::move(eps)));
}

StatePrediction TransitionModel::predict_state(const ad::Tensor& y_prev, const ad::Tensor& u_prev,
                                               const ad::Tensor& hidden, const ad::Tensor& eps) const {
  TransitionStep step = forward(y_prev, u_prev, hidden);
  StatePrediction out;
  out.mean = y_prev + step.mean_delta;
  out.var = step.var_delta;
  out.sample = ad::gaussian_sample(out.mean, out.var, eps);
  out.hidden = step.hidden;
  return out;
}

ParameterList TransitionModel::parameters() const {
  ParameterList out;
  gru_.collect("gru", out);
  head_.collect("head", out);
  return out;
}

void TransitionModel::set_requires_grad(bool on) const {
  for (auto& p : parameters()) p.tensor.set_requires_grad(on);
}

void TransitionModel::store(Checkpoint& ckpt) const { store_parameters(ckpt, kPrefix, parameters()); }

void TransitionModel::restore(const Checkpoint& ckpt) { restore_parameters(ckpt, kPrefix, parameters()); }

void TransitionModel::save(const std::filesystem::path& path) const {
  Checkpoint ckpt;
  store(ckpt);
  ckpt.write(path);
}

void TransitionModel::load_params(const std::filesystem::path& path) { restore(Checkpoint::read(path)); }

TransitionModel TransitionModel::from_checkpoint(const Checkpoint& ckpt) {
  TransitionModel model(hidden_from(ckpt, kPrefix), RngStream(0));
  model.restore(ckpt);
  return model;
}

TransitionModel TransitionModel::load(const std::filesystem::path& path) {
  return from_checkpoint(Checkpoint::read(path));
}

// ---------------------------------------------------------------------------
// PolicyModel

PolicyModel::PolicyModel(std::size_t hidden_size, double u_max, RngStream init, NetInit options)
    : u_max_(u_max) {
  if (hidden_size == 0) throw RangeError("policy hidden size must be positive");
  if (!(u_max > 0.0)) throw RangeError("policy u_max must be positive");
  gru_ = GruCell(2 * kStateDim, hidden_size, init);
  head_ = GaussianHead(hidden_size, kActionDim, init, options.logvar_bias);
}

PolicyModel PolicyModel::clone() const {
  PolicyModel copy(hidden_size(), u_max_, RngStream(0));
  copy_parameters(parameters(), copy.parameters());
  return copy;
}

ad::Tensor PolicyModel::initial_hidden(std::size_t batch) const {
  return ad::Tensor::zeros({batch, hidden_size()});
}

PolicyStep PolicyModel::forward(const ad::Tensor& x, const ad::Tensor& target, const ad::Tensor& hidden,
                                RngStream& rng, ActionMode mode) const {
  if (mode == ActionMode::mean) return forward(x, target, hidden, nullptr);
  std::vector<double> eps(x.rows() * kActionDim);
  rng.fill_normal(eps);
  const ad::Tensor noise = ad::Tensor::from({x.rows(), kActionDim}, std::move(eps));
  return forward(x, target, hidden, &noise);
}

PolicyStep PolicyModel::forward(const ad::Tensor& x, const ad::Tensor& target, const ad::Tensor& hidden,
                                const ad::Tensor* eps) const {
  check_batch(x, kStateDim, target, kStateDim, "policy_forward");
  check_hidden(hidden, x.rows(), hidden_size(), "policy_forward");
  const ad::Tensor h = gru_.forward(ad::concat({x, target}), hidden);
  GaussianOutput g = head_.forward(h);
  const ad::Tensor pre = eps == nullptr ? g.mean : ad::gaussian_sample(g.mean, g.var, *eps);
  PolicyStep out;
  out.action = ad::scale(ad::tanh(pre), u_max_ * kSquashMargin);
  out.mean = std::move(g.mean);
  out.var = std::move(g.var);
  out.hidden = h;
  return out;
}

ParameterList PolicyModel::parameters() const {
  ParameterList out;
  gru_.collect("gru", out);
  head_.collect("head", out);
  return out;
}

void PolicyModel::set_requires_grad(bool on) const {
  for (auto& p : parameters()) p.tensor.set_requires_grad(on);
}

void PolicyModel::store(Checkpoint& ckpt) const {
  store_parameters(ckpt, kPrefix, parameters());
  ckpt.put_scalar(std::string(kPrefix) + ".u_max", u_max_);
}

void PolicyModel::restore(const Checkpoint& ckpt) {
  restore_parameters(ckpt, kPrefix, parameters());
  if (ckpt.contains(std::string(kPrefix) + ".u_max")) u_max_ = ckpt.scalar(std::string(kPrefix) + ".u_max");
}

void PolicyModel::save(const std::filesystem::path& path) const {
  Checkpoint ckpt;
  store(ckpt);
  ckpt.write(path);
}

void PolicyModel::load_params(const std::filesystem::path& path) { restore(Checkpoint::read(path)); }

PolicyModel PolicyModel::from_checkpoint(const Checkpoint& ckpt) {
  const std::string umax_key = std::string(kPrefix) + ".u_max";
  const double u_max = ckpt.contains(umax_key) ? ckpt.scalar(umax_key) : 1.0;
  PolicyModel model(hidden_from(ckpt, kPrefix), u_max, RngStream(0));
  model.restore(ckpt);
  return model;
}

PolicyModel PolicyModel::load(const std::filesystem::path& path) {
  return from_checkpoint(Checkpoint::read(path));
}

}  // namespace transpol
