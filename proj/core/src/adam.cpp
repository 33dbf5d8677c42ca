#include "transpol/adam.hpp"

#include <cmath>

#include "transpol/errors.hpp"

namespace transpol {

Adam::Adam(ParameterList params, AdamOptions options) : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    first_.emplace_back(p.tensor.size(), 0.0);
    second_.emplace_back(p.tensor.size(), 0.0);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

double Adam::gradient_norm() const {
  double sq = 0.0;
  for (const auto& p : params_) {
    for (double g : p.tensor.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

void Adam::step() {
  for (const auto& p : params_) {
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) {
        throw NonFiniteError("non-finite gradient in parameter '" + p.name + "'; update aborted");
      }
    }
  }
  double clip = 1.0;
  if (options_.clip_norm > 0.0) {
    const double norm = gradient_norm();
    if (norm > options_.clip_norm) clip = options_.clip_norm / norm;
  }

  ++steps_;
  const double t = static_cast<double>(steps_);
  const double bc1 = 1.0 - std::pow(options_.beta1, t);
  const double bc2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    ad::Tensor param = params_[k].tensor;
    const auto grad = param.grad();
    const bool untouched = grad.empty();  // never reached by backward: zero gradient
    auto value = param.mutable_data();
    auto& m = first_[k];
    auto& v = second_[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = untouched ? 0.0 : grad[i] * clip;
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g;
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      value[i] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }
}

void Adam::store(Checkpoint& ckpt, const std::string& prefix) const {
  ckpt.put_scalar(prefix + ".steps", static_cast<double>(steps_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const std::vector<std::uint64_t> shape = {first_[k].size()};
    ckpt.put(prefix + ".m." + params_[k].name, shape, first_[k]);
    ckpt.put(prefix + ".v." + params_[k].name, shape, second_[k]);
  }
}

void Adam::restore(const Checkpoint& ckpt, const std::string& prefix) {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const auto& m = ckpt.get(prefix + ".m." + params_[k].name);
    const auto& v = ckpt.get(prefix + ".v." + params_[k].name);
    if (m.data.size() != first_[k].size() || v.data.size() != second_[k].size()) {
      throw DimensionError("optimizer state for '" + params_[k].name + "' has the wrong size");
    }
  }
  steps_ = static_cast<std::uint64_t>(ckpt.scalar(prefix + ".steps"));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    first_[k] = ckpt.get(prefix + ".m." + params_[k].name).data;
    second_[k] = ckpt.get(prefix + ".v." + params_[k].name).data;
  }
}

}  // namespace transpol
