#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "transpol/checkpoint.hpp"
#include "transpol/rng.hpp"
#include "transpol/tensor.hpp"

namespace transpol {

struct NamedParameter {
  std::string name;
  ad::Tensor tensor;
};
using ParameterList = std::vector<NamedParameter>;

/// Initialization knobs. Gate and head weights are uniform in +-1/sqrt(fan_in).
struct NetInit {
  double logvar_bias = -2.0;
};

/// Single GRU layer (reset / update / candidate gates, PyTorch gate ordering).
class GruCell {
 public:
  GruCell() = default;
  GruCell(std::size_t input_size, std::size_t hidden_size, RngStream& init);

  /// x: [B, input], h: [B, hidden] -> h': [B, hidden]
  [[nodiscard]] ad::Tensor forward(const ad::Tensor& x, const ad::Tensor& h) const;

  [[nodiscard]] std::size_t input_size() const { return input_size_; }
  [[nodiscard]] std::size_t hidden_size() const { return hidden_size_; }
  void collect(const std::string& prefix, ParameterList& out) const;

 private:
  std::size_t input_size_ = 0;
  std::size_t hidden_size_ = 0;
  ad::Tensor w_ih_;  // [input, 3H]
  ad::Tensor w_hh_;  // [H, 3H]
  ad::Tensor b_ih_;  // [1, 3H]
  ad::Tensor b_hh_;  // [1, 3H]
};

struct GaussianOutput {
  ad::Tensor mean;
  ad::Tensor log_var;
  ad::Tensor var;
};

/// Linear mean and log-variance maps; variance = exp(log-variance).
class GaussianHead {
 public:
  GaussianHead() = default;
  GaussianHead(std::size_t input_size, std::size_t output_size, RngStream& init, double logvar_bias);

  [[nodiscard]] GaussianOutput forward(const ad::Tensor& h) const;
  [[nodiscard]] std::size_t output_size() const { return output_size_; }
  void collect(const std::string& prefix, ParameterList& out) const;

 private:
  std::size_t output_size_ = 0;
  ad::Tensor w_mean_;
  ad::Tensor b_mean_;
  ad::Tensor w_logvar_;
  ad::Tensor b_logvar_;
};

struct TransitionStep {
  ad::Tensor mean_delta;  ///< [B, 4]
  ad::Tensor var_delta;   ///< [B, 4], strictly positive
  ad::Tensor hidden;
};

struct StatePrediction {
  ad::Tensor sample;  ///< reparameterized draw
  ad::Tensor mean;    ///< y_prev + mean_delta
  ad::Tensor var;
  ad::Tensor hidden;
};

/// Recurrent probabilistic forward model: (y_{t-1}, u_{t-1}) -> Gaussian over the state delta.
class TransitionModel {
 public:
  static constexpr std::size_t kStateDim = 4;
  static constexpr std::size_t kControlDim = 2;
  static constexpr const char* kPrefix = "transition";

  TransitionModel(std::size_t hidden_size, RngStream init, NetInit options = {});

  TransitionModel(TransitionModel&&) = default;
  TransitionModel& operator=(TransitionModel&&) = default;
  TransitionModel(const TransitionModel&) = delete;
  TransitionModel& operator=(const TransitionModel&) = delete;
  /// Deep copy of all parameters.
  [[nodiscard]] TransitionModel clone() const;

  [[nodiscard]] ad::Tensor initial_hidden(std::size_t batch) const;
  [[nodiscard]] TransitionStep forward(const ad::Tensor& y_prev, const ad::Tensor& u_prev,
                                       const ad::Tensor& hidden) const;
  /// State estimate with eps ~ N(0, I) drawn from `rng`.
  [[nodiscard]] StatePrediction predict_state(const ad::Tensor& y_prev, const ad::Tensor& u_prev,
                                              const ad::Tensor& hidden, RngStream& rng) const;
  /// State estimate with caller-provided standard-normal noise.
  [[nodiscard]] StatePrediction predict_state(const ad::Tensor& y_prev, const ad::Tensor& u_prev,
                                              const ad::Tensor& hidden, const ad::Tensor& eps) const;

  [[nodiscard]] std::size_t hidden_size() const { return gru_.hidden_size(); }
  [[nodiscard]] ParameterList parameters() const;
  void set_requires_grad(bool on) const;

  void save(const std::filesystem::path& path) const;
  static TransitionModel load(const std::filesystem::path& path);
  /// Loads in place; shape or name mismatches throw before anything is modified.
  void load_params(const std::filesystem::path& path);
  void store(Checkpoint& ckpt) const;
  void restore(const Checkpoint& ckpt);
  static TransitionModel from_checkpoint(const Checkpoint& ckpt);

 private:
  TransitionModel() = default;
  GruCell gru_;
  GaussianHead head_;
};

enum class ActionMode { sample, mean };

struct PolicyStep {
  ad::Tensor action;  ///< u_max * tanh(.), strictly inside the control box
  ad::Tensor mean;    ///< pre-squash mean
  ad::Tensor var;     ///< pre-squash variance
  ad::Tensor hidden;
};

/// Recurrent stochastic policy: (x, target) -> Gaussian over the pre-squash action.
class PolicyModel {
 public:
  static constexpr std::size_t kStateDim = 4;
  static constexpr std::size_t kActionDim = 2;
  static constexpr const char* kPrefix = "policy";

  PolicyModel(std::size_t hidden_size, double u_max, RngStream init, NetInit options = {});

  PolicyModel(PolicyModel&&) = default;
  PolicyModel& operator=(PolicyModel&&) = default;
  PolicyModel(const PolicyModel&) = delete;
  PolicyModel& operator=(const PolicyModel&) = delete;
  [[nodiscard]] PolicyModel clone() const;

  [[nodiscard]] ad::Tensor initial_hidden(std::size_t batch) const;
  [[nodiscard]] PolicyStep forward(const ad::Tensor& x, const ad::Tensor& target,
                                   const ad::Tensor& hidden, RngStream& rng, ActionMode mode) const;
  /// eps == nullptr selects the mean action; otherwise eps is the standard-normal draw.
  [[nodiscard]] PolicyStep forward(const ad::Tensor& x, const ad::Tensor& target,
                                   const ad::Tensor& hidden, const ad::Tensor* eps) const;

  [[nodiscard]] std::size_t hidden_size() const { return gru_.hidden_size(); }
  [[nodiscard]] double u_max() const { return u_max_; }
  [[nodiscard]] ParameterList parameters() const;
  void set_requires_grad(bool on) const;

  void save(const std::filesystem::path& path) const;
  static PolicyModel load(const std::filesystem::path& path);
  void load_params(const std::filesystem::path& path);
  void store(Checkpoint& ckpt) const;
  void restore(const Checkpoint& ckpt);
  static PolicyModel from_checkpoint(const Checkpoint& ckpt);

 private:
  PolicyModel() = default;
  GruCell gru_;
  GaussianHead head_;
  double u_max_ = 1.0;
};

/// Copies parameter values into `ckpt` under "<prefix>.<name>".
void store_parameters(Checkpoint& ckpt, const std::string& prefix, const ParameterList& params);
/// Validates every name and shape first, then copies; no partial load on error.
void restore_parameters(const Checkpoint& ckpt, const std::string& prefix, const ParameterList& params);
/// Total number of scalars.
std::size_t parameter_count(const ParameterList& params);

}  // namespace transpol
