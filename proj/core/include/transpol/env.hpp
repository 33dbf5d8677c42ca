#pragma once

#include <array>

#include "transpol/rng.hpp"

namespace transpol {

using Vec2 = std::array<double, 2>;
using Vec4 = std::array<double, 4>;

/// Point-mass plane parameters. Defaults follow the reference training setup.
struct EnvParams {
  double dt = 0.02;
  double kappa = 5.0;
  double gamma = 0.0;  ///< control rotation, radians
  std::array<double, 3> process_noise{0.001, 0.001, 0.001};  ///< std for position, velocity, acceleration
  std::array<double, 2> observation_noise{0.001, 0.001};     ///< std for position, velocity
  double x_max = 1.0;
  double v_max = 1.0;
  double u_max = 1.0;
  double a_max = 5.0;  ///< kappa * u_max, so acceleration clipping only binds under noise

  /// Throws RangeError if dt, ranges or noise levels are not admissible.
  void validate() const;
  [[nodiscard]] EnvParams noiseless() const;
};

/// Full integrator state. Acceleration is internal; models only see exposed().
struct State {
  Vec2 pos{};
  Vec2 vel{};
  Vec2 acc{};

  [[nodiscard]] Vec4 exposed() const { return {pos[0], pos[1], vel[0], vel[1]}; }
};

/// Independent noise streams for one environment instance.
struct EnvStreams {
  RngStream process;
  RngStream observation;

  static EnvStreams from(const RngStream& episode) {
    return {episode.substream(kProcessNoise), episode.substream(kObservationNoise)};
  }
};

struct StepResult {
  State state;
  Vec4 observation;
};

/// u' = u * R(gamma) with u taken as a row vector.
Vec2 rotate_control(const Vec2& u, double gamma);

/// Starting state with zero acceleration. Throws RangeError outside the bounds.
State reset(const EnvParams& params, const Vec4& initial);

/// Observation of a state without advancing it (noise from the observation stream).
Vec4 observe(const State& s, const EnvParams& params, RngStream& observation_noise);

/// One forward-Euler step: position from the old velocity, velocity from the old
/// acceleration, then acceleration from the (clipped, rotated) control. Each stage
/// adds its process noise and is clipped to its range.
StepResult step(const State& s, const Vec2& u, const EnvParams& params, EnvStreams& streams);

/// Single environment instance with its own streams.
class PointMassEnv {
 public:
  PointMassEnv(EnvParams params, const RngStream& episode_stream);

  Vec4 reset(const Vec4& initial);
  Vec4 step(const Vec2& u);

  [[nodiscard]] const State& state() const { return state_; }
  [[nodiscard]] const EnvParams& params() const { return params_; }

 private:
  EnvParams params_;
  EnvStreams streams_;
  State state_;
};

}  // namespace transpol
