#include "transpol/env.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "transpol/errors.hpp"

namespace transpol {

namespace {

double clip(double v, double bound) { return std::clamp(v, -bound, bound); }

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw RangeError(std::string("env parameter ") + name + " must be positive, got " +
                     std::to_string(v));
  }
}

}  // namespace

void EnvParams::validate() const {
  require_positive(dt, "dt");
  require_positive(x_max, "x_max");
  require_positive(v_max, "v_max");
  require_positive(u_max, "u_max");
  require_positive(a_max, "a_max");
  if (!std::isfinite(kappa) || !std::isfinite(gamma)) {
    throw RangeError("env parameters kappa and gamma must be finite");
  }
  for (double s : process_noise) {
    if (!(s >= 0.0)) throw RangeError("process noise std must be >= 0");
  }
  for (double s : observation_noise) {
    if (!(s >= 0.0)) throw RangeError("observation noise std must be >= 0");
  }
}

EnvParams EnvParams::noiseless() const {
  EnvParams p = *this;
  p.process_noise = {0.0, 0.0, 0.0};
  p.observation_noise = {0.0, 0.0};
  return p;
}

Vec2 rotate_control(const Vec2& u, double gamma) {
  const double c = std::cos(gamma);
  const double s = std::sin(gamma);
  // [u0 u1] * [[c, -s], [s, c]]
  return {u[0] * c + u[1] * s, -u[0] * s + u[1] * c};
}

State reset(const EnvParams& params, const Vec4& initial) {
  for (int i = 0; i < 2; ++i) {
    if (!(std::abs(initial[i]) <= params.x_max)) {
      throw RangeError("initial position component " + std::to_string(i) + " = " +
                       std::to_string(initial[i]) + " outside [-x_max, x_max]");
    }
    if (!(std::abs(initial[2 + i]) <= params.v_max)) {
      throw RangeError("initial velocity component " + std::to_string(i) + " = " +
                       std::to_string(initial[2 + i]) + " outside [-v_max, v_max]");
    }
  }
  State s;
  s.pos = {initial[0], initial[1]};
  s.vel = {initial[2], initial[3]};
  return s;
}

Vec4 observe(const State& s, const EnvParams& params, RngStream& observation_noise) {
  Vec4 y = s.exposed();
  // Draws happen unconditionally so the stream position never depends on the noise level.
  for (int i = 0; i < 4; ++i) {
    const double sigma = i < 2 ? params.observation_noise[0] : params.observation_noise[1];
    y[i] += sigma * observation_noise.normal();
  }
  return y;
}

StepResult step(const State& s, const Vec2& u, const EnvParams& params, EnvStreams& streams) {
  const Vec2 bounded = {clip(u[0], params.u_max), clip(u[1], params.u_max)};
  const Vec2 rotated = rotate_control(bounded, params.gamma);

  State next;
  for (int i = 0; i < 2; ++i) {
    next.pos[i] = clip(s.pos[i] + params.dt * s.vel[i] +
                           params.process_noise[0] * streams.process.normal(),
                       params.x_max);
  }
  for (int i = 0; i < 2; ++i) {
    next.vel[i] = clip(s.vel[i] + params.dt * s.acc[i] +
                           params.process_noise[1] * streams.process.normal(),
                       params.v_max);
  }
  for (int i = 0; i < 2; ++i) {
    next.acc[i] = clip(params.kappa * rotated[i] + params.process_noise[2] * streams.process.normal(),
                       params.a_max);
  }
  return {next, observe(next, params, streams.observation)};
}

PointMassEnv::PointMassEnv(EnvParams params, const RngStream& episode_stream)
    : params_(params), streams_(EnvStreams::from(episode_stream)) {
  params_.validate();
}

Vec4 PointMassEnv::reset(const Vec4& initial) {
  state_ = transpol::reset(params_, initial);
  return observe(state_, params_, streams_.observation);
}

Vec4 PointMassEnv::step(const Vec2& u) {
  auto result = transpol::step(state_, u, params_, streams_);
  state_ = result.state;
  return result.observation;
}

}  // namespace transpol
