#pragma once

#include <cstddef>
#include <string>

#include <Eigen/Dense>

#include "transpol/env.hpp"
#include "transpol/episode.hpp"

namespace transpol {

/// Continuous-time linear system with quadratic costs: dx/dt = A x + B u.
struct LinearSystem {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;

  /// Double integrator per axis with control gain kappa, Q = diag(q_pos, q_pos, q_vel, q_vel), R = r I.
  static LinearSystem point_mass(double kappa, double q_pos = 1.0, double q_vel = 0.1, double r = 0.1);

  /// Throws DimensionError on inconsistent sizes and ContractError unless Q is
  /// symmetric PSD and R symmetric PD.
  void validate() const;
};

struct LqrGain {
  Eigen::MatrixXd K;  ///< R^-1 B^T P
  Eigen::MatrixXd P;  ///< stabilizing CARE solution
  double residual = 0.0;  ///< max-abs CARE residual
  int iterations = 0;
};

struct CareOptions {
  double tolerance = 1e-12;
  int max_iterations = 100;
  double accept_residual = 1e-9;
};

/// Max-abs entry of A^T P + P A - P B R^-1 B^T P + Q.
double care_residual(const LinearSystem& sys, const Eigen::MatrixXd& P);

/// Solves A X + X A^T = C.
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C);

/// Newton-Kleinman iteration on the CARE. The initial gain is zero when A is
/// already Hurwitz, otherwise Bass's construction (requires (A, B) controllable).
/// Throws ContractError if no stabilizing start exists or the residual stays above
/// options.accept_residual.
LqrGain solve_care(const LinearSystem& sys, const CareOptions& options = {});

/// u = clip(-K (x - target), +-u_max).
Vec2 lqr_control(const Vec4& x, const Vec4& target, const Eigen::MatrixXd& K, double u_max);

struct LqrScenario {
  Vec4 start{-0.5, 0.5, 0.0, 0.0};
  Vec4 target{0.5, -0.5, 0.0, 0.0};
  std::size_t steps = 200;
  std::uint64_t seed = 0;
  bool with_noise = false;
};

struct LqrScenarioResult {
  EpisodeRecord episode;
  double final_error = 0.0;  ///< position distance to the target after the last step
  double overshoot = 0.0;    ///< largest travel past the target along the start-to-target line
};

/// Closed-loop run of the clipped LQR law from `start` towards a fixed target.
LqrScenarioResult run_lqr_scenario(const EnvParams& params, const Eigen::MatrixXd& K, const LqrScenario& scenario);

std::string gain_to_json(const LqrGain& gain);
/// Rows "matrix,row,c0,c1,..." for K then P.
std::string gain_to_csv(const LqrGain& gain);

}  // namespace transpol
