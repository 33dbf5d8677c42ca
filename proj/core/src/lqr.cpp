#include "transpol/lqr.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "transpol/episode_csv.hpp"
#include "transpol/errors.hpp"

namespace transpol {

namespace {

bool is_hurwitz(const Eigen::MatrixXd& A) {
  const Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
  return (es.eigenvalues().real().array() < 0.0).all();
}

Eigen::MatrixXd bass_gain(const LinearSystem& sys) {
  const auto n = sys.A.rows();
  const double beta = sys.A.norm() + 1.0;
  const Eigen::MatrixXd shifted = sys.A + beta * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd Z = solve_lyapunov(shifted, 2.0 * sys.B * sys.B.transpose());
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(Z);
  if (!lu.isInvertible()) {
    throw ContractError("solve_care: (A, B) is not controllable and A is not Hurwitz; no stabilizing initial gain");
  }
  return sys.B.transpose() * lu.inverse();
}

}  // namespace

LinearSystem LinearSystem::point_mass(double kappa, double q_pos, double q_vel, double r) {
  LinearSystem sys;
  sys.A = Eigen::MatrixXd::Zero(4, 4);
  sys.A(0, 2) = 1.0;
  sys.A(1, 3) = 1.0;
  sys.B = Eigen::MatrixXd::Zero(4, 2);
  sys.B(2, 0) = kappa;
  sys.B(3, 1) = kappa;
  sys.Q = Eigen::Vector4d(q_pos, q_pos, q_vel, q_vel).asDiagonal();
  sys.R = r * Eigen::MatrixXd::Identity(2, 2);
  return sys;
}

void LinearSystem::validate() const {
  const auto n = A.rows();
  const auto m = B.cols();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != m || R.cols() != m ||
      n == 0 || m == 0) {
    std::ostringstream msg;
    msg << "LinearSystem: inconsistent sizes A " << A.rows() << "x" << A.cols() << ", B " << B.rows() << "x"
        << B.cols() << ", Q " << Q.rows() << "x" << Q.cols() << ", R " << R.rows() << "x" << R.cols();
    throw DimensionError(msg.str());
  }
  const double tol = 1e-12 * std::max(1.0, Q.cwiseAbs().maxCoeff());
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > tol) throw ContractError("LinearSystem: Q is not symmetric");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> qs(Q);
  if (qs.eigenvalues().minCoeff() < -tol) throw ContractError("LinearSystem: Q is not positive semidefinite");
  if ((R - R.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, R.cwiseAbs().maxCoeff())) {
    throw ContractError("LinearSystem: R is not symmetric");
  }
  const Eigen::LLT<Eigen::MatrixXd> rl(R);
  if (rl.info() != Eigen::Success) throw ContractError("LinearSystem: R is not positive definite");
}

double care_residual(const LinearSystem& sys, const Eigen::MatrixXd& P) {
  const Eigen::MatrixXd BtP = sys.B.transpose() * P;
  const Eigen::MatrixXd res =
      sys.A.transpose() * P + P * sys.A - BtP.transpose() * sys.R.ldlt().solve(BtP) + sys.Q;
  return res.cwiseAbs().maxCoeff();
}

Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C) {
  const auto n = A.rows();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  // Column-major vec: vec(A X + X A^T) = (I (x) A + A (x) I) vec(X).
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      M.block(i * n, j * n, n, n) += I(i, j) * A + A(i, j) * I;
    }
  }
  const Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(C.data(), n * n);
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
  const Eigen::VectorXd x = lu.solve(c);
  return Eigen::Map<const Eigen::MatrixXd>(x.data(), n, n);
}

LqrGain solve_care(const LinearSystem& sys, const CareOptions& options) {
  sys.validate();
  const auto n = sys.A.rows();
  Eigen::MatrixXd K = is_hurwitz(sys.A) ? Eigen::MatrixXd::Zero(sys.B.cols(), n) : bass_gain(sys);
  if (!is_hurwitz(sys.A - sys.B * K)) {
    throw ContractError("solve_care: initial gain is not stabilizing; system may not be stabilizable");
  }
  const auto r_solver = sys.R.ldlt();

  LqrGain out;
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (int it = 1; it <= options.max_iterations; ++it) {
    const Eigen::MatrixXd Acl = sys.A - sys.B * K;
    Eigen::MatrixXd next = solve_lyapunov(Acl.transpose(), -(sys.Q + K.transpose() * sys.R * K));
    next = (0.5 * (next + next.transpose())).eval();
    const double change = (next - P).cwiseAbs().maxCoeff();
    P = std::move(next);
    K = r_solver.solve(sys.B.transpose() * P);
    out.iterations = it;
    out.residual = care_residual(sys, P);
    if (out.residual <= options.tolerance || change <= options.tolerance * std::max(1.0, P.cwiseAbs().maxCoeff())) {
      break;
    }
  }
  if (!(out.residual <= options.accept_residual)) {
    std::ostringstream msg;
    msg << "solve_care: residual " << out.residual << " after " << out.iterations << " iterations exceeds "
        << options.accept_residual;
    throw ContractError(msg.str());
  }
  if (!is_hurwitz(sys.A - sys.B * K)) throw ContractError("solve_care: converged gain is not stabilizing");
  out.K = K;
  out.P = P;
  return out;
}

Vec2 lqr_control(const Vec4& x, const Vec4& target, const Eigen::MatrixXd& K, double u_max) {
  if (K.rows() != 2 || K.cols() != 4) throw DimensionError("lqr_control: K must be 2x4");
  Eigen::Vector4d err;
  for (int i = 0; i < 4; ++i) err[i] = x[i] - target[i];
  const Eigen::Vector2d u = -K * err;
  return {std::clamp(u[0], -u_max, u_max), std::clamp(u[1], -u_max, u_max)};
}

LqrScenarioResult run_lqr_scenario(const EnvParams& params, const Eigen::MatrixXd& K, const LqrScenario& scenario) {
  const EnvParams p = scenario.with_noise ? params : params.noiseless();
  PointMassEnv env(p, RngStream(scenario.seed));
  LqrScenarioResult out;
  auto& ep = out.episode;
  ep.seed = scenario.seed;
  Vec4 y = env.reset(scenario.start);
  ep.states.push_back(env.state().exposed());

  const double dx = scenario.target[0] - scenario.start[0];
  const double dy = scenario.target[1] - scenario.start[1];
  const double len = std::hypot(dx, dy);
  for (std::size_t t = 0; t < scenario.steps; ++t) {
    const Vec2 u = lqr_control(y, scenario.target, K, p.u_max);
    const Vec4 y_next = env.step(u);
    ep.steps.push_back({y, scenario.target, u, y_next});
    const Vec4 x = env.state().exposed();
    ep.states.push_back(x);
    if (len > 0.0) {
      const double past = ((x[0] - scenario.target[0]) * dx + (x[1] - scenario.target[1]) * dy) / len;
      out.overshoot = std::max(out.overshoot, past);
    }
    y = y_next;
  }
  const Vec4& last = ep.states.back();
  out.final_error = std::hypot(last[0] - scenario.target[0], last[1] - scenario.target[1]);
  return out;
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

std::string gain_to_json(const LqrGain& gain) {
  nlohmann::json j;
  j["K"] = matrix_json(gain.K);
  j["P"] = matrix_json(gain.P);
  j["residual"] = gain.residual;
  j["iterations"] = gain.iterations;
  return j.dump(2);
}

std::string gain_to_csv(const LqrGain& gain) {
  std::ostringstream out;
  const auto dump = [&](const char* name, const Eigen::MatrixXd& M) {
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      out << name << ',' << i;
      for (Eigen::Index j = 0; j < M.cols(); ++j) out << ',' << format_double(M(i, j));
      out << '\n';
    }
  };
  out << "matrix,row";
  for (Eigen::Index j = 0; j < std::max(gain.K.cols(), gain.P.cols()); ++j) out << ",c" << j;
  out << '\n';
  dump("K", gain.K);
  dump("P", gain.P);
  return out.str();
}

}  // namespace transpol
