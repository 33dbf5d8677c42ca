#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <json.hpp>

#include "transpol/errors.hpp"
#include "transpol/lqr.hpp"

namespace {

using namespace transpol;
using Eigen::MatrixXd;

// Stabilizing CARE solution from the stable invariant subspace of the Hamiltonian.
MatrixXd hamiltonian_oracle(const LinearSystem& s) {
  const Eigen::Index n = s.A.rows();
  MatrixXd H(2 * n, 2 * n);
  H << s.A, -s.B * s.R.inverse() * s.B.transpose(), -s.Q, -s.A.transpose();
  const Eigen::ComplexEigenSolver<MatrixXd> es(H);
  Eigen::MatrixXcd U(2 * n, n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    if (es.eigenvalues()[i].real() < 0) U.col(k++) = es.eigenvectors().col(i);
  }
  EXPECT_EQ(k, n);
  const Eigen::MatrixXcd P = U.bottomRows(n) * U.topRows(n).inverse();
  return P.real();
}

LinearSystem random_system(RngStream& rng, Eigen::Index n, Eigen::Index m) {
  LinearSystem s;
  s.A = MatrixXd(n, n);
  s.B = MatrixXd(n, m);
  for (Eigen::Index i = 0; i < s.A.size(); ++i) s.A.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < s.B.size(); ++i) s.B.data()[i] = rng.normal();
  MatrixXd L(n, n), M(m, m);
  for (Eigen::Index i = 0; i < L.size(); ++i) L.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] = rng.normal();
  s.Q = L * L.transpose() + 0.1 * MatrixXd::Identity(n, n);
  s.R = M * M.transpose() + 0.5 * MatrixXd::Identity(m, m);
  return s;
}

bool hurwitz(const MatrixXd& M) {
  const Eigen::EigenSolver<MatrixXd> es(M);
  return (es.eigenvalues().real().array() < 0).all();
}

TEST(Care, PointMassGainMatchesReference) {
  const LqrGain g = solve_care(LinearSystem::point_mass(5.0));
  MatrixXd K(2, 4);
  K << 3.16227766, 0, 1.50496215, 0, 0, 3.16227766, 0, 1.50496215;
  EXPECT_LE((g.K - K).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE(g.residual, 1e-9);
}

TEST(Care, ScalarIntegratorHasUnitSolution) {
  LinearSystem s;
  s.A = MatrixXd::Zero(1, 1);
  s.B = MatrixXd::Ones(1, 1);
  s.Q = MatrixXd::Ones(1, 1);
  s.R = MatrixXd::Ones(1, 1);
  const LqrGain g = solve_care(s);
  EXPECT_NEAR(g.P(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(g.K(0, 0), 1.0, 1e-12);
}

TEST(Care, DoubleIntegratorClosedForm) {
  // P = [[sqrt(2), 1], [1, sqrt(2)]] for A = [[0,1],[0,0]], B = e2, Q = I, R = 1
  LinearSystem s;
  s.A = MatrixXd::Zero(2, 2);
  s.A(0, 1) = 1;
  s.B = MatrixXd::Zero(2, 1);
  s.B(1, 0) = 1;
  s.Q = MatrixXd::Identity(2, 2);
  s.R = MatrixXd::Ones(1, 1);
  const LqrGain g = solve_care(s);
  EXPECT_NEAR(g.P(0, 0), std::sqrt(3.0), 1e-10);
  EXPECT_NEAR(g.P(0, 1), 1.0, 1e-10);
  EXPECT_NEAR(g.P(1, 1), std::sqrt(3.0), 1e-10);
  EXPECT_NEAR(g.K(0, 0), 1.0, 1e-10);
  EXPECT_NEAR(g.K(0, 1), std::sqrt(3.0), 1e-10);
}

TEST(Care, RandomSystemsMatchHamiltonianOracle) {
  RngStream rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(4));
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng.below(2));
    const LinearSystem s = random_system(rng, n, m);
    const LqrGain g = solve_care(s);
    EXPECT_LE(g.residual, 1e-9) << "trial " << trial;
    EXPECT_LE((g.P - g.P.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE(hurwitz(s.A - s.B * g.K)) << "trial " << trial;
    const MatrixXd P = hamiltonian_oracle(s);
    EXPECT_LE((g.P - P).cwiseAbs().maxCoeff() / (1.0 + P.cwiseAbs().maxCoeff()), 1e-8) << "trial " << trial;
  }
}

TEST(Care, DoublingRMatchesHalvingQ) {
  LinearSystem a = LinearSystem::point_mass(5.0);
  LinearSystem b = a;
  a.R *= 2.0;
  b.Q *= 0.5;
  const LqrGain ga = solve_care(a), gb = solve_care(b);
  EXPECT_LE((ga.K - gb.K).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT(ga.K(0, 0), solve_care(LinearSystem::point_mass(5.0)).K(0, 0));
}

TEST(Care, HurwitzSystemStartsFromZeroGain) {
  LinearSystem s;
  s.A = -MatrixXd::Identity(2, 2);
  s.B = MatrixXd::Identity(2, 2);
  s.Q = MatrixXd::Identity(2, 2);
  s.R = MatrixXd::Identity(2, 2);
  const LqrGain g = solve_care(s);
  // scalar CARE -2p - p^2 + 1 = 0
  EXPECT_NEAR(g.P(0, 0), std::sqrt(2.0) - 1.0, 1e-12);
}

TEST(Care, UncontrollableUnstableSystemIsRejected) {
  LinearSystem s;
  s.A = MatrixXd::Identity(2, 2);
  s.B = MatrixXd::Zero(2, 1);
  s.B(0, 0) = 1;
  s.Q = MatrixXd::Identity(2, 2);
  s.R = MatrixXd::Ones(1, 1);
  EXPECT_THROW((void)solve_care(s), ContractError);
}

TEST(Care, InvalidWeightsAreRejected) {
  LinearSystem s = LinearSystem::point_mass(5.0);
  s.Q(0, 0) = -1.0;
  EXPECT_THROW((void)solve_care(s), ContractError);
  s = LinearSystem::point_mass(5.0);
  s.R(0, 0) = 0.0;
  EXPECT_THROW((void)solve_care(s), ContractError);
  s = LinearSystem::point_mass(5.0);
  s.Q(0, 1) = 0.5;
  EXPECT_THROW((void)solve_care(s), ContractError);
  s = LinearSystem::point_mass(5.0);
  s.B = MatrixXd::Zero(3, 2);
  EXPECT_THROW((void)solve_care(s), DimensionError);
}

TEST(Lyapunov, SolvesRandomEquations) {
  RngStream rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    MatrixXd A(4, 4), C(4, 4);
    for (Eigen::Index i = 0; i < 16; ++i) {
      A.data()[i] = rng.normal();
      C.data()[i] = rng.normal();
    }
    A -= 5.0 * MatrixXd::Identity(4, 4);
    const MatrixXd X = solve_lyapunov(A, C);
    EXPECT_LE((A * X + X * A.transpose() - C).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Control, ExamplesAndClipping) {
  const MatrixXd K = solve_care(LinearSystem::point_mass(5.0)).K;
  const Vec4 target{0.5, -0.5, 0, 0};
  EXPECT_EQ(lqr_control(target, target, K, 1.0), (Vec2{0.0, 0.0}));
  const Vec2 u = lqr_control({0.4, -0.5, 0, 0}, target, K, 1.0);
  EXPECT_NEAR(u[0], 0.316227766, 1e-8);
  EXPECT_NEAR(u[1], 0.0, 1e-15);
  const Vec2 far = lqr_control({-1, 1, 0, 0}, target, K, 1.0);
  EXPECT_EQ(far[0], 1.0);
  EXPECT_EQ(far[1], -1.0);
}

TEST(Scenario, ReachesTargetWithoutOvershoot) {
  const MatrixXd K = solve_care(LinearSystem::point_mass(5.0)).K;
  const auto r = run_lqr_scenario(EnvParams{}, K, LqrScenario{});
  EXPECT_LE(r.final_error, 0.02);
  EXPECT_LE(r.overshoot, 0.1);
  EXPECT_EQ(r.episode.length(), 200u);
  LqrScenario noisy;
  noisy.with_noise = true;
  EXPECT_LE(run_lqr_scenario(EnvParams{}, K, noisy).final_error, 0.02);
}

TEST(Export, JsonCarriesGainAndResidual) {
  const LqrGain g = solve_care(LinearSystem::point_mass(5.0));
  const auto j = nlohmann::json::parse(gain_to_json(g));
  EXPECT_NEAR(j.at("K").at(0).at(0).get<double>(), g.K(0, 0), 1e-15);
  EXPECT_EQ(j.at("P").size(), 4u);
  EXPECT_TRUE(j.contains("residual"));
  EXPECT_NE(gain_to_csv(g).find("K,0,"), std::string::npos);
}

}  // namespace
