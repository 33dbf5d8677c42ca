#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "transpol/errors.hpp"
#include "transpol/gradcheck.hpp"
#include "transpol/losses.hpp"
#include "transpol/nets.hpp"

namespace {

using namespace transpol;
using ad::Tensor;

namespace fs = std::filesystem;

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "transpol_test_nets";
  fs::create_directories(dir);
  return dir / name;
}

void zero_parameters(const ParameterList& params) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    for (double& v : t.mutable_data()) v = 0.0;
  }
}

Tensor random_batch(std::size_t rows, std::size_t cols, RngStream& rng, bool param = false) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = 2 * rng.uniform() - 1;
  return param ? Tensor::parameter({rows, cols}, v) : Tensor::from({rows, cols}, v);
}

std::vector<Tensor> tensors(const ParameterList& params) {
  std::vector<Tensor> out;
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

TEST(Transition, ZeroParametersGiveZeroMeanUnitVariance) {
  const TransitionModel m(8, RngStream(1));
  zero_parameters(m.parameters());
  RngStream rng(2);
  const auto s = m.forward(random_batch(3, 4, rng), random_batch(3, 2, rng), m.initial_hidden(3));
  for (double v : s.mean_delta.data()) EXPECT_EQ(v, 0.0);
  for (double v : s.var_delta.data()) EXPECT_EQ(v, 1.0);
}

TEST(Transition, ForwardIsPure) {
  const TransitionModel m(8, RngStream(1));
  RngStream rng(3);
  const Tensor y = random_batch(2, 4, rng), u = random_batch(2, 2, rng), h = m.initial_hidden(2);
  const auto a = m.forward(y, u, h);
  const auto b = m.forward(y, u, h);
  EXPECT_TRUE(std::equal(a.mean_delta.data().begin(), a.mean_delta.data().end(), b.mean_delta.data().begin()));
  EXPECT_TRUE(std::equal(a.var_delta.data().begin(), a.var_delta.data().end(), b.var_delta.data().begin()));
}

TEST(Transition, ParameterGradientsMatchFiniteDifferences) {
  const TransitionModel m(6, RngStream(4));
  RngStream rng(5);
  const Tensor y = random_batch(3, 4, rng), u = random_batch(3, 2, rng);
  const auto f = [&] { return ad::sum(m.forward(y, u, m.initial_hidden(3)).mean_delta); };
  RngStream pick(6);
  GradcheckOptions o;
  o.entries_per_tensor = 20;
  EXPECT_LE(check_gradients(f, tensors(m.parameters()), o, pick).max_rel_error, 1e-4);
}

TEST(Transition, PredictStateAddsDelta) {
  const TransitionModel m(4, RngStream(1));
  zero_parameters(m.parameters());
  ParameterList params = m.parameters();
  for (auto& p : params) {
    if (p.name == "head.b_mean") p.tensor.mutable_data()[0] = 0.01;
  }
  const Tensor y = Tensor::from({1, 4}, {0.1, 0, 0, 0});
  const Tensor u = Tensor::zeros({1, 2});
  const Tensor eps = Tensor::zeros({1, 4});
  const auto p = m.predict_state(y, u, m.initial_hidden(1), eps);
  EXPECT_NEAR(p.sample.data()[0], 0.11, 1e-15);
  EXPECT_EQ(p.sample.data()[1], 0.0);
  EXPECT_NEAR(p.mean.data()[0], 0.11, 1e-15);
}

TEST(Transition, SampleDependsOnPreviousControl) {
  const TransitionModel m(6, RngStream(7));
  RngStream rng(8);
  const Tensor y = random_batch(2, 4, rng);
  const Tensor u = random_batch(2, 2, rng, true);
  const Tensor eps = random_batch(2, 4, rng);
  ad::Tape tape;
  {
    const ad::TapeScope scope(tape);
    tape.backward(ad::sum(m.predict_state(y, u, m.initial_hidden(2), eps).sample));
  }
  double norm = 0.0;
  for (double g : u.grad()) norm += std::abs(g);
  EXPECT_GT(norm, 1e-6);
  const auto f = [&] { return ad::sum(m.predict_state(y, u, m.initial_hidden(2), eps).sample); };
  RngStream pick(1);
  EXPECT_LE(check_gradients(f, {u}, GradcheckOptions{}, pick).max_rel_error, 1e-4);
}

TEST(Transition, ShapeMismatchIsDimensionError) {
  const TransitionModel m(4, RngStream(1));
  EXPECT_THROW((void)m.forward(Tensor::zeros({2, 4}), Tensor::zeros({3, 2}), m.initial_hidden(2)), DimensionError);
  EXPECT_THROW((void)m.forward(Tensor::zeros({2, 4}), Tensor::zeros({2, 2}), m.initial_hidden(3)), DimensionError);
}

TEST(Transition, HiddenResetRemovesHistory) {
  const TransitionModel m(8, RngStream(9));
  RngStream rng(10);
  const auto run = [&](std::uint64_t prefix_seed) {
    RngStream pr(prefix_seed);
    Tensor h = m.initial_hidden(1);
    for (int t = 0; t < 5; ++t) h = m.forward(random_batch(1, 4, pr), random_batch(1, 2, pr), h).hidden;
    h = m.initial_hidden(1);
    RngStream suffix(77);
    std::vector<double> out;
    for (int t = 0; t < 5; ++t) {
      const auto s = m.forward(random_batch(1, 4, suffix), random_batch(1, 2, suffix), h);
      h = s.hidden;
      out.insert(out.end(), s.mean_delta.data().begin(), s.mean_delta.data().end());
    }
    return out;
  };
  EXPECT_EQ(run(1), run(2));
}

TEST(Transition, VarianceIsPositiveForExtremeInputs) {
  const TransitionModel m(8, RngStream(3));
  const Tensor y = Tensor::from({2, 4}, {50, -50, 50, -50, 1e3, 1e3, -1e3, 0});
  const Tensor u = Tensor::from({2, 2}, {30, -30, 1e3, -1e3});
  const auto s = m.forward(y, u, m.initial_hidden(2));
  for (double v : s.var_delta.data()) EXPECT_GT(v, 0.0);
  for (double v : s.hidden.data()) EXPECT_LE(std::abs(v), 1.0);
}

TEST(Policy, ZeroParametersGiveZeroMeanAction) {
  const PolicyModel p(8, 1.0, RngStream(1));
  zero_parameters(p.parameters());
  RngStream rng(2);
  const auto s = p.forward(random_batch(3, 4, rng), random_batch(3, 4, rng), p.initial_hidden(3), rng,
                           ActionMode::mean);
  for (double v : s.action.data()) EXPECT_EQ(v, 0.0);
}

TEST(Policy, ActionsStayStrictlyInsideBox) {
  const PolicyModel p(8, 1.0, RngStream(3));
  ParameterList params = p.parameters();
  for (auto& q : params) {
    for (double& v : q.tensor.mutable_data()) v *= 200.0;
  }
  RngStream rng(4);
  for (const auto mode : {ActionMode::mean, ActionMode::sample}) {
    const auto s = p.forward(random_batch(16, 4, rng), random_batch(16, 4, rng), p.initial_hidden(16), rng, mode);
    for (double v : s.action.data()) EXPECT_LT(std::abs(v), 1.0);
  }
}

TEST(Policy, GradientOfActionsMatchesFiniteDifferences) {
  const PolicyModel p(6, 1.0, RngStream(5));
  RngStream rng(6);
  const Tensor x = random_batch(3, 4, rng, true), target = random_batch(3, 4, rng);
  const Tensor eps = random_batch(3, 2, rng);
  const auto f = [&] { return ad::sum(p.forward(x, target, p.initial_hidden(3), &eps).action); };
  auto inputs = tensors(p.parameters());
  inputs.push_back(x);
  RngStream pick(7);
  GradcheckOptions o;
  o.entries_per_tensor = 20;
  EXPECT_LE(check_gradients(f, inputs, o, pick).max_rel_error, 1e-4);
}

TEST(Checkpoint, SaveLoadIsBitExact) {
  const TransitionModel m(8, RngStream(11));
  const fs::path path = temp_file("t.ckpt");
  m.save(path);
  const TransitionModel l = TransitionModel::load(path);
  const auto a = m.parameters(), b = l.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_EQ(a[i].tensor.shape(), b[i].tensor.shape());
    EXPECT_TRUE(std::equal(a[i].tensor.data().begin(), a[i].tensor.data().end(), b[i].tensor.data().begin()));
  }
  const PolicyModel p(8, 0.5, RngStream(12));
  p.save(temp_file("p.ckpt"));
  const PolicyModel q = PolicyModel::load(temp_file("p.ckpt"));
  EXPECT_EQ(q.u_max(), 0.5);
  EXPECT_EQ(q.hidden_size(), 8u);
}

TEST(Checkpoint, HiddenSizeMismatchIsShapeErrorWithoutPartialLoad) {
  TransitionModel small(8, RngStream(13));
  TransitionModel big(16, RngStream(14));
  const fs::path path = temp_file("small.ckpt");
  small.save(path);
  const auto before = big.parameters();
  std::vector<std::vector<double>> snapshot;
  for (const auto& p : before) snapshot.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  EXPECT_THROW(big.load_params(path), DimensionError);
  const auto after = big.parameters();
  for (std::size_t i = 0; i < after.size(); ++i) {
    EXPECT_TRUE(std::equal(snapshot[i].begin(), snapshot[i].end(), after[i].tensor.data().begin()));
  }
}

TEST(Checkpoint, CorruptHeaderIsVersionError) {
  const fs::path path = temp_file("corrupt.ckpt");
  TransitionModel(4, RngStream(1)).save(path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
  }
  try {
    (void)TransitionModel::load(path);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, TruncatedFileIsFormatError) {
  const fs::path path = temp_file("trunc.ckpt");
  TransitionModel(4, RngStream(1)).save(path);
  fs::resize_file(path, fs::file_size(path) / 2);
  EXPECT_THROW((void)TransitionModel::load(path), FormatError);
}

TEST(ChainedRollout, PolicyLossGradientThroughFiveImaginedSteps) {
  const TransitionModel transition(8, RngStream(21));
  const PolicyModel policy(8, 1.0, RngStream(22));
  transition.set_requires_grad(false);
  RngStream rng(23);
  const Tensor x0 = random_batch(4, 4, rng);
  const Tensor target = random_batch(4, 4, rng);
  std::vector<Tensor> eu, ex;
  for (int s = 0; s < 5; ++s) {
    eu.push_back(random_batch(4, 2, rng));
    ex.push_back(random_batch(4, 4, rng));
  }
  const auto f = [&] {
    Tensor ht = transition.initial_hidden(4), hp = policy.initial_hidden(4), x = x0;
    std::vector<Tensor> traj;
    for (int s = 0; s < 5; ++s) {
      const auto a = policy.forward(x, target, hp, &eu[s]);
      hp = a.hidden;
      const auto p = transition.predict_state(x, a.action, ht, ex[s]);
      ht = p.hidden;
      x = p.sample;
      traj.push_back(x);
    }
    return policy_loss(traj, std::vector<Tensor>{target}, TargetGain{});
  };
  RngStream pick(24);
  GradcheckOptions o;
  o.entries_per_tensor = 16;
  EXPECT_LE(check_gradients(f, tensors(policy.parameters()), o, pick).max_rel_error, 1e-3);
  transition.set_requires_grad(true);
}

TEST(Clone, IsDeepCopy) {
  const TransitionModel m(4, RngStream(1));
  const TransitionModel c = m.clone();
  Tensor t = c.parameters().front().tensor;
  const double before = m.parameters().front().tensor.data()[0];
  t.mutable_data()[0] += 1.0;
  EXPECT_EQ(m.parameters().front().tensor.data()[0], before);
}

}  // namespace
