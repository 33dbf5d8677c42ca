#include "transpol/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "transpol/losses.hpp"
#include "transpol/nets.hpp"

namespace transpol {

namespace {

using ad::Tensor;

Tensor random_tensor(const ad::Shape& shape, RngStream& rng, double lo, double hi, bool param = true) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (double& x : v) x = lo + (hi - lo) * rng.uniform();
  return param ? Tensor::parameter(shape, std::move(v)) : Tensor::from(shape, std::move(v));
}

Tensor random_normal(const ad::Shape& shape, RngStream& rng) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  rng.fill_normal(v);
  return Tensor::from(shape, std::move(v));
}

// Scalar projection with fixed random weights so every output entry matters.
Tensor project(const Tensor& t, const Tensor& weights) { return ad::sum(t * weights); }

void merge(GradcheckStats& into, const GradcheckStats& s) {
  into.max_rel_error = std::max(into.max_rel_error, s.max_rel_error);
  into.checks += s.checks;
}

}  // namespace

GradcheckStats check_gradients(const std::function<ad::Tensor()>& loss, const std::vector<ad::Tensor>& inputs,
                               const GradcheckOptions& options, RngStream& pick) {
  std::vector<Tensor> leaves = inputs;
  for (auto& t : leaves) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  {
    ad::Tape tape;
    const ad::TapeScope scope(tape);
    tape.backward(loss());
  }
  const auto value = [&] {
    const ad::NoGradGuard no_grad;
    return loss().item();
  };

  GradcheckStats stats;
  bool corrupted = false;
  for (auto& t : leaves) {
    const std::size_t n = t.size();
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    if (analytic.empty()) analytic.assign(n, 0.0);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (n > options.entries_per_tensor) {
      for (std::size_t i = 0; i < options.entries_per_tensor; ++i) {
        std::swap(idx[i], idx[i + pick.below(n - i)]);
      }
      idx.resize(options.entries_per_tensor);
    }
    if (options.corrupt && !corrupted) {
      analytic[idx.front()] = analytic[idx.front()] * 1.5 + 1e-2;
      corrupted = true;
    }
    auto data = t.mutable_data();
    for (std::size_t i : idx) {
      const double orig = data[i];
      data[i] = orig + options.step;
      const double up = value();
      data[i] = orig - options.step;
      const double down = value();
      data[i] = orig;
      const double numeric = (up - down) / (2.0 * options.step);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), options.floor});
      stats.max_rel_error = std::max(stats.max_rel_error, std::abs(analytic[i] - numeric) / denom);
      ++stats.checks;
    }
  }
  return stats;
}

namespace {

GradcheckStats primitives_suite(const GradcheckOptions& o, RngStream& rng) {
  GradcheckStats total;
  RngStream pick = rng.substream(1);
  for (std::size_t trial = 0; trial < o.trials; ++trial) {
    const std::size_t rows = 1 + rng.below(4);
    const std::size_t cols = 1 + rng.below(5);
    const std::size_t inner = 1 + rng.below(4);
    const ad::Shape s{rows, cols};
    const Tensor w = random_normal(s, rng);
    const Tensor a = random_tensor(s, rng, -1.5, 1.5);
    const Tensor b = random_tensor(s, rng, -1.5, 1.5);
    const Tensor pos = random_tensor(s, rng, 0.5, 2.0);
    const Tensor row = random_tensor({1, cols}, rng, -1.0, 1.0);
    const Tensor m1 = random_tensor({rows, inner}, rng, -1.0, 1.0);
    const Tensor m2 = random_tensor({inner, cols}, rng, -1.0, 1.0);
    const Tensor extra = random_tensor({rows, 2}, rng, -1.0, 1.0);
    const Tensor wide_w = random_normal({rows, cols + 2}, rng);
    const Tensor eps = random_normal(s, rng);
    // Keep clamp inputs away from the kink.
    std::vector<double> cv(rows * cols);
    for (double& x : cv) x = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.2 + rng.uniform());
    const Tensor clampin = Tensor::parameter(s, cv);

    const std::vector<std::pair<std::function<Tensor()>, std::vector<Tensor>>> cases = {
        {[&] { return project(a + b, w); }, {a, b}},
        {[&] { return project(a - b, w); }, {a, b}},
        {[&] { return project(a * b, w); }, {a, b}},
        {[&] { return project(a / pos, w); }, {a, pos}},
        {[&] { return project(a + row, w); }, {a, row}},
        {[&] { return project(a * row, w); }, {a, row}},
        {[&] { return project(ad::matmul(m1, m2), w); }, {m1, m2}},
        {[&] { return project(-a, w); }, {a}},
        {[&] { return project(ad::scale(a, 0.7), w); }, {a}},
        {[&] { return project(ad::add_scalar(a, 0.3), w); }, {a}},
        {[&] { return project(ad::tanh(a), w); }, {a}},
        {[&] { return project(ad::sigmoid(a), w); }, {a}},
        {[&] { return project(ad::exp(a), w); }, {a}},
        {[&] { return project(ad::log(pos), w); }, {pos}},
        {[&] { return project(ad::sqrt(pos), w); }, {pos}},
        {[&] { return project(ad::square(a), w); }, {a}},
        {[&] { return project(ad::clamp_min(clampin, 0.0), w); }, {clampin}},
        {[&] { return project(ad::concat({a, extra}), wide_w); }, {a, extra}},
        {[&] { return project(ad::slice(ad::concat({a, extra}), 1, cols + 1), ad::slice(wide_w, 0, cols)); },
         {a, extra}},
        {[&] { return ad::sum(ad::square(a)); }, {a}},
        {[&] { return ad::mean(a * b); }, {a, b}},
        {[&] { return project(ad::gaussian_sample(a, pos, eps), w); }, {a, pos}},
    };
    for (const auto& [f, inputs] : cases) merge(total, check_gradients(f, inputs, o, pick));
  }
  return total;
}

GradcheckStats losses_suite(const GradcheckOptions& o, RngStream& rng) {
  GradcheckStats total;
  RngStream pick = rng.substream(2);
  for (std::size_t trial = 0; trial < std::max<std::size_t>(o.trials / 4, 1); ++trial) {
    const std::size_t B = 1 + rng.below(3);
    const std::size_t T = 1 + rng.below(4);
    std::vector<Tensor> mean, var, obs;
    std::vector<Tensor> inputs;
    for (std::size_t t = 0; t < T; ++t) {
      mean.push_back(random_tensor({B, 4}, rng, -1.0, 1.0));
      var.push_back(random_tensor({B, 4}, rng, 0.05, 1.5));
      obs.push_back(random_tensor({B, 4}, rng, -1.0, 1.0, false));
      inputs.push_back(mean.back());
      inputs.push_back(var.back());
    }
    merge(total, check_gradients([&] { return transition_nll(mean, var, obs); }, inputs, o, pick));

    std::vector<Tensor> pred;
    for (std::size_t t = 0; t < T; ++t) pred.push_back(random_tensor({B, 4}, rng, -1.0, 1.0));
    const std::vector<Tensor> fixed{random_tensor({B, 4}, rng, -1.0, 1.0, false)};
    TargetGain gain;
    gain.weights = {1.0, 1.0, 0.3, 0.0};
    merge(total, check_gradients([&] { return policy_loss(pred, fixed, gain); }, pred, o, pick));
  }
  return total;
}

std::vector<Tensor> tensors_of(const ParameterList& params) {
  std::vector<Tensor> out;
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

GradcheckStats transition_suite(const GradcheckOptions& o, RngStream& rng) {
  RngStream pick = rng.substream(3);
  const TransitionModel model(5, rng.substream(10));
  const std::size_t B = 3;
  const Tensor y = random_tensor({B, 4}, rng, -1.0, 1.0);
  const Tensor u = random_tensor({B, 2}, rng, -1.0, 1.0);
  const Tensor y2 = random_tensor({B, 4}, rng, -1.0, 1.0, false);
  const Tensor u2 = random_tensor({B, 2}, rng, -1.0, 1.0, false);
  const Tensor eps = random_normal({B, 4}, rng);
  const Tensor w1 = random_normal({B, 4}, rng);
  const Tensor w2 = random_normal({B, 4}, rng);
  const auto f = [&] {
    const auto s1 = model.forward(y, u, model.initial_hidden(B));
    const auto s2 = model.predict_state(y2, u2, s1.hidden, eps);
    return project(s1.mean_delta, w1) + project(s1.var_delta, w2) + project(s2.sample, w1);
  };
  auto inputs = tensors_of(model.parameters());
  inputs.push_back(y);
  inputs.push_back(u);
  return check_gradients(f, inputs, o, pick);
}

GradcheckStats policy_suite(const GradcheckOptions& o, RngStream& rng) {
  RngStream pick = rng.substream(4);
  const PolicyModel model(5, 1.0, rng.substream(11));
  const std::size_t B = 3;
  const Tensor x = random_tensor({B, 4}, rng, -1.0, 1.0);
  const Tensor target = random_tensor({B, 4}, rng, -1.0, 1.0, false);
  const Tensor eps = random_normal({B, 2}, rng);
  const Tensor w = random_normal({B, 2}, rng);
  const auto f = [&] {
    const auto s1 = model.forward(x, target, model.initial_hidden(B), &eps);
    const auto s2 = model.forward(x, target, s1.hidden, nullptr);
    return project(s1.action, w) + project(s2.action, w);
  };
  auto inputs = tensors_of(model.parameters());
  inputs.push_back(x);
  return check_gradients(f, inputs, o, pick);
}

GradcheckStats bptt_suite(const GradcheckOptions& o, RngStream& rng) {
  RngStream pick = rng.substream(5);
  const TransitionModel model(4, rng.substream(12));
  const std::size_t B = 2;
  const std::size_t T = 20;
  std::vector<Tensor> ys, us;
  for (std::size_t t = 0; t < T; ++t) {
    ys.push_back(random_tensor({B, 4}, rng, -1.0, 1.0, false));
    us.push_back(random_tensor({B, 2}, rng, -1.0, 1.0, false));
  }
  const Tensor w = random_normal({B, 4}, rng);
  const auto f = [&] {
    Tensor h = model.initial_hidden(B);
    Tensor x = ys.front();
    Tensor total;
    for (std::size_t t = 0; t < T; ++t) {
      const auto s = model.forward(x, us[t], h);
      h = s.hidden;
      x = x + s.mean_delta;
      const Tensor term = project(x, w);
      total = total.defined() ? total + term : term;
    }
    return ad::scale(total, 1.0 / static_cast<double>(T));
  };
  return check_gradients(f, tensors_of(model.parameters()), o, pick);
}

GradcheckStats chained_suite(const GradcheckOptions& o, RngStream& rng) {
  RngStream pick = rng.substream(6);
  const TransitionModel transition(6, rng.substream(13));
  const PolicyModel policy(6, 1.0, rng.substream(14));
  transition.set_requires_grad(false);
  const std::size_t B = 3;
  const std::size_t r = 5;
  const Tensor x0 = random_tensor({B, 4}, rng, -0.5, 0.5, false);
  const Tensor target = random_tensor({B, 4}, rng, -0.7, 0.7, false);
  std::vector<Tensor> eps_u, eps_x;
  for (std::size_t s = 0; s < r; ++s) {
    eps_u.push_back(random_normal({B, 2}, rng));
    eps_x.push_back(random_normal({B, 4}, rng));
  }
  const auto f = [&] {
    Tensor h_t = transition.initial_hidden(B);
    Tensor h_p = policy.initial_hidden(B);
    Tensor x = x0;
    std::vector<Tensor> predicted;
    for (std::size_t s = 0; s < r; ++s) {
      const auto a = policy.forward(x, target, h_p, &eps_u[s]);
      h_p = a.hidden;
      const auto p = transition.predict_state(x, a.action, h_t, eps_x[s]);
      h_t = p.hidden;
      x = p.sample;
      predicted.push_back(x);
    }
    return policy_loss(predicted, std::vector<Tensor>{target}, TargetGain{});
  };
  auto stats = check_gradients(f, tensors_of(policy.parameters()), o, pick);
  transition.set_requires_grad(true);
  return stats;
}

}  // namespace

std::vector<SuiteResult> run_gradcheck(const GradcheckOptions& options) {
  const RngStream root(options.seed);
  std::vector<SuiteResult> out;
  const auto add = [&](const char* name, double tol, auto suite, std::uint64_t id) {
    RngStream rng = root.substream(id);
    const GradcheckStats s = suite(options, rng);
    out.push_back({name, s.max_rel_error, tol, s.checks});
  };
  add("primitives", options.tolerance, primitives_suite, 1);
  add("losses", options.tolerance, losses_suite, 2);
  add("transition", options.tolerance, transition_suite, 3);
  add("policy", options.tolerance, policy_suite, 4);
  add("bptt20", options.tolerance, bptt_suite, 5);
  add("chained_rollout", options.chain_tolerance, chained_suite, 6);
  return out;
}

void print_gradcheck(std::ostream& out, const std::vector<SuiteResult>& results) {
  char line[160];
  for (const auto& r : results) {
    std::snprintf(line, sizeof(line), "%-16s max_rel_err=%.3e tol=%.0e checks=%zu %s\n", r.name.c_str(),
                  r.max_rel_error, r.tolerance, r.checks, r.passed() ? "PASS" : "FAIL");
    out << line;
  }
}

}  // namespace transpol
