// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "idpoe/checkpoint.hpp"
#include "idpoe/diffusion.hpp"
#include "idpoe/policy.hpp"
#include "idpoe/training.hpp"

using namespace idpoe;

namespace {

StateActionPair random_pair(int64_t B, uint64_t seed) {
  auto gen = make_generator(seed);
  return {torch::rand({B, 9, 8, 8}, gen) * 2 - 1, torch::rand({B, 12}, gen) * 2 - 1, 0};
}

NoisePair random_noise(int64_t B, uint64_t seed) {
  auto gen = make_generator(seed);
  return {torch::randn({B, 9, 8, 8}, gen), torch::randn({B, 12}, gen)};
}

// Recovers the noise that produced x_t from a known clean pair.
NoisePredictor true_noise_oracle(const StateActionPair& x0, const NoiseSchedule& sched) {
  return [x0, sched](const torch::Tensor& s, const torch::Tensor& a, const torch::Tensor& t) {
    const int step = static_cast<int>(t[0].item<int64_t>());
    const double abar = sched.alpha_bar(step);
    return NoisePair{(s - x0.state * std::sqrt(abar)) / std::sqrt(1.0 - abar),
                     (a - x0.action * std::sqrt(abar)) / std::sqrt(1.0 - abar)};
  };
}

NoisePredictor constant_predictor(double state_value, double action_value) {
  return [=](const torch::Tensor& s, const torch::Tensor& a, const torch::Tensor&) {
    return NoisePair{torch::full_like(s, state_value), torch::full_like(a, action_value)};
  };
}

}  // namespace

TEST(ForwardDiffuse, Examples) {
  auto sched = make_noise_schedule(100, 1e-4, 0.02);
  auto x0 = random_pair(3, 1);
  auto zero = NoisePair{torch::zeros_like(x0.state), torch::zeros_like(x0.action)};
  auto xt = forward_diffuse(x0, 40, zero, sched);
  const double s = std::sqrt(sched.alpha_bar(40));
  EXPECT_TRUE(torch::equal(xt.action, x0.action * s));
  EXPECT_TRUE(torch::equal(xt.state, x0.state * s));
  EXPECT_EQ(xt.noise_level, 40);

  StateActionPair clean{torch::zeros_like(x0.state), torch::zeros_like(x0.action), 0};
  auto eps = random_noise(3, 2);
  auto pure = forward_diffuse(clean, 40, eps, sched);
  EXPECT_TRUE(torch::allclose(pure.action, eps.eps_a * std::sqrt(1 - sched.alpha_bar(40))));

  NoiseSchedule two(ScheduleKind::kLinear, 0.1, 0.3, {0.1, 0.3});
  auto ones = StateActionPair{torch::ones({1, 9, 8, 8}), torch::ones({1, 12}), 0};
  auto z = NoisePair{torch::zeros({1, 9, 8, 8}), torch::zeros({1, 12})};
  EXPECT_NEAR(forward_diffuse(ones, 2, z, two).action[0][0].item<double>(), std::sqrt(0.63),
              1e-6);

  EXPECT_THROW(forward_diffuse(x0, 0, zero, sched), ParameterError);
  EXPECT_THROW(forward_diffuse(x0, 101, zero, sched), ParameterError);
  EXPECT_THROW(forward_diffuse(xt, 3, zero, sched), ParameterError);
}

TEST(ForwardDiffuse, MarginalStatistics) {
  auto sched = make_noise_schedule(100, 1e-4, 0.02);
  const int64_t draws = 10000;
  auto x0_action = torch::linspace(-0.9, 0.9, 12);
  StateActionPair x0{torch::full({draws, 1, 1, 1}, 0.3), x0_action.expand({draws, 12}), 0};
  auto gen = make_generator(11);
  for (int t : {1, 10, 50, 100}) {
    NoisePair eps{torch::randn({draws, 1, 1, 1}, gen), torch::randn({draws, 12}, gen)};
    auto xt = forward_diffuse(x0, t, eps, sched).action.to(torch::kFloat64);
    const double abar = sched.alpha_bar(t);
    auto mean = xt.mean(0);
    auto var = xt.var(0);
    const double se = std::sqrt((1.0 - abar) / draws);
    for (int i = 0; i < 12; ++i) {
      const double expect = std::sqrt(abar) * x0_action[i].item<double>();
      EXPECT_LT(std::abs(mean[i].item<double>() - expect), 4 * se) << "t=" << t << " i=" << i;
      EXPECT_NEAR(var[i].item<double>(), 1.0 - abar, 0.1 * (1.0 - abar));
    }
  }
}

TEST(TrainingLoss, GammaBoundariesAndLinearity) {
  auto sched = make_noise_schedule(100, 1e-4, 0.02);
  auto x0 = random_pair(5, 3);
  auto net = [](const torch::Tensor& s, const torch::Tensor& a, const torch::Tensor&) {
    return NoisePair{s * 0.5, a.sin()};
  };
  auto loss_at = [&](double gamma, const NoisePredictor& p) {
    auto gen = make_generator(21);
    return training_loss(x0, p, gamma, sched, gen).total.item<double>();
  };
  const double A = loss_at(0.0, net), S = loss_at(1.0, net);
  for (double g : {0.0, 0.25, 0.5, 0.8, 1.0}) {
    EXPECT_NEAR(loss_at(g, net), (1 - g) * A + g * S, 1e-6);
  }
  // gamma = 1 ignores the action head, gamma = 0 the state head.
  EXPECT_DOUBLE_EQ(loss_at(1.0, constant_predictor(0.0, 1.0)),
                   loss_at(1.0, constant_predictor(0.0, -7.0)));
  EXPECT_DOUBLE_EQ(loss_at(0.0, constant_predictor(1.0, 0.0)),
                   loss_at(0.0, constant_predictor(-7.0, 0.0)));
  EXPECT_THROW(loss_at(1.5, net), ParameterError);
}

TEST(TrainingLoss, OracleGivesZeroAndNanNamesItem) {
  auto sched = make_noise_schedule(100, 1e-4, 0.02);
  auto x0 = random_pair(4, 5);
  auto gen = make_generator(1);
  // Per-item oracle: steps differ within a batch.
  NoisePredictor oracle = [&](const torch::Tensor& s, const torch::Tensor& a,
                              const torch::Tensor& t) {
    auto abar = torch::tensor(sched.alpha_bars(), torch::kFloat64).index_select(0, t - 1);
    auto sig = abar.sqrt().to(torch::kFloat32), noi = (1 - abar).sqrt().to(torch::kFloat32);
    return NoisePair{(s - x0.state * sig.view({-1, 1, 1, 1})) / noi.view({-1, 1, 1, 1}),
                     (a - x0.action * sig.view({-1, 1})) / noi.view({-1, 1})};
  };
  EXPECT_LT(training_loss(x0, oracle, 0.5, sched, gen).total.item<double>(), 1e-8);

  NoisePredictor poisoned = [](const torch::Tensor& s, const torch::Tensor& a,
                               const torch::Tensor&) {
    auto ea = torch::zeros_like(a);
    ea[2][0] = std::nan("");
    return NoisePair{torch::zeros_like(s), ea};
  };
  try {
    training_loss(x0, poisoned, 0.5, sched, gen);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("batch index 2"), std::string::npos) << e.what();
  }
}

TEST(ReverseStep, Examples) {
  auto sched = make_noise_schedule(100, 1e-4, 0.02);
  NoiseSource noise(0, 2);
  StateActionPair zero{torch::zeros({2, 9, 8, 8}), torch::zeros({2, 12}), 50};
  auto out = reverse_step(constant_predictor(0, 0), zero, 50, sched, noise, true);
  EXPECT_EQ(out.action.abs().max().item<double>(), 0.0);
  EXPECT_EQ(out.state.abs().max().item<double>(), 0.0);
  EXPECT_EQ(out.noise_level, 49);

  auto x = random_pair(2, 6);
  NoiseSource n1(9, 2), n2(9, 2);
  auto a = reverse_step(constant_predictor(0.1, -0.2), x, 30, sched, n1, false);
  auto b = reverse_step(constant_predictor(0.1, -0.2), x, 30, sched, n2, false);
  EXPECT_TRUE(torch::equal(a.action, b.action));
  EXPECT_TRUE(torch::equal(a.state, b.state));
  EXPECT_THROW(reverse_step(constant_predictor(0, 0), x, 0, sched, n1, true), ParameterError);
}

TEST(ReverseStep, AddsBetaVarianceNoiseOnlyAboveStepOne) {
  auto sched = make_noise_schedule(100, 1e-4, 0.02);
  const int64_t B = 4000;
  StateActionPair x{torch::zeros({B, 1, 1, 1}), torch::zeros({B, 12}), 0};
  NoiseSource noise(3, B);
  auto stoch = reverse_step(constant_predictor(0, 0), x, 80, sched, noise, false);
  EXPECT_NEAR(stoch.action.var().item<double>(), sched.beta(80), 0.05 * sched.beta(80));
  auto last = reverse_step(constant_predictor(0, 0), x, 1, sched, noise, false);
  EXPECT_EQ(last.action.abs().max().item<double>(), 0.0);
}

TEST(ReverseStep, InvertsMarginalWithTrueNoiseAtStepOne) {
  for (int T : {1, 100}) {
    auto sched = make_noise_schedule(T, 1e-4, 0.02);
    auto x0 = random_pair(3, 7);
    auto x1 = forward_diffuse(x0, 1, random_noise(3, 8), sched);
    NoiseSource noise(0, 3);
    auto back = reverse_step(true_noise_oracle(x0, sched), x1, 1, sched, noise, true);
    EXPECT_LT((back.action - x0.action).abs().max().item<double>(), 1e-5);
    EXPECT_LT((back.state - x0.state).abs().max().item<double>(), 1e-5);
  }
}

namespace {

DiffusionConfig tiny_config() {
  DiffusionConfig c;
  c.H = c.W = 16;
  c.T = 20;
  c.network.base_fields = 2;
  c.network.embed_dim = 16;
  c.network.head_hidden = 32;
  c.optimizer.batch_size = 4;
  c.optimizer.epochs = 2;
  c.optimizer.lr = 1e-3;
  c.seed = 4;
  return c;
}

TensorDataset tiny_data(int n, uint64_t seed) {
  auto gen = make_generator(seed);
  TensorDataset d;
  d.states = torch::rand({n, 9, 16, 16}, gen) * 2 - 1;
  d.actions = torch::rand({n, 12}, gen) * 1.6 - 0.8;
  for (int i = 0; i < n; ++i) d.clip_ids.push_back("c" + std::to_string(i));
  return d;
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("idpoe_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Training, SmokeLogsFiniteLosses) {
  auto c = tiny_config();
  c.optimizer.epochs = 1;
  TrainOptions opt;
  opt.out_dir = fresh_dir("smoke");
  auto res = train_policy(tiny_data(4, 1), tiny_data(2, 2), c, opt);
  ASSERT_EQ(res.history.size(), 1u);
  EXPECT_TRUE(std::isfinite(res.history[0].val_loss));
  auto log = read_train_log(opt.out_dir / "train_log.jsonl");
  ASSERT_EQ(log.size(), 1u);
  EXPECT_EQ(log[0].epoch, 1);
  EXPECT_DOUBLE_EQ(log[0].lr, 1e-3);
  EXPECT_TRUE(std::filesystem::exists(res.best_checkpoint));
  auto loaded = load_policy(res.best_checkpoint);
  EXPECT_EQ(loaded.kind, kKindIdpoe);
  EXPECT_EQ(loaded.schedule.steps(), 20);

  TensorDataset empty;
  EXPECT_THROW(train_policy(empty, tiny_data(2, 2), c, opt), ConfigError);
  std::filesystem::remove_all(opt.out_dir);
}

TEST(Training, CosineScheduleEndpoints) {
  OptimizerConfig o;
  o.lr = 1e-3;
  o.epochs = 10;
  EXPECT_DOUBLE_EQ(scheduled_lr(o, 1, 10), 1e-3);
  EXPECT_LT(scheduled_lr(o, 10, 10), scheduled_lr(o, 9, 10));
  o.lr_decay = "none";
  EXPECT_DOUBLE_EQ(scheduled_lr(o, 10, 10), 1e-3);
}

TEST(Training, ResumeReplaysInterruptedRunExactly) {
  auto c = tiny_config();
  auto train = tiny_data(8, 3), val = tiny_data(4, 4);

  TrainOptions straight;
  straight.out_dir = fresh_dir("straight");
  torch::manual_seed(c.seed);
  PolicyTrainable reference(c);
  train_model(reference, train, val, c.optimizer, c.seed, straight);

  TrainOptions crash;
  crash.out_dir = fresh_dir("resumed");
  crash.on_epoch = [](const EpochRecord& r) {
    if (r.epoch == 1) throw std::runtime_error("interrupted");
  };
  {
    torch::manual_seed(c.seed);
    PolicyTrainable first(c);
    EXPECT_THROW(train_model(first, train, val, c.optimizer, c.seed, crash), std::runtime_error);
  }
  TrainOptions resume;
  resume.out_dir = crash.out_dir;
  resume.resume = true;
  PolicyTrainable second(tiny_config());
  auto res = train_model(second, train, val, c.optimizer, c.seed, resume);
  EXPECT_EQ(res.history.size(), 2u);
  auto a = module_tensors(*reference.network());
  auto b = module_tensors(*second.network());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(torch::equal(a[i].second, b[i].second)) << a[i].first;
  }
  EXPECT_EQ(read_train_log(resume.out_dir / "train_log.jsonl").size(), 2u);

  // Nothing left to do: the weights stay those of the last checkpoint.
  PolicyTrainable third(tiny_config());
  train_model(third, train, val, c.optimizer, c.seed, resume);
  auto d = module_tensors(*third.network());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(torch::equal(a[i].second, d[i].second)) << a[i].first;
  }

  std::filesystem::remove_all(straight.out_dir);
  std::filesystem::remove_all(crash.out_dir);
}

TEST(Training, ResumeRejectsOtherModelKind) {
  auto c = tiny_config();
  c.optimizer.epochs = 1;
  TrainOptions opt;
  opt.out_dir = fresh_dir("kind");
  train_policy(tiny_data(4, 1), tiny_data(2, 2), c, opt);
  opt.resume = true;
  EXPECT_THROW(train_policy(tiny_data(4, 1), tiny_data(2, 2), c, opt, kKindIdpoeNoEquiv),
               ConfigError);
  std::filesystem::remove_all(opt.out_dir);
}
