// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "idpoe/config_io.hpp"
#include "idpoe/core.hpp"

using namespace idpoe;

TEST(NoiseSchedule, SingleStep) {
  auto s = make_noise_schedule(1, 0.02, 0.02);
  ASSERT_EQ(s.steps(), 1);
  EXPECT_DOUBLE_EQ(s.betas()[0], 0.02);
  EXPECT_DOUBLE_EQ(s.alpha_bars()[0], 0.98);
}

TEST(NoiseSchedule, TwoSteps) {
  auto s = make_noise_schedule(2, 0.1, 0.3);
  EXPECT_DOUBLE_EQ(s.betas()[0], 0.1);
  EXPECT_DOUBLE_EQ(s.betas()[1], 0.3);
  EXPECT_DOUBLE_EQ(s.alpha_bars()[0], 0.9);
  EXPECT_NEAR(s.alpha_bars()[1], 0.63, 1e-15);
}

TEST(NoiseSchedule, HundredStepsMatchesProductOracle) {
  // Frozen from a 40-digit product over the 100 linear betas.
  constexpr double kAlphaBar100 = 0.36356324805549191545;
  auto s = make_noise_schedule(100, 1e-4, 0.02);
  EXPECT_NEAR(s.alpha_bars()[99], kAlphaBar100, 1e-13);
  EXPECT_DOUBLE_EQ(s.betas().front(), 1e-4);
  EXPECT_DOUBLE_EQ(s.betas().back(), 0.02);
}

TEST(NoiseSchedule, RecurrenceAndMonotonicity) {
  for (int T : {1, 2, 7, 100, 1000}) {
    auto s = make_noise_schedule(T, 1e-4, 0.02);
    for (int t = 1; t <= T; ++t) {
      EXPECT_GT(s.beta(t), 0.0);
      EXPECT_LT(s.alpha_bar(t), 1.0);
      EXPECT_GT(s.alpha_bar(t), 0.0);
      if (t > 1) {
        EXPECT_GE(s.beta(t), s.beta(t - 1));
        EXPECT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
        EXPECT_DOUBLE_EQ(s.alpha_bar(t), s.alpha_bar(t - 1) * (1.0 - s.beta(t)));
      }
    }
  }
}

TEST(NoiseSchedule, RejectsBadRanges) {
  EXPECT_THROW(make_noise_schedule(0, 1e-4, 0.02), ParameterError);
  EXPECT_THROW(make_noise_schedule(10, 0.0, 0.02), ParameterError);
  EXPECT_THROW(make_noise_schedule(10, 0.03, 0.02), ParameterError);
  EXPECT_THROW(make_noise_schedule(10, 1e-4, 1.0), ParameterError);
  auto s = make_noise_schedule(10, 1e-4, 0.02);
  EXPECT_THROW(s.check_step(0), ParameterError);
  EXPECT_THROW(s.check_step(11), ParameterError);
  EXPECT_NO_THROW(s.check_step(10));
}

TEST(Frames, NormalizeBounds) {
  auto zeros = torch::zeros({3, 8, 8, 3}, torch::kUInt8);
  auto ones = torch::full({3, 8, 8, 3}, 255, torch::kUInt8);
  auto mid = torch::full({3, 8, 8, 3}, 128, torch::kUInt8);
  EXPECT_TRUE(normalize_frames(zeros, 3, 8, 8).frames().eq(-1.0f).all().item<bool>());
  EXPECT_TRUE(normalize_frames(ones, 3, 8, 8).frames().eq(1.0f).all().item<bool>());
  auto m = normalize_frames(mid, 3, 8, 8).frames();
  EXPECT_NEAR(m[0][0][0][0].item<float>(), 2.0 * 128.0 / 255.0 - 1.0, 1e-7);
  EXPECT_NEAR(m[0][0][0][0].item<float>(), 0.00392156862745098, 1e-7);
}

TEST(Frames, WrongShapeIsShapeError) {
  auto raw = torch::zeros({2, 8, 8, 3}, torch::kUInt8);
  EXPECT_THROW(normalize_frames(raw, 3, 8, 8), ShapeError);
  EXPECT_THROW(normalize_frames(torch::zeros({3, 8, 8}, torch::kUInt8), 3, 8, 8),
               ShapeError);
}

TEST(Frames, RoundTripIsExactOnQuantizedValues) {
  auto gen = at::detail::createCPUGenerator(7);
  auto raw = torch::randint(0, 256, {3, 16, 16, 3}, gen, torch::kLong).to(torch::kUInt8);
  auto state = normalize_frames(raw, 3, 16, 16);
  auto back = denormalize_frames(state);
  EXPECT_TRUE(back.equal(raw));
  // Channels-first layout is a pure reshuffle.
  auto chw = state.channels_first();
  EXPECT_EQ(chw.sizes(), (std::vector<int64_t>{9, 16, 16}));
  EXPECT_TRUE(VideoClipState::from_channels_first(chw).frames().equal(state.frames()));
}

TEST(Trajectory, NormalizeCorners) {
  auto a = normalize_trajectory({{0, 0}, {127, 127}, {63.5, 63.5}}, 128, 128);
  EXPECT_DOUBLE_EQ(a[0].x, -1.0);
  EXPECT_DOUBLE_EQ(a[0].y, -1.0);
  EXPECT_DOUBLE_EQ(a[1].x, 1.0);
  EXPECT_DOUBLE_EQ(a[1].y, 1.0);
  EXPECT_DOUBLE_EQ(a[2].x, 0.0);
  EXPECT_DOUBLE_EQ(a[2].y, 0.0);
}

TEST(Trajectory, OutOfBoundsIsValidationError) {
  EXPECT_THROW(normalize_trajectory({{-0.1, 3}}, 128, 128), ValidationError);
  EXPECT_THROW(normalize_trajectory({{3, 127.5}}, 128, 128), ValidationError);
  EXPECT_THROW(TrajectoryAction(std::vector<Vec2>{}), ShapeError);
  EXPECT_THROW(TrajectoryAction({{NAN, 0}}), ValidationError);
}

TEST(Trajectory, RoundTripWithinHalfPixel) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 127.0);
  for (int trial = 0; trial < 200; ++trial) {
    PixelTrajectory px;
    for (int i = 0; i < 6; ++i) px.push_back({u(rng), u(rng)});
    auto back = denormalize_trajectory(normalize_trajectory(px, 128, 128), 128, 128);
    for (int i = 0; i < 6; ++i) {
      EXPECT_LE(std::abs(back[i].x - px[i].x), 0.5);
      EXPECT_LE(std::abs(back[i].y - px[i].y), 0.5);
    }
    // The float tensor path must also stay well within half a pixel.
    auto via_tensor = denormalize_trajectory(
        TrajectoryAction::from_tensor(normalize_trajectory(px, 128, 128).to_tensor()),
        128, 128);
    for (int i = 0; i < 6; ++i) EXPECT_LE(std::abs(via_tensor[i].x - px[i].x), 0.5);
  }
}

TEST(Config, DefaultsFollowTrainingRecipe) {
  DiffusionConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.optimizer.batch_size, 32);
  EXPECT_DOUBLE_EQ(c.optimizer.lr, 1e-4);
  EXPECT_DOUBLE_EQ(c.optimizer.beta1, 0.9);
  EXPECT_DOUBLE_EQ(c.optimizer.beta2, 0.999);
  EXPECT_EQ(c.optimizer.epochs, 200);
  EXPECT_EQ(c.optimizer.lr_decay, "cosine");
  EXPECT_EQ(c.group_order, 4);
  EXPECT_EQ(c.H, 128);
  EXPECT_EQ(c.L, 3);
  EXPECT_EQ(c.N, 6);
}

TEST(Config, ValidationErrors) {
  DiffusionConfig c;
  c.gamma = 1.5;
  EXPECT_THROW(c.validate(), ParameterError);
  c = DiffusionConfig{};
  c.group_order = 0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = DiffusionConfig{};
  c.group_order = 3;
  EXPECT_THROW(c.validate(), UnsupportedElementError);
  c = DiffusionConfig{};
  c.W = 64;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, JsonRoundTripAndUnknownKeys) {
  DiffusionConfig c;
  c.T = 17;
  c.gamma = 0.25;
  c.network.channel_mults = {1, 2};
  c.optimizer.lr = 3e-4;
  nlohmann::json j = c;
  EXPECT_EQ(j.at("T"), 17);
  EXPECT_EQ(j.at("schedule_kind"), "linear");
  EXPECT_EQ(j.at("optimizer").at("batch_size"), 32);
  auto back = j.get<DiffusionConfig>();
  EXPECT_EQ(nlohmann::json(back), j);

  j["typo"] = 1;
  EXPECT_THROW(j.get<DiffusionConfig>(), ConfigError);

  auto path = std::filesystem::temp_directory_path() / "idpoe_cfg_test.json";
  save_diffusion_config(c, path);
  EXPECT_EQ(nlohmann::json(load_diffusion_config(path)), nlohmann::json(c));
  std::filesystem::remove(path);
}
