// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "idpoe/errors.hpp"

namespace idpoe {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// Ordered future waypoints in the normalized image frame: -1 maps to pixel 0
/// and +1 to pixel (size - 1) on each axis. x is the column axis, y the row
/// axis.
class TrajectoryAction {
 public:
  TrajectoryAction() = default;
  explicit TrajectoryAction(std::vector<Vec2> points);

  /// Builds from a float tensor of shape (N, 2) or flat (2N).
  static TrajectoryAction from_tensor(const torch::Tensor& t);

  const std::vector<Vec2>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  const Vec2& operator[](std::size_t i) const { return points_[i]; }

  /// Flat float32 tensor (2N): x0, y0, x1, y1, ...
  torch::Tensor to_tensor() const;

  /// Componentwise clamp to [-1, 1].
  TrajectoryAction clipped() const;

 private:
  std::vector<Vec2> points_;
};

/// Waypoints in pixel units (column, row).
using PixelTrajectory = std::vector<Vec2>;

/// L stacked RGB frames, shape (L, H, W, 3), float32, clean values in [-1, 1].
class VideoClipState {
 public:
  VideoClipState() = default;
  explicit VideoClipState(torch::Tensor frames);

  const torch::Tensor& frames() const { return frames_; }
  int64_t frame_count() const { return frames_.size(0); }
  int64_t height() const { return frames_.size(1); }
  int64_t width() const { return frames_.size(2); }

  /// Channels-first layout (3L, H, W) used by the networks; channel index is
  /// frame * 3 + color.
  torch::Tensor channels_first() const;
  static VideoClipState from_channels_first(const torch::Tensor& chw);

 private:
  torch::Tensor frames_;
};

/// Joint diffusion variable x = (s, a) for a batch of B items. The state is
/// stored channels-first (B, 3L, H, W) and the action flat (B, 2N).
struct StateActionPair {
  torch::Tensor state;
  torch::Tensor action;
  int noise_level = 0;

  int64_t batch_size() const { return action.size(0); }
};

enum class ScheduleKind { kLinear };

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);

/// Per-step DDPM coefficients. Arrays are indexed by step - 1, so step t in
/// [1, T] reads betas()[t - 1].
class NoiseSchedule {
 public:
  NoiseSchedule() = default;
  NoiseSchedule(ScheduleKind kind, double beta_start, double beta_end,
                std::vector<double> betas);

  int steps() const { return static_cast<int>(betas_.size()); }
  ScheduleKind kind() const { return kind_; }
  double beta_start() const { return beta_start_; }
  double beta_end() const { return beta_end_; }

  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alphas() const { return alphas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }

  double beta(int t) const { return betas_.at(t - 1); }
  double alpha(int t) const { return alphas_.at(t - 1); }
  double alpha_bar(int t) const { return alpha_bars_.at(t - 1); }

  /// Throws ParameterError unless 1 <= t <= T.
  void check_step(int t) const;

 private:
  ScheduleKind kind_ = ScheduleKind::kLinear;
  double beta_start_ = 0.0;
  double beta_end_ = 0.0;
  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
};

NoiseSchedule make_noise_schedule(int steps, double beta_start,
                                  double beta_end,
                                  ScheduleKind kind = ScheduleKind::kLinear);

struct OptimizerConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int batch_size = 32;
  int epochs = 200;
  std::string lr_decay = "cosine";  // "cosine" or "none"
};

struct NetworkConfig {
  int base_fields = 8;
  std::vector<int> channel_mults{1, 2, 2};
  int res_blocks = 1;
  bool attention = true;
  int attention_heads = 2;
  int embed_dim = 64;
  int head_hidden = 256;
  int head_grid = 4;
};

struct DiffusionConfig {
  int T = 100;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  ScheduleKind schedule_kind = ScheduleKind::kLinear;
  double gamma = 0.5;
  int group_order = 4;
  int L = 3;
  int N = 6;
  int H = 128;
  int W = 128;
  OptimizerConfig optimizer;
  NetworkConfig network;
  uint64_t seed = 0;

  /// Throws ParameterError / ConfigError on inconsistent values.
  void validate() const;
  NoiseSchedule schedule() const;
  int64_t state_channels() const { return 3 * static_cast<int64_t>(L); }
  int64_t action_dim() const { return 2 * static_cast<int64_t>(N); }
};

/// uint8 frames (L, H, W, 3) in [0, 255] -> [-1, 1] via 2v/255 - 1.
VideoClipState normalize_frames(const torch::Tensor& raw, int64_t frames,
                                int64_t height, int64_t width);
/// Inverse of normalize_frames, rounded and saturated to uint8.
torch::Tensor denormalize_frames(const VideoClipState& state);

TrajectoryAction normalize_trajectory(const PixelTrajectory& points_px,
                                      int64_t height, int64_t width);
PixelTrajectory denormalize_trajectory(const TrajectoryAction& action,
                                       int64_t height, int64_t width);

}  // namespace idpoe
