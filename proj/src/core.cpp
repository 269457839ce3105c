// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#include "idpoe/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace idpoe {

TrajectoryAction::TrajectoryAction(std::vector<Vec2> points)
    : points_(std::move(points)) {
  if (points_.empty()) {
    throw ShapeError("trajectory must contain at least one waypoint");
  }
  for (const auto& p : points_) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw ValidationError("trajectory contains a non-finite coordinate");
    }
  }
}

TrajectoryAction TrajectoryAction::from_tensor(const torch::Tensor& t) {
  auto flat = t.detach().to(torch::kCPU, torch::kDouble).contiguous().view({-1});
  if (flat.numel() == 0 || flat.numel() % 2 != 0) {
    throw ShapeError("trajectory tensor must hold an even, non-zero count");
  }
  const auto* data = flat.data_ptr<double>();
  std::vector<Vec2> points(static_cast<std::size_t>(flat.numel() / 2));
  for (std::size_t i = 0; i < points.size(); ++i) {
    points[i] = {data[2 * i], data[2 * i + 1]};
  }
  return TrajectoryAction(std::move(points));
}

torch::Tensor TrajectoryAction::to_tensor() const {
  auto t = torch::empty({static_cast<int64_t>(2 * points_.size())},
                        torch::kFloat32);
  auto* data = t.data_ptr<float>();
  for (std::size_t i = 0; i < points_.size(); ++i) {
    data[2 * i] = static_cast<float>(points_[i].x);
    data[2 * i + 1] = static_cast<float>(points_[i].y);
  }
  return t;
}

TrajectoryAction TrajectoryAction::clipped() const {
  std::vector<Vec2> out = points_;
  for (auto& p : out) {
    p.x = std::clamp(p.x, -1.0, 1.0);
    p.y = std::clamp(p.y, -1.0, 1.0);
  }
  return TrajectoryAction(std::move(out));
}

VideoClipState::VideoClipState(torch::Tensor frames) : frames_(std::move(frames)) {
  if (frames_.dim() != 4 || frames_.size(3) != 3) {
    throw ShapeError("video clip must have shape (L, H, W, 3)");
  }
  if (frames_.size(0) < 1) {
    throw ShapeError("video clip needs at least one frame");
  }
  if (frames_.size(1) != frames_.size(2)) {
    throw ShapeError("video clip frames must be square");
  }
  frames_ = frames_.to(torch::kFloat32).contiguous();
}

torch::Tensor VideoClipState::channels_first() const {
  const auto L = frames_.size(0);
  const auto H = frames_.size(1);
  const auto W = frames_.size(2);
  // (L, H, W, 3) -> (L, 3, H, W) -> (3L, H, W)
  return frames_.permute({0, 3, 1, 2}).reshape({L * 3, H, W}).contiguous();
}

VideoClipState VideoClipState::from_channels_first(const torch::Tensor& chw) {
  if (chw.dim() != 3 || chw.size(0) % 3 != 0) {
    throw ShapeError("channels-first clip must have shape (3L, H, W)");
  }
  const auto L = chw.size(0) / 3;
  return VideoClipState(
      chw.reshape({L, 3, chw.size(1), chw.size(2)}).permute({0, 2, 3, 1}));
}

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kLinear:
      return "linear";
  }
  return "unknown";
}

ScheduleKind schedule_kind_from_string(const std::string& name) {
  if (name == "linear") return ScheduleKind::kLinear;
  throw ParameterError("unknown schedule kind '" + name + "'");
}

NoiseSchedule::NoiseSchedule(ScheduleKind kind, double beta_start,
                             double beta_end, std::vector<double> betas)
    : kind_(kind),
      beta_start_(beta_start),
      beta_end_(beta_end),
      betas_(std::move(betas)) {
  alphas_.reserve(betas_.size());
  alpha_bars_.reserve(betas_.size());
  double running = 1.0;
  for (double b : betas_) {
    alphas_.push_back(1.0 - b);
    running *= 1.0 - b;
    alpha_bars_.push_back(running);
  }
}

void NoiseSchedule::check_step(int t) const {
  if (t < 1 || t > steps()) {
    std::ostringstream msg;
    msg << "diffusion step " << t << " outside [1, " << steps() << "]";
    throw ParameterError(msg.str());
  }
}

NoiseSchedule make_noise_schedule(int steps, double beta_start,
                                  double beta_end, ScheduleKind kind) {
  if (steps < 1) throw ParameterError("schedule needs T >= 1");
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
    throw ParameterError("schedule needs 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> betas(static_cast<std::size_t>(steps));
  switch (kind) {
    case ScheduleKind::kLinear:
      for (int i = 0; i < steps; ++i) {
        betas[i] = steps == 1 ? beta_start
                              : beta_start + (beta_end - beta_start) * i /
                                                 static_cast<double>(steps - 1);
      }
      break;
  }
  return NoiseSchedule(kind, beta_start, beta_end, std::move(betas));
}

void DiffusionConfig::validate() const {
  if (T < 1) throw ParameterError("T must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw ParameterError("gamma must lie in [0, 1]");
  }
  if (group_order < 1) throw ParameterError("group_order must be >= 1");
  if (4 % group_order != 0) {
    throw UnsupportedElementError(
        "group_order must divide 4 for exact grid rotations");
  }
  if (L < 1 || N < 1 || H < 1 || W < 1) {
    throw ParameterError("L, N, H, W must be positive");
  }
  if (H != W) throw ConfigError("inputs must be square (H == W)");
  if (optimizer.batch_size < 1 || optimizer.epochs < 0 || !(optimizer.lr > 0)) {
    throw ParameterError("invalid optimizer settings");
  }
  if (optimizer.lr_decay != "cosine" && optimizer.lr_decay != "none") {
    throw ParameterError("lr_decay must be 'cosine' or 'none'");
  }
  if (network.base_fields < 1 || network.channel_mults.empty() ||
      network.res_blocks < 1 || network.embed_dim < 2 ||
      network.embed_dim % 2 != 0 || network.head_hidden < 1 ||
      network.head_grid < 1 || network.attention_heads < 1) {
    throw ConfigError("invalid network settings");
  }
  const int downs = static_cast<int>(network.channel_mults.size()) - 1;
  const int bottleneck = H >> downs;
  if ((bottleneck << downs) != H || bottleneck < 1) {
    throw ConfigError("H must be divisible by 2^(levels - 1)");
  }
  if (bottleneck % network.head_grid != 0) {
    throw ConfigError("bottleneck size must be divisible by head_grid");
  }
  for (int m : network.channel_mults) {
    if (m < 1) throw ConfigError("channel multipliers must be positive");
    if ((network.base_fields * m) % network.attention_heads != 0) {
      throw ConfigError("field counts must be divisible by attention_heads");
    }
  }
  (void)make_noise_schedule(T, beta_start, beta_end, schedule_kind);
}

NoiseSchedule DiffusionConfig::schedule() const {
  return make_noise_schedule(T, beta_start, beta_end, schedule_kind);
}

VideoClipState normalize_frames(const torch::Tensor& raw, int64_t frames,
                                int64_t height, int64_t width) {
  if (raw.dim() != 4 || raw.size(0) != frames || raw.size(1) != height ||
      raw.size(2) != width || raw.size(3) != 3) {
    std::ostringstream msg;
    msg << "expected raw frames of shape (" << frames << ", " << height << ", "
        << width << ", 3), got " << raw.sizes();
    throw ShapeError(msg.str());
  }
  auto values = raw.to(torch::kFloat64);
  if (values.min().item<double>() < 0.0 || values.max().item<double>() > 255.0) {
    throw ValidationError("raw pixel values must lie in [0, 255]");
  }
  return VideoClipState((values * (2.0 / 255.0) - 1.0).to(torch::kFloat32));
}

torch::Tensor denormalize_frames(const VideoClipState& state) {
  auto v = (state.frames().to(torch::kFloat64) + 1.0) * (255.0 / 2.0);
  return v.round().clamp(0.0, 255.0).to(torch::kUInt8);
}

TrajectoryAction normalize_trajectory(const PixelTrajectory& points_px,
                                      int64_t height, int64_t width) {
  if (height < 2 || width < 2) throw ParameterError("image too small");
  std::vector<Vec2> out;
  out.reserve(points_px.size());
  const double sx = static_cast<double>(width - 1);
  const double sy = static_cast<double>(height - 1);
  for (std::size_t i = 0; i < points_px.size(); ++i) {
    const auto& p = points_px[i];
    if (!(p.x >= 0.0 && p.x <= sx && p.y >= 0.0 && p.y <= sy)) {
      std::ostringstream msg;
      msg << "waypoint " << i << " (" << p.x << ", " << p.y
          << ") outside the image bounds";
      throw ValidationError(msg.str());
    }
    out.push_back({2.0 * p.x / sx - 1.0, 2.0 * p.y / sy - 1.0});
  }
  return TrajectoryAction(std::move(out));
}

PixelTrajectory denormalize_trajectory(const TrajectoryAction& action,
                                       int64_t height, int64_t width) {
  const double sx = static_cast<double>(width - 1);
  const double sy = static_cast<double>(height - 1);
  PixelTrajectory out;
  out.reserve(action.size());
  for (const auto& p : action.points()) {
    out.push_back({(p.x + 1.0) * 0.5 * sx, (p.y + 1.0) * 0.5 * sy});
  }
  return out;
}

}  // namespace idpoe
