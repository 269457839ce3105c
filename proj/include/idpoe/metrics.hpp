// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "idpoe/core.hpp"
#include "idpoe/training.hpp"

namespace idpoe {

/// Mean pointwise L2 distance. ShapeError on empty or unequal lengths.
double ade(const PixelTrajectory& pred, const PixelTrajectory& gt);
/// L2 distance between the final points.
double fde(const PixelTrajectory& pred, const PixelTrajectory& gt);
/// Discrete Frechet distance between two polylines (lengths may differ).
double frechet(const PixelTrajectory& p, const PixelTrajectory& q);

/// Normalized-action overloads; both sides are denormalized to pixels first.
double ade(const TrajectoryAction& pred, const TrajectoryAction& gt, int64_t H, int64_t W);
double fde(const TrajectoryAction& pred, const TrajectoryAction& gt, int64_t H, int64_t W);
double frechet(const TrajectoryAction& pred, const TrajectoryAction& gt, int64_t H,
               int64_t W);

/// One prediction output line.
struct PredictionRecord {
  std::string clip_id;
  PixelTrajectory points_px;
  std::vector<PixelTrajectory> intermediates;  ///< empty unless recorded
};

void to_json(nlohmann::json& j, const PredictionRecord& r);
void from_json(const nlohmann::json& j, PredictionRecord& r);

void write_predictions(const std::filesystem::path& path,
                       const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

struct ClipMetrics {
  std::string clip_id;
  double ade = 0.0;
  double fde = 0.0;
  double fd = 0.0;
  std::string error;  ///< non-empty when the clip could not be scored

  bool ok() const { return error.empty(); }
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  ///< population standard deviation
};

struct MetricsReport {
  std::string split;
  std::string model_kind;
  std::vector<ClipMetrics> clips;  ///< sorted by clip id
  int64_t count = 0;               ///< clips in the aggregate
  int64_t failed = 0;
  MeanStd ade, fde, fd;
};

void to_json(nlohmann::json& j, const MetricsReport& r);
void from_json(const nlohmann::json& j, MetricsReport& r);

/// Sorts clips by id and fills the aggregate from the successful ones.
MetricsReport aggregate(std::vector<ClipMetrics> clips, std::string split = {},
                        std::string model_kind = {});

/// Scores stored predictions against ground truth (pixels). DataError lists
/// every ground-truth clip without a prediction.
MetricsReport evaluate_records(const std::vector<PredictionRecord>& predictions,
                               const std::vector<std::string>& clip_ids,
                               const std::vector<PixelTrajectory>& gt,
                               const std::string& split = {},
                               const std::string& model_kind = {});

/// Maps a batch of normalized clips (B, 3L, H, W) with their ids to
/// normalized trajectories (B, 2N).
using BatchPredictor = std::function<torch::Tensor(const torch::Tensor& states,
                                                   const std::vector<std::string>& ids)>;

/// Runs the predictor over a split in batches. A failing batch is retried
/// clip by clip so that a failure only removes the clip that caused it.
MetricsReport evaluate(const BatchPredictor& predictor, const TensorDataset& data,
                       int64_t H, int64_t W, int batch_size = 128,
                       const std::string& split = {}, const std::string& model_kind = {},
                       std::vector<PredictionRecord>* predictions = nullptr);

void write_report(const std::filesystem::path& path, const MetricsReport& report);

}  // namespace idpoe
