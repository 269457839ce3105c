// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "idpoe/core.hpp"
#include "idpoe/training.hpp"

namespace idpoe::synthbench {

using Rgb = std::array<double, 3>;

enum class TextureKind { kGrid, kRings };
enum class MarkerStyle { kDisc, kRing, kPlus };

/// Visual context of a scene: background texture, lesion-curve color and
/// tool-marker style. Every pattern is symmetric under 90 degree rotations
/// about the image center.
struct ContextProfile {
  int id = 0;
  TextureKind texture = TextureKind::kGrid;
  double texture_freq = 0.5;
  Rgb background_a{};
  Rgb background_b{};
  Rgb curve_color{};
  MarkerStyle marker = MarkerStyle::kDisc;
  Rgb marker_color{};
};

/// Deterministic profile for an id.
ContextProfile profile_from_id(int id);

/// Dataset-wide rendering parameters.
struct SceneConfig {
  int L = 3;
  int N = 6;
  int size = 128;          ///< H == W
  double margin_px = 8.0;  ///< curve keeps this distance to the border
  double step_px = 6.0;    ///< marker advance per frame
  double line_width = 1.5;
  double marker_radius = 3.0;
  bool bimodal = false;
  double bimodal_turn = 0.3;  ///< radians per step on each branch

  /// Defaults with lengths scaled to the image size (values above are for
  /// 128 px).
  static SceneConfig for_size(int size);
};

void to_json(nlohmann::json& j, const SceneConfig& c);
void from_json(const nlohmann::json& j, SceneConfig& c);

/// One scene. Control points are in centered pixel coordinates: pixel
/// (row, col) sits at (col - c, row - c) with c = (size - 1) / 2.
struct SceneSpec {
  uint64_t seed = 0;
  ContextProfile profile;
  std::array<Vec2, 4> control_points{};
  int progress = 0;  ///< curve sample under the marker in the last frame
  int branch = 0;    ///< bimodal scenes: 0 follows the curve, 1 the mirror
};

/// Draws a valid spec (curve inside the margin, enough future samples).
SceneSpec sample_scene_spec(uint64_t seed, const ContextProfile& profile,
                            const SceneConfig& config);

/// Marker path resampled at equal arc length `step_px`, centered coords.
std::vector<Vec2> curve_samples(const SceneSpec& spec, const SceneConfig& config);

struct Scene {
  torch::Tensor frames;             ///< uint8 (L, H, W, 3)
  PixelTrajectory trajectory_px;    ///< next N marker positions
  std::vector<PixelTrajectory> modes;  ///< bimodal: both continuations
};

/// Renders L frames with the marker advancing one sample per frame; the
/// ground truth is the next N samples. Throws ValidationError when the spec
/// violates the margin or lacks future samples.
Scene generate_scene(const SceneSpec& spec, const SceneConfig& config);

/// The same scene rotated by `turns` quarter turns about the image center.
SceneSpec rotate_spec(const SceneSpec& spec, int turns);

/// Separable binomial smoothing of radius severity - 1 with circular
/// boundary (sum preserving). Severity must lie in 1..5.
VideoClipState blur_corrupt(const VideoClipState& clip, int severity);
torch::Tensor blur_corrupt_channels(const torch::Tensor& states, int severity);

inline const std::vector<std::string>& split_names() {
  static const std::vector<std::string> names{"train", "val", "in_context_test",
                                              "out_context_test"};
  return names;
}

struct DatasetConfig {
  SceneConfig scene;
  std::map<std::string, int> counts{{"train", 1216},
                                    {"val", 135},
                                    {"in_context_test", 642},
                                    {"out_context_test", 393}};
  std::vector<int> train_profiles{0, 1, 2, 3, 4, 5};
  std::vector<int> out_context_profiles{6, 7, 8, 9};
  uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const DatasetConfig& c);
void from_json(const nlohmann::json& j, DatasetConfig& c);

struct DatasetEntry {
  std::string clip_id;
  std::vector<std::string> frames;  ///< paths relative to the dataset root
  PixelTrajectory trajectory_px;
  std::string split;
  uint64_t scene_seed = 0;
  int profile_id = 0;
  torch::Tensor raw;  ///< uint8 (L, H, W, 3), filled by load_dataset
};

nlohmann::json entry_to_json(const DatasetEntry& e);

struct Dataset {
  std::filesystem::path root;
  nlohmann::json header;
  int L = 0, N = 0, H = 0, W = 0;
  std::vector<DatasetEntry> entries;

  std::vector<const DatasetEntry*> split(const std::string& name) const;
  VideoClipState state(const DatasetEntry& e) const;
  TrajectoryAction action(const DatasetEntry& e) const;
  /// Normalized tensors for one split, ordered by clip id.
  TensorDataset tensors(const std::string& split_name) const;
};

inline constexpr const char* kManifestName = "manifest.jsonl";
inline constexpr const char* kChecksumName = "checksums.sha256";
inline constexpr int kManifestVersion = 1;

/// Writes dataset/<split>/<clip_id>/frame_<i>.ppm, the manifest and the
/// checksum file. ConfigError for overlapping profile sets or an output
/// directory that already holds a manifest.
Dataset generate_dataset(const DatasetConfig& config,
                         const std::filesystem::path& root);

/// Writes a dataset from already rendered clips (used for synthetic data
/// produced by a trained model). Entries must have `raw` filled.
void write_dataset(const std::filesystem::path& root, const nlohmann::json& header,
                   std::vector<DatasetEntry>& entries);

/// Parses and validates a manifest: every frame exists, decodes to the
/// configured shape and matches its checksum, and every trajectory lies in
/// the image. Problems are reported together in one DataError that names
/// the offending entries (or manifest lines).
Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Entries whose trajectory leaves [0, W-1] x [0, H-1].
std::vector<std::string> bounds_violations(const Dataset& dataset);

}  // namespace idpoe::synthbench
