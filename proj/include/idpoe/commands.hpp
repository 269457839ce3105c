// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "idpoe/core.hpp"
#include "idpoe/equivariant/equivariance_check.hpp"
#include "idpoe/metrics.hpp"
#include "idpoe/sampler.hpp"
#include "idpoe/synthbench.hpp"
#include "idpoe/training.hpp"

/// Library side of the command-line tool. Every command is callable
/// in-process and reports problems through the idpoe error types, which the
/// executable maps to exit codes.
namespace idpoe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

/// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e);

/// --seed wins over IDPOE_SEED, which wins over `fallback`.
uint64_t resolve_seed(const std::optional<uint64_t>& flag, uint64_t fallback);

/// IDPOE_DEVICE may be unset or "cpu"; anything else is a ConfigError.
void check_device();

const std::vector<std::string>& model_kinds();

// gen-synth ---------------------------------------------------------------

struct GenSynthOptions {
  std::filesystem::path config;  ///< optional DatasetConfig JSON
  std::filesystem::path out_dir;
  std::optional<uint64_t> seed;
  std::optional<int> size;
  bool bimodal = false;
};

/// Per-entry check that a bimodal dataset's ground truth is one of the two
/// regenerated continuations, and that both continuations occur.
struct BimodalAudit {
  int entries = 0;
  int first_mode = 0;
  int second_mode = 0;
  int mismatched = 0;
  double min_mode_gap_px = 0.0;  ///< smallest mean distance between the modes

  bool passed() const;
};
void to_json(nlohmann::json& j, const BimodalAudit& a);

BimodalAudit audit_bimodal(const synthbench::Dataset& dataset);

struct GenSynthResult {
  synthbench::Dataset dataset;
  std::optional<BimodalAudit> audit;
};

GenSynthResult gen_synth(const GenSynthOptions& options);

// train -----------------------------------------------------------------

struct ExperimentConfig {
  std::string kind = "idpoe";
  DiffusionConfig model;
  SamplerConfig sampler;
  std::filesystem::path manifest;
  std::string train_split = "train";
  std::string val_split = "val";
  std::filesystem::path out_dir;
  uint64_t seed = 0;

  /// ConfigError for an unknown kind or an inconsistent model config.
  void validate() const;
};
void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// Reads an experiment file; an empty path yields the defaults.
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// Trains `config.kind` on the manifest's train split, validating on the val
/// split. The model's image size and horizon come from the dataset. Writes
/// experiment.json next to the checkpoints.
TrainResult train(ExperimentConfig config, bool resume,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

// predict ---------------------------------------------------------------

enum class SampleMode { kConditional, kNaive, kUnconditional };
std::string to_string(SampleMode mode);
SampleMode sample_mode_from_string(const std::string& name);

struct PredictOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path manifest;
  std::string split = "in_context_test";
  SampleMode mode = SampleMode::kConditional;
  SamplerConfig sampler;
  int rotate_turns = 0;  ///< quarter turns applied to every clip first
  int blur = 0;          ///< blur_corrupt severity, 0 for none
  std::filesystem::path out_dir;
  /// Limits the split to its first clips (by id); 0 keeps all.
  int limit = 0;
};

struct PredictResult {
  std::string model_kind;
  std::vector<PredictionRecord> records;
  std::filesystem::path records_path;  ///< out_dir/predictions.jsonl
};

/// Runs the checkpoint's model over a split and writes one record per clip
/// plus predictions.meta.json. Legal pairings: the joint models support all
/// modes, explicit_diffusion and bc only the conditional one.
PredictResult predict(const PredictOptions& options);

/// Ground truth of a split in pixels, optionally rotated with the clips.
std::vector<PixelTrajectory> ground_truth(const synthbench::Dataset& dataset,
                                          const std::string& split, int rotate_turns,
                                          std::vector<std::string>* ids = nullptr);

// evaluate --------------------------------------------------------------

struct EvaluateOptions {
  std::vector<std::filesystem::path> predictions;  ///< predictions.jsonl files
  std::filesystem::path manifest;
  /// Empty: taken from the first file's predictions.meta.json, else
  /// in_context_test.
  std::string split;
  /// Unset: taken from predictions.meta.json, else 0.
  std::optional<int> rotate_turns;
  std::vector<std::filesystem::path> train_logs;  ///< for the loss-curve plot
  std::filesystem::path out_dir;
  int overlay_clips = 6;
};

struct EvaluateResult {
  std::vector<MetricsReport> reports;
  std::string table;  ///< markdown comparison table
};

/// Scores every predictions file against the split and writes
/// report_<label>.json, comparison.md and SVG plots under out_dir.
EvaluateResult evaluate(const EvaluateOptions& options);

std::string comparison_table(const std::vector<MetricsReport>& reports);

// check-equivariance ----------------------------------------------------

struct EquivarianceOptions {
  std::filesystem::path checkpoint;  ///< empty: fresh model from `config`
  std::filesystem::path config;      ///< experiment file for a fresh model
  int samples = 100;
  double tolerance = 1e-4;
  std::optional<uint64_t> seed;
  std::filesystem::path out_dir;
};

struct EquivarianceResult {
  std::string model_kind;
  equivariant::NetworkEquivarianceReport report;
};
nlohmann::json to_json(const EquivarianceResult& r);

/// Audits the joint noise model against C_4 and writes equivariance.json.
EquivarianceResult check_equivariance(const EquivarianceOptions& options);

// augment-with-synthetic ------------------------------------------------

struct AugmentOptions {
  std::filesystem::path checkpoint;  ///< idpoe or idpoe_no_equiv
  std::filesystem::path manifest;    ///< real dataset
  int count = 0;
  bool include_real = false;  ///< mix the real train split in
  SamplerConfig sampler;
  std::filesystem::path out_dir;
};

/// Draws `count` clip/trajectory pairs by unconditional sampling and writes
/// them as a dataset whose train split holds the synthetic pairs (plus the
/// real train clips when include_real) and whose val split copies the real
/// one.
synthbench::Dataset augment_with_synthetic(const AugmentOptions& options);

}  // namespace idpoe::cli
