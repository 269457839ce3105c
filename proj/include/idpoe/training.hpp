// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "idpoe/checkpoint.hpp"
#include "idpoe/core.hpp"

namespace idpoe {

/// In-memory training split: normalized states (M, 3L, H, W) and actions
/// (M, 2N) with their clip ids.
struct TensorDataset {
  torch::Tensor states;
  torch::Tensor actions;
  std::vector<std::string> clip_ids;

  int64_t size() const { return actions.defined() ? actions.size(0) : 0; }
  TensorDataset select(const std::vector<int64_t>& indices) const;
  static TensorDataset concat(const TensorDataset& a, const TensorDataset& b);
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

void to_json(nlohmann::json& j, const EpochRecord& r);
void from_json(const nlohmann::json& j, EpochRecord& r);

struct TrainOptions {
  /// Receives best.ckpt, last.ckpt and train_log.jsonl.
  std::filesystem::path out_dir;
  /// Continue from out_dir/last.ckpt when present.
  bool resume = false;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
  std::vector<EpochRecord> history;
  double best_val_loss = 0.0;
  int best_epoch = 0;
};

/// Model-specific pieces plugged into the shared training loop.
class Trainable {
 public:
  virtual ~Trainable() = default;
  virtual std::string kind() const = 0;
  virtual torch::nn::Module& module() = 0;
  /// Mean loss of a clean batch; all randomness comes from `gen`.
  virtual torch::Tensor batch_loss(const torch::Tensor& states,
                                   const torch::Tensor& actions,
                                   at::Generator& gen) = 0;
  /// Config echo and schedule stored in every checkpoint.
  virtual nlohmann::json config_json() const = 0;
  virtual nlohmann::json schedule_json() const { return nlohmann::json::object(); }
};

/// Adam with optional per-epoch cosine annealing; keeps the weights with the
/// lowest validation loss. Epoch e (1-based) draws its shuffling and noise
/// from a stream keyed by (seed, e), so a resumed run replays exactly.
TrainResult train_model(Trainable& model, const TensorDataset& train,
                        const TensorDataset& val, const OptimizerConfig& opt,
                        uint64_t seed, const TrainOptions& options);

/// Learning rate used during epoch `epoch` (1-based) of `total`.
double scheduled_lr(const OptimizerConfig& opt, int epoch, int total);

/// Mean loss over a dataset with a fixed evaluation stream.
double evaluate_loss(Trainable& model, const TensorDataset& data,
                     int batch_size, uint64_t seed);

std::vector<EpochRecord> read_train_log(const std::filesystem::path& path);

}  // namespace idpoe
