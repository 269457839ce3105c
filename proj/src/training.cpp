// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#include "idpoe/training.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "idpoe/rng.hpp"

namespace idpoe {
namespace {

constexpr uint64_t kValidationStream = 0x7661'6c69'6461'7465ULL;

Checkpoint make_checkpoint(Trainable& model) {
  Checkpoint ckpt;
  ckpt.model_kind = model.kind();
  ckpt.config = model.config_json();
  ckpt.schedule = model.schedule_json();
  ckpt.tensors = module_tensors(model.module(), "model.");
  return ckpt;
}

void save_optimizer_state(torch::optim::Adam& adam,
                          const std::vector<torch::Tensor>& params,
                          Checkpoint& ckpt) {
  auto& state = adam.state();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto it = state.find(params[i].unsafeGetTensorImpl());
    if (it == state.end()) continue;
    auto& s = static_cast<torch::optim::AdamParamState&>(*it->second);
    const auto key = "optim." + std::to_string(i);
    ckpt.tensors.emplace_back(key + ".exp_avg", s.exp_avg().clone());
    ckpt.tensors.emplace_back(key + ".exp_avg_sq", s.exp_avg_sq().clone());
    ckpt.tensors.emplace_back(key + ".step",
                              torch::full({1}, static_cast<float>(s.step())));
  }
}

void load_optimizer_state(torch::optim::Adam& adam,
                          const std::vector<torch::Tensor>& params,
                          const Checkpoint& ckpt) {
  auto& state = adam.state();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto key = "optim." + std::to_string(i);
    const auto* m = ckpt.find(key + ".exp_avg");
    const auto* v = ckpt.find(key + ".exp_avg_sq");
    const auto* step = ckpt.find(key + ".step");
    if (m == nullptr || v == nullptr || step == nullptr) continue;
    auto s = std::make_unique<torch::optim::AdamParamState>();
    s->step(static_cast<int64_t>(step->item<float>()));
    s->exp_avg(m->clone());
    s->exp_avg_sq(v->clone());
    state[params[i].unsafeGetTensorImpl()] = std::move(s);
  }
}

void append_log(const std::filesystem::path& path, const EpochRecord& record) {
  std::ofstream out(path, std::ios::app);
  out << nlohmann::json(record).dump() << '\n';
}

}  // namespace

TensorDataset TensorDataset::select(const std::vector<int64_t>& indices) const {
  auto idx = torch::tensor(indices, torch::kLong);
  TensorDataset out{states.index_select(0, idx), actions.index_select(0, idx), {}};
  for (auto i : indices) out.clip_ids.push_back(clip_ids.at(i));
  return out;
}

TensorDataset TensorDataset::concat(const TensorDataset& a, const TensorDataset& b) {
  if (a.size() == 0) return b;
  if (b.size() == 0) return a;
  TensorDataset out{torch::cat({a.states, b.states}), torch::cat({a.actions, b.actions}),
                    a.clip_ids};
  out.clip_ids.insert(out.clip_ids.end(), b.clip_ids.begin(), b.clip_ids.end());
  return out;
}

void to_json(nlohmann::json& j, const EpochRecord& r) {
  j = {{"epoch", r.epoch},
       {"train_loss", r.train_loss},
       {"val_loss", r.val_loss},
       {"lr", r.lr}};
}

void from_json(const nlohmann::json& j, EpochRecord& r) {
  r.epoch = j.at("epoch").get<int>();
  r.train_loss = j.at("train_loss").get<double>();
  r.val_loss = j.at("val_loss").get<double>();
  r.lr = j.at("lr").get<double>();
}

double scheduled_lr(const OptimizerConfig& opt, int epoch, int total) {
  if (opt.lr_decay != "cosine" || total <= 0) return opt.lr;
  const double progress = static_cast<double>(epoch - 1) / total;
  return 0.5 * opt.lr * (1.0 + std::cos(std::numbers::pi * progress));
}

double evaluate_loss(Trainable& model, const TensorDataset& data,
                     int batch_size, uint64_t seed) {
  torch::NoGradGuard no_grad;
  model.module().eval();
  auto gen = make_generator(mix_seed(seed, kValidationStream));
  double total = 0.0;
  for (int64_t start = 0; start < data.size(); start += batch_size) {
    const auto len = std::min<int64_t>(batch_size, data.size() - start);
    auto loss = model.batch_loss(data.states.narrow(0, start, len),
                                 data.actions.narrow(0, start, len), gen);
    total += loss.item<double>() * static_cast<double>(len);
  }
  model.module().train();
  return data.size() > 0 ? total / static_cast<double>(data.size()) : 0.0;
}

TrainResult train_model(Trainable& model, const TensorDataset& train,
                        const TensorDataset& val, const OptimizerConfig& opt,
                        uint64_t seed, const TrainOptions& options) {
  if (train.size() == 0) throw ConfigError("training split is empty");
  if (val.size() == 0) throw ConfigError("validation split is empty");
  std::filesystem::create_directories(options.out_dir);

  TrainResult result;
  result.best_checkpoint = options.out_dir / "best.ckpt";
  result.last_checkpoint = options.out_dir / "last.ckpt";
  const auto log_path = options.out_dir / "train_log.jsonl";
  result.best_val_loss = std::numeric_limits<double>::infinity();

  auto params = model.module().parameters();
  torch::optim::Adam adam(
      params, torch::optim::AdamOptions(opt.lr).betas({opt.beta1, opt.beta2}));

  int start_epoch = 1;
  if (options.resume && std::filesystem::exists(result.last_checkpoint)) {
    auto ckpt = load_checkpoint(result.last_checkpoint);
    if (ckpt.model_kind != model.kind()) {
      throw ConfigError("cannot resume a '" + ckpt.model_kind +
                        "' checkpoint as '" + model.kind() + "'");
    }
    load_module_tensors(model.module(), ckpt, "model.");
    load_optimizer_state(adam, params, ckpt);
    start_epoch = ckpt.meta.at("epoch").get<int>() + 1;
    result.best_val_loss = ckpt.meta.at("best_val_loss").get<double>();
    result.best_epoch = ckpt.meta.at("best_epoch").get<int>();
    result.history = ckpt.meta.at("history").get<std::vector<EpochRecord>>();
  } else {
    std::ofstream(log_path, std::ios::trunc);
  }

  model.module().train();
  const int batch_size = opt.batch_size;
  for (int epoch = start_epoch; epoch <= opt.epochs; ++epoch) {
    const double lr = scheduled_lr(opt, epoch, opt.epochs);
    for (auto& group : adam.param_groups()) {
      static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
    }
    auto gen = make_generator(mix_seed(seed, static_cast<uint64_t>(epoch)));
    auto order = torch::randperm(train.size(), gen, torch::kLong);
    double epoch_loss = 0.0;
    for (int64_t start = 0; start < train.size(); start += batch_size) {
      const auto len = std::min<int64_t>(batch_size, train.size() - start);
      auto idx = order.narrow(0, start, len);
      adam.zero_grad();
      auto loss = model.batch_loss(train.states.index_select(0, idx),
                                   train.actions.index_select(0, idx), gen);
      const double value = loss.item<double>();
      if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "training diverged: non-finite loss in epoch " << epoch
            << " at sample offset " << start;
        throw NumericError(msg.str());
      }
      loss.backward();
      adam.step();
      epoch_loss += value * static_cast<double>(len);
    }
    EpochRecord record{epoch, epoch_loss / static_cast<double>(train.size()),
                       evaluate_loss(model, val, batch_size, seed), lr};
    if (!std::isfinite(record.val_loss)) {
      throw NumericError("validation loss is not finite in epoch " +
                         std::to_string(epoch));
    }
    result.history.push_back(record);
    append_log(log_path, record);

    if (record.val_loss < result.best_val_loss) {
      result.best_val_loss = record.val_loss;
      result.best_epoch = epoch;
      auto best = make_checkpoint(model);
      best.meta = {{"epoch", epoch}, {"val_loss", record.val_loss}, {"seed", seed}};
      save_checkpoint(best, result.best_checkpoint);
    }
    auto last = make_checkpoint(model);
    last.meta = {{"epoch", epoch},
                 {"best_val_loss", result.best_val_loss},
                 {"best_epoch", result.best_epoch},
                 {"seed", seed},
                 {"history", result.history}};
    save_optimizer_state(adam, params, last);
    save_checkpoint(last, result.last_checkpoint);
    if (options.on_epoch) options.on_epoch(record);
  }
  model.module().eval();
  return result;
}

std::vector<EpochRecord> read_train_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open training log " + path.string());
  std::vector<EpochRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(nlohmann::json::parse(line).get<EpochRecord>());
  }
  return out;
}

}  // namespace idpoe
