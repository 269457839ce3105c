// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#include "idpoe/commands.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "idpoe/baselines.hpp"
#include "idpoe/checkpoint.hpp"
#include "idpoe/config_io.hpp"
#include "idpoe/equivariant/group.hpp"
#include "idpoe/image_io.hpp"
#include "idpoe/policy.hpp"
#include "idpoe/svg.hpp"

namespace idpoe::cli {

namespace fs = std::filesystem;
namespace sb = synthbench;

namespace {

constexpr const char* kMetaName = "predictions.meta.json";
constexpr const char* kRecordsName = "predictions.jsonl";

std::string indexed_id(const std::string& prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%05d", prefix.c_str(), i);
  return buf;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  write_text_atomic(path, j.dump(2) + "\n");
}

bool is_joint_kind(const std::string& kind) {
  return kind == kKindIdpoe || kind == kKindIdpoeNoEquiv;
}

std::vector<uint64_t> stream_keys(const std::vector<std::string>& ids) {
  std::vector<uint64_t> keys;
  keys.reserve(ids.size());
  for (const auto& id : ids) keys.push_back(stream_key(id));
  return keys;
}

void check_turns(int turns, const sb::Dataset& ds) {
  if (turns < 0 || turns > 3) throw ConfigError("rotation must be 0..3 quarter turns");
  if (turns % 2 == 1 && ds.H != ds.W) {
    throw ConfigError("odd quarter turns need square images");
  }
}

// Label used in reports and file names.
std::string label_of(const nlohmann::json& meta, const fs::path& records) {
  if (meta.is_null()) return records.parent_path().filename().string();
  std::string label = meta.value("model_kind", "model");
  const auto mode = meta.value("mode", "conditional");
  if (mode != "conditional") label += "_" + mode;
  return label;
}

std::string file_safe(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const ValidationError*>(&e) ||
      dynamic_cast<const ShapeError*>(&e)) {
    return kExitData;
  }
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParameterError*>(&e) ||
      dynamic_cast<const UnsupportedElementError*>(&e) ||
      dynamic_cast<const nlohmann::json::exception*>(&e)) {
    return kExitConfig;
  }
  return 1;
}

uint64_t resolve_seed(const std::optional<uint64_t>& flag, uint64_t fallback) {
  if (flag) return *flag;
  if (const char* env = std::getenv("IDPOE_SEED"); env && *env) {
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (*end != '\0') throw ConfigError(std::string("IDPOE_SEED is not an integer: ") + env);
    return v;
  }
  return fallback;
}

void check_device() {
  const char* env = std::getenv("IDPOE_DEVICE");
  if (!env || !*env || std::string(env) == "cpu") return;
  throw ConfigError(std::string("IDPOE_DEVICE=") + env +
                    " is not supported by this build; only 'cpu' is available");
}

const std::vector<std::string>& model_kinds() {
  static const std::vector<std::string> kinds{kKindIdpoe, kKindIdpoeNoEquiv, kKindExplicit,
                                              kKindBc};
  return kinds;
}

// gen-synth ---------------------------------------------------------------

bool BimodalAudit::passed() const {
  if (entries == 0) return false;
  if (mismatched != 0 || first_mode == 0 || second_mode == 0) return false;
  // Branches are fair coin flips; allow four standard deviations.
  const double n = entries;
  return std::abs(first_mode - n / 2) <= 4 * std::sqrt(n) / 2 && min_mode_gap_px > 0.0;
}

void to_json(nlohmann::json& j, const BimodalAudit& a) {
  j = {{"entries", a.entries},
       {"first_mode", a.first_mode},
       {"second_mode", a.second_mode},
       {"mismatched", a.mismatched},
       {"min_mode_gap_px", a.min_mode_gap_px},
       {"passed", a.passed()}};
}

BimodalAudit audit_bimodal(const sb::Dataset& dataset) {
  if (!dataset.header.contains("generator")) {
    throw ConfigError("dataset was not produced by the scene generator");
  }
  const auto gen = dataset.header.at("generator").get<sb::DatasetConfig>();
  if (!gen.scene.bimodal) throw ConfigError("dataset is not bimodal");
  BimodalAudit audit;
  audit.min_mode_gap_px = std::numeric_limits<double>::infinity();
  for (const auto& e : dataset.entries) {
    const auto spec = sb::sample_scene_spec(e.scene_seed, sb::profile_from_id(e.profile_id),
                                            gen.scene);
    const auto scene = sb::generate_scene(spec, gen.scene);
    ++audit.entries;
    audit.min_mode_gap_px = std::min(audit.min_mode_gap_px, ade(scene.modes[0], scene.modes[1]));
    bool matched = false;
    for (int m = 0; m < 2 && !matched; ++m) {
      if (ade(scene.modes[m], e.trajectory_px) <= 1e-9) {
        (m == 0 ? audit.first_mode : audit.second_mode) += 1;
        matched = true;
      }
    }
    if (!matched) ++audit.mismatched;
  }
  if (audit.entries == 0) audit.min_mode_gap_px = 0.0;
  return audit;
}

GenSynthResult gen_synth(const GenSynthOptions& options) {
  if (options.out_dir.empty()) throw ConfigError("gen-synth needs --out-dir");
  sb::DatasetConfig config;
  if (!options.config.empty()) config = read_json_file(options.config).get<sb::DatasetConfig>();
  config.seed = resolve_seed(options.seed, config.seed);
  if (options.size) {
    auto scaled = sb::SceneConfig::for_size(*options.size);
    scaled.L = config.scene.L;
    scaled.N = config.scene.N;
    scaled.bimodal = config.scene.bimodal;
    scaled.bimodal_turn = config.scene.bimodal_turn;
    config.scene = scaled;
  }
  if (options.bimodal) config.scene.bimodal = true;
  GenSynthResult result{sb::generate_dataset(config, options.out_dir), std::nullopt};
  if (config.scene.bimodal) {
    result.audit = audit_bimodal(result.dataset);
    write_json(options.out_dir / "bimodal_audit.json", *result.audit);
  }
  return result;
}

// train -----------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (std::find(model_kinds().begin(), model_kinds().end(), kind) == model_kinds().end()) {
    throw ConfigError("unknown model kind '" + kind +
                      "' (expected idpoe, idpoe_no_equiv, explicit_diffusion or bc)");
  }
  model.validate();
  if (sampler.T != 0 && sampler.T != model.T) {
    throw ConfigError("sampler T must match the model's T");
  }
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"kind", c.kind},
       {"model", c.model},
       {"sampler", c.sampler},
       {"manifest", c.manifest.string()},
       {"train_split", c.train_split},
       {"val_split", c.val_split},
       {"out_dir", c.out_dir.string()},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  reject_unknown_keys(j, "experiment",
                      {"kind", "model", "sampler", "manifest", "train_split", "val_split",
                       "out_dir", "seed"});
  read_optional(j, "kind", c.kind);
  read_optional(j, "model", c.model);
  read_optional(j, "sampler", c.sampler);
  std::string path;
  if (j.contains("manifest")) {
    read_optional(j, "manifest", path);
    c.manifest = path;
  }
  if (j.contains("out_dir")) {
    read_optional(j, "out_dir", path);
    c.out_dir = path;
  }
  read_optional(j, "train_split", c.train_split);
  read_optional(j, "val_split", c.val_split);
  read_optional(j, "seed", c.seed);
}

ExperimentConfig load_experiment(const fs::path& path) {
  if (path.empty()) return {};
  return read_json_file(path).get<ExperimentConfig>();
}

TrainResult train(ExperimentConfig config, bool resume,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  if (config.manifest.empty()) throw ConfigError("train needs a dataset manifest (--data)");
  if (config.out_dir.empty()) throw ConfigError("train needs --out-dir");
  const auto ds = sb::load_dataset(config.manifest);
  config.model.L = ds.L;
  config.model.N = ds.N;
  config.model.H = ds.H;
  config.model.W = ds.W;
  config.model.seed = config.seed;
  config.validate();

  const auto train_split = ds.tensors(config.train_split);
  const auto val_split = ds.tensors(config.val_split);
  if (train_split.size() == 0) {
    throw ConfigError("split '" + config.train_split + "' of " + config.manifest.string() +
                      " is empty");
  }
  if (val_split.size() == 0) {
    throw ConfigError("split '" + config.val_split + "' of " + config.manifest.string() +
                      " is empty");
  }
  fs::create_directories(config.out_dir);
  write_json(config.out_dir / "experiment.json", config);

  TrainOptions opts;
  opts.out_dir = config.out_dir;
  opts.resume = resume;
  opts.on_epoch = on_epoch;
  if (config.kind == kKindIdpoe) return train_policy(train_split, val_split, config.model, opts);
  if (config.kind == kKindIdpoeNoEquiv) {
    return train_policy(train_split, val_split, non_equivariant_variant(config.model), opts,
                        kKindIdpoeNoEquiv);
  }
  if (config.kind == kKindExplicit) {
    return train_explicit_diffusion(train_split, val_split, config.model, opts);
  }
  return train_bc(train_split, val_split, config.model, opts);
}

// predict ---------------------------------------------------------------

std::string to_string(SampleMode mode) {
  switch (mode) {
    case SampleMode::kConditional: return "conditional";
    case SampleMode::kNaive: return "naive";
    case SampleMode::kUnconditional: return "unconditional";
  }
  return "conditional";
}

SampleMode sample_mode_from_string(const std::string& name) {
  if (name == "conditional") return SampleMode::kConditional;
  if (name == "naive") return SampleMode::kNaive;
  if (name == "unconditional") return SampleMode::kUnconditional;
  throw ConfigError("unknown sampling mode '" + name +
                    "' (expected conditional, naive or unconditional)");
}

std::vector<PixelTrajectory> ground_truth(const sb::Dataset& dataset, const std::string& split,
                                          int rotate_turns, std::vector<std::string>* ids) {
  check_turns(rotate_turns, dataset);
  std::vector<PixelTrajectory> out;
  const auto entries = dataset.split(split);
  for (const auto* e : entries) {
    auto action = dataset.action(*e);
    if (rotate_turns != 0) {
      action = equivariant::rotate_action(action, equivariant::GroupElement{rotate_turns, 4});
    }
    out.push_back(denormalize_trajectory(action, dataset.H, dataset.W));
    if (ids) ids->push_back(e->clip_id);
  }
  return out;
}

PredictResult predict(const PredictOptions& options) {
  if (options.out_dir.empty()) throw ConfigError("predict needs --out-dir");
  const auto ckpt = load_checkpoint(options.checkpoint);
  const auto& kind = ckpt.model_kind;
  if (!is_joint_kind(kind) && options.mode != SampleMode::kConditional) {
    throw ConfigError("a '" + kind + "' model only supports conditional prediction");
  }
  const auto ds = sb::load_dataset(options.manifest);
  check_turns(options.rotate_turns, ds);
  auto data = ds.tensors(options.split);
  if (data.size() == 0) throw ConfigError("split '" + options.split + "' is empty");
  if (options.limit > 0 && options.limit < data.size()) {
    std::vector<int64_t> first(static_cast<std::size_t>(options.limit));
    std::iota(first.begin(), first.end(), 0);
    data = data.select(first);
  }
  auto states = data.states;
  if (options.rotate_turns != 0) states = equivariant::rotate_grid(states, options.rotate_turns);
  if (options.blur != 0) states = sb::blur_corrupt_channels(states, options.blur);
  const auto keys = stream_keys(data.clip_ids);
  const auto& cfg = options.sampler;

  SampleTrace trace;
  if (is_joint_kind(kind)) {
    auto lp = policy_from_checkpoint(ckpt);
    if (lp.config.H != ds.H || lp.config.W != ds.W || lp.config.L != ds.L ||
        lp.config.N != ds.N) {
      throw ConfigError("checkpoint was trained for a different clip or horizon size");
    }
    const auto model = make_joint_model(lp.net, lp.schedule);
    switch (options.mode) {
      case SampleMode::kConditional:
        trace = sample_conditional_batch(model, states, keys, cfg);
        break;
      case SampleMode::kNaive:
        trace = sample_conditional_naive_batch(model, states, keys, cfg);
        break;
      case SampleMode::kUnconditional:
        trace.actions = sample_unconditional(model, cfg, data.size()).action;
        break;
    }
  } else if (kind == kKindExplicit) {
    auto m = load_explicit(options.checkpoint);
    torch::NoGradGuard guard;
    trace = predict_explicit(m.net, m.schedule, states, keys, cfg);
  } else if (kind == kKindBc) {
    auto net = load_bc(options.checkpoint);
    trace.actions = predict_bc(net, states);
  } else {
    throw ConfigError("unknown model kind '" + kind + "' in " + options.checkpoint.string());
  }

  PredictResult result;
  result.model_kind = kind;
  for (int64_t i = 0; i < data.size(); ++i) {
    PredictionRecord r;
    r.clip_id = data.clip_ids[i];
    r.points_px =
        denormalize_trajectory(TrajectoryAction::from_tensor(trace.actions[i]), ds.H, ds.W);
    for (const auto& step : trace.intermediates) {
      r.intermediates.push_back(
          denormalize_trajectory(TrajectoryAction::from_tensor(step[i]), ds.H, ds.W));
    }
    result.records.push_back(std::move(r));
  }
  fs::create_directories(options.out_dir);
  result.records_path = options.out_dir / kRecordsName;
  write_predictions(result.records_path, result.records);
  write_json(options.out_dir / kMetaName,
             {{"model_kind", kind},
              {"mode", to_string(options.mode)},
              {"checkpoint", options.checkpoint.string()},
              {"manifest", options.manifest.string()},
              {"split", options.split},
              {"rotate_turns", options.rotate_turns},
              {"blur", options.blur},
              {"limit", options.limit},
              {"sampler", cfg}});
  return result;
}

// evaluate --------------------------------------------------------------

std::string comparison_table(const std::vector<MetricsReport>& reports) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << "| model | split | clips | failed | ADE (px) | FDE (px) | FD (px) |\n"
      << "|---|---|---|---|---|---|---|\n";
  for (const auto& r : reports) {
    out << "| " << r.model_kind << " | " << r.split << " | " << r.count << " | " << r.failed
        << " | " << r.ade.mean << " ± " << r.ade.std << " | " << r.fde.mean << " ± "
        << r.fde.std << " | " << r.fd.mean << " ± " << r.fd.std << " |\n";
  }
  return out.str();
}

EvaluateResult evaluate(const EvaluateOptions& options) {
  if (options.predictions.empty()) throw ConfigError("evaluate needs at least one predictions file");
  if (options.out_dir.empty()) throw ConfigError("evaluate needs --out-dir");
  const auto ds = sb::load_dataset(options.manifest);
  fs::create_directories(options.out_dir);

  EvaluateResult result;
  std::vector<std::vector<PredictionRecord>> all_records;
  std::vector<std::string> gt_ids;
  std::vector<PixelTrajectory> gt;
  std::set<std::string> used_labels;
  std::string split = options.split;
  std::optional<int> expected_turns = options.rotate_turns;
  for (const auto& path : options.predictions) {
    const auto meta_path = path.parent_path() / kMetaName;
    nlohmann::json meta;
    if (fs::exists(meta_path)) meta = read_json_file(meta_path);
    const std::string meta_split = meta.is_null() ? "" : meta.value("split", "");
    if (split.empty()) split = meta_split.empty() ? "in_context_test" : meta_split;
    if (!meta_split.empty() && meta_split != split) {
      throw ConfigError(path.string() + " holds predictions for split '" + meta_split +
                        "', not '" + split + "'");
    }
    const int turns = meta.is_null() ? expected_turns.value_or(0)
                                     : meta.value("rotate_turns", expected_turns.value_or(0));
    if (!expected_turns) expected_turns = turns;
    if (turns != *expected_turns) {
      throw ConfigError(path.string() + " was predicted on clips rotated by " +
                        std::to_string(turns) + " quarter turns, evaluation expects " +
                        std::to_string(*expected_turns));
    }
    gt_ids.clear();
    gt = ground_truth(ds, split, turns, &gt_ids);
    auto records = read_predictions(path);
    auto label = label_of(meta, path);
    for (int k = 2; used_labels.count(label); ++k) {
      label = label_of(meta, path) + "_" + std::to_string(k);
    }
    used_labels.insert(label);
    auto report = evaluate_records(records, gt_ids, gt, split, label);
    write_report(options.out_dir / ("report_" + file_safe(label) + ".json"), report);
    result.reports.push_back(std::move(report));
    all_records.push_back(std::move(records));
  }
  result.table = comparison_table(result.reports);
  write_text_atomic(options.out_dir / "comparison.md", result.table);

  std::vector<svg::Bar> bars;
  for (const auto& r : result.reports) bars.push_back({r.model_kind, r.ade.mean, r.ade.std});
  write_text_atomic(options.out_dir / "ade_by_model.svg",
                    svg::bar_chart("ADE on " + split, "ADE (px)", bars));

  std::vector<svg::Panel> panels;
  const auto shown = std::min<std::size_t>(gt_ids.size(), std::max(options.overlay_clips, 0));
  for (std::size_t i = 0; i < shown; ++i) {
    svg::Panel panel{gt_ids[i], {{"ground truth", gt[i]}}};
    for (std::size_t m = 0; m < all_records.size(); ++m) {
      for (const auto& r : all_records[m]) {
        if (r.clip_id == gt_ids[i]) panel.paths.push_back({result.reports[m].model_kind, r.points_px});
      }
    }
    panels.push_back(std::move(panel));
  }
  write_text_atomic(options.out_dir / "trajectories.svg",
                    svg::trajectory_panels(panels, ds.H, ds.W));

  if (!options.train_logs.empty()) {
    std::vector<svg::Series> series;
    for (const auto& log_path : options.train_logs) {
      const auto log = read_train_log(log_path);
      const auto name = log_path.parent_path().filename().string();
      svg::Series train_s{name + " train", {}, {}}, val_s{name + " val", {}, {}};
      for (const auto& r : log) {
        train_s.x.push_back(r.epoch);
        train_s.y.push_back(r.train_loss);
        val_s.x.push_back(r.epoch);
        val_s.y.push_back(r.val_loss);
      }
      series.push_back(std::move(train_s));
      series.push_back(std::move(val_s));
    }
    write_text_atomic(options.out_dir / "loss_curves.svg",
                      svg::line_chart("Training loss", "epoch", "loss", series));
  }
  return result;
}

// check-equivariance ----------------------------------------------------

nlohmann::json to_json(const EquivarianceResult& r) {
  auto rep = [](const equivariant::EquivarianceReport& e) {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& el : e.errors) {
      per.push_back({{"element", el.element}, {"max_rel_error", el.max_rel_error}});
    }
    return nlohmann::json{{"group_order", e.group_order},
                          {"samples", e.samples},
                          {"tolerance", e.tolerance},
                          {"worst", e.worst()},
                          {"passed", e.passed()},
                          {"elements", per}};
  };
  return {{"model_kind", r.model_kind},
          {"passed", r.report.combined.passed()},
          {"combined", rep(r.report.combined)},
          {"state_head", rep(r.report.state_head)},
          {"action_head", rep(r.report.action_head)}};
}

EquivarianceResult check_equivariance(const EquivarianceOptions& options) {
  if (options.samples < 1) throw ConfigError("--samples must be positive");
  EquivarianceResult result;
  equivariant::PolicyNetwork net{nullptr};
  uint64_t seed = 0;
  if (!options.checkpoint.empty()) {
    auto lp = policy_from_checkpoint(load_checkpoint(options.checkpoint));
    result.model_kind = lp.kind;
    net = lp.net;
    seed = resolve_seed(options.seed, lp.config.seed);
  } else {
    const auto exp = load_experiment(options.config);
    if (!is_joint_kind(exp.kind)) {
      throw ConfigError("the equivariance audit applies to joint models only, not '" +
                        exp.kind + "'");
    }
    seed = resolve_seed(options.seed, exp.seed);
    auto model = exp.kind == kKindIdpoe ? exp.model : non_equivariant_variant(exp.model);
    model.validate();
    torch::manual_seed(seed);
    net = equivariant::build_policy_network(model);
    net->eval();
    result.model_kind = exp.kind;
  }
  result.report =
      equivariant::check_network_equivariance(net, options.samples, options.tolerance, seed, 4);
  if (!options.out_dir.empty()) {
    fs::create_directories(options.out_dir);
    write_json(options.out_dir / "equivariance.json", to_json(result));
  }
  return result;
}

// augment-with-synthetic ------------------------------------------------

sb::Dataset augment_with_synthetic(const AugmentOptions& options) {
  if (options.count < 0) throw ConfigError("--count must be non-negative");
  if (options.out_dir.empty()) throw ConfigError("augment-with-synthetic needs --out-dir");
  const auto ckpt = load_checkpoint(options.checkpoint);
  auto lp = policy_from_checkpoint(ckpt);
  const auto real = sb::load_dataset(options.manifest);
  if (lp.config.H != real.H || lp.config.W != real.W || lp.config.L != real.L ||
      lp.config.N != real.N) {
    throw ConfigError("checkpoint was trained for a different clip or horizon size");
  }
  const auto model = make_joint_model(lp.net, lp.schedule);
  const auto samples = sample_unconditional(model, options.sampler, options.count);

  std::vector<sb::DatasetEntry> entries;
  for (int i = 0; i < options.count; ++i) {
    sb::DatasetEntry e;
    e.clip_id = indexed_id("synthetic", i);
    e.split = "train";
    e.scene_seed = static_cast<uint64_t>(i);
    e.profile_id = -1;
    e.raw = denormalize_frames(VideoClipState::from_channels_first(samples.state[i]));
    e.trajectory_px = denormalize_trajectory(
        TrajectoryAction::from_tensor(samples.action[i]), real.H, real.W);
    entries.push_back(std::move(e));
  }
  for (const auto& e : real.entries) {
    if (e.split == "val" || (options.include_real && e.split == "train")) entries.push_back(e);
  }
  nlohmann::json header{{"format", "idpoe-dataset"},
                        {"format_version", sb::kManifestVersion},
                        {"config", real.header.at("config")},
                        {"synthetic",
                         {{"checkpoint", options.checkpoint.string()},
                          {"source_manifest", options.manifest.string()},
                          {"count", options.count},
                          {"include_real", options.include_real},
                          {"sampler", options.sampler}}}};
  sb::write_dataset(options.out_dir, header, entries);
  return sb::load_dataset(options.out_dir / sb::kManifestName);
}

}  // namespace idpoe::cli
