// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "idpoe/commands.hpp"
#include "idpoe/config_io.hpp"

namespace fs = std::filesystem;
using namespace idpoe;
using namespace idpoe::cli;

namespace {

struct Common {
  std::string config;
  std::string out_dir;
  std::optional<uint64_t> seed;
};

void add_common(CLI::App* app, Common& c, const std::string& config_help) {
  app->add_option("--config", c.config, config_help)->check(CLI::ExistingFile);
  app->add_option("--out-dir", c.out_dir, "Output directory");
  app->add_option("--seed", c.seed, "Random seed (overrides IDPOE_SEED and the config)");
}

SamplerConfig sampler_from(const std::string& path) {
  if (path.empty()) return {};
  auto j = read_json_file(path);
  // An experiment file carries the sampler in a section of its own.
  if (j.is_object() && j.contains("sampler") && j.contains("model")) j = j.at("sampler");
  return j.get<SamplerConfig>();
}

void print_epoch(const EpochRecord& r) {
  std::printf("epoch %4d  train %.6f  val %.6f  lr %.3g\n", r.epoch, r.train_loss, r.val_loss,
              r.lr);
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equivariant joint diffusion policies for trajectory prediction"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "idpoe 0.1.0");

  // gen-synth
  Common gs;
  std::optional<int> gs_size;
  bool gs_bimodal = false;
  auto* gen = app.add_subcommand("gen-synth", "Render the synthetic benchmark dataset");
  add_common(gen, gs, "Dataset config JSON");
  gen->add_option("--size", gs_size, "Image side in pixels (rescales the scene geometry)")
      ->check(CLI::Range(8, 4096));
  gen->add_flag("--bimodal", gs_bimodal, "Hide the future curve and branch into two modes");

  // train
  Common tr;
  std::string tr_data, tr_kind;
  std::optional<int> tr_epochs;
  std::optional<double> tr_lr;
  bool tr_resume = false;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  add_common(train_cmd, tr, "Experiment JSON (kind, model, sampler, manifest, splits)");
  train_cmd->add_option("--data", tr_data, "Dataset manifest.jsonl");
  train_cmd->add_option("--kind", tr_kind, "idpoe, idpoe_no_equiv, explicit_diffusion or bc");
  train_cmd->add_option("--epochs", tr_epochs, "Override the epoch count");
  train_cmd->add_option("--lr", tr_lr, "Override the learning rate");
  train_cmd->add_flag("--resume", tr_resume, "Continue from out-dir/last.ckpt");

  // predict
  Common pr;
  std::string pr_ckpt, pr_data, pr_split = "in_context_test", pr_mode = "conditional";
  int pr_rotate = 0, pr_blur = 0, pr_limit = 0;
  bool pr_det = false, pr_inter = false;
  auto* predict_cmd = app.add_subcommand("predict", "Predict trajectories for a split");
  add_common(predict_cmd, pr, "Sampler JSON (or an experiment file)");
  predict_cmd->add_option("--checkpoint", pr_ckpt, "Model checkpoint")->required();
  predict_cmd->add_option("--data", pr_data, "Dataset manifest.jsonl")->required();
  predict_cmd->add_option("--split", pr_split, "Dataset split");
  predict_cmd->add_option("--mode", pr_mode, "conditional, naive or unconditional");
  predict_cmd->add_option("--rotate", pr_rotate, "Quarter turns applied to every clip")
      ->check(CLI::Range(0, 3));
  predict_cmd->add_option("--blur", pr_blur, "Blur severity 1..5 (0: none)")
      ->check(CLI::Range(0, 5));
  predict_cmd->add_option("--limit", pr_limit, "Only the first clips of the split");
  predict_cmd->add_flag("--deterministic", pr_det, "Drop the noise term of reverse steps");
  predict_cmd->add_flag("--record-intermediates", pr_inter, "Store every denoising step");

  // evaluate
  Common ev;
  std::vector<std::string> ev_preds, ev_logs;
  std::string ev_data, ev_split;
  std::optional<int> ev_rotate;
  int ev_overlays = 6;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score predictions and draw plots");
  eval_cmd->add_option("--predictions", ev_preds, "predictions.jsonl files")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", ev_data, "Dataset manifest.jsonl")->required();
  eval_cmd->add_option("--split", ev_split, "Split (default: from the predictions)");
  eval_cmd->add_option("--rotate", ev_rotate, "Quarter turns (default: from the predictions)")
      ->check(CLI::Range(0, 3));
  eval_cmd->add_option("--train-log", ev_logs, "train_log.jsonl files for the loss plot")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--overlays", ev_overlays, "Clips drawn in trajectories.svg");
  eval_cmd->add_option("--out-dir", ev.out_dir, "Output directory")->required();

  // check-equivariance
  Common eq;
  std::string eq_ckpt;
  int eq_samples = 100;
  double eq_tol = 1e-4;
  auto* eq_cmd = app.add_subcommand("check-equivariance", "Audit the noise model against C4");
  add_common(eq_cmd, eq, "Experiment JSON for a freshly initialized model");
  eq_cmd->add_option("--checkpoint", eq_ckpt, "Joint model checkpoint");
  eq_cmd->add_option("--samples", eq_samples, "Random inputs per group element");
  eq_cmd->add_option("--tolerance", eq_tol, "Maximum relative error");

  // augment-with-synthetic
  Common au;
  std::string au_ckpt, au_data;
  int au_count = 0;
  bool au_real = false, au_det = false;
  auto* aug_cmd = app.add_subcommand("augment-with-synthetic",
                                     "Write a dataset of unconditionally sampled pairs");
  add_common(aug_cmd, au, "Sampler JSON (or an experiment file)");
  aug_cmd->add_option("--checkpoint", au_ckpt, "Joint model checkpoint")->required();
  aug_cmd->add_option("--data", au_data, "Real dataset manifest.jsonl")->required();
  aug_cmd->add_option("--count", au_count, "Synthetic pairs to draw")->required();
  aug_cmd->add_flag("--include-real", au_real, "Add the real train clips");
  aug_cmd->add_flag("--deterministic", au_det, "Drop the noise term of reverse steps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    check_device();
    if (gen->parsed()) {
      GenSynthOptions o{gs.config, gs.out_dir, gs.seed, gs_size, gs_bimodal};
      const auto r = gen_synth(o);
      std::printf("wrote %zu clips (%dx%d, L=%d, N=%d) to %s\n", r.dataset.entries.size(),
                  r.dataset.H, r.dataset.W, r.dataset.L, r.dataset.N,
                  (fs::path(gs.out_dir) / synthbench::kManifestName).c_str());
      if (r.audit) {
        std::printf("bimodal audit: %s\n", nlohmann::json(*r.audit).dump().c_str());
        if (!r.audit->passed()) {
          std::fprintf(stderr, "error: bimodal audit failed\n");
          return kExitData;
        }
      }
    } else if (train_cmd->parsed()) {
      auto c = load_experiment(tr.config);
      if (!tr_data.empty()) c.manifest = tr_data;
      if (!tr_kind.empty()) c.kind = tr_kind;
      if (!tr.out_dir.empty()) c.out_dir = tr.out_dir;
      if (tr_epochs) c.model.optimizer.epochs = *tr_epochs;
      if (tr_lr) c.model.optimizer.lr = *tr_lr;
      c.seed = resolve_seed(tr.seed, c.seed);
      const auto r = train(c, tr_resume, print_epoch);
      std::printf("best val loss %.6f at epoch %d\nbest checkpoint %s\n", r.best_val_loss,
                  r.best_epoch, r.best_checkpoint.c_str());
    } else if (predict_cmd->parsed()) {
      PredictOptions o;
      o.checkpoint = pr_ckpt;
      o.manifest = pr_data;
      o.split = pr_split;
      o.mode = sample_mode_from_string(pr_mode);
      o.sampler = sampler_from(pr.config);
      o.sampler.seed = resolve_seed(pr.seed, o.sampler.seed);
      if (pr_det) o.sampler.deterministic = true;
      if (pr_inter) o.sampler.record_intermediates = true;
      o.rotate_turns = pr_rotate;
      o.blur = pr_blur;
      o.limit = pr_limit;
      o.out_dir = pr.out_dir;
      const auto r = predict(o);
      std::printf("%s: %zu predictions -> %s\n", r.model_kind.c_str(), r.records.size(),
                  r.records_path.c_str());
    } else if (eval_cmd->parsed()) {
      EvaluateOptions o;
      for (const auto& p : ev_preds) o.predictions.emplace_back(p);
      for (const auto& p : ev_logs) o.train_logs.emplace_back(p);
      o.manifest = ev_data;
      o.split = ev_split;
      o.rotate_turns = ev_rotate;
      o.out_dir = ev.out_dir;
      o.overlay_clips = ev_overlays;
      const auto r = evaluate(o);
      std::cout << r.table;
      for (const auto& rep : r.reports) {
        for (const auto& c : rep.clips) {
          if (!c.ok()) std::cerr << "warning: " << c.clip_id << ": " << c.error << "\n";
        }
      }
    } else if (eq_cmd->parsed()) {
      if (eq_ckpt.empty() == eq.config.empty()) {
        throw ConfigError("check-equivariance needs exactly one of --checkpoint and --config");
      }
      EquivarianceOptions o{eq_ckpt, eq.config, eq_samples, eq_tol, eq.seed, eq.out_dir};
      const auto r = check_equivariance(o);
      std::cout << to_json(r).dump(2) << "\n";
    } else if (aug_cmd->parsed()) {
      AugmentOptions o;
      o.checkpoint = au_ckpt;
      o.manifest = au_data;
      o.count = au_count;
      o.include_real = au_real;
      o.sampler = sampler_from(au.config);
      o.sampler.seed = resolve_seed(au.seed, o.sampler.seed);
      if (au_det) o.sampler.deterministic = true;
      o.out_dir = au.out_dir;
      const auto ds = augment_with_synthetic(o);
      std::printf("wrote %zu clips to %s\n", ds.entries.size(),
                  (fs::path(au.out_dir) / synthbench::kManifestName).c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  }
  return kExitOk;
}
