// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "idpoe/equivariant/group.hpp"
#include "idpoe/image_io.hpp"
#include "idpoe/synthbench.hpp"

using namespace idpoe;
using namespace idpoe::synthbench;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("idpoe_synth_" + name);
  fs::remove_all(dir);
  return dir;
}

DatasetConfig small_config(int size, int per_split) {
  DatasetConfig c;
  c.scene = SceneConfig::for_size(size);
  for (auto& [name, count] : c.counts) count = per_split;
  c.seed = 11;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Scene, SameSeedIsBitIdentical) {
  auto cfg = SceneConfig::for_size(32);
  for (uint64_t seed : {1u, 2u, 99u}) {
    auto spec_a = sample_scene_spec(seed, profile_from_id(3), cfg);
    auto spec_b = sample_scene_spec(seed, profile_from_id(3), cfg);
    auto a = generate_scene(spec_a, cfg);
    auto b = generate_scene(spec_b, cfg);
    EXPECT_TRUE(a.frames.equal(b.frames));
    EXPECT_EQ(a.trajectory_px, b.trajectory_px);
  }
}

TEST(Scene, StraightCurveGivesCollinearEvenWaypoints) {
  SceneConfig cfg;  // 128 px
  SceneSpec spec;
  spec.profile = profile_from_id(0);
  spec.control_points = {Vec2{-45, 0}, Vec2{-15, 0}, Vec2{15, 0}, Vec2{45, 0}};
  spec.progress = 4;
  auto scene = generate_scene(spec, cfg);
  ASSERT_EQ(scene.trajectory_px.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_NEAR(scene.trajectory_px[i].y, 63.5, 1e-9);
    if (i > 0) {
      EXPECT_NEAR(scene.trajectory_px[i].x - scene.trajectory_px[i - 1].x,
                  cfg.step_px, 1e-6);
    }
  }
  EXPECT_NEAR(scene.trajectory_px[0].x, 63.5 - 45 + 5 * cfg.step_px, 1e-6);
}

TEST(Scene, QuarterTurnOfSpecRotatesFramesAndTrajectoryExactly) {
  for (int size : {16, 33, 128}) {
    auto cfg = SceneConfig::for_size(size);
    for (uint64_t seed = 0; seed < 12; ++seed) {
      auto spec = sample_scene_spec(seed, profile_from_id(static_cast<int>(seed % 10)), cfg);
      auto base = generate_scene(spec, cfg);
      auto base_chw = base.frames.permute({0, 3, 1, 2});
      auto gt = normalize_trajectory(base.trajectory_px, size, size).to_tensor();
      for (int turns = 1; turns < 4; ++turns) {
        auto rot = generate_scene(rotate_spec(spec, turns), cfg);
        auto expected = equivariant::rotate_grid(base_chw, turns);
        EXPECT_TRUE(rot.frames.permute({0, 3, 1, 2}).equal(expected))
            << "size " << size << " seed " << seed << " turns " << turns;
        auto rot_gt = normalize_trajectory(rot.trajectory_px, size, size).to_tensor();
        auto want = equivariant::rotate_action_tensor(gt, turns);
        EXPECT_LT((rot_gt - want).abs().max().item<double>(), 1e-6);
      }
    }
  }
}

TEST(Scene, CurveRespectsMarginAndFutureLength) {
  SceneConfig cfg;
  for (uint64_t seed = 0; seed < 200; ++seed) {
    auto spec = sample_scene_spec(seed, profile_from_id(1), cfg);
    auto samples = curve_samples(spec, cfg);
    ASSERT_GE(static_cast<int>(samples.size()), spec.progress + cfg.N + 1);
    auto scene = generate_scene(spec, cfg);
    for (const auto& p : scene.trajectory_px) {
      EXPECT_GE(p.x, 8.0);
      EXPECT_LE(p.x, 127.0 - 8.0);
      EXPECT_GE(p.y, 8.0);
      EXPECT_LE(p.y, 127.0 - 8.0);
    }
  }
}

TEST(Scene, ViolatingSpecIsRejected) {
  SceneConfig cfg;
  SceneSpec spec;
  spec.profile = profile_from_id(0);
  spec.control_points = {Vec2{-60, 0}, Vec2{-20, 0}, Vec2{20, 0}, Vec2{60, 0}};
  spec.progress = 4;
  EXPECT_THROW(generate_scene(spec, cfg), ValidationError);
  spec.control_points = {Vec2{-30, 0}, Vec2{-10, 0}, Vec2{10, 0}, Vec2{30, 0}};
  spec.progress = 8;  // 61 px of curve leaves only two future samples
  EXPECT_THROW(generate_scene(spec, cfg), ValidationError);
}

TEST(Scene, BimodalModesAreMirrorImagesChosenEvenly) {
  auto cfg = SceneConfig::for_size(32);
  cfg.bimodal = true;
  int first = 0;
  const int trials = 400;
  for (uint64_t seed = 0; seed < trials; ++seed) {
    auto spec = sample_scene_spec(seed, profile_from_id(2), cfg);
    auto scene = generate_scene(spec, cfg);
    ASSERT_EQ(scene.modes.size(), 2u);
    EXPECT_EQ(scene.trajectory_px, scene.modes[spec.branch]);
    // Reflect mode 1 across the marker's heading line; it must land on mode 0.
    auto samples = curve_samples(spec, cfg);
    const auto& p = samples[spec.progress];
    const auto& q = samples[spec.progress - 1];
    const double len = std::hypot(p.x - q.x, p.y - q.y);
    const double ux = (p.x - q.x) / len, uy = (p.y - q.y) / len;
    const double c = (cfg.size - 1) / 2.0;
    for (int i = 0; i < cfg.N; ++i) {
      const double rx = scene.modes[1][i].x - c - p.x;
      const double ry = scene.modes[1][i].y - c - p.y;
      const double along = rx * ux + ry * uy;
      const double mx = 2 * along * ux - rx + p.x + c;
      const double my = 2 * along * uy - ry + p.y + c;
      EXPECT_NEAR(mx, scene.modes[0][i].x, 1e-9);
      EXPECT_NEAR(my, scene.modes[0][i].y, 1e-9);
    }
    const auto& a = scene.modes[0].back();
    const auto& b = scene.modes[1].back();
    EXPECT_GT(std::hypot(a.x - b.x, a.y - b.y), 2.0 * cfg.step_px);
    first += spec.branch == 0;
  }
  // Binomial(400, 0.5): 4 standard deviations is 40.
  EXPECT_NEAR(first, trials / 2, 40);
}

TEST(Blur, SeverityOneIsIdentity) {
  auto gen = at::detail::createCPUGenerator(5);
  VideoClipState clip(torch::rand({3, 16, 16, 3}, gen) * 2 - 1);
  EXPECT_TRUE(blur_corrupt(clip, 1).frames().equal(clip.frames()));
  EXPECT_THROW(blur_corrupt(clip, 0), ParameterError);
  EXPECT_THROW(blur_corrupt(clip, 6), ParameterError);
}

TEST(Blur, PreservesEnergyAndRemovesHighFrequencies) {
  auto cfg = SceneConfig::for_size(32);
  auto scene = generate_scene(sample_scene_spec(4, profile_from_id(4), cfg), cfg);
  auto clip = normalize_frames(scene.frames, 3, 32, 32);
  auto shifted = VideoClipState(clip.frames() + 1.0);  // positive pixel mass
  const double mass = shifted.frames().sum().item<double>();

  // Spectral oracle: energy beyond a quarter of the Nyquist band.
  auto high_energy = [](const VideoClipState& c) {
    auto spec = torch::fft::fft2(c.channels_first().to(torch::kFloat64));
    auto f = torch::fft::fftfreq(32, torch::TensorOptions().dtype(torch::kFloat64));
    auto radius = torch::sqrt(f.view({-1, 1}).pow(2) + f.view({1, -1}).pow(2));
    auto mask = (radius > 0.125).to(torch::kFloat64);
    return (spec.abs().pow(2) * mask).sum().item<double>();
  };
  double previous = high_energy(shifted);
  for (int s = 2; s <= 5; ++s) {
    auto blurred = blur_corrupt(shifted, s);
    EXPECT_NEAR(blurred.frames().sum().item<double>() / mass, 1.0, 1e-3);
    const double e = high_energy(blurred);
    EXPECT_LT(e, previous) << "severity " << s;
    previous = e;
  }
}

TEST(ImageIo, PpmRoundTrip) {
  auto gen = at::detail::createCPUGenerator(2);
  auto img = torch::randint(0, 256, {7, 5, 3}, gen, torch::kLong).to(torch::kUInt8);
  auto path = fs::temp_directory_path() / "idpoe_rt.ppm";
  write_ppm(path, img);
  EXPECT_TRUE(read_ppm(path).equal(img));
  fs::remove(path);
  EXPECT_EQ(sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Dataset, GenerateLoadRoundTrip) {
  auto dir = fresh_dir("roundtrip");
  auto cfg = small_config(16, 7);
  cfg.counts["train"] = 20;
  auto ds = generate_dataset(cfg, dir);
  auto loaded = load_dataset(dir / kManifestName);
  EXPECT_EQ(loaded.entries.size(), 41u);
  EXPECT_EQ(loaded.header.at("entry_count"), 41);
  EXPECT_EQ(loaded.split("train").size(), 20u);
  for (const auto& split : split_names()) {
    EXPECT_EQ(loaded.split(split).size(), static_cast<std::size_t>(cfg.counts[split]));
  }
  for (std::size_t i = 0; i < ds.entries.size(); ++i) {
    EXPECT_EQ(ds.entries[i].clip_id, loaded.entries[i].clip_id);
    EXPECT_EQ(ds.entries[i].trajectory_px, loaded.entries[i].trajectory_px);
    EXPECT_TRUE(ds.entries[i].raw.equal(loaded.entries[i].raw));
    EXPECT_TRUE(fs::exists(dir / ds.entries[i].split / ds.entries[i].clip_id / "frame_2.ppm"));
  }
  auto t = loaded.tensors("train");
  EXPECT_EQ(t.states.sizes(), (std::vector<int64_t>{20, 9, 16, 16}));
  EXPECT_EQ(t.actions.sizes(), (std::vector<int64_t>{20, 12}));
  EXPECT_LE(t.actions.abs().max().item<double>(), 1.0);
  fs::remove_all(dir);
}

TEST(Dataset, RegenerationReproducesChecksums) {
  auto a = fresh_dir("regen_a");
  auto b = fresh_dir("regen_b");
  auto cfg = small_config(16, 5);
  generate_dataset(cfg, a);
  generate_dataset(cfg, b);
  EXPECT_EQ(slurp(a / kChecksumName), slurp(b / kChecksumName));
  EXPECT_EQ(slurp(a / kManifestName), slurp(b / kManifestName));
  EXPECT_THROW(generate_dataset(cfg, a), ConfigError);
  auto c = fresh_dir("regen_c");
  cfg.seed = 12;
  generate_dataset(cfg, c);
  EXPECT_NE(slurp(a / kChecksumName), slurp(c / kChecksumName));
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(c);
}

TEST(Dataset, OutOfContextUsesOnlyHeldOutProfiles) {
  auto dir = fresh_dir("profiles");
  auto cfg = small_config(16, 30);
  auto ds = generate_dataset(cfg, dir);
  std::set<int> train(cfg.train_profiles.begin(), cfg.train_profiles.end());
  std::set<int> seen_out;
  for (const auto& e : ds.entries) {
    if (e.split == "out_context_test") {
      EXPECT_EQ(train.count(e.profile_id), 0u) << e.clip_id;
      seen_out.insert(e.profile_id);
    } else {
      EXPECT_EQ(train.count(e.profile_id), 1u) << e.clip_id;
    }
  }
  EXPECT_GT(seen_out.size(), 1u);
  fs::remove_all(dir);

  cfg.out_context_profiles = {5, 6};
  EXPECT_THROW(generate_dataset(cfg, fresh_dir("overlap")), ConfigError);
}

TEST(Dataset, TruncatedManifestNamesTheLine) {
  auto dir = fresh_dir("truncated");
  generate_dataset(small_config(16, 3), dir);
  auto text = slurp(dir / kManifestName);
  // Cut in the middle of the last entry (line 13).
  {
    std::ofstream out(dir / kManifestName, std::ios::binary | std::ios::trunc);
    out << text.substr(0, text.size() - 40);
  }
  try {
    load_dataset(dir / kManifestName);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 13"), std::string::npos) << e.what();
  }
  // Drop the last entry entirely.
  {
    std::ofstream out(dir / kManifestName, std::ios::binary | std::ios::trunc);
    out << text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  }
  try {
    load_dataset(dir / kManifestName);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 13"), std::string::npos) << e.what();
  }
  fs::remove_all(dir);
}

TEST(Dataset, DamagedEntriesAreReportedById) {
  auto dir = fresh_dir("damaged");
  auto ds = generate_dataset(small_config(16, 3), dir);
  const auto& victim = ds.entries[1];
  {
    std::ofstream out(dir / victim.frames[0], std::ios::binary | std::ios::app);
    out << 'x';
  }
  fs::remove(dir / ds.entries[4].frames[2]);
  try {
    load_dataset(dir / kManifestName);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(victim.clip_id + ": checksum mismatch"), std::string::npos) << msg;
    EXPECT_NE(msg.find(ds.entries[4].clip_id + ": missing file"), std::string::npos) << msg;
    EXPECT_NE(msg.find("2 invalid"), std::string::npos) << msg;
  }
  fs::remove_all(dir);
}

TEST(Dataset, OutOfBoundsTrajectoryIsReported) {
  auto dir = fresh_dir("bounds");
  auto ds = generate_dataset(small_config(16, 2), dir);
  auto text = slurp(dir / kManifestName);
  auto lines = std::vector<std::string>{};
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  auto entry = nlohmann::json::parse(lines[3]);
  entry["trajectory_px"][2][0] = 15.5;
  lines[3] = entry.dump();
  {
    std::ofstream out(dir / kManifestName, std::ios::binary | std::ios::trunc);
    for (const auto& l : lines) out << l << '\n';
  }
  try {
    load_dataset(dir / kManifestName);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(entry["clip_id"].get<std::string>() +
                                         ": trajectory out of bounds"),
              std::string::npos)
        << e.what();
  }
  fs::remove_all(dir);
}

TEST(Dataset, BoundsAuditMatchesBruteRescan) {
  auto dir = fresh_dir("audit");
  auto cfg = small_config(16, 0);
  cfg.counts["train"] = 1000;
  generate_dataset(cfg, dir);
  auto ds = load_dataset(dir / kManifestName);
  ASSERT_EQ(ds.entries.size(), 1000u);
  EXPECT_TRUE(bounds_violations(ds).empty());

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> coord(-3.0, 18.0);
  for (auto& e : ds.entries) {
    if (rng() % 7 == 0) e.trajectory_px[rng() % e.trajectory_px.size()].x = coord(rng);
  }
  std::vector<std::string> brute;
  for (const auto& e : ds.entries) {
    try {
      (void)normalize_trajectory(e.trajectory_px, 16, 16);
    } catch (const ValidationError&) {
      brute.push_back(e.clip_id);
    }
  }
  EXPECT_FALSE(brute.empty());
  EXPECT_EQ(bounds_violations(ds), brute);
  fs::remove_all(dir);
}
