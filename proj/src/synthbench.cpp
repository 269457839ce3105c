// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#include "idpoe/synthbench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "idpoe/config_io.hpp"
#include "idpoe/image_io.hpp"
#include "idpoe/rng.hpp"

namespace idpoe::synthbench {
namespace {

namespace fs = std::filesystem;

// Platform-independent uniform draws on top of the standard engine.
class Uniform {
 public:
  explicit Uniform(uint64_t seed) : engine_(seed) {}
  double operator()() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double operator()(double lo, double hi) { return lo + (hi - lo) * (*this)(); }
  uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

Rgb random_color(Uniform& u, double lo, double hi) {
  return {u(lo, hi), u(lo, hi), u(lo, hi)};
}

double color_distance(const Rgb& a, const Rgb& b) {
  return std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) + std::abs(a[2] - b[2]);
}

double center_of(int size) { return (size - 1) / 2.0; }

Vec2 bezier(const std::array<Vec2, 4>& p, double u) {
  const double v = 1.0 - u;
  const double c0 = v * v * v;
  const double c1 = 3.0 * v * v * u;
  const double c2 = 3.0 * v * u * u;
  const double c3 = u * u * u;
  return {c0 * p[0].x + c1 * p[1].x + c2 * p[2].x + c3 * p[3].x,
          c0 * p[0].y + c1 * p[1].y + c2 * p[2].y + c3 * p[3].y};
}

double seg_length(const Vec2& a, const Vec2& b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  return std::sqrt(dx * dx + dy * dy);
}

std::vector<Vec2> dense_curve(const SceneSpec& spec, const SceneConfig& config) {
  const int pieces = std::max(64, 4 * config.size);
  std::vector<Vec2> pts(static_cast<std::size_t>(pieces) + 1);
  for (int i = 0; i <= pieces; ++i) {
    pts[i] = bezier(spec.control_points, static_cast<double>(i) / pieces);
  }
  return pts;
}

std::vector<double> cumulative(const std::vector<Vec2>& pts) {
  std::vector<double> cum(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    cum[i] = cum[i - 1] + seg_length(pts[i - 1], pts[i]);
  }
  return cum;
}

std::vector<Vec2> resample(const std::vector<Vec2>& pts, double step) {
  const auto cum = cumulative(pts);
  std::vector<Vec2> out;
  std::size_t seg = 1;
  for (int j = 0;; ++j) {
    const double s = j * step;
    if (s > cum.back()) break;
    while (seg + 1 < pts.size() && cum[seg] < s) ++seg;
    const double len = cum[seg] - cum[seg - 1];
    const double f = len > 0.0 ? (s - cum[seg - 1]) / len : 0.0;
    const auto& a = pts[seg - 1];
    const auto& b = pts[seg];
    out.push_back({a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)});
  }
  return out;
}

// The two continuations of a bimodal scene: arcs turning by +turn and -turn
// per step from the marker's last heading.
std::array<std::vector<Vec2>, 2> branches(const std::vector<Vec2>& samples,
                                          int progress, const SceneConfig& config) {
  const auto& p = samples.at(progress);
  const auto& q = samples.at(progress - 1);
  const double len = seg_length(q, p);
  const Vec2 d0{(p.x - q.x) / len, (p.y - q.y) / len};
  const double c = std::cos(config.bimodal_turn);
  const double s = std::sin(config.bimodal_turn);
  std::array<std::vector<Vec2>, 2> out;
  for (int b = 0; b < 2; ++b) {
    const double sb = b == 0 ? s : -s;
    Vec2 d = d0;
    Vec2 cur = p;
    for (int i = 0; i < config.N; ++i) {
      d = {c * d.x - sb * d.y, sb * d.x + c * d.y};
      cur = {cur.x + config.step_px * d.x, cur.y + config.step_px * d.y};
      out[b].push_back(cur);
    }
  }
  return out;
}

// Polyline actually drawn as the lesion curve.
std::vector<std::vector<Vec2>> drawn_polylines(const SceneSpec& spec,
                                               const SceneConfig& config,
                                               const std::vector<Vec2>& samples) {
  auto dense = dense_curve(spec, config);
  if (!config.bimodal) return {dense};
  const auto cum = cumulative(dense);
  const double stop = spec.progress * config.step_px;
  std::vector<Vec2> head;
  for (std::size_t i = 0; i < dense.size() && cum[i] < stop; ++i) head.push_back(dense[i]);
  head.push_back(samples.at(spec.progress));
  std::vector<std::vector<Vec2>> out{head};
  for (auto& br : branches(samples, spec.progress, config)) {
    br.insert(br.begin(), samples.at(spec.progress));
    out.push_back(std::move(br));
  }
  return out;
}

bool inside(const Vec2& p, double limit) {
  return p.x >= -limit && p.x <= limit && p.y >= -limit && p.y <= limit;
}

// Empty when valid, otherwise a description of the violation.
std::string spec_violation(const SceneSpec& spec, const SceneConfig& config,
                           const std::vector<Vec2>& samples) {
  const double limit = center_of(config.size) - config.margin_px;
  if (limit <= 0.0) return "margin leaves no drawable area";
  if (spec.progress < std::max(1, config.L - 1)) return "progress leaves too few past frames";
  const int future = config.bimodal ? 0 : config.N;
  if (spec.progress + future >= static_cast<int>(samples.size())) {
    return "progress leaves fewer than N future waypoints";
  }
  for (const auto& line : drawn_polylines(spec, config, samples)) {
    for (const auto& p : line) {
      if (!inside(p, limit)) return "curve leaves the margin";
    }
  }
  return {};
}

void check_scene_config(const SceneConfig& c) {
  if (c.L < 1 || c.N < 1) throw ParameterError("scene needs L, N >= 1");
  if (c.size < 4) throw ParameterError("scene size must be at least 4");
  if (!(c.step_px > 0.0) || !(c.line_width > 0.0) || !(c.marker_radius > 0.0) ||
      !(c.margin_px >= 0.0)) {
    throw ParameterError("scene lengths must be positive");
  }
}

// Squared distance from p to segment ab.
double seg_dist2(const Vec2& p, const Vec2& a, const Vec2& b) {
  const double abx = b.x - a.x;
  const double aby = b.y - a.y;
  const double len2 = abx * abx + aby * aby;
  double t = 0.0;
  if (len2 > 0.0) {
    t = std::clamp(((p.x - a.x) * abx + (p.y - a.y) * aby) / len2, 0.0, 1.0);
  }
  const double qx = a.x + t * abx;
  const double qy = a.y + t * aby;
  const double dx = p.x - qx;
  const double dy = p.y - qy;
  return dx * dx + dy * dy;
}

double soft_box(double v, double half, double width) {
  const double e = std::max(std::abs(v) - half, 0.0);
  return std::exp(-e * e / (2.0 * width * width));
}

double marker_intensity(MarkerStyle style, double dx, double dy, double r) {
  switch (style) {
    case MarkerStyle::kDisc:
      return std::exp(-(dx * dx + dy * dy) / (2.0 * r * r));
    case MarkerStyle::kRing: {
      const double d = std::sqrt(dx * dx + dy * dy) - r;
      const double w = 0.45 * r;
      return std::exp(-d * d / (2.0 * w * w));
    }
    case MarkerStyle::kPlus: {
      const double w = 0.4 * r;
      const double arm_a = std::exp(-dx * dx / (2.0 * w * w)) * soft_box(dy, 1.5 * r, w);
      const double arm_b = std::exp(-dy * dy / (2.0 * w * w)) * soft_box(dx, 1.5 * r, w);
      return std::max(arm_a, arm_b);
    }
  }
  return 0.0;
}

double background_mix(const ContextProfile& prof, double x, double y, int size) {
  const double f = 2.0 * std::numbers::pi * prof.texture_freq / size;
  switch (prof.texture) {
    case TextureKind::kGrid:
      return 0.5 + 0.5 * std::cos(f * std::abs(x)) * std::cos(f * std::abs(y));
    case TextureKind::kRings:
      return 0.5 + 0.5 * std::cos(f * std::sqrt(x * x + y * y));
  }
  return 0.5;
}

uint8_t quantize(double v) {
  return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

template <typename Fn>
void parallel_for(int64_t count, Fn&& fn) {
  const auto workers = std::max<int64_t>(
      1, std::min<int64_t>(count, std::thread::hardware_concurrency()));
  std::atomic<int64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (int64_t i; (i = next.fetch_add(1)) < count;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int64_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::string clip_id_for(const std::string& split, int index) {
  std::ostringstream id;
  id << split << '_' << std::setw(5) << std::setfill('0') << index;
  return id.str();
}

}  // namespace

ContextProfile profile_from_id(int id) {
  if (id < 0) throw ParameterError("profile ids must be non-negative");
  Uniform u(mix_seed(0x5eed0f11e5ULL, static_cast<uint64_t>(id)));
  ContextProfile p;
  p.id = id;
  p.texture = (u.bits() & 1) ? TextureKind::kRings : TextureKind::kGrid;
  p.texture_freq = u(1.5, 4.0);
  p.background_a = random_color(u, 0.05, 0.45);
  p.background_b = random_color(u, 0.05, 0.45);
  for (;;) {
    p.curve_color = random_color(u, 0.4, 1.0);
    p.marker_color = random_color(u, 0.0, 1.0);
    if (color_distance(p.curve_color, p.marker_color) > 0.8 &&
        color_distance(p.marker_color, p.background_a) > 0.8 &&
        color_distance(p.marker_color, p.background_b) > 0.8) {
      break;
    }
  }
  p.marker = static_cast<MarkerStyle>(u.bits() % 3);
  return p;
}

SceneConfig SceneConfig::for_size(int size) {
  SceneConfig c;
  const double scale = size / 128.0;
  c.size = size;
  c.margin_px = std::max(8.0 * scale, 2.0);
  c.step_px = std::max(6.0 * scale, 1.25);
  c.line_width = std::max(1.5 * scale, 0.6);
  c.marker_radius = std::max(3.0 * scale, 1.0);
  return c;
}

void to_json(nlohmann::json& j, const SceneConfig& c) {
  j = {{"L", c.L},
       {"N", c.N},
       {"size", c.size},
       {"margin_px", c.margin_px},
       {"step_px", c.step_px},
       {"line_width", c.line_width},
       {"marker_radius", c.marker_radius},
       {"bimodal", c.bimodal},
       {"bimodal_turn", c.bimodal_turn}};
}

void from_json(const nlohmann::json& j, SceneConfig& c) {
  reject_unknown_keys(j, "scene",
                      {"L", "N", "size", "margin_px", "step_px", "line_width",
                       "marker_radius", "bimodal", "bimodal_turn"});
  if (j.contains("size")) c = SceneConfig::for_size(j.at("size").get<int>());
  read_optional(j, "L", c.L);
  read_optional(j, "N", c.N);
  read_optional(j, "margin_px", c.margin_px);
  read_optional(j, "step_px", c.step_px);
  read_optional(j, "line_width", c.line_width);
  read_optional(j, "marker_radius", c.marker_radius);
  read_optional(j, "bimodal", c.bimodal);
  read_optional(j, "bimodal_turn", c.bimodal_turn);
}

void to_json(nlohmann::json& j, const DatasetConfig& c) {
  j = {{"scene", c.scene},
       {"counts", c.counts},
       {"train_profiles", c.train_profiles},
       {"out_context_profiles", c.out_context_profiles},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, DatasetConfig& c) {
  reject_unknown_keys(j, "dataset",
                      {"scene", "counts", "train_profiles", "out_context_profiles",
                       "seed"});
  read_optional(j, "scene", c.scene);
  read_optional(j, "counts", c.counts);
  read_optional(j, "train_profiles", c.train_profiles);
  read_optional(j, "out_context_profiles", c.out_context_profiles);
  read_optional(j, "seed", c.seed);
}

SceneSpec sample_scene_spec(uint64_t seed, const ContextProfile& profile,
                            const SceneConfig& config) {
  check_scene_config(config);
  Uniform u(mix_seed(seed, 0x5ce9eULL));
  const double limit = center_of(config.size) - config.margin_px;
  if (limit <= 0.0) throw ValidationError("margin leaves no drawable area");
  const double needed = (config.L - 1 + config.N + 0.5) * config.step_px;
  for (int attempt = 0; attempt < 10000; ++attempt) {
    SceneSpec spec;
    spec.seed = seed;
    spec.profile = profile;
    const double length = needed * u(1.05, 1.5);
    const double leg = length / 3.0;
    Vec2 p{u(-limit, limit), u(-limit, limit)};
    double heading = u(0.0, 2.0 * std::numbers::pi);
    spec.control_points[0] = p;
    for (int k = 1; k < 4; ++k) {
      if (k > 1) heading += u(-1.2, 1.2);
      p = {p.x + leg * std::cos(heading), p.y + leg * std::sin(heading)};
      spec.control_points[k] = p;
    }
    const auto samples = curve_samples(spec, config);
    const int lo = std::max(1, config.L - 1);
    const int hi = static_cast<int>(samples.size()) - 1 - (config.bimodal ? 0 : config.N);
    if (hi < lo) continue;
    spec.progress = lo + static_cast<int>(u.bits() % static_cast<uint64_t>(hi - lo + 1));
    spec.branch = config.bimodal ? static_cast<int>(u.bits() & 1) : 0;
    if (spec_violation(spec, config, samples).empty()) return spec;
  }
  throw ValidationError("could not place a curve inside the margin");
}

std::vector<Vec2> curve_samples(const SceneSpec& spec, const SceneConfig& config) {
  return resample(dense_curve(spec, config), config.step_px);
}

Scene generate_scene(const SceneSpec& spec, const SceneConfig& config) {
  check_scene_config(config);
  const auto samples = curve_samples(spec, config);
  if (auto why = spec_violation(spec, config, samples); !why.empty()) {
    throw ValidationError("invalid scene spec (seed " + std::to_string(spec.seed) +
                          "): " + why);
  }
  const int S = config.size;
  const double c = center_of(S);
  const auto& prof = spec.profile;

  // Background with the curve composited in; shared by all frames.
  std::vector<double> base(static_cast<std::size_t>(S) * S * 3);
  std::vector<double> curve_alpha(static_cast<std::size_t>(S) * S, 0.0);
  const double w = config.line_width;
  const double reach = 4.0 * w;
  const auto lines = drawn_polylines(spec, config, samples);
  std::vector<double> best(static_cast<std::size_t>(S) * S, reach * reach);
  std::vector<bool> hit(best.size(), false);
  for (const auto& line : lines) {
    for (std::size_t i = 1; i < line.size(); ++i) {
      const auto& a = line[i - 1];
      const auto& b = line[i];
      const int col0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - reach + c)));
      const int col1 = std::min(S - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + reach + c)));
      const int row0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - reach + c)));
      const int row1 = std::min(S - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + reach + c)));
      for (int row = row0; row <= row1; ++row) {
        for (int col = col0; col <= col1; ++col) {
          const double d2 = seg_dist2({col - c, row - c}, a, b);
          const auto k = static_cast<std::size_t>(row) * S + col;
          if (d2 <= best[k]) {
            best[k] = d2;
            hit[k] = true;
          }
        }
      }
    }
  }
  for (int row = 0; row < S; ++row) {
    for (int col = 0; col < S; ++col) {
      const auto k = static_cast<std::size_t>(row) * S + col;
      const double t = background_mix(prof, col - c, row - c, S);
      const double alpha = hit[k] ? 0.85 * std::exp(-best[k] / (2.0 * w * w)) : 0.0;
      curve_alpha[k] = alpha;
      for (int ch = 0; ch < 3; ++ch) {
        const double bg = prof.background_a[ch] * (1.0 - t) + prof.background_b[ch] * t;
        base[3 * k + ch] = bg * (1.0 - alpha) + prof.curve_color[ch] * alpha;
      }
    }
  }

  Scene scene;
  scene.frames = torch::empty({config.L, S, S, 3}, torch::kUInt8);
  auto* out = scene.frames.data_ptr<uint8_t>();
  for (int f = 0; f < config.L; ++f) {
    const auto& m = samples.at(spec.progress - (config.L - 1) + f);
    for (int row = 0; row < S; ++row) {
      for (int col = 0; col < S; ++col) {
        const auto k = static_cast<std::size_t>(row) * S + col;
        const double im =
            marker_intensity(prof.marker, (col - c) - m.x, (row - c) - m.y,
                             config.marker_radius);
        for (int ch = 0; ch < 3; ++ch) {
          const double v = base[3 * k + ch] * (1.0 - im) + prof.marker_color[ch] * im;
          out[(static_cast<std::size_t>(f) * S * S + k) * 3 + ch] = quantize(v);
        }
      }
    }
  }

  auto to_px = [c](const std::vector<Vec2>& pts) {
    PixelTrajectory px;
    for (const auto& p : pts) px.push_back({p.x + c, p.y + c});
    return px;
  };
  if (config.bimodal) {
    auto br = branches(samples, spec.progress, config);
    scene.modes = {to_px(br[0]), to_px(br[1])};
    scene.trajectory_px = scene.modes.at(spec.branch);
  } else {
    std::vector<Vec2> future(samples.begin() + spec.progress + 1,
                             samples.begin() + spec.progress + 1 + config.N);
    scene.trajectory_px = to_px(future);
  }
  return scene;
}

SceneSpec rotate_spec(const SceneSpec& spec, int turns) {
  turns = ((turns % 4) + 4) % 4;
  SceneSpec out = spec;
  for (auto& p : out.control_points) {
    for (int k = 0; k < turns; ++k) p = {-p.y, p.x};
  }
  return out;
}

torch::Tensor blur_corrupt_channels(const torch::Tensor& states, int severity) {
  if (severity < 1 || severity > 5) {
    throw ParameterError("blur severity must lie in 1..5, got " +
                         std::to_string(severity));
  }
  const int r = severity - 1;
  if (r == 0) return states.clone();
  if (states.dim() < 2) throw ShapeError("blur needs at least (H, W)");
  std::vector<double> taps(2 * r + 1);
  for (int k = 0; k <= 2 * r; ++k) {
    taps[k] = std::tgamma(2 * r + 1) / (std::tgamma(k + 1) * std::tgamma(2 * r - k + 1));
  }
  auto kernel = torch::tensor(taps, torch::kFloat64);
  kernel = (kernel / kernel.sum()).to(states.scalar_type());
  const auto sizes = states.sizes().vec();
  const auto H = sizes[sizes.size() - 2];
  const auto W = sizes[sizes.size() - 1];
  auto x = states.reshape({-1, 1, H, W});
  namespace F = torch::nn::functional;
  x = F::pad(x, F::PadFuncOptions({r, r, r, r}).mode(torch::kCircular));
  x = F::conv2d(x, kernel.view({1, 1, 1, -1}));
  x = F::conv2d(x, kernel.view({1, 1, -1, 1}));
  return x.reshape(sizes);
}

VideoClipState blur_corrupt(const VideoClipState& clip, int severity) {
  return VideoClipState::from_channels_first(
      blur_corrupt_channels(clip.channels_first(), severity));
}

nlohmann::json entry_to_json(const DatasetEntry& e) {
  nlohmann::json traj = nlohmann::json::array();
  for (const auto& p : e.trajectory_px) traj.push_back({p.x, p.y});
  return {{"clip_id", e.clip_id},       {"frames", e.frames},
          {"trajectory_px", traj},      {"split", e.split},
          {"scene_seed", e.scene_seed}, {"profile_id", e.profile_id}};
}

std::vector<const DatasetEntry*> Dataset::split(const std::string& name) const {
  std::vector<const DatasetEntry*> out;
  for (const auto& e : entries) {
    if (e.split == name) out.push_back(&e);
  }
  std::sort(out.begin(), out.end(),
            [](const auto* a, const auto* b) { return a->clip_id < b->clip_id; });
  return out;
}

VideoClipState Dataset::state(const DatasetEntry& e) const {
  return normalize_frames(e.raw, L, H, W);
}

TrajectoryAction Dataset::action(const DatasetEntry& e) const {
  return normalize_trajectory(e.trajectory_px, H, W);
}

TensorDataset Dataset::tensors(const std::string& split_name) const {
  TensorDataset out;
  std::vector<torch::Tensor> states;
  std::vector<torch::Tensor> actions;
  for (const auto* e : split(split_name)) {
    states.push_back(state(*e).channels_first());
    actions.push_back(action(*e).to_tensor());
    out.clip_ids.push_back(e->clip_id);
  }
  if (!states.empty()) {
    out.states = torch::stack(states);
    out.actions = torch::stack(actions);
  }
  return out;
}

namespace {

std::vector<std::string> write_entry_frames(const fs::path& root, DatasetEntry& e) {
  const auto rel_dir = fs::path(e.split) / e.clip_id;
  fs::create_directories(root / rel_dir);
  e.frames.clear();
  std::vector<std::string> lines;
  for (int64_t f = 0; f < e.raw.size(0); ++f) {
    const auto rel = (rel_dir / ("frame_" + std::to_string(f) + ".ppm")).generic_string();
    write_ppm(root / rel, e.raw[f]);
    e.frames.push_back(rel);
    lines.push_back(sha256_file(root / rel) + "  " + rel);
  }
  return lines;
}

void write_index(const fs::path& root, nlohmann::json header,
                 const std::vector<DatasetEntry>& entries,
                 const std::vector<std::vector<std::string>>& frame_sums) {
  header["entry_count"] = entries.size();
  std::ostringstream manifest;
  manifest << header.dump() << '\n';
  for (const auto& e : entries) manifest << entry_to_json(e).dump() << '\n';
  write_text_atomic(root / kManifestName, manifest.str());

  std::ostringstream sums;
  for (const auto& lines : frame_sums) {
    for (const auto& l : lines) sums << l << '\n';
  }
  sums << sha256_file(root / kManifestName) << "  " << kManifestName << '\n';
  write_text_atomic(root / kChecksumName, sums.str());
}

void check_fresh_root(const fs::path& root) {
  if (fs::exists(root / kManifestName)) {
    throw ConfigError("output directory " + root.string() +
                      " already holds a dataset manifest");
  }
  fs::create_directories(root);
}

}  // namespace

void write_dataset(const fs::path& root, const nlohmann::json& header,
                   std::vector<DatasetEntry>& entries) {
  check_fresh_root(root);
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (!ids.insert(e.clip_id).second) {
      throw ConfigError("duplicate clip id " + e.clip_id);
    }
  }
  std::vector<std::vector<std::string>> sums(entries.size());
  parallel_for(static_cast<int64_t>(entries.size()),
               [&](int64_t i) { sums[i] = write_entry_frames(root, entries[i]); });
  write_index(root, header, entries, sums);
}

Dataset generate_dataset(const DatasetConfig& config, const fs::path& root) {
  check_scene_config(config.scene);
  std::set<int> train_set(config.train_profiles.begin(), config.train_profiles.end());
  for (int p : config.out_context_profiles) {
    if (train_set.count(p)) {
      throw ConfigError("profile " + std::to_string(p) +
                        " is both a train and an out-of-context profile");
    }
  }
  for (const auto& [name, count] : config.counts) {
    if (std::find(split_names().begin(), split_names().end(), name) ==
        split_names().end()) {
      throw ConfigError("unknown split '" + name + "'");
    }
    if (count < 0) throw ConfigError("negative count for split " + name);
    const auto& pool =
        name == "out_context_test" ? config.out_context_profiles : config.train_profiles;
    if (count > 0 && pool.empty()) {
      throw ConfigError("split " + name + " needs at least one profile");
    }
  }
  check_fresh_root(root);

  Dataset ds;
  ds.root = root;
  ds.L = config.scene.L;
  ds.N = config.scene.N;
  ds.H = ds.W = config.scene.size;
  ds.header = {{"format", "idpoe-dataset"},
               {"format_version", kManifestVersion},
               {"config",
                {{"L", ds.L},
                 {"N", ds.N},
                 {"H", ds.H},
                 {"W", ds.W},
                 {"fps", 2.0},
                 {"fps_semantics",
                  "frames are consecutive samples at fps; waypoint i lies i+1 frame "
                  "intervals after the last frame"}}},
               {"generator", config}};

  uint64_t global = 0;
  for (const auto& split : split_names()) {
    auto it = config.counts.find(split);
    const int count = it == config.counts.end() ? 0 : it->second;
    const auto& pool =
        split == "out_context_test" ? config.out_context_profiles : config.train_profiles;
    for (int i = 0; i < count; ++i, ++global) {
      DatasetEntry e;
      e.clip_id = clip_id_for(split, i);
      e.split = split;
      e.scene_seed = mix_seed(config.seed, global);
      e.profile_id = pool[e.scene_seed % pool.size()];
      ds.entries.push_back(std::move(e));
    }
  }

  std::vector<std::vector<std::string>> sums(ds.entries.size());
  parallel_for(static_cast<int64_t>(ds.entries.size()), [&](int64_t i) {
    auto& e = ds.entries[i];
    const auto spec =
        sample_scene_spec(e.scene_seed, profile_from_id(e.profile_id), config.scene);
    auto scene = generate_scene(spec, config.scene);
    e.raw = scene.frames;
    e.trajectory_px = scene.trajectory_px;
    sums[i] = write_entry_frames(root, e);
  });
  write_index(root, ds.header, ds.entries, sums);
  ds.header["entry_count"] = ds.entries.size();
  return ds;
}

namespace {

std::map<std::string, std::string> read_checksums(const fs::path& path) {
  std::map<std::string, std::string> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    const auto sep = line.find("  ");
    if (sep == std::string::npos) continue;
    out[line.substr(sep + 2)] = line.substr(0, sep);
  }
  return out;
}

DatasetEntry parse_entry(const nlohmann::json& j) {
  DatasetEntry e;
  e.clip_id = j.at("clip_id").get<std::string>();
  e.frames = j.at("frames").get<std::vector<std::string>>();
  for (const auto& p : j.at("trajectory_px")) {
    if (!p.is_array() || p.size() != 2) {
      throw DataError("trajectory points must be [x, y] pairs");
    }
    e.trajectory_px.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  e.split = j.at("split").get<std::string>();
  e.scene_seed = j.at("scene_seed").get<uint64_t>();
  e.profile_id = j.value("profile_id", -1);
  return e;
}

}  // namespace

Dataset load_dataset(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open manifest " + manifest_path.string());
  Dataset ds;
  ds.root = manifest_path.parent_path();
  const auto where = manifest_path.string() + " line ";

  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw DataError(where + "1: missing header");
  ++line_no;
  try {
    ds.header = nlohmann::json::parse(line);
    if (ds.header.at("format_version").get<int>() != kManifestVersion) {
      throw DataError(where + "1: unsupported format_version");
    }
    const auto& cfg = ds.header.at("config");
    ds.L = cfg.at("L").get<int>();
    ds.N = cfg.at("N").get<int>();
    ds.H = cfg.at("H").get<int>();
    ds.W = cfg.at("W").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where + "1: malformed header: " + e.what());
  }
  const auto declared = ds.header.value("entry_count", static_cast<std::size_t>(0));

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      ds.entries.push_back(parse_entry(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw DataError(where + std::to_string(line_no) + ": malformed entry (" +
                      e.what() + ")");
    }
  }
  if (ds.entries.size() != declared) {
    std::ostringstream msg;
    msg << where << line_no + 1 << ": manifest truncated, header declares "
        << declared << " entries but " << ds.entries.size() << " were read";
    throw DataError(msg.str());
  }

  const auto sums = read_checksums(ds.root / kChecksumName);
  std::vector<std::string> problems(ds.entries.size());
  std::set<std::string> ids;
  for (const auto& e : ds.entries) {
    if (!ids.insert(e.clip_id).second) problems.push_back(e.clip_id + ": duplicate clip id");
  }
  parallel_for(static_cast<int64_t>(ds.entries.size()), [&](int64_t i) {
    auto& e = ds.entries[i];
    std::ostringstream err;
    if (std::find(split_names().begin(), split_names().end(), e.split) ==
        split_names().end()) {
      err << " unknown split '" << e.split << "';";
    }
    if (static_cast<int>(e.frames.size()) != ds.L) err << " expected " << ds.L << " frames;";
    if (static_cast<int>(e.trajectory_px.size()) != ds.N) {
      err << " expected " << ds.N << " waypoints;";
    }
    for (const auto& p : e.trajectory_px) {
      if (!(p.x >= 0 && p.x <= ds.W - 1 && p.y >= 0 && p.y <= ds.H - 1)) {
        err << " trajectory out of bounds;";
        break;
      }
    }
    std::vector<torch::Tensor> frames;
    for (const auto& rel : e.frames) {
      const auto path = ds.root / rel;
      if (!fs::exists(path)) {
        err << " missing file " << rel << ';';
        continue;
      }
      if (auto it = sums.find(rel); it != sums.end() && sha256_file(path) != it->second) {
        err << " checksum mismatch for " << rel << ';';
        continue;
      }
      try {
        auto img = read_ppm(path);
        if (img.size(0) != ds.H || img.size(1) != ds.W) {
          err << " frame " << rel << " has the wrong size;";
          continue;
        }
        frames.push_back(img);
      } catch (const DataError& ex) {
        err << ' ' << ex.what() << ';';
      }
    }
    if (err.str().empty() && static_cast<int>(frames.size()) == ds.L) {
      e.raw = torch::stack(frames);
    } else {
      problems[i] = e.clip_id + ":" + err.str();
    }
  });
  std::vector<std::string> failed;
  for (auto& p : problems) {
    if (!p.empty()) failed.push_back(std::move(p));
  }
  if (!failed.empty()) {
    std::ostringstream msg;
    msg << failed.size() << " invalid dataset entries in " << manifest_path.string();
    for (std::size_t i = 0; i < failed.size() && i < 20; ++i) msg << "\n  " << failed[i];
    if (failed.size() > 20) msg << "\n  ...";
    throw DataError(msg.str());
  }
  return ds;
}

std::vector<std::string> bounds_violations(const Dataset& dataset) {
  std::vector<std::string> out;
  for (const auto& e : dataset.entries) {
    for (const auto& p : e.trajectory_px) {
      if (!(p.x >= 0 && p.x <= dataset.W - 1 && p.y >= 0 && p.y <= dataset.H - 1)) {
        out.push_back(e.clip_id);
        break;
      }
    }
  }
  return out;
}

}  // namespace idpoe::synthbench
