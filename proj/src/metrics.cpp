// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#include "idpoe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "idpoe/image_io.hpp"

namespace idpoe {
namespace {

double dist(const Vec2& a, const Vec2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

void check_pair(const PixelTrajectory& pred, const PixelTrajectory& gt) {
  if (pred.empty() || gt.empty()) throw ShapeError("trajectories must be non-empty");
  if (pred.size() != gt.size()) {
    throw ShapeError("trajectory lengths differ (" + std::to_string(pred.size()) +
                     " vs " + std::to_string(gt.size()) + ")");
  }
}

nlohmann::json points_json(const PixelTrajectory& pts) {
  auto out = nlohmann::json::array();
  for (const auto& p : pts) out.push_back({p.x, p.y});
  return out;
}

PixelTrajectory points_from_json(const nlohmann::json& j) {
  PixelTrajectory out;
  for (const auto& p : j) out.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return out;
}

MeanStd mean_std(const std::vector<double>& v) {
  if (v.empty()) return {};
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - mean) * (x - mean);
  return {mean, std::sqrt(sq / static_cast<double>(v.size()))};
}

ClipMetrics score(const std::string& id, const PixelTrajectory& pred,
                  const PixelTrajectory& gt) {
  ClipMetrics m;
  m.clip_id = id;
  try {
    m.ade = ade(pred, gt);
    m.fde = fde(pred, gt);
    m.fd = frechet(pred, gt);
    if (!std::isfinite(m.ade) || !std::isfinite(m.fde) || !std::isfinite(m.fd)) {
      m.error = "non-finite metric";
    }
  } catch (const Error& e) {
    m.error = e.what();
  }
  return m;
}

PixelTrajectory to_pixels(const torch::Tensor& action, int64_t H, int64_t W) {
  return denormalize_trajectory(TrajectoryAction::from_tensor(action), H, W);
}

}  // namespace

double ade(const PixelTrajectory& pred, const PixelTrajectory& gt) {
  check_pair(pred, gt);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += dist(pred[i], gt[i]);
  return sum / static_cast<double>(pred.size());
}

double fde(const PixelTrajectory& pred, const PixelTrajectory& gt) {
  check_pair(pred, gt);
  return dist(pred.back(), gt.back());
}

double frechet(const PixelTrajectory& p, const PixelTrajectory& q) {
  if (p.empty() || q.empty()) throw ShapeError("Frechet distance needs non-empty polylines");
  const std::size_t n = p.size();
  const std::size_t m = q.size();
  std::vector<double> ca(n * m);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return ca[i * m + j]; };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = dist(p[i], q[j]);
      if (i == 0 && j == 0) {
        at(i, j) = d;
      } else if (i == 0) {
        at(i, j) = std::max(at(0, j - 1), d);
      } else if (j == 0) {
        at(i, j) = std::max(at(i - 1, 0), d);
      } else {
        at(i, j) = std::max(std::min({at(i - 1, j), at(i - 1, j - 1), at(i, j - 1)}), d);
      }
    }
  }
  return at(n - 1, m - 1);
}

double ade(const TrajectoryAction& pred, const TrajectoryAction& gt, int64_t H, int64_t W) {
  return ade(denormalize_trajectory(pred, H, W), denormalize_trajectory(gt, H, W));
}

double fde(const TrajectoryAction& pred, const TrajectoryAction& gt, int64_t H, int64_t W) {
  return fde(denormalize_trajectory(pred, H, W), denormalize_trajectory(gt, H, W));
}

double frechet(const TrajectoryAction& pred, const TrajectoryAction& gt, int64_t H,
               int64_t W) {
  return frechet(denormalize_trajectory(pred, H, W), denormalize_trajectory(gt, H, W));
}

void to_json(nlohmann::json& j, const PredictionRecord& r) {
  j = {{"clip_id", r.clip_id}, {"points_px", points_json(r.points_px)}};
  if (!r.intermediates.empty()) {
    auto inter = nlohmann::json::array();
    for (const auto& step : r.intermediates) inter.push_back(points_json(step));
    j["intermediates"] = inter;
  }
}

void from_json(const nlohmann::json& j, PredictionRecord& r) {
  r.clip_id = j.at("clip_id").get<std::string>();
  r.points_px = points_from_json(j.at("points_px"));
  r.intermediates.clear();
  if (auto it = j.find("intermediates"); it != j.end()) {
    for (const auto& step : *it) r.intermediates.push_back(points_from_json(step));
  }
}

void write_predictions(const std::filesystem::path& path,
                       const std::vector<PredictionRecord>& records) {
  std::ostringstream out;
  for (const auto& r : records) out << nlohmann::json(r).dump() << '\n';
  write_text_atomic(path, out.str());
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open predictions " + path.string());
  std::vector<PredictionRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<PredictionRecord>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + " line " + std::to_string(line_no) +
                      ": malformed prediction record (" + e.what() + ")");
    }
  }
  return out;
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
  auto clips = nlohmann::json::array();
  for (const auto& c : r.clips) {
    nlohmann::json rec{{"clip_id", c.clip_id}};
    if (c.ok()) {
      rec["ade"] = c.ade;
      rec["fde"] = c.fde;
      rec["fd"] = c.fd;
    } else {
      rec["error"] = c.error;
    }
    clips.push_back(rec);
  }
  auto ms = [](const MeanStd& m) { return nlohmann::json{{"mean", m.mean}, {"std", m.std}}; };
  j = {{"split", r.split},
       {"model_kind", r.model_kind},
       {"aggregate",
        {{"count", r.count},
         {"failed", r.failed},
         {"ade", ms(r.ade)},
         {"fde", ms(r.fde)},
         {"fd", ms(r.fd)}}},
       {"clips", clips}};
}

void from_json(const nlohmann::json& j, MetricsReport& r) {
  r.split = j.value("split", "");
  r.model_kind = j.value("model_kind", "");
  r.clips.clear();
  for (const auto& c : j.at("clips")) {
    ClipMetrics m;
    m.clip_id = c.at("clip_id").get<std::string>();
    if (c.contains("error")) {
      m.error = c.at("error").get<std::string>();
    } else {
      m.ade = c.at("ade").get<double>();
      m.fde = c.at("fde").get<double>();
      m.fd = c.at("fd").get<double>();
    }
    r.clips.push_back(m);
  }
  const auto& agg = j.at("aggregate");
  r.count = agg.at("count").get<int64_t>();
  r.failed = agg.at("failed").get<int64_t>();
  auto ms = [](const nlohmann::json& m) {
    return MeanStd{m.at("mean").get<double>(), m.at("std").get<double>()};
  };
  r.ade = ms(agg.at("ade"));
  r.fde = ms(agg.at("fde"));
  r.fd = ms(agg.at("fd"));
}

MetricsReport aggregate(std::vector<ClipMetrics> clips, std::string split,
                        std::string model_kind) {
  std::sort(clips.begin(), clips.end(),
            [](const auto& a, const auto& b) { return a.clip_id < b.clip_id; });
  MetricsReport r;
  r.split = std::move(split);
  r.model_kind = std::move(model_kind);
  std::vector<double> a, f, d;
  for (const auto& c : clips) {
    if (!c.ok()) {
      ++r.failed;
      continue;
    }
    a.push_back(c.ade);
    f.push_back(c.fde);
    d.push_back(c.fd);
  }
  r.count = static_cast<int64_t>(a.size());
  r.ade = mean_std(a);
  r.fde = mean_std(f);
  r.fd = mean_std(d);
  r.clips = std::move(clips);
  return r;
}

MetricsReport evaluate_records(const std::vector<PredictionRecord>& predictions,
                               const std::vector<std::string>& clip_ids,
                               const std::vector<PixelTrajectory>& gt,
                               const std::string& split, const std::string& model_kind) {
  if (clip_ids.size() != gt.size()) throw ShapeError("clip ids and ground truth differ in count");
  std::map<std::string, const PredictionRecord*> by_id;
  for (const auto& p : predictions) by_id[p.clip_id] = &p;
  std::vector<std::string> missing;
  for (const auto& id : clip_ids) {
    if (!by_id.count(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << missing.size() << " clips have no prediction:";
    for (const auto& id : missing) msg << ' ' << id;
    throw DataError(msg.str());
  }
  std::vector<ClipMetrics> clips;
  for (std::size_t i = 0; i < clip_ids.size(); ++i) {
    clips.push_back(score(clip_ids[i], by_id.at(clip_ids[i])->points_px, gt[i]));
  }
  return aggregate(std::move(clips), split, model_kind);
}

MetricsReport evaluate(const BatchPredictor& predictor, const TensorDataset& data,
                       int64_t H, int64_t W, int batch_size, const std::string& split,
                       const std::string& model_kind,
                       std::vector<PredictionRecord>* predictions) {
  if (data.size() == 0) throw ParameterError("cannot evaluate an empty split");
  if (batch_size < 1) throw ParameterError("batch size must be positive");
  std::vector<ClipMetrics> clips;
  auto run_one = [&](int64_t i, const torch::Tensor& action) {
    const auto& id = data.clip_ids[i];
    auto gt = to_pixels(data.actions[i], H, W);
    try {
      auto pred = to_pixels(action, H, W);
      clips.push_back(score(id, pred, gt));
      if (predictions) predictions->push_back({id, pred, {}});
    } catch (const std::exception& e) {
      clips.push_back({id, 0, 0, 0, e.what()});
    }
  };
  for (int64_t start = 0; start < data.size(); start += batch_size) {
    const auto len = std::min<int64_t>(batch_size, data.size() - start);
    std::vector<std::string> ids(data.clip_ids.begin() + start,
                                 data.clip_ids.begin() + start + len);
    torch::Tensor out;
    try {
      out = predictor(data.states.narrow(0, start, len), ids);
      if (out.dim() != 2 || out.size(0) != len) throw ShapeError("predictor output has the wrong shape");
    } catch (const std::exception&) {
      out = torch::Tensor();
    }
    for (int64_t k = 0; k < len; ++k) {
      const auto i = start + k;
      if (out.defined()) {
        run_one(i, out[k]);
        continue;
      }
      try {
        auto single = predictor(data.states.narrow(0, i, 1), {data.clip_ids[i]});
        run_one(i, single[0]);
      } catch (const std::exception& e) {
        clips.push_back({data.clip_ids[i], 0, 0, 0, e.what()});
      }
    }
  }
  return aggregate(std::move(clips), split, model_kind);
}

void write_report(const std::filesystem::path& path, const MetricsReport& report) {
  write_text_atomic(path, nlohmann::json(report).dump(2) + "\n");
}

}  // namespace idpoe
