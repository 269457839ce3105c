// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "idpoe/metrics.hpp"

using namespace idpoe;

namespace {

PixelTrajectory random_polyline(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 127.0);
  PixelTrajectory out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({u(rng), u(rng)});
  return out;
}

// Exhaustive oracle: minimum over every monotone coupling path of the
// maximum pair distance along it.
double frechet_brute(const PixelTrajectory& p, const PixelTrajectory& q) {
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i,
                                                                    std::size_t j,
                                                                    double worst) {
    worst = std::max(worst, std::hypot(p[i].x - q[j].x, p[i].y - q[j].y));
    if (i + 1 == p.size() && j + 1 == q.size()) {
      best = std::min(best, worst);
      return;
    }
    if (i + 1 < p.size()) walk(i + 1, j, worst);
    if (j + 1 < q.size()) walk(i, j + 1, worst);
    if (i + 1 < p.size() && j + 1 < q.size()) walk(i + 1, j + 1, worst);
  };
  walk(0, 0, 0.0);
  return best;
}

PixelTrajectory rotate(const PixelTrajectory& t, double angle, const Vec2& c) {
  PixelTrajectory out;
  const double cs = std::cos(angle), sn = std::sin(angle);
  for (const auto& p : t) {
    const double x = p.x - c.x, y = p.y - c.y;
    out.push_back({c.x + cs * x - sn * y, c.y + sn * x + cs * y});
  }
  return out;
}

}  // namespace

TEST(Ade, Examples) {
  PixelTrajectory gt{{10, 10}, {20, 15}, {30, 40}, {1, 2}, {5, 5}, {60, 70}};
  EXPECT_EQ(ade(gt, gt), 0.0);
  auto shifted = gt;
  for (auto& p : shifted) p = {p.x + 3, p.y + 4};
  EXPECT_DOUBLE_EQ(ade(shifted, gt), 5.0);
  EXPECT_DOUBLE_EQ(fde(shifted, gt), 5.0);
  EXPECT_THROW(ade(gt, PixelTrajectory(gt.begin(), gt.end() - 1)), ShapeError);
  EXPECT_THROW(fde({}, {}), ShapeError);
}

TEST(Fde, OnlyFinalPointOffset) {
  PixelTrajectory gt{{0, 0}, {1, 1}, {2, 2}, {3, 3}, {4, 4}, {5, 5}};
  auto pred = gt;
  pred.back().y += 2.0;
  EXPECT_EQ(fde(gt, gt), 0.0);
  EXPECT_DOUBLE_EQ(fde(pred, gt), 2.0);
  EXPECT_DOUBLE_EQ(ade(pred, gt), 2.0 / 6.0);
}

TEST(AdeFde, MatchIndependentRecomputation) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = random_polyline(rng, 6);
    auto g = random_polyline(rng, 6);
    auto pt = torch::tensor({p[0].x, p[0].y, p[1].x, p[1].y, p[2].x, p[2].y, p[3].x, p[3].y,
                             p[4].x, p[4].y, p[5].x, p[5].y},
                            torch::kFloat64)
                  .view({6, 2});
    auto gtt = torch::tensor({g[0].x, g[0].y, g[1].x, g[1].y, g[2].x, g[2].y, g[3].x, g[3].y,
                              g[4].x, g[4].y, g[5].x, g[5].y},
                             torch::kFloat64)
                   .view({6, 2});
    auto per_point = (pt - gtt).pow(2).sum(1).sqrt();
    EXPECT_NEAR(ade(p, g), per_point.mean().item<double>(), 1e-9);
    EXPECT_NEAR(fde(p, g), per_point[5].item<double>(), 1e-9);
  }
}

TEST(Frechet, Examples) {
  PixelTrajectory p{{0, 0}, {1, 0}};
  PixelTrajectory q{{0, 1}, {1, 1}};
  EXPECT_DOUBLE_EQ(frechet(p, q), 1.0);
  EXPECT_EQ(frechet(p, p), 0.0);
  EXPECT_THROW(frechet({}, q), ShapeError);
}

TEST(Frechet, DynamicProgramMatchesExhaustiveCouplings) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = random_polyline(rng, 1 + rng() % 5);
    auto q = random_polyline(rng, 1 + rng() % 5);
    EXPECT_DOUBLE_EQ(frechet(p, q), frechet_brute(p, q));
    EXPECT_DOUBLE_EQ(frechet(p, q), frechet(q, p));
  }
  // Every length pair up to 5 at least once.
  for (std::size_t n = 1; n <= 5; ++n) {
    for (std::size_t m = 1; m <= 5; ++m) {
      auto p = random_polyline(rng, n);
      auto q = random_polyline(rng, m);
      EXPECT_DOUBLE_EQ(frechet(p, q), frechet_brute(p, q));
    }
  }
}

TEST(Metrics, OrderingBetweenMetrics) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    auto p = random_polyline(rng, 6);
    auto g = random_polyline(rng, 6);
    double max_pointwise = 0.0;
    for (int i = 0; i < 6; ++i) {
      max_pointwise = std::max(max_pointwise, std::hypot(p[i].x - g[i].x, p[i].y - g[i].y));
    }
    const double fd = frechet(p, g);
    EXPECT_LE(ade(p, g), max_pointwise + 1e-12);
    // The identity coupling bounds the Frechet distance from above and every
    // coupling contains the final pair.
    EXPECT_LE(fd, max_pointwise + 1e-12);
    EXPECT_LE(fde(p, g), fd + 1e-12);
  }
}

TEST(Metrics, RigidRotationInvariance) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> angle(0.0, 6.283185307179586);
  std::uniform_real_distribution<double> center(-50.0, 150.0);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = random_polyline(rng, 6);
    auto g = random_polyline(rng, 6);
    const double a = angle(rng);
    const Vec2 c{center(rng), center(rng)};
    auto rp = rotate(p, a, c);
    auto rg = rotate(g, a, c);
    EXPECT_NEAR(ade(rp, rg), ade(p, g), 1e-6 * ade(p, g));
    EXPECT_NEAR(fde(rp, rg), fde(p, g), 1e-6 * fde(p, g));
    EXPECT_NEAR(frechet(rp, rg), frechet(p, g), 1e-6 * frechet(p, g));
  }
}

TEST(Metrics, NormalizedOverloadsWorkInPixels) {
  TrajectoryAction a({{-1, -1}, {1, 1}});
  TrajectoryAction b({{-1, -1}, {1, -1}});
  EXPECT_DOUBLE_EQ(fde(a, b, 128, 128), 127.0);
  EXPECT_DOUBLE_EQ(ade(a, b, 128, 128), 63.5);
  EXPECT_DOUBLE_EQ(frechet(a, b, 128, 128), 127.0);
}

namespace {

TensorDataset toy_split(int n) {
  auto gen = at::detail::createCPUGenerator(6);
  TensorDataset d;
  d.states = torch::zeros({n, 9, 4, 4});
  d.actions = torch::rand({n, 12}, gen) * 1.8 - 0.9;
  for (int i = 0; i < n; ++i) d.clip_ids.push_back("clip_" + std::to_string(100 + i));
  return d;
}

}  // namespace

TEST(Evaluate, GroundTruthEchoGivesZeros) {
  auto data = toy_split(10);
  std::vector<int64_t> order;
  auto echo = [&](const torch::Tensor& s, const std::vector<std::string>& ids) {
    std::vector<torch::Tensor> rows;
    for (const auto& id : ids) {
      auto it = std::find(data.clip_ids.begin(), data.clip_ids.end(), id);
      rows.push_back(data.actions[it - data.clip_ids.begin()]);
    }
    (void)s;
    return torch::stack(rows);
  };
  auto report = evaluate(echo, data, 4, 4, 3, "val", "echo");
  EXPECT_EQ(report.count, 10);
  EXPECT_EQ(report.failed, 0);
  EXPECT_EQ(report.ade.mean, 0.0);
  EXPECT_EQ(report.fde.std, 0.0);
  EXPECT_EQ(report.fd.mean, 0.0);
}

TEST(Evaluate, SingleClipHasZeroStd) {
  auto data = toy_split(1);
  auto zero = [](const torch::Tensor& s, const std::vector<std::string>&) {
    return torch::zeros({s.size(0), 12});
  };
  auto report = evaluate(zero, data, 128, 128);
  EXPECT_EQ(report.count, 1);
  EXPECT_GT(report.ade.mean, 0.0);
  EXPECT_EQ(report.ade.std, 0.0);
}

TEST(Evaluate, AggregateMatchesPerClipRecompute) {
  auto data = toy_split(37);
  auto predictor = [](const torch::Tensor& s, const std::vector<std::string>& ids) {
    auto out = torch::zeros({s.size(0), 12});
    for (std::size_t i = 0; i < ids.size(); ++i) {
      out[i].fill_(static_cast<double>(ids[i].back() - '0') / 10.0 - 0.4);
    }
    return out;
  };
  std::vector<PredictionRecord> records;
  auto report = evaluate(predictor, data, 128, 128, 8, "test", "toy", &records);
  ASSERT_EQ(records.size(), 37u);
  double sum = 0.0, sq = 0.0;
  for (const auto& c : report.clips) sum += c.ade;
  const double mean = sum / 37.0;
  for (const auto& c : report.clips) sq += (c.ade - mean) * (c.ade - mean);
  EXPECT_NEAR(report.ade.mean, mean, 1e-12);
  EXPECT_NEAR(report.ade.std, std::sqrt(sq / 37.0), 1e-12);

  // Stored predictions score identically.
  std::vector<PixelTrajectory> gt;
  for (int i = 0; i < 37; ++i) {
    gt.push_back(denormalize_trajectory(TrajectoryAction::from_tensor(data.actions[i]), 128, 128));
  }
  auto again = evaluate_records(records, data.clip_ids, gt, "test", "toy");
  EXPECT_EQ(nlohmann::json(again), nlohmann::json(report));

  auto path = std::filesystem::temp_directory_path() / "idpoe_report.json";
  write_report(path, report);
  std::ifstream in(path);
  auto back = nlohmann::json::parse(in).get<MetricsReport>();
  EXPECT_EQ(nlohmann::json(back), nlohmann::json(report));
  std::filesystem::remove(path);
}

TEST(Evaluate, PredictorFailuresAreRecordedAndExcluded) {
  auto data = toy_split(6);
  auto flaky = [](const torch::Tensor& s, const std::vector<std::string>& ids) {
    for (const auto& id : ids) {
      if (id == "clip_103") throw NumericError("diverged");
    }
    return torch::zeros({s.size(0), 12});
  };
  auto report = evaluate(flaky, data, 128, 128, 4);
  EXPECT_EQ(report.count, 5);
  EXPECT_EQ(report.failed, 1);
  ASSERT_EQ(report.clips.size(), 6u);
  EXPECT_EQ(report.clips[3].clip_id, "clip_103");
  EXPECT_FALSE(report.clips[3].ok());
  EXPECT_NE(report.clips[3].error.find("diverged"), std::string::npos);
}

TEST(Evaluate, MissingPredictionsAreListed) {
  std::vector<PredictionRecord> preds{{"a", {{1, 1}}, {}}};
  try {
    evaluate_records(preds, {"a", "b", "c"}, {{{1, 1}}, {{1, 1}}, {{1, 1}}});
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("2 clips have no prediction: b c"), std::string::npos)
        << e.what();
  }
}

TEST(Predictions, JsonLinesRoundTrip) {
  std::vector<PredictionRecord> recs{{"x", {{1.5, 2.25}, {3, 4}}, {}},
                                     {"y", {{0, 0}}, {{{1, 1}}, {{0.5, 0.5}}}}};
  auto path = std::filesystem::temp_directory_path() / "idpoe_preds.jsonl";
  write_predictions(path, recs);
  auto back = read_predictions(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].points_px, recs[0].points_px);
  EXPECT_EQ(back[1].intermediates.size(), 2u);
  EXPECT_EQ(nlohmann::json(back[1]), nlohmann::json(recs[1]));
  std::filesystem::remove(path);
}
