#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "sphereloc/errors.hpp"
#include "sphereloc/eval.hpp"

using namespace sphereloc;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Map whose descriptor i is e_(i mod dim) scaled by (1 + i / dim), at x = 10 i.
PlaceMap line_map(int n, std::size_t dim = 8) {
  std::vector<PlaceEntry> entries(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    entries[i].pose = Pose::from_yaw(0.0, Vec3(10.0 * i, 0.0, 0.0));
    entries[i].descriptor.assign(dim, 0.0f);
    entries[i].descriptor[static_cast<std::size_t>(i) % dim] = 1.0f + static_cast<float>(i / dim);
  }
  return build_map(std::move(entries), dim);
}

PipelineConfig small_config() {
  PipelineConfig c;
  c.bandwidth = 16;
  c.eval_degrees = 8;
  c.taper.degrees = 8;
  c.training.epochs = 2;
  c.benchmark.boxes = 120;
  c.benchmark.extent = 120.0;
  c.benchmark.map_places = 40;
  c.benchmark.queries = 24;
  c.benchmark.image_scale = 0.05;
  c.benchmark.points_per_ring = 64;
  return c;
}

const Pipeline& small_pipeline() {
  static const Pipeline p(small_config());
  return p;
}

const Benchmark& small_bench() {
  static const Benchmark b = prepare_benchmark(small_pipeline());
  return b;
}

}  // namespace

TEST(Recall, QueriesEqualToStoredDescriptorsRecallOne) {
  const PlaceMap map = line_map(16);
  std::vector<std::vector<float>> queries;
  std::vector<Pose> poses;
  for (const auto& e : map.entries()) {
    queries.push_back(e.descriptor);
    poses.push_back(e.pose);
  }
  for (double r : recall_at_n(map, queries, poses, 5)) EXPECT_EQ(r, 1.0);
}

TEST(Recall, FarQueriesRecallZero) {
  const PlaceMap map = line_map(16);
  std::vector<std::vector<float>> queries(3, map.entry(0).descriptor);
  std::vector<Pose> poses(3, Pose::from_yaw(0.0, Vec3(0.0, 1000.0, 0.0)));
  for (double r : recall_at_n(map, queries, poses, 16)) EXPECT_EQ(r, 0.0);
}

TEST(Recall, MonotoneAndMatchesHandCount) {
  const PlaceMap map = line_map(4, 4);
  // Query 0 finds its place first; query 1 sits at place 3, retrieved third.
  std::vector<std::vector<std::uint32_t>> retrieved = {{0, 1, 2, 3}, {0, 1, 3, 2}};
  std::vector<Pose> poses = {map.entry(0).pose, map.entry(3).pose};
  const auto r = recall_from_retrievals(map, retrieved, poses, 4, 5.0);
  EXPECT_EQ(r, (std::vector<double>{0.5, 0.5, 1.0, 1.0}));

  std::mt19937 rng(3);
  std::normal_distribution<float> g;
  const PlaceMap big = line_map(64);
  std::vector<std::vector<float>> queries(50, std::vector<float>(8));
  std::vector<Pose> qp;
  for (auto& q : queries) {
    for (float& v : q) v = g(rng);
    qp.push_back(big.entry(static_cast<std::uint32_t>(rng() % 64)).pose);
  }
  const auto curve = recall_at_n(big, queries, qp, 64);
  for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_GE(curve[i], curve[i - 1]);
  EXPECT_EQ(curve.back(), 1.0);
}

TEST(Recall, InvalidArguments) {
  const PlaceMap map = line_map(4);
  std::vector<std::vector<float>> none;
  std::vector<Pose> no_poses;
  EXPECT_THROW(recall_at_n(map, none, no_poses, 1), InvalidParameter);
  std::vector<std::vector<float>> one(1, map.entry(0).descriptor);
  std::vector<Pose> pose(1, map.entry(0).pose);
  EXPECT_THROW(recall_at_n(map, one, pose, 0), InvalidParameter);
  EXPECT_THROW(recall_at_n(map, one, pose, 5), InvalidParameter);
}

TEST(Trajectory, SpacingFreedomAndDeterminism) {
  const World world = generate_world(5, 200, 150.0);
  const auto a = generate_trajectory(world, 300, 1.0, 9);
  const auto b = generate_trajectory(world, 300, 1.0, 9);
  ASSERT_EQ(a.size(), 300u);
  EXPECT_TRUE(a.front().translation.head<2>().isZero());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].translation, b[i].translation);
    EXPECT_DOUBLE_EQ(a[i].translation.z(), 1.0);
    EXPECT_LE(std::abs(a[i].translation.x()), 75.0 + 1e-9);
    if (i > 0) EXPECT_NEAR((a[i].translation - a[i - 1].translation).norm(), 1.0, 1e-9);
  }
  int free = 0;
  for (const auto& p : a) free += world.is_free(p.translation, 2.0);
  EXPECT_GE(free, 299);
  EXPECT_NE(generate_trajectory(world, 10, 1.0, 10)[5].translation, a[5].translation);
  EXPECT_THROW(generate_trajectory(world, 5, 0.0, 1), InvalidParameter);
}

TEST(Queries, StayNearTheirSource) {
  const World world = generate_world(5, 200, 150.0);
  const auto base = generate_trajectory(world, 100, 1.0, 9);
  const auto q = sample_queries(world, base, 200, 1.5, 0.05, 4);
  ASSERT_EQ(q.size(), 200u);
  for (const auto& s : q) {
    const Pose& src = base[s.source];
    EXPECT_LE((s.pose.translation - src.translation).norm(), 1.5 + 1e-12);
    EXPECT_LE(std::abs(std::remainder(yaw_of(s.pose) - yaw_of(src), 2 * std::numbers::pi)), 0.05 + 1e-12);
    EXPECT_TRUE(world.is_free(s.pose.translation, 1.0));
  }
  EXPECT_THROW(sample_queries(world, {}, 1, 1.0, 0.0, 1), InvalidParameter);
}

TEST(ContentHash, MatchesGitBlobHash) {
  EXPECT_EQ(content_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  EXPECT_EQ(content_hash("hello world\n"), "3b18e512dba79e4c8300dd08aeb37f8e728b8dad");
}

TEST(Benchmark, ShapesAndDeterminism) {
  const Benchmark& b = small_bench();
  EXPECT_EQ(b.map.size(), 40u);
  EXPECT_EQ(b.queries.size(), 24u);
  EXPECT_EQ(b.query_descriptors.size(), 24u);
  EXPECT_EQ(b.map_spectra.size(), 40u);
  EXPECT_FALSE(b.triplets.empty());
  const Benchmark again = prepare_benchmark(small_pipeline());
  for (std::size_t i = 0; i < b.map.size(); ++i) {
    EXPECT_EQ(again.map.entry(static_cast<std::uint32_t>(i)).descriptor,
              b.map.entry(static_cast<std::uint32_t>(i)).descriptor);
  }
}

TEST(Benchmark, RecallCsvIsByteIdenticalAcrossRuns) {
  const auto dir = std::filesystem::temp_directory_path() / "sphereloc_eval_test";
  const auto r1 = recall_experiment(small_bench(), 10);
  const auto r2 = recall_experiment(prepare_benchmark(small_pipeline()), 10);
  write_recall_csv(dir / "a.csv", r1);
  write_recall_csv(dir / "b.csv", r2);
  const std::string a = slurp(dir / "a.csv");
  EXPECT_EQ(a, slurp(dir / "b.csv"));
  EXPECT_EQ(a.substr(0, 9), "n,recall\n");
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 11);
  for (std::size_t i = 1; i < r1.recall.size(); ++i) EXPECT_GE(r1.recall[i], r1.recall[i - 1]);
  std::filesystem::remove_all(dir);
}

TEST(Benchmark, SelectionWithOneCandidateIsNeverWrong) {
  const std::vector<int> ks = {1, 3, 5};
  const auto report = selection_experiment(small_pipeline(), small_bench(), ks);
  ASSERT_EQ(report.selection.size(), 3u);
  EXPECT_EQ(report.selection[0].wrong_rate, 0.0);
  EXPECT_LE(report.selection[0].max_selected_distance, 5.0);
  for (const auto& s : report.selection) {
    EXPECT_GE(s.wrong_rate, 0.0);
    EXPECT_LE(s.wrong_rate, 1.0);
  }
  EXPECT_LE(report.selection[0].evaluated, report.selection[2].evaluated);
  const std::vector<int> too_big = {41};
  EXPECT_THROW(selection_experiment(small_pipeline(), small_bench(), too_big), InvalidParameter);
}

TEST(Benchmark, RotationByZeroMatchesUnrotatedMap) {
  PipelineConfig cfg = small_config();
  cfg.projection.lidar_only = true;
  const Pipeline pipeline(cfg);
  const Benchmark& b = small_bench();
  const auto scan_of = [&](std::size_t i) {
    return render_frame(b.world, b.map_poses[i], b.map_rig, i).scan;
  };
  std::vector<std::vector<float>> queries;
  for (const auto& q : b.queries) {
    const Frame f = render_frame(b.world, q.pose, b.query_rig, 99);
    queries.push_back(to_float_descriptor(pipeline.describe(pipeline.project(f.scan, b.query_rig.lidar_extrinsic, {}), b.model)));
  }
  const auto poses = b.query_poses();
  const std::vector<double> angles = {0.0, 360.0};
  const auto report =
      rotation_experiment(pipeline, b.model, b.map_poses, scan_of, b.map_rig.lidar_extrinsic, queries, poses, angles, 5);

  std::vector<PlaceEntry> entries(b.map_poses.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    entries[i].pose = b.map_poses[i];
    entries[i].descriptor = to_float_descriptor(
        pipeline.describe(pipeline.project(scan_of(i), b.map_rig.lidar_extrinsic, {}), b.model));
  }
  const PlaceMap map = build_map(std::move(entries));
  const auto baseline = recall_at_n(map, queries, poses, 5);
  ASSERT_EQ(report.angle_recall.size(), 2u);
  EXPECT_EQ(report.angle_recall[0].second, baseline);
  for (std::size_t n = 0; n < baseline.size(); ++n) {
    EXPECT_NEAR(report.angle_recall[1].second[n], baseline[n], 1.0 / 24 + 1e-12);
  }
  const auto dir = std::filesystem::temp_directory_path() / "sphereloc_rot_test";
  write_recall_csv(dir / "recall.csv", report);
  const std::string csv = slurp(dir / "recall.csv");
  EXPECT_EQ(csv.substr(0, 15), "angle,n,recall\n");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 11);
  std::filesystem::remove_all(dir);
}

TEST(Timing, ComponentsFitInsideTotal) {
  const Benchmark& b = small_bench();
  const Pipeline& pipeline = small_pipeline();
  std::vector<Frame> frames;
  for (int i = 0; i < 3; ++i) frames.push_back(render_frame(b.world, b.queries[i].pose, b.query_rig, i));
  const auto sphere_of = [&](std::uint32_t id) {
    return pipeline.project(render_frame(b.world, b.map_poses[id], b.map_rig, id), b.map_rig);
  };
  // Candidate rendering happens inside the timed loop, so precompute instead.
  std::vector<FeatureSphere> spheres;
  for (std::uint32_t id = 0; id < b.map.size(); ++id) spheres.push_back(sphere_of(id));
  const auto report = timing_breakdown(pipeline, b.model, b.map,
                                       [&](std::uint32_t id) { return spheres[id]; }, frames, b.query_rig, 4, 5);
  ASSERT_EQ(report.timing.size(), 8u);
  EXPECT_EQ(report.timing.back().component, "total");
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < report.timing.size(); ++i) {
    EXPECT_GE(report.timing[i].mean_ms, 0.0);
    sum += report.timing[i].mean_ms;
  }
  EXPECT_GT(report.stage_ms.at("total"), 0.0);
  EXPECT_LE(sum, report.stage_ms.at("total") * (1 + 1e-9));
  EXPECT_GE(sum, 0.5 * report.stage_ms.at("total"));
  EXPECT_THROW(timing_breakdown(pipeline, b.model, b.map, sphere_of, {}, b.query_rig, 1), InvalidParameter);
}

TEST(Summary, JsonCarriesResultsAndProvenance) {
  ExperimentReport r;
  r.name = "selection";
  r.parameters["k"] = "15";
  r.selection.push_back({15, 0.25, 8, 12.5});
  const auto j = nlohmann::json::parse(summary_json(r, "bandwidth = 32\n", content_hash("x")));
  EXPECT_EQ(j["experiment"], "selection");
  EXPECT_EQ(j["parameters"]["k"], "15");
  EXPECT_EQ(j["input_hash"], content_hash("x"));
  EXPECT_EQ(j["config"], "bandwidth = 32\n");
  EXPECT_EQ(j["selection"][0]["wrong_rate"], 0.25);
  EXPECT_FALSE(j.contains("recall"));
}
