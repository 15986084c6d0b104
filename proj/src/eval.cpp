#include "sphereloc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "sphereloc/errors.hpp"
#include "sphereloc/parallel.hpp"

namespace sphereloc {

namespace {

constexpr std::uint64_t kTrainSeedOffset = 0x7472616eULL;
constexpr std::uint64_t kQuerySeedOffset = 0x71756572ULL;
constexpr std::uint64_t kMapSeedOffset = 0x6d617070ULL;

double distance(const Pose& a, const Pose& b) { return (a.translation - b.translation).norm(); }

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

struct Rendered {
  FeatureVec features;
  TaperedSpectra spectra;
};

std::vector<Rendered> render_all(const Pipeline& pipeline, const World& world, std::span<const Pose> poses,
                                 const SensorRig& rig, bool spectra, std::uint64_t noise_base) {
  std::vector<Rendered> out(poses.size());
  parallel_for(poses.size(), [&](std::size_t i) {
    const Frame frame = render_frame(world, poses[i], rig, noise_base + i);
    const FeatureSphere sphere = pipeline.project(frame, rig);
    out[i].features = pipeline.features(sphere);
    if (spectra) out[i].spectra = pipeline.tapered(sphere);
  });
  return out;
}

}  // namespace

std::vector<Pose> generate_trajectory(const World& world, int count, double spacing, std::uint64_t seed,
                                      double clearance, double height) {
  if (count < 0) throw InvalidParameter("trajectory length must be non-negative");
  if (!(spacing > 0.0)) throw InvalidParameter("trajectory spacing must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> wander(0.0, 0.08);
  std::uniform_real_distribution<double> turn(0.4, std::numbers::pi);
  std::bernoulli_distribution coin(0.5);
  const double bound = world.extent > 0.0 ? world.extent / 2.0 : std::numeric_limits<double>::infinity();

  std::vector<Pose> poses;
  poses.reserve(static_cast<std::size_t>(count));
  Vec3 p(0.0, 0.0, height);
  double heading = std::uniform_real_distribution<double>(-std::numbers::pi, std::numbers::pi)(rng);
  for (int i = 0; i < count; ++i) {
    poses.push_back(Pose::from_yaw(heading, p));
    double h = heading + wander(rng);
    Vec3 next;
    bool moved = false;
    for (int attempt = 0; attempt < 64 && !moved; ++attempt) {
      next = p + spacing * Vec3(std::cos(h), std::sin(h), 0.0);
      if (std::abs(next.x()) <= bound && std::abs(next.y()) <= bound && world.is_free(next, clearance)) {
        moved = true;
      } else {
        h = heading + (coin(rng) ? 1.0 : -1.0) * turn(rng);
      }
    }
    if (!moved) {
      h = heading + std::numbers::pi;
      next = p + spacing * Vec3(std::cos(h), std::sin(h), 0.0);
    }
    heading = std::remainder(h, 2.0 * std::numbers::pi);
    p = next;
  }
  return poses;
}

std::vector<QuerySample> sample_queries(const World& world, std::span<const Pose> base, int count,
                                        double offset, double yaw_jitter, std::uint64_t seed,
                                        double clearance) {
  if (base.empty()) throw InvalidParameter("no base poses to sample queries around");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, base.size() - 1);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<QuerySample> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  while (static_cast<int>(out.size()) < count) {
    const std::size_t i = pick(rng);
    double dx, dy;
    do {
      dx = unit(rng);
      dy = unit(rng);
    } while (dx * dx + dy * dy > 1.0);
    const double yaw = yaw_of(base[i]) + yaw_jitter * unit(rng);
    const Vec3 p = base[i].translation + offset * Vec3(dx, dy, 0.0);
    if (!world.is_free(p, clearance)) continue;
    out.push_back({static_cast<std::uint32_t>(i), Pose::from_yaw(yaw, p)});
  }
  return out;
}

std::vector<double> recall_from_retrievals(const PlaceMap& map,
                                           std::span<const std::vector<std::uint32_t>> retrieved,
                                           std::span<const Pose> query_poses, int n_max, double radius) {
  if (retrieved.empty()) throw InvalidParameter("recall needs at least one query");
  if (retrieved.size() != query_poses.size()) throw ShapeError("retrievals and query poses differ in length");
  if (n_max < 1 || static_cast<std::size_t>(n_max) > map.size()) {
    throw InvalidParameter("n_max must lie in [1, map size]");
  }
  std::vector<double> hits(static_cast<std::size_t>(n_max), 0.0);
  for (std::size_t q = 0; q < retrieved.size(); ++q) {
    if (retrieved[q].size() < static_cast<std::size_t>(n_max)) throw ShapeError("retrieval list too short");
    for (int n = 0; n < n_max; ++n) {
      if (distance(map.entry(retrieved[q][n]).pose, query_poses[q]) <= radius) {
        for (int m = n; m < n_max; ++m) hits[m] += 1.0;
        break;
      }
    }
  }
  for (double& h : hits) h /= static_cast<double>(retrieved.size());
  return hits;
}

std::vector<double> recall_at_n(const PlaceMap& map, std::span<const std::vector<float>> queries,
                                std::span<const Pose> query_poses, int n_max, double radius) {
  if (queries.empty()) throw InvalidParameter("recall needs at least one query");
  if (n_max < 1 || static_cast<std::size_t>(n_max) > map.size()) {
    throw InvalidParameter("n_max must lie in [1, map size]");
  }
  std::vector<std::vector<std::uint32_t>> retrieved(queries.size());
  parallel_for(queries.size(), [&](std::size_t q) {
    for (const auto& m : map.knn_query(queries[q], static_cast<std::size_t>(n_max))) {
      retrieved[q].push_back(m.id);
    }
  });
  return recall_from_retrievals(map, retrieved, query_poses, n_max, radius);
}

std::vector<Pose> Benchmark::query_poses() const {
  std::vector<Pose> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(q.pose);
  return out;
}

Benchmark prepare_benchmark(const Pipeline& pipeline, const BenchmarkOptions& options, StageTimer* timer) {
  const PipelineConfig& cfg = pipeline.config();
  const BenchmarkConfig& b = cfg.benchmark;
  Benchmark bench;
  {
    StageTimer::Scope scope(timer, "world");
    bench.world = generate_world(b.world_seed, b.boxes, b.extent);
    bench.map_rig = SensorRig::high_fidelity(b.image_scale);
    bench.query_rig = options.cross_setup ? SensorRig::low_fidelity(b.image_scale)
                                          : SensorRig::high_fidelity(b.image_scale);
    bench.map_rig.lidar.points_per_ring = b.points_per_ring;
    bench.query_rig.lidar.points_per_ring = b.points_per_ring;
    bench.map_poses =
        generate_trajectory(bench.world, b.map_places, b.place_spacing, b.world_seed + kMapSeedOffset);
    bench.train_poses =
        b.train_places > 0
            ? generate_trajectory(bench.world, b.train_places, b.place_spacing, b.world_seed + kTrainSeedOffset)
            : bench.map_poses;
    bench.queries = sample_queries(bench.world, bench.map_poses, b.queries, b.query_offset,
                                   b.query_yaw_jitter, b.world_seed + kQuerySeedOffset);
  }
  {
    StageTimer::Scope scope(timer, "render_map");
    auto rendered = render_all(pipeline, bench.world, bench.map_poses, bench.map_rig, options.keep_spectra, 0);
    for (auto& r : rendered) {
      bench.map_features.push_back(std::move(r.features));
      if (options.keep_spectra) bench.map_spectra.push_back(std::move(r.spectra));
    }
  }
  if (options.train && b.train_places == 0) {
    bench.train_features = bench.map_features;
  } else if (options.train) {
    StageTimer::Scope scope(timer, "render_train");
    auto rendered = render_all(pipeline, bench.world, bench.train_poses, bench.map_rig, false, 1u << 20);
    for (auto& r : rendered) bench.train_features.push_back(std::move(r.features));
  }
  {
    StageTimer::Scope scope(timer, "render_queries");
    const auto poses = bench.query_poses();
    auto rendered = render_all(pipeline, bench.world, poses, bench.query_rig, options.keep_spectra, 1u << 21);
    for (auto& r : rendered) {
      bench.query_features.push_back(std::move(r.features));
      if (options.keep_spectra) bench.query_spectra.push_back(std::move(r.spectra));
    }
  }
  const int dim = static_cast<int>(bench.map_features.front().size());
  {
    StageTimer::Scope scope(timer, "train");
    if (options.train) {
      std::vector<Vec3> positions;
      for (const auto& p : bench.train_poses) positions.push_back(p.translation);
      bench.triplets = mine_triplets(positions, cfg.mining);
      bench.model = train_embedding(bench.train_features, bench.triplets, cfg.training);
    } else {
      bench.model = EmbeddingModel::random(dim, cfg.training.seed);
    }
  }
  {
    StageTimer::Scope scope(timer, "build_map");
    std::vector<PlaceEntry> entries;
    entries.reserve(bench.map_poses.size());
    for (std::size_t i = 0; i < bench.map_poses.size(); ++i) {
      PlaceEntry e;
      e.id = static_cast<std::uint32_t>(i);
      e.pose = bench.map_poses[i];
      e.descriptor = to_float_descriptor(embed(bench.map_features[i], bench.model));
      entries.push_back(std::move(e));
    }
    bench.map = build_map(std::move(entries));
    for (const auto& f : bench.query_features) {
      bench.query_descriptors.push_back(to_float_descriptor(embed(f, bench.model)));
    }
  }
  return bench;
}

ExperimentReport recall_experiment(const Benchmark& bench, int n_max, double radius) {
  ExperimentReport report;
  report.name = "recall";
  report.parameters["n_max"] = std::to_string(n_max);
  report.parameters["success_radius"] = fmt(radius);
  report.parameters["map_size"] = std::to_string(bench.map.size());
  report.parameters["queries"] = std::to_string(bench.queries.size());

  const auto poses = bench.query_poses();
  std::vector<std::vector<std::uint32_t>> retrieved(bench.query_descriptors.size());
  parallel_for(retrieved.size(), [&](std::size_t q) {
    for (const auto& m : bench.map.knn_query(bench.query_descriptors[q], static_cast<std::size_t>(n_max))) {
      retrieved[q].push_back(m.id);
    }
  });
  report.recall = recall_from_retrievals(bench.map, retrieved, poses, n_max, radius);
  for (std::size_t q = 0; q < retrieved.size(); ++q) {
    TrialRecord t;
    t.query_id = static_cast<std::uint32_t>(q);
    t.retrieved = retrieved[q];
    t.distance = distance(bench.map.entry(retrieved[q].front()).pose, poses[q]);
    report.trials.push_back(std::move(t));
  }
  return report;
}

ExperimentReport rotation_experiment(const Pipeline& pipeline, const EmbeddingModel& model,
                                     std::span<const Pose> map_poses,
                                     const std::function<PointCloud(std::size_t)>& scan_of,
                                     const RigidTransform& lidar_extrinsic,
                                     std::span<const std::vector<float>> queries,
                                     std::span<const Pose> query_poses, std::span<const double> angles_deg,
                                     int n_max, double radius) {
  ExperimentReport report;
  report.name = "rotation";
  report.parameters["n_max"] = std::to_string(n_max);
  report.parameters["map_size"] = std::to_string(map_poses.size());
  report.parameters["queries"] = std::to_string(queries.size());
  for (double angle : angles_deg) {
    const Eigen::Quaterniond rot(Eigen::AngleAxisd(angle * std::numbers::pi / 180.0, Vec3::UnitZ()));
    std::vector<PlaceEntry> entries(map_poses.size());
    parallel_for(map_poses.size(), [&](std::size_t i) {
      PointCloud scan = scan_of(i);
      for (auto& p : scan.points) p = rot * p;
      const FeatureSphere sphere = pipeline.project(scan, lidar_extrinsic, {});
      entries[i].id = static_cast<std::uint32_t>(i);
      entries[i].pose = map_poses[i];
      entries[i].descriptor = to_float_descriptor(pipeline.describe(sphere, model));
    });
    const PlaceMap map = build_map(std::move(entries));
    report.angle_recall.emplace_back(angle, recall_at_n(map, queries, query_poses, n_max, radius));
  }
  return report;
}

ExperimentReport selection_experiment(const Pipeline& pipeline, const Benchmark& bench,
                                      std::span<const int> k_values, double radius) {
  if (k_values.empty()) throw InvalidParameter("selection experiment needs at least one k");
  const int k_max = *std::max_element(k_values.begin(), k_values.end());
  if (k_max < 1 || static_cast<std::size_t>(k_max) > bench.map.size()) {
    throw InvalidParameter("k must lie in [1, map size]");
  }
  if (bench.map_spectra.size() != bench.map.size() || bench.query_spectra.size() != bench.queries.size()) {
    throw InvalidParameter("benchmark was prepared without tapered spectra");
  }
  const auto poses = bench.query_poses();
  const std::size_t nq = bench.queries.size();

  struct Outcome {
    bool eligible = false;
    std::uint32_t selected = 0;
    double distance = 0.0;
  };
  std::vector<std::vector<Outcome>> outcomes(nq, std::vector<Outcome>(k_values.size()));
  std::vector<std::vector<std::uint32_t>> retrieved(nq);
  parallel_for(nq, [&](std::size_t q) {
    for (const auto& m : bench.map.knn_query(bench.query_descriptors[q], static_cast<std::size_t>(k_max))) {
      retrieved[q].push_back(m.id);
    }
    std::vector<DegreeSeries> correlations;
    correlations.reserve(retrieved[q].size());
    for (auto id : retrieved[q]) {
      correlations.push_back(multitaper_correlation(bench.query_spectra[q], bench.map_spectra[id]));
    }
    for (std::size_t ki = 0; ki < k_values.size(); ++ki) {
      const auto k = static_cast<std::size_t>(k_values[ki]);
      bool any_correct = false;
      for (std::size_t c = 0; c < k; ++c) {
        any_correct |= distance(bench.map.entry(retrieved[q][c]).pose, poses[q]) <= radius;
      }
      if (!any_correct) continue;
      const VoteResult vr = vote_from_correlations(std::span(correlations).first(k),
                                                   pipeline.config().vote_options());
      Outcome& o = outcomes[q][ki];
      o.eligible = true;
      o.selected = retrieved[q][vr.selected];
      o.distance = distance(bench.map.entry(o.selected).pose, poses[q]);
    }
  });

  ExperimentReport report;
  report.name = "selection";
  report.parameters["success_radius"] = fmt(radius);
  report.parameters["map_size"] = std::to_string(bench.map.size());
  report.parameters["queries"] = std::to_string(nq);
  for (std::size_t ki = 0; ki < k_values.size(); ++ki) {
    SelectionRate rate;
    rate.k = k_values[ki];
    int wrong = 0;
    for (std::size_t q = 0; q < nq; ++q) {
      const Outcome& o = outcomes[q][ki];
      if (!o.eligible) continue;
      ++rate.evaluated;
      if (o.distance > radius) ++wrong;
      rate.max_selected_distance = std::max(rate.max_selected_distance, o.distance);
    }
    rate.wrong_rate = rate.evaluated > 0 ? static_cast<double>(wrong) / rate.evaluated : 0.0;
    report.selection.push_back(rate);
  }
  const std::size_t last = k_values.size() - 1;
  for (std::size_t q = 0; q < nq; ++q) {
    TrialRecord t;
    t.query_id = static_cast<std::uint32_t>(q);
    t.retrieved = retrieved[q];
    if (outcomes[q][last].eligible) {
      t.selected = outcomes[q][last].selected;
      t.distance = outcomes[q][last].distance;
    } else {
      t.distance = distance(bench.map.entry(retrieved[q].front()).pose, poses[q]);
    }
    report.trials.push_back(std::move(t));
  }
  return report;
}

ExperimentReport timing_breakdown(const Pipeline& pipeline, const EmbeddingModel& model, const PlaceMap& map,
                                  const std::function<FeatureSphere(std::uint32_t)>& candidate_sphere,
                                  std::span<const Frame> query_frames, const SensorRig& rig,
                                  int n_samples, int k) {
  if (query_frames.empty()) throw InvalidParameter("timing needs at least one query frame");
  if (n_samples < 1) throw InvalidParameter("timing needs at least one sample");
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 1)), map.size());
  static const std::vector<std::string> kStages = {"projection", "embedding", "lookup", "sht",
                                                   "fusion",     "correlation", "voting"};
  std::map<std::string, std::vector<double>> samples;
  std::vector<double> totals;
  for (int s = 0; s < n_samples; ++s) {
    const Frame& frame = query_frames[static_cast<std::size_t>(s) % query_frames.size()];
    StageTimer timer;
    const auto start = std::chrono::steady_clock::now();
    const FeatureSphere sphere = pipeline.project(frame, rig, &timer);
    std::vector<float> descriptor;
    {
      StageTimer::Scope scope(&timer, "embedding");
      descriptor = to_float_descriptor(pipeline.describe(sphere, model));
    }
    std::vector<PlaceMatch> matches;
    {
      StageTimer::Scope scope(&timer, "lookup");
      matches = map.knn_query(descriptor, kk);
    }
    const TaperedSpectra query = pipeline.tapered(sphere, &timer);
    std::vector<TaperedSpectra> candidates;
    candidates.reserve(matches.size());
    for (const auto& m : matches) candidates.push_back(pipeline.tapered(candidate_sphere(m.id), &timer));
    const VoteResult result = pipeline.vote(query, candidates, &timer);
    (void)result;
    const auto end = std::chrono::steady_clock::now();
    totals.push_back(std::chrono::duration<double, std::milli>(end - start).count());
    for (const auto& stage : kStages) samples[stage].push_back(timer.total(stage));
  }
  auto summarize = [](const std::string& name, const std::vector<double>& v) {
    TimingRow row;
    row.component = name;
    double sum = 0.0;
    for (double x : v) sum += x;
    row.mean_ms = sum / static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - row.mean_ms) * (x - row.mean_ms);
    row.std_ms = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
    return row;
  };
  ExperimentReport report;
  report.name = "timing";
  report.parameters["samples"] = std::to_string(n_samples);
  report.parameters["bandwidth"] = std::to_string(pipeline.grid().bandwidth());
  report.parameters["map_size"] = std::to_string(map.size());
  report.parameters["k"] = std::to_string(kk);
  for (const auto& stage : kStages) {
    report.timing.push_back(summarize(stage, samples[stage]));
    report.stage_ms[stage] = report.timing.back().mean_ms;
  }
  report.timing.push_back(summarize("total", totals));
  report.stage_ms["total"] = report.timing.back().mean_ms;
  return report;
}

ExperimentReport rotation_benchmark(const Pipeline& pipeline, std::span<const double> angles_deg, int n_max,
                                    StageTimer* timer) {
  if (!pipeline.config().projection.lidar_only) {
    throw InvalidParameter("rotation benchmark needs projection.lidar_only = true");
  }
  BenchmarkOptions options;
  options.keep_spectra = false;
  const Benchmark bench = prepare_benchmark(pipeline, options, timer);
  // Same noise seeds as the map frames rendered by prepare_benchmark.
  const auto scan_of = [&](std::size_t i) {
    return render_scan(bench.world, bench.map_poses[i] * bench.map_rig.lidar_extrinsic, bench.map_rig.lidar, i);
  };
  const auto poses = bench.query_poses();
  StageTimer::Scope scope(timer, "rotation");
  return rotation_experiment(pipeline, bench.model, bench.map_poses, scan_of, bench.map_rig.lidar_extrinsic,
                             bench.query_descriptors, poses, angles_deg, n_max, pipeline.config().success_radius);
}

ExperimentReport timing_benchmark(const Pipeline& pipeline, int rendered, int k) {
  const PipelineConfig& cfg = pipeline.config();
  const BenchmarkConfig& b = cfg.benchmark;
  if (rendered < 1) throw InvalidParameter("timing needs at least one rendered place");
  const World world = generate_world(b.world_seed, b.boxes, b.extent);
  SensorRig rig = SensorRig::high_fidelity(b.image_scale);
  rig.lidar.points_per_ring = b.points_per_ring;
  const int n_queries = std::max(1, rendered / 2);
  const auto poses = generate_trajectory(world, rendered + n_queries, b.place_spacing, b.world_seed + kMapSeedOffset);

  const EmbeddingModel model = EmbeddingModel::random(3 * cfg.effective_feature_degrees(), cfg.training.seed);
  std::vector<FeatureSphere> spheres(static_cast<std::size_t>(rendered));
  std::vector<PlaceEntry> entries(static_cast<std::size_t>(rendered));
  parallel_for(spheres.size(), [&](std::size_t i) {
    spheres[i] = pipeline.project(render_frame(world, poses[i], rig, i), rig);
    entries[i].pose = poses[i];
    entries[i].descriptor = to_float_descriptor(pipeline.describe(spheres[i], model));
  });
  std::mt19937_64 rng(cfg.training.seed);
  std::normal_distribution<float> jitter(0.0f, 0.05f);
  while (entries.size() < static_cast<std::size_t>(b.timing_map_size)) {
    PlaceEntry e = entries[entries.size() % spheres.size()];
    for (float& v : e.descriptor) v += jitter(rng);
    entries.push_back(std::move(e));
  }
  const PlaceMap map = build_map(std::move(entries));
  std::vector<Frame> queries;
  for (int i = 0; i < n_queries; ++i) {
    const auto at = static_cast<std::size_t>(rendered + i);
    queries.push_back(render_frame(world, poses[at], rig, (1u << 21) + at));
  }
  return timing_breakdown(
      pipeline, model, map, [&](std::uint32_t id) { return spheres[id % spheres.size()]; }, queries, rig,
      b.timing_samples, k);
}

std::string content_hash(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw std::runtime_error("cannot allocate digest context");
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("SHA-1 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

void write_recall_csv(const std::filesystem::path& path, const ExperimentReport& report) {
  auto out = open_out(path);
  if (!report.angle_recall.empty()) {
    out << "angle,n,recall\n";
    for (const auto& [angle, curve] : report.angle_recall) {
      for (std::size_t n = 0; n < curve.size(); ++n) {
        out << fmt(angle) << ',' << n + 1 << ',' << fmt(curve[n]) << '\n';
      }
    }
  } else {
    out << "n,recall\n";
    for (std::size_t n = 0; n < report.recall.size(); ++n) out << n + 1 << ',' << fmt(report.recall[n]) << '\n';
  }
}

void write_selection_csv(const std::filesystem::path& path, const ExperimentReport& report) {
  auto out = open_out(path);
  out << "k,wrong_rate\n";
  for (const auto& r : report.selection) out << r.k << ',' << fmt(r.wrong_rate) << '\n';
}

void write_timing_csv(const std::filesystem::path& path, const ExperimentReport& report) {
  auto out = open_out(path);
  out << "component,mean_ms,std_ms\n";
  for (const auto& r : report.timing) out << r.component << ',' << fmt(r.mean_ms) << ',' << fmt(r.std_ms) << '\n';
}

std::string summary_json(const ExperimentReport& report, const std::string& resolved_config,
                         const std::string& input_hash) {
  nlohmann::ordered_json j;
  j["experiment"] = report.name;
  j["parameters"] = report.parameters;
  j["input_hash"] = input_hash;
  j["config"] = resolved_config;
  if (!report.recall.empty()) j["recall"] = report.recall;
  if (!report.angle_recall.empty()) {
    auto& arr = j["angle_recall"] = nlohmann::ordered_json::array();
    for (const auto& [angle, curve] : report.angle_recall) arr.push_back({{"angle", angle}, {"recall", curve}});
  }
  if (!report.selection.empty()) {
    auto& arr = j["selection"] = nlohmann::ordered_json::array();
    for (const auto& r : report.selection) {
      arr.push_back({{"k", r.k},
                     {"wrong_rate", r.wrong_rate},
                     {"evaluated", r.evaluated},
                     {"max_selected_distance", r.max_selected_distance}});
    }
  }
  if (!report.timing.empty()) {
    auto& arr = j["timing"] = nlohmann::ordered_json::array();
    for (const auto& r : report.timing) {
      arr.push_back({{"component", r.component}, {"mean_ms", r.mean_ms}, {"std_ms", r.std_ms}});
    }
  }
  return j.dump();
}

}  // namespace sphereloc
