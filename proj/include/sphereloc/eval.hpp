#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sphereloc/pipeline.hpp"

namespace sphereloc {

// ---------------------------------------------------------------------------
// Reports

struct TrialRecord {
  std::uint32_t query_id = 0;
  std::vector<std::uint32_t> retrieved;
  std::optional<std::uint32_t> selected;
  double distance = 0.0;  ///< metres from the query to the selected (or best retrieved) place
};

struct SelectionRate {
  int k = 0;
  double wrong_rate = 0.0;
  int evaluated = 0;            ///< queries passing the correct-candidate filter
  double max_selected_distance = 0.0;
};

struct TimingRow {
  std::string component;
  double mean_ms = 0.0;
  double std_ms = 0.0;
};

struct ExperimentReport {
  std::string name;
  std::map<std::string, std::string> parameters;
  std::vector<double> recall;                                  ///< recall[n - 1]
  std::vector<std::pair<double, std::vector<double>>> angle_recall;  ///< (degrees, curve)
  std::vector<SelectionRate> selection;
  std::vector<TimingRow> timing;
  std::vector<TrialRecord> trials;
  std::map<std::string, double> stage_ms;
};

// ---------------------------------------------------------------------------
// Trajectories

/// Heading-persistent random walk through free space, starting at the origin.
/// Poses sit at `height` above ground with yaw along the direction of travel.
std::vector<Pose> generate_trajectory(const World& world, int count, double spacing, std::uint64_t seed,
                                      double clearance = 2.0, double height = 1.0);

/// One query per draw: a random base pose displaced by up to `offset` metres
/// and rotated by up to `yaw_jitter` radians, kept in free space.
struct QuerySample {
  std::uint32_t source = 0;  ///< index of the base pose it was drawn around
  Pose pose;
};
std::vector<QuerySample> sample_queries(const World& world, std::span<const Pose> base, int count,
                                        double offset, double yaw_jitter, std::uint64_t seed,
                                        double clearance = 1.0);

// ---------------------------------------------------------------------------
// Metrics

/// recall[n-1] = fraction of queries whose first n retrieved places include
/// one within `radius` of the query position. Throws InvalidParameter for an
/// empty query set or n_max outside [1, map size].
std::vector<double> recall_at_n(const PlaceMap& map, std::span<const std::vector<float>> queries,
                                std::span<const Pose> query_poses, int n_max, double radius = 5.0);

/// Same metric from precomputed retrieval lists (each at least n_max long).
std::vector<double> recall_from_retrievals(const PlaceMap& map,
                                           std::span<const std::vector<std::uint32_t>> retrieved,
                                           std::span<const Pose> query_poses, int n_max, double radius);

// ---------------------------------------------------------------------------
// Benchmark

/// Rendered and processed data for one synthetic run.
struct Benchmark {
  World world;
  SensorRig map_rig;
  SensorRig query_rig;
  std::vector<Pose> map_poses;
  std::vector<Pose> train_poses;
  std::vector<QuerySample> queries;
  std::vector<FeatureVec> map_features;
  std::vector<FeatureVec> train_features;
  std::vector<FeatureVec> query_features;
  std::vector<TaperedSpectra> map_spectra;
  std::vector<TaperedSpectra> query_spectra;
  std::vector<Triplet> triplets;
  EmbeddingModel model;
  PlaceMap map;
  std::vector<std::vector<float>> query_descriptors;

  std::vector<Pose> query_poses() const;
};

struct BenchmarkOptions {
  bool cross_setup = false;     ///< query with the low-fidelity rig
  bool train = true;            ///< false keeps the randomly initialised embedding
  bool keep_spectra = true;     ///< compute tapered spectra for voting
};

/// Renders map, training and query frames, trains the embedding on mined
/// triplets and builds the map. Stage timings are added to `timer`.
Benchmark prepare_benchmark(const Pipeline& pipeline, const BenchmarkOptions& options = {},
                            StageTimer* timer = nullptr);

/// Recall curve of the benchmark queries against its map.
ExperimentReport recall_experiment(const Benchmark& bench, int n_max, double radius = 5.0);

/// Rebuilds the map from yaw-rotated scans for every angle and reports a
/// recall curve per angle. `scan_of(i)` returns the LiDAR scan of map place i.
/// The pipeline should run in LiDAR-only mode.
ExperimentReport rotation_experiment(const Pipeline& pipeline, const EmbeddingModel& model,
                                     std::span<const Pose> map_poses,
                                     const std::function<PointCloud(std::size_t)>& scan_of,
                                     const RigidTransform& lidar_extrinsic,
                                     std::span<const std::vector<float>> queries,
                                     std::span<const Pose> query_poses, std::span<const double> angles_deg,
                                     int n_max, double radius = 5.0);

/// For every k, votes among the top-k retrieved places of each query that has
/// at least one retrieved place within `radius`, and reports the fraction of
/// selections farther than `radius`.
ExperimentReport selection_experiment(const Pipeline& pipeline, const Benchmark& bench,
                                      std::span<const int> k_values, double radius = 5.0);

/// Mean and standard deviation per pipeline stage over single queries, plus
/// the measured total. `map` supplies the k-NN lookup, `candidate_sphere(id)`
/// the stored feature sphere of a retrieved place.
ExperimentReport timing_breakdown(const Pipeline& pipeline, const EmbeddingModel& model, const PlaceMap& map,
                                  const std::function<FeatureSphere(std::uint32_t)>& candidate_sphere,
                                  std::span<const Frame> query_frames, const SensorRig& rig,
                                  int n_samples, int k = 15);

/// Rotation experiment on the configured benchmark world: trains on the map
/// frames, then rebuilds the map from yaw-rotated scans for every angle. The
/// pipeline must run in LiDAR-only mode.
ExperimentReport rotation_benchmark(const Pipeline& pipeline, std::span<const double> angles_deg, int n_max,
                                    StageTimer* timer = nullptr);

/// Timing on the configured world: `rendered` places are projected and
/// embedded, the map is padded to benchmark.timing_map_size with jittered
/// copies of their descriptors, and benchmark.timing_samples queries are timed.
ExperimentReport timing_benchmark(const Pipeline& pipeline, int rendered = 40, int k = 15);

// ---------------------------------------------------------------------------
// Output

/// git-style blob hash: SHA-1 over "blob <size>\0" followed by the content.
std::string content_hash(std::string_view content);

void write_recall_csv(const std::filesystem::path& path, const ExperimentReport& report);
void write_selection_csv(const std::filesystem::path& path, const ExperimentReport& report);
void write_timing_csv(const std::filesystem::path& path, const ExperimentReport& report);
/// JSON summary: experiment, parameters, resolved config, input hash and results.
std::string summary_json(const ExperimentReport& report, const std::string& resolved_config,
                         const std::string& input_hash);

}  // namespace sphereloc
