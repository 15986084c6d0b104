#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sphereloc/descriptor.hpp"
#include "sphereloc/taper.hpp"
#include "sphereloc/voting.hpp"

namespace sphereloc {

struct TaperConfig {
  double cap_half_angle = kDefaultCapHalfAngle;
  int degrees = kDefaultTaperDegrees;
  int count = 0;                  ///< 0 selects the Shannon number
  Vec3 center = Vec3::UnitZ();    ///< cap axis in the base frame
};

struct ProjectionConfig {
  double max_angle = 0.0;  ///< radians; 0 selects two grid steps
  int neighbors = kDefaultLidarNeighbors;
  bool lidar_only = false;  ///< zero the photometry channel
};

/// Parameters of the synthetic benchmark driven by `eval`.
struct BenchmarkConfig {
  std::uint64_t world_seed = 11;
  int boxes = 900;
  double extent = 260.0;
  int map_places = 1000;
  int train_places = 0;          ///< 0 trains on the map frames
  int queries = 2000;
  double place_spacing = 1.0;    ///< metres between consecutive trajectory poses
  double query_offset = 1.5;     ///< max lateral/longitudinal query displacement, metres
  double query_yaw_jitter = 0.05;  ///< radians
  double image_scale = 0.125;
  int points_per_ring = 256;
  int recall_n_max = 15;
  std::vector<double> angles_deg = {0, 45, 90, 135, 180};
  std::vector<int> selection_k = {1, 5, 10, 15};
  int timing_samples = 1000;
  int timing_map_size = 3000;
};

/// Everything a run needs, defaulting to the reference values of the method.
struct PipelineConfig {
  int bandwidth = 100;
  int eval_degrees = kDefaultEvalDegrees;
  int feature_degrees = kDefaultFeatureDegrees;  ///< capped at the bandwidth
  TaperConfig taper;
  FusionOptions fusion;
  ZScoreMode zscore = ZScoreMode::Described;
  ConfidenceCarry carry = ConfidenceCarry::PreviousCorrelation;
  TrainingConfig training;
  MiningConfig mining;
  ProjectionConfig projection;
  double success_radius = 5.0;
  BenchmarkConfig benchmark;

  int effective_feature_degrees() const { return std::min(feature_degrees, bandwidth); }
  VoteOptions vote_options() const;
};

/// Malformed or unknown configuration entry; key() names the dotted key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error("config key '" + key + "': " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct LoadedConfig {
  PipelineConfig config;
  std::vector<std::string> defaulted;  ///< dotted keys not present in the input
};

/// Parses TOML text. Unknown keys and ill-typed values throw ConfigError.
LoadedConfig parse_config(std::string_view toml_text);
LoadedConfig load_config(const std::filesystem::path& path);
/// All keys with their defaults marked as defaulted.
LoadedConfig default_config();

/// Fully resolved configuration as TOML; parse_config(to_toml(c)) reproduces c.
std::string to_toml(const PipelineConfig& config);

/// Every recognised dotted key.
std::vector<std::string> config_keys();

}  // namespace sphereloc
