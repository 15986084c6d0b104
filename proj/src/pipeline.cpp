#include "sphereloc/pipeline.hpp"

namespace sphereloc {

namespace {

TaperBank make_bank(const PipelineConfig& c, const SphericalGrid& grid) {
  const int count = c.taper.count > 0 ? c.taper.count
                                      : shannon_taper_count(c.taper.cap_half_angle, c.taper.degrees);
  return build_taper_bank(c.taper.cap_half_angle, c.taper.degrees, count, grid, c.taper.center);
}

}  // namespace

Pipeline::Pipeline(PipelineConfig config)
    : config_(std::move(config)), grid_(config_.bandwidth), bank_(make_bank(config_, grid_)) {}

FeatureSphere Pipeline::project(const PointCloud& scan, const RigidTransform& lidar_extrinsic,
                                std::span<const CameraView> views, StageTimer* timer) const {
  StageTimer::Scope scope(timer, "projection");
  const double max_angle =
      config_.projection.max_angle > 0.0 ? config_.projection.max_angle : default_max_angle(grid_);
  LidarChannels lidar = project_lidar(scan, lidar_extrinsic, grid_, max_angle, config_.projection.neighbors);
  Channel photometry = config_.projection.lidar_only ? grid_.zeros() : project_cameras(views, grid_);
  return assemble_feature(std::move(photometry), std::move(lidar.range), std::move(lidar.intensity), grid_);
}

FeatureSphere Pipeline::project(const Frame& frame, const SensorRig& rig, StageTimer* timer) const {
  return project(frame.scan, rig.lidar_extrinsic, frame.views, timer);
}

FeatureVec Pipeline::features(const FeatureSphere& sphere) const {
  return spectral_features(sphere, config_.effective_feature_degrees());
}

Descriptor Pipeline::describe(const FeatureSphere& sphere, const EmbeddingModel& model) const {
  return embed(features(sphere), model);
}

TaperedSpectra Pipeline::tapered(const FeatureSphere& sphere, StageTimer* timer) const {
  WindowedSpectra windowed;
  {
    StageTimer::Scope scope(timer, "sht");
    windowed = window_spectra(sphere, bank_, grid_, config_.eval_degrees, config_.fusion);
  }
  StageTimer::Scope scope(timer, "fusion");
  return fuse_windowed(std::move(windowed));
}

VoteResult Pipeline::vote(const TaperedSpectra& query, std::span<const TaperedSpectra> candidates,
                          StageTimer* timer) const {
  std::vector<DegreeSeries> correlations;
  {
    StageTimer::Scope scope(timer, "correlation");
    correlations.reserve(candidates.size());
    for (const auto& c : candidates) correlations.push_back(multitaper_correlation(query, c));
  }
  StageTimer::Scope scope(timer, "voting");
  return vote_from_correlations(correlations, config_.vote_options());
}

}  // namespace sphereloc
