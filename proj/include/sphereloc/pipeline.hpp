#pragma once

#include <chrono>
#include <map>
#include <span>
#include <string>

#include "sphereloc/config.hpp"
#include "sphereloc/map_store.hpp"
#include "sphereloc/synth.hpp"

namespace sphereloc {

/// Accumulates wall-clock milliseconds per named stage.
class StageTimer {
 public:
  class Scope {
   public:
    Scope(StageTimer* timer, std::string stage)
        : timer_(timer), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}
    ~Scope() {
      if (timer_) {
        const auto end = std::chrono::steady_clock::now();
        timer_->add(stage_, std::chrono::duration<double, std::milli>(end - start_).count());
      }
    }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    StageTimer* timer_;
    std::string stage_;
    std::chrono::steady_clock::time_point start_;
  };

  void add(const std::string& stage, double ms) { totals_[stage] += ms; }
  double total(const std::string& stage) const {
    const auto it = totals_.find(stage);
    return it == totals_.end() ? 0.0 : it->second;
  }
  const std::map<std::string, double>& totals() const { return totals_; }
  void clear() { totals_.clear(); }

 private:
  std::map<std::string, double> totals_;
};

/// Shared grid, taper bank and projection settings for turning sensor data
/// into feature spheres, descriptors and tapered spectra.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  const PipelineConfig& config() const { return config_; }
  const SphericalGrid& grid() const { return grid_; }
  const TaperBank& bank() const { return bank_; }

  FeatureSphere project(const PointCloud& scan, const RigidTransform& lidar_extrinsic,
                        std::span<const CameraView> views, StageTimer* timer = nullptr) const;
  FeatureSphere project(const Frame& frame, const SensorRig& rig, StageTimer* timer = nullptr) const;

  FeatureVec features(const FeatureSphere& sphere) const;
  Descriptor describe(const FeatureSphere& sphere, const EmbeddingModel& model) const;

  /// Windowed transforms ("sht" stage) followed by fusion ("fusion" stage).
  TaperedSpectra tapered(const FeatureSphere& sphere, StageTimer* timer = nullptr) const;

  /// Multitaper correlation ("correlation") and voting ("voting") over candidates.
  VoteResult vote(const TaperedSpectra& query, std::span<const TaperedSpectra> candidates,
                  StageTimer* timer = nullptr) const;

 private:
  PipelineConfig config_;
  SphericalGrid grid_;
  TaperBank bank_;
};

}  // namespace sphereloc
