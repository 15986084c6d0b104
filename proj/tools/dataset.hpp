#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sphereloc/io.hpp"
#include "sphereloc/synth.hpp"

namespace sphereloc::cli {

/// A directory written by `synth`: scans/NNNNNN.xyzi, images/NNNNNN_<camera>.pgm,
/// poses.txt (TUM) and rig.toml.
struct Dataset {
  std::filesystem::path root;
  SensorRig rig;
  std::vector<TimedPose> poses;

  static Dataset open(const std::filesystem::path& root);

  std::size_t size() const { return poses.size(); }
  std::filesystem::path scan_path(std::size_t index) const;
  Frame frame(std::size_t index) const;
};

/// Loads a scan and the camera images stored beside it in the dataset layout.
/// Images that do not exist are skipped, which leaves photometry to the
/// cameras that were found.
Frame load_frame(const std::filesystem::path& scan_path, const SensorRig& rig);

/// Rig for a loose scan: rig.toml one directory above the scan when present,
/// otherwise the high-fidelity rig.
SensorRig rig_for_scan(const std::filesystem::path& scan_path);

}  // namespace sphereloc::cli
