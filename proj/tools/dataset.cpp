#include "dataset.hpp"

#include <cstdio>
#include <stdexcept>

namespace sphereloc::cli {

namespace {

std::string frame_stem(std::size_t index) {
  char name[32];
  std::snprintf(name, sizeof name, "%06zu", index);
  return name;
}

}  // namespace

Dataset Dataset::open(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) throw std::runtime_error("dataset directory not found: " + root.string());
  Dataset d;
  d.root = root;
  d.rig = read_rig(root / "rig.toml");
  d.poses = read_tum(root / "poses.txt");
  if (d.poses.empty()) throw std::runtime_error("dataset has no poses: " + (root / "poses.txt").string());
  return d;
}

std::filesystem::path Dataset::scan_path(std::size_t index) const {
  return root / "scans" / (frame_stem(index) + ".xyzi");
}

Frame Dataset::frame(std::size_t index) const {
  Frame f = load_frame(scan_path(index), rig);
  f.pose = poses.at(index).pose;
  return f;
}

Frame load_frame(const std::filesystem::path& scan_path, const SensorRig& rig) {
  Frame f;
  f.scan = read_xyzi(scan_path);
  const auto images = scan_path.parent_path().parent_path() / "images";
  const std::string stem = scan_path.stem().string();
  for (const auto& cam : rig.cameras) {
    const auto path = images / (stem + "_" + cam.name + ".pgm");
    if (!std::filesystem::exists(path)) continue;
    CameraView view;
    view.image = read_pgm(path);
    view.intrinsics = cam.intrinsics;
    view.extrinsic = cam.extrinsic;
    f.views.push_back(std::move(view));
  }
  return f;
}

SensorRig rig_for_scan(const std::filesystem::path& scan_path) {
  const auto rig = scan_path.parent_path().parent_path() / "rig.toml";
  return std::filesystem::exists(rig) ? read_rig(rig) : SensorRig::high_fidelity();
}

}  // namespace sphereloc::cli
