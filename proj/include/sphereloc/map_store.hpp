#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "sphereloc/descriptor.hpp"
#include "sphereloc/kdtree.hpp"
#include "sphereloc/sphere_grid.hpp"

namespace sphereloc {

struct PlaceEntry {
  std::uint32_t id = 0;
  Pose pose;
  std::vector<float> descriptor;
  std::optional<FeatureSphere> features;
};

struct PlaceMatch {
  std::uint32_t id = 0;
  double distance = 0.0;  ///< L2
};

/// Descriptor map with an exact L2 KD-tree index. Ids are dense: entry i has id i.
class PlaceMap {
 public:
  PlaceMap() = default;

  std::size_t size() const { return entries_.size(); }
  std::size_t descriptor_dim() const { return dim_; }
  const PlaceEntry& entry(std::uint32_t id) const { return entries_.at(id); }
  std::span<const PlaceEntry> entries() const { return entries_; }

  /// The k nearest entries by L2, ties by lower id. Throws InvalidParameter
  /// unless 1 <= k <= size().
  std::vector<PlaceMatch> knn_query(std::span<const float> query, std::size_t k,
                                    KdQueryStats* stats = nullptr) const;

  friend PlaceMap build_map(std::vector<PlaceEntry> entries, std::size_t dim);

 private:
  std::vector<PlaceEntry> entries_;
  std::size_t dim_ = 0;
  KdTree<float> index_;
};

/// Renumbers ids to positions and builds the index. Throws InvalidParameter
/// for an empty list and ShapeError if any descriptor length differs from dim
/// or stored feature spheres disagree in bandwidth.
PlaceMap build_map(std::vector<PlaceEntry> entries, std::size_t dim = kDescriptorDim);

std::vector<float> to_float_descriptor(const Descriptor& d);

inline constexpr std::uint16_t kMapFormatVersion = 1;

/// SMAP file. Channels are stored as f32 blocks, zero-run-length encoded when
/// that is smaller.
void save_map(const PlaceMap& map, const std::filesystem::path& path);
/// Throws FormatError (with byte offset) on bad magic or truncation and
/// UnsupportedVersion on a version mismatch.
PlaceMap load_map(const std::filesystem::path& path);
PlaceMap decode_map(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_map(const PlaceMap& map);

}  // namespace sphereloc
