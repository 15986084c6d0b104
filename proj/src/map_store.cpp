#include "sphereloc/map_store.hpp"

#include <string>

#include "sphereloc/binary_io.hpp"
#include "sphereloc/errors.hpp"

namespace sphereloc {

namespace {

enum class ChannelEncoding : std::uint8_t { RawF32 = 0, ZeroRunLength = 1 };

void encode_channel(ByteWriter& w, const Channel& channel) {
  const std::size_t length_at = w.size();
  w.u32(0);
  const Eigen::Index n = channel.size();
  const double* data = channel.data();

  Eigen::Index nonzero = 0;
  std::size_t runs = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<float>(data[i]) != 0.0f) {
      ++nonzero;
      if (i == 0 || static_cast<float>(data[i - 1]) == 0.0f) ++runs;
    }
  }
  const std::size_t raw_size = static_cast<std::size_t>(n) * 4;
  const std::size_t rle_size = (runs + 1) * 8 + static_cast<std::size_t>(nonzero) * 4;

  if (rle_size < raw_size) {
    w.u8(static_cast<std::uint8_t>(ChannelEncoding::ZeroRunLength));
    Eigen::Index i = 0;
    while (i < n) {
      std::uint32_t zeros = 0;
      while (i < n && static_cast<float>(data[i]) == 0.0f) {
        ++zeros;
        ++i;
      }
      const Eigen::Index literal_begin = i;
      while (i < n && static_cast<float>(data[i]) != 0.0f) ++i;
      w.u32(zeros);
      w.u32(static_cast<std::uint32_t>(i - literal_begin));
      for (Eigen::Index k = literal_begin; k < i; ++k) w.f32(static_cast<float>(data[k]));
    }
  } else {
    w.u8(static_cast<std::uint8_t>(ChannelEncoding::RawF32));
    for (Eigen::Index i = 0; i < n; ++i) w.f32(static_cast<float>(data[i]));
  }
  w.patch_u32(length_at, static_cast<std::uint32_t>(w.size() - length_at - 4));
}

Channel decode_channel(ByteReader& r, int samples) {
  const std::size_t length = r.u32();
  r.require(length, "truncated channel block");
  const std::size_t end = r.offset() + length;
  const std::size_t encoding_at = r.offset();
  const auto encoding = static_cast<ChannelEncoding>(r.u8());
  Channel c = Channel::Zero(samples, samples);
  const Eigen::Index n = c.size();
  if (encoding == ChannelEncoding::RawF32) {
    r.require(static_cast<std::size_t>(n) * 4, "truncated raw channel");
    for (Eigen::Index i = 0; i < n; ++i) c.data()[i] = r.f32();
  } else if (encoding == ChannelEncoding::ZeroRunLength) {
    Eigen::Index i = 0;
    while (i < n) {
      const std::size_t at = r.offset();
      const auto zeros = r.u32();
      const auto literals = r.u32();
      if (i + zeros + literals > n) throw FormatError("channel run exceeds grid size", at);
      i += zeros;
      for (std::uint32_t k = 0; k < literals; ++k) c.data()[i++] = r.f32();
    }
  } else {
    throw FormatError("unknown channel encoding", encoding_at);
  }
  if (r.offset() != end) throw FormatError("channel block length mismatch", r.offset());
  return c;
}

}  // namespace

std::vector<PlaceMatch> PlaceMap::knn_query(std::span<const float> query, std::size_t k,
                                            KdQueryStats* stats) const {
  if (k < 1 || k > size()) {
    throw InvalidParameter("k = " + std::to_string(k) + " outside [1, map size " +
                           std::to_string(size()) + "]");
  }
  if (query.size() != dim_) throw ShapeError("query descriptor has wrong dimension");
  const auto nn = index_.knn(query, k, std::numeric_limits<double>::infinity(), stats);
  std::vector<PlaceMatch> out;
  out.reserve(nn.size());
  for (const auto& n : nn) out.push_back({n.id, std::sqrt(n.distance_sq)});
  return out;
}

PlaceMap build_map(std::vector<PlaceEntry> entries, std::size_t dim) {
  if (entries.empty()) throw InvalidParameter("a map needs at least one entry");
  std::vector<float> flat;
  flat.reserve(entries.size() * dim);
  int bandwidth = -1;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& e = entries[i];
    if (e.descriptor.size() != dim) {
      throw ShapeError("descriptor " + std::to_string(i) + " has length " +
                       std::to_string(e.descriptor.size()) + ", expected " + std::to_string(dim));
    }
    const int b = e.features ? e.features->bandwidth() : 0;
    if (bandwidth >= 0 && b != bandwidth) throw ShapeError("map entries differ in feature bandwidth");
    bandwidth = b;
    e.id = static_cast<std::uint32_t>(i);
    flat.insert(flat.end(), e.descriptor.begin(), e.descriptor.end());
  }
  PlaceMap map;
  map.entries_ = std::move(entries);
  map.dim_ = dim;
  map.index_ = KdTree<float>(std::move(flat), dim);
  return map;
}

std::vector<float> to_float_descriptor(const Descriptor& d) {
  std::vector<float> out(static_cast<std::size_t>(d.size()));
  for (Eigen::Index i = 0; i < d.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(d[i]);
  return out;
}

std::vector<std::uint8_t> encode_map(const PlaceMap& map) {
  ByteWriter w;
  w.magic("SMAP");
  w.u16(kMapFormatVersion);
  w.u32(static_cast<std::uint32_t>(map.size()));
  w.u16(static_cast<std::uint16_t>(map.descriptor_dim()));
  const int bandwidth =
      map.size() > 0 && map.entry(0).features ? map.entry(0).features->bandwidth() : 0;
  w.u16(static_cast<std::uint16_t>(bandwidth));
  for (const auto& e : map.entries()) {
    w.u32(e.id);
    w.f64(e.pose.translation.x());
    w.f64(e.pose.translation.y());
    w.f64(e.pose.translation.z());
    w.f64(e.pose.rotation.w());
    w.f64(e.pose.rotation.x());
    w.f64(e.pose.rotation.y());
    w.f64(e.pose.rotation.z());
    for (float v : e.descriptor) w.f32(v);
    for (int m = 0; m < kModalityCount; ++m) {
      if (e.features) {
        encode_channel(w, e.features->channels()[m]);
      } else {
        w.u32(0);
      }
    }
  }
  return w.bytes();
}

PlaceMap decode_map(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("SMAP");
  const std::size_t version_at = r.offset();
  const auto version = r.u16();
  if (version != kMapFormatVersion) throw UnsupportedVersion(version, version_at);
  const auto count = r.u32();
  const std::size_t dim = r.u16();
  const std::size_t bandwidth_at = r.offset();
  const int bandwidth = r.u16();
  if (bandwidth > kMaxBandwidth) throw FormatError("bandwidth out of range", bandwidth_at);
  if (count == 0) throw FormatError("map has no entries", version_at + 2);

  std::vector<PlaceEntry> entries;
  entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    PlaceEntry e;
    const std::size_t id_at = r.offset();
    e.id = r.u32();
    if (e.id != i) throw FormatError("map ids must be dense and ordered", id_at);
    const double tx = r.f64(), ty = r.f64(), tz = r.f64();
    const double qw = r.f64(), qx = r.f64(), qy = r.f64(), qz = r.f64();
    e.pose.translation = Vec3(tx, ty, tz);
    e.pose.rotation = Eigen::Quaterniond(qw, qx, qy, qz);
    r.require(dim * 4, "truncated descriptor");
    e.descriptor.resize(dim);
    for (auto& v : e.descriptor) v = r.f32();
    if (bandwidth > 0) {
      std::array<Channel, kModalityCount> channels;
      for (auto& c : channels) c = decode_channel(r, 2 * bandwidth);
      e.features = FeatureSphere(bandwidth, std::move(channels));
    } else {
      for (int m = 0; m < kModalityCount; ++m) {
        const std::size_t at = r.offset();
        if (r.u32() != 0) throw FormatError("channel block present in a feature-less map", at);
      }
    }
    entries.push_back(std::move(e));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after map entries", r.offset());
  return build_map(std::move(entries), dim);
}

void save_map(const PlaceMap& map, const std::filesystem::path& path) {
  write_file_bytes(path, encode_map(map));
}

PlaceMap load_map(const std::filesystem::path& path) { return decode_map(read_file_bytes(path)); }

}  // namespace sphereloc
