#include "sphereloc/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <fstream>
#include <sstream>
#include <string>

#include <toml.hpp>

#include "sphereloc/binary_io.hpp"
#include "sphereloc/errors.hpp"

namespace sphereloc {

std::vector<std::uint8_t> encode_xyzi(const PointCloud& cloud) {
  cloud.validate();
  ByteWriter w;
  w.magic("XYZI");
  w.u32(static_cast<std::uint32_t>(cloud.size()));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    w.f32(static_cast<float>(cloud.points[i].x()));
    w.f32(static_cast<float>(cloud.points[i].y()));
    w.f32(static_cast<float>(cloud.points[i].z()));
    w.f32(static_cast<float>(cloud.intensities[i]));
  }
  return w.bytes();
}

PointCloud decode_xyzi(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("XYZI");
  const auto count = r.u32();
  r.require(static_cast<std::size_t>(count) * 16, "truncated point records");
  PointCloud cloud;
  cloud.points.reserve(count);
  cloud.intensities.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const double x = r.f32(), y = r.f32(), z = r.f32();
    cloud.points.emplace_back(x, y, z);
    cloud.intensities.push_back(r.f32());
  }
  return cloud;
}

void write_xyzi(const std::filesystem::path& path, const PointCloud& cloud) {
  write_file_bytes(path, encode_xyzi(cloud));
}

PointCloud read_xyzi(const std::filesystem::path& path) { return decode_xyzi(read_file_bytes(path)); }

void write_pgm(const std::filesystem::path& path, const GrayImage& image, int maxval) {
  if (maxval < 1 || maxval > 65535) throw InvalidParameter("PGM maxval must lie in [1, 65535]");
  std::ostringstream header;
  header << "P5\n" << image.width << ' ' << image.height << '\n' << maxval << '\n';
  const std::string h = header.str();
  std::vector<std::uint8_t> bytes(h.begin(), h.end());
  for (double v : image.pixels) {
    const auto q = static_cast<std::uint32_t>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
    if (maxval < 256) {
      bytes.push_back(static_cast<std::uint8_t>(q));
    } else {
      bytes.push_back(static_cast<std::uint8_t>(q >> 8));  // PGM samples are big-endian
      bytes.push_back(static_cast<std::uint8_t>(q & 0xff));
    }
  }
  write_file_bytes(path, bytes);
}

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> long {
    skip_space();
    const std::size_t start = pos;
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) v = v * 10 + (bytes[pos++] - '0');
    if (pos == start) throw FormatError("malformed PGM header", pos);
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw FormatError("not a binary PGM (P5)", 0);
  pos = 2;
  const long w = read_int();
  const long h = read_int();
  const long maxval = read_int();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw FormatError("invalid PGM header values", pos);
  ++pos;  // single whitespace before raster
  const std::size_t bps = maxval < 256 ? 1 : 2;
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * bps;
  if (bytes.size() < pos + need) throw FormatError("truncated PGM raster", bytes.size());
  GrayImage img(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const std::size_t at = pos + i * bps;
    const unsigned v = bps == 1 ? bytes[at] : (static_cast<unsigned>(bytes[at]) << 8) | bytes[at + 1];
    img.pixels[i] = static_cast<double>(v) / static_cast<double>(maxval);
  }
  return img;
}

GrayImage read_pgm(const std::filesystem::path& path) { return decode_pgm(read_file_bytes(path)); }

namespace {

std::runtime_error rig_error(const std::string& key) {
  return std::runtime_error("rig file: missing or invalid key '" + key + "'");
}

double number(const toml::node_view<const toml::node>& node, const std::string& key) {
  if (auto v = node.value<double>()) return *v;
  throw rig_error(key);
}

RigidTransform read_transform(const toml::table& t, const std::string& where) {
  const auto* trans = t["translation"].as_array();
  const auto* rot = t["rotation"].as_array();
  if (!trans || trans->size() != 3) throw rig_error(where + ".translation");
  if (!rot || rot->size() != 4) throw rig_error(where + ".rotation");
  RigidTransform out;
  for (int i = 0; i < 3; ++i) {
    auto v = (*trans)[static_cast<std::size_t>(i)].value<double>();
    if (!v) throw rig_error(where + ".translation");
    out.translation[i] = *v;
  }
  double q[4];
  for (int i = 0; i < 4; ++i) {
    auto v = (*rot)[static_cast<std::size_t>(i)].value<double>();
    if (!v) throw rig_error(where + ".rotation");
    q[i] = *v;
  }
  out.rotation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
  if (std::abs(out.rotation.norm() - 1.0) > 1e-6) throw rig_error(where + ".rotation (not unit)");
  out.rotation.normalize();
  return out;
}

toml::array vec_array(const Vec3& v) { return toml::array{v.x(), v.y(), v.z()}; }
toml::array quat_array(const Eigen::Quaterniond& q) { return toml::array{q.w(), q.x(), q.y(), q.z()}; }

}  // namespace

SensorRig read_rig(const std::filesystem::path& path) {
  toml::table root;
  try {
    root = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    throw std::runtime_error("rig file: " + std::string(e.description()));
  }
  SensorRig rig;
  if (const auto* lidar = root["lidar"].as_table()) {
    rig.lidar_extrinsic = read_transform(*lidar, "lidar");
    rig.lidar.beams = static_cast<int>((*lidar)["beams"].value_or<std::int64_t>(rig.lidar.beams));
    rig.lidar.points_per_ring =
        static_cast<int>((*lidar)["points_per_ring"].value_or<std::int64_t>(rig.lidar.points_per_ring));
    rig.lidar.max_range = (*lidar)["max_range"].value_or(rig.lidar.max_range);
    rig.lidar.half_fov = (*lidar)["half_fov_deg"].value_or(
                             LidarModel::default_half_fov(rig.lidar.beams) * 180.0 / std::numbers::pi) *
                         std::numbers::pi / 180.0;
  } else {
    throw rig_error("lidar");
  }
  if (const auto* cams = root["cameras"].as_array()) {
    for (std::size_t i = 0; i < cams->size(); ++i) {
      const auto* t = (*cams)[i].as_table();
      const std::string where = "cameras[" + std::to_string(i) + "]";
      if (!t) throw rig_error(where);
      CameraModel c;
      c.name = (*t)["name"].value_or(std::string("cam") + std::to_string(i));
      c.extrinsic = read_transform(*t, where);
      c.intrinsics.fx = number((*t)["fx"], where + ".fx");
      c.intrinsics.fy = number((*t)["fy"], where + ".fy");
      c.intrinsics.cx = number((*t)["cx"], where + ".cx");
      c.intrinsics.cy = number((*t)["cy"], where + ".cy");
      auto w = (*t)["width"].value<std::int64_t>();
      auto h = (*t)["height"].value<std::int64_t>();
      if (!w || *w <= 0) throw rig_error(where + ".width");
      if (!h || *h <= 0) throw rig_error(where + ".height");
      if (!(c.intrinsics.fx > 0) || !(c.intrinsics.fy > 0)) throw rig_error(where + ".fx/fy");
      c.intrinsics.width = static_cast<int>(*w);
      c.intrinsics.height = static_cast<int>(*h);
      rig.cameras.push_back(std::move(c));
    }
  }
  return rig;
}

void write_rig(const std::filesystem::path& path, const SensorRig& rig) {
  toml::table root;
  root.insert("lidar", toml::table{
                           {"translation", vec_array(rig.lidar_extrinsic.translation)},
                           {"rotation", quat_array(rig.lidar_extrinsic.rotation)},
                           {"beams", rig.lidar.beams},
                           {"points_per_ring", rig.lidar.points_per_ring},
                           {"max_range", rig.lidar.max_range},
                           {"half_fov_deg", rig.lidar.half_fov * 180.0 / std::numbers::pi},
                       });
  toml::array cams;
  for (const auto& c : rig.cameras) {
    cams.push_back(toml::table{
        {"name", c.name},
        {"translation", vec_array(c.extrinsic.translation)},
        {"rotation", quat_array(c.extrinsic.rotation)},
        {"fx", c.intrinsics.fx},
        {"fy", c.intrinsics.fy},
        {"cx", c.intrinsics.cx},
        {"cy", c.intrinsics.cy},
        {"width", c.intrinsics.width},
        {"height", c.intrinsics.height},
    });
  }
  root.insert("cameras", std::move(cams));
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << root << '\n';
}

std::vector<TimedPose> read_tum(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<TimedPose> poses;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    double t, x, y, z, qx, qy, qz, qw;
    if (!(ss >> t >> x >> y >> z >> qx >> qy >> qz >> qw)) {
      throw FormatError("malformed TUM pose line", line_start);
    }
    TimedPose p;
    p.timestamp = t;
    p.pose.translation = Vec3(x, y, z);
    p.pose.rotation = Eigen::Quaterniond(qw, qx, qy, qz).normalized();
    poses.push_back(p);
  }
  return poses;
}

void write_tum(const std::filesystem::path& path, std::span<const TimedPose> poses) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "# timestamp tx ty tz qx qy qz qw\n";
  for (const auto& p : poses) {
    const auto& q = p.pose.rotation;
    const auto& t = p.pose.translation;
    out << p.timestamp << ' ' << t.x() << ' ' << t.y() << ' ' << t.z() << ' ' << q.x() << ' ' << q.y()
        << ' ' << q.z() << ' ' << q.w() << '\n';
  }
}

}  // namespace sphereloc
