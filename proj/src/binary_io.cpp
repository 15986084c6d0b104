#include "sphereloc/binary_io.hpp"

#include <fstream>
#include <iterator>

namespace sphereloc {

void ByteWriter::patch_u32(std::size_t offset, std::uint32_t v) {
  for (std::size_t i = 0; i < 4; ++i) {
    bytes_.at(offset + i) = static_cast<std::uint8_t>(v >> (8 * i));
  }
}

void ByteReader::require(std::size_t n, const char* what) const {
  if (remaining() < n) throw FormatError(what, offset_);
}

void ByteReader::expect_magic(std::string_view tag) {
  require(tag.size(), "truncated magic");
  for (std::size_t i = 0; i < tag.size(); ++i) {
    if (bytes_[offset_ + i] != static_cast<std::uint8_t>(tag[i])) {
      throw FormatError("bad magic, expected '" + std::string(tag) + "'", offset_ + i);
    }
  }
  offset_ += tag.size();
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

bool file_has_magic(const std::filesystem::path& path, std::string_view tag) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::string head(tag.size(), '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  return in.gcount() == static_cast<std::streamsize>(tag.size()) && head == tag;
}

}  // namespace sphereloc
