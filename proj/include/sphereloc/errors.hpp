#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sphereloc {

/// A parameter lies outside the documented domain of an operation.
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Array shapes, bandwidths or dimensions of two operands disagree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A binary or text file could not be decoded. Carries the byte offset at
/// which decoding failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class UnsupportedVersion : public FormatError {
 public:
  UnsupportedVersion(unsigned version, std::uint64_t offset)
      : FormatError("unsupported format version " + std::to_string(version), offset),
        version_(version) {}

  unsigned version() const noexcept { return version_; }

 private:
  unsigned version_;
};

}  // namespace sphereloc
