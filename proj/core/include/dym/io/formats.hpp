#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dym/geometry.hpp"
#include "dym/recon/cloud.hpp"

namespace dym::io {

/// Writes an ASCII point-cloud file (polygon format): a vertex element with
/// x y z at 6 decimal places (meters) and red green blue as 0-255.
/// Throws IoFailure naming the path when the file cannot be written.
void write_ply(const std::filesystem::path& path,
               const recon::PointCloud& cloud);

/// Reads a file written by write_ply. The header must declare exactly the
/// six properties above in order. Throws IoFailure when unreadable and
/// ParseError with the offending line otherwise. The frame tag is not
/// stored in the file; the returned cloud is tagged global.
recon::PointCloud read_ply(const std::filesystem::path& path);

struct TrajectoryFile {
  std::vector<double> timestamps;  // seconds
  std::vector<Pose> poses;
};

/// One line per frame: `timestamp tx ty tz qx qy qz qw`, space-separated,
/// 9 decimal places, quaternion scalar-last. Throws LengthMismatch when
/// the inputs differ in size and IoFailure on write errors.
void write_trajectory(const std::filesystem::path& path,
                      const std::vector<double>& timestamps,
                      const std::vector<Pose>& poses);

/// Throws IoFailure / ParseError. Quaternions are renormalized on read.
TrajectoryFile read_trajectory(const std::filesystem::path& path);

/// Ordered key-value pairs for writing; `#` starts a comment line.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Writes `key = value` lines preceded by a comment header.
void write_key_value_file(const std::filesystem::path& path,
                          const KeyValues& values, const std::string& comment);

/// Parses a key-value file with optional `[section]` headers. Pairs before
/// any section land under "". Duplicate keys within a section and malformed
/// lines raise ParseError; an unreadable file raises IoFailure.
std::map<std::string, std::map<std::string, std::string>> read_key_value_file(
    const std::filesystem::path& path);

}  // namespace dym::io
