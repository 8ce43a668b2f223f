#include "dym/io/formats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dym/errors.hpp"

namespace dym::io {

namespace {

int color_byte(double channel) {
  const long v = std::lround(std::clamp(channel, 0.0, 1.0) * 255.0);
  return static_cast<int>(v);
}

/// Next meaningful line (skipping blanks); returns false at EOF.
bool next_line(std::istream& in, std::string& line, std::size_t& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) return true;
  }
  return false;
}

std::string trimmed(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace

void write_ply(const std::filesystem::path& path,
               const recon::PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot open for writing: " + path.string());
  out << "ply\n"
      << "format ascii 1.0\n"
      << "element vertex " << cloud.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "end_header\n";
  char line[128];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    const auto& c = cloud.colors[i];
    std::snprintf(line, sizeof(line), "%.6f %.6f %.6f %d %d %d\n", p.x(),
                  p.y(), p.z(), color_byte(c.x()), color_byte(c.y()),
                  color_byte(c.z()));
    out << line;
  }
  out.flush();
  if (!out) throw IoFailure("write failed: " + path.string());
}

recon::PointCloud read_ply(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open: " + path.string());
  std::string line;
  std::size_t line_no = 0;

  if (!next_line(in, line, line_no) || trimmed(line) != "ply") {
    throw ParseError(path.string(), line_no, "expected 'ply' magic");
  }
  if (!next_line(in, line, line_no) || trimmed(line) != "format ascii 1.0") {
    throw ParseError(path.string(), line_no, "expected 'format ascii 1.0'");
  }

  std::size_t vertex_count = 0;
  bool have_count = false;
  // Expected property declarations, in order.
  const char* expected[] = {"property float x",  "property float y",
                            "property float z",  "property uchar red",
                            "property uchar green", "property uchar blue"};
  std::size_t prop = 0;
  for (;;) {
    if (!next_line(in, line, line_no)) {
      throw ParseError(path.string(), line_no, "unterminated header");
    }
    const std::string t = trimmed(line);
    if (t.rfind("comment", 0) == 0) continue;
    if (t == "end_header") break;
    if (t.rfind("element vertex ", 0) == 0) {
      try {
        vertex_count = std::stoul(t.substr(15));
      } catch (const std::exception&) {
        throw ParseError(path.string(), line_no, "bad vertex count");
      }
      have_count = true;
      continue;
    }
    if (prop < 6 && t == expected[prop]) {
      ++prop;
      continue;
    }
    throw ParseError(path.string(), line_no, "unexpected header line: " + t);
  }
  if (!have_count) {
    throw ParseError(path.string(), line_no, "missing 'element vertex'");
  }
  if (prop != 6) {
    throw ParseError(path.string(), line_no,
                     "vertex element must carry x y z red green blue");
  }

  recon::PointCloud cloud;
  cloud.points.reserve(vertex_count);
  cloud.colors.reserve(vertex_count);
  for (std::size_t i = 0; i < vertex_count; ++i) {
    if (!next_line(in, line, line_no)) {
      throw ParseError(path.string(), line_no, "fewer vertices than declared");
    }
    std::istringstream fields(line);
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    int r = 0;
    int g = 0;
    int b = 0;
    if (!(fields >> x >> y >> z >> r >> g >> b)) {
      throw ParseError(path.string(), line_no, "malformed vertex line");
    }
    std::string rest;
    if (fields >> rest) {
      throw ParseError(path.string(), line_no, "trailing data on vertex line");
    }
    cloud.points.emplace_back(x, y, z);
    cloud.colors.emplace_back(r / 255.0, g / 255.0, b / 255.0);
  }
  if (next_line(in, line, line_no)) {
    throw ParseError(path.string(), line_no, "more vertices than declared");
  }
  return cloud;
}

void write_trajectory(const std::filesystem::path& path,
                      const std::vector<double>& timestamps,
                      const std::vector<Pose>& poses) {
  if (timestamps.size() != poses.size()) {
    throw LengthMismatch("timestamps and poses differ in size");
  }
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot open for writing: " + path.string());
  char line[256];
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const auto& t = poses[i].translation();
    const auto& q = poses[i].rotation();
    std::snprintf(line, sizeof(line),
                  "%.9f %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n", timestamps[i],
                  t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w());
    out << line;
  }
  out.flush();
  if (!out) throw IoFailure("write failed: " + path.string());
}

TrajectoryFile read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open: " + path.string());
  TrajectoryFile out;
  std::string line;
  std::size_t line_no = 0;
  while (next_line(in, line, line_no)) {
    std::istringstream fields(line);
    double ts = 0.0;
    double tx = 0.0;
    double ty = 0.0;
    double tz = 0.0;
    double qx = 0.0;
    double qy = 0.0;
    double qz = 0.0;
    double qw = 0.0;
    if (!(fields >> ts >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
      throw ParseError(path.string(), line_no, "malformed trajectory line");
    }
    std::string rest;
    if (fields >> rest) {
      throw ParseError(path.string(), line_no, "trailing data on line");
    }
    const Eigen::Quaterniond q(qw, qx, qy, qz);
    if (q.norm() < 1e-9) {
      throw ParseError(path.string(), line_no, "zero quaternion");
    }
    out.timestamps.push_back(ts);
    out.poses.emplace_back(q, Eigen::Vector3d(tx, ty, tz));
  }
  return out;
}

void write_key_value_file(const std::filesystem::path& path,
                          const KeyValues& values,
                          const std::string& comment) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot open for writing: " + path.string());
  if (!comment.empty()) out << "# " << comment << "\n";
  for (const auto& [key, value] : values) out << key << " = " << value << "\n";
  out.flush();
  if (!out) throw IoFailure("write failed: " + path.string());
}

std::map<std::string, std::map<std::string, std::string>> read_key_value_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open: " + path.string());
  std::map<std::string, std::map<std::string, std::string>> out;
  std::string section;
  std::string line;
  std::size_t line_no = 0;
  while (next_line(in, line, line_no)) {
    const std::string t = trimmed(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) {
        throw ParseError(path.string(), line_no, "malformed section header");
      }
      section = trimmed(t.substr(1, t.size() - 2));
      if (section.empty()) {
        throw ParseError(path.string(), line_no, "empty section name");
      }
      out[section];  // a section may legitimately stay empty
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ParseError(path.string(), line_no, "expected 'key = value'");
    }
    const std::string key = trimmed(t.substr(0, eq));
    const std::string value = trimmed(t.substr(eq + 1));
    if (key.empty()) {
      throw ParseError(path.string(), line_no, "empty key");
    }
    if (!out[section].emplace(key, value).second) {
      throw ParseError(path.string(), line_no, "duplicate key: " + key);
    }
  }
  return out;
}

}  // namespace dym::io
