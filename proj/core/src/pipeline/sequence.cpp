#include "dym/pipeline/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "dym/errors.hpp"

namespace dym::pipeline {

namespace {

constexpr char kSequenceHeader[] = "# dymseq v1";
constexpr char kLabelsHeader[] = "# dymlabels v1";
constexpr double kDepthUnit = 0.001;  // one sample step in meters

std::string frame_file_name(const char* stem, int frame, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%06d.%s", stem, frame, ext);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IoFailure("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoFailure("cannot open '" + path.string() + "' for reading");
  return in;
}

void finish_write(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoFailure("write to '" + path.string() + "' failed");
}

[[noreturn]] void line_error(const std::filesystem::path& path, int line,
                             const std::string& what) {
  throw ParseError(path.string(), line, what);
}

}  // namespace

void write_sequence_frame(const std::filesystem::path& path,
                          const FrameFeatures& features) {
  auto out = open_out(path, false);
  out << kSequenceHeader << "\n";
  char buf[192];
  for (const auto& f : features) {
    if (f.gt_label >= 0) {
      std::snprintf(buf, sizeof(buf), "%lld %.6f %.6f %.6f %.6f %d",
                    static_cast<long long>(f.track_id), f.ul, f.vl, f.ur, f.vr,
                    f.gt_label);
    } else {
      std::snprintf(buf, sizeof(buf), "%lld %.6f %.6f %.6f %.6f",
                    static_cast<long long>(f.track_id), f.ul, f.vl, f.ur,
                    f.vr);
    }
    out << buf << "\n";
  }
  finish_write(out, path);
}

FrameFeatures read_sequence_frame(const std::filesystem::path& path) {
  auto in = open_in(path, false);
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError(path.string(), 1, "missing sequence header");
  }
  if (line != kSequenceHeader) {
    if (line.rfind("# dymseq", 0) == 0) {
      throw VersionMismatch("unsupported sequence version '" + line +
                            "' in '" + path.string() + "'");
    }
    line_error(path, 1, "expected '" + std::string(kSequenceHeader) + "'");
  }

  FrameFeatures features;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    StereoFeature f;
    if (!(ls >> f.track_id >> f.ul >> f.vl >> f.ur >> f.vr)) {
      line_error(path, line_no, "expected 'track_id ul vl ur vr [label]'");
    }
    std::string tail;
    if (ls >> tail) {
      std::size_t used = 0;
      try {
        f.gt_label = std::stoi(tail, &used);
      } catch (const std::exception&) {
        line_error(path, line_no, "bad label field '" + tail + "'");
      }
      if (used != tail.size() || f.gt_label < 0) {
        line_error(path, line_no, "bad label field '" + tail + "'");
      }
      if (ls >> tail) line_error(path, line_no, "trailing data");
    } else {
      f.gt_label = -1;
    }
    features.push_back(f);
  }
  return features;
}

namespace {

/// Shared netpbm header reader for "P6"/"P5": returns width, height, maxval.
/// Skips whitespace and `#` comments as the format allows.
void read_pnm_header(std::ifstream& in, const std::filesystem::path& path,
                     const char* magic, int& width, int& height, int& maxval) {
  std::string tag;
  in >> tag;
  if (tag != magic) {
    throw ParseError(path.string(), 1,
                     "expected " + std::string(magic) + " image");
  }
  int fields[3];
  for (int& field : fields) {
    // Comments can appear between any header tokens.
    while (true) {
      in >> std::ws;
      if (in.peek() == '#') {
        std::string comment;
        std::getline(in, comment);
      } else {
        break;
      }
    }
    if (!(in >> field) || field <= 0) {
      throw ParseError(path.string(), 1, "bad image header");
    }
  }
  width = fields[0];
  height = fields[1];
  maxval = fields[2];
  in.get();  // single whitespace byte before the raster
}

}  // namespace

void write_ppm(const std::filesystem::path& path, int width, int height,
               const std::vector<std::uint8_t>& rgb) {
  if (width <= 0 || height <= 0 ||
      rgb.size() != static_cast<std::size_t>(width) * height * 3) {
    throw DimensionMismatch("ppm buffer does not match its dimensions");
  }
  auto out = open_out(path, true);
  out << "P6\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()),
            static_cast<std::streamsize>(rgb.size()));
  finish_write(out, path);
}

void read_ppm(const std::filesystem::path& path, int& width, int& height,
              std::vector<std::uint8_t>& rgb) {
  auto in = open_in(path, true);
  int maxval = 0;
  read_pnm_header(in, path, "P6", width, height, maxval);
  if (maxval != 255) {
    throw ParseError(path.string(), 1, "only 8-bit color images supported");
  }
  rgb.assign(static_cast<std::size_t>(width) * height * 3, 0);
  in.read(reinterpret_cast<char*>(rgb.data()),
          static_cast<std::streamsize>(rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(rgb.size())) {
    throw ParseError(path.string(), 1, "truncated image data");
  }
}

void write_pgm16(const std::filesystem::path& path, int width, int height,
                 const std::vector<std::uint16_t>& values) {
  if (width <= 0 || height <= 0 ||
      values.size() != static_cast<std::size_t>(width) * height) {
    throw DimensionMismatch("pgm buffer does not match its dimensions");
  }
  auto out = open_out(path, true);
  out << "P5\n" << width << " " << height << "\n65535\n";
  std::vector<std::uint8_t> bytes(values.size() * 2);
  for (std::size_t i = 0; i < values.size(); ++i) {
    bytes[2 * i] = static_cast<std::uint8_t>(values[i] >> 8);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(values[i] & 0xff);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  finish_write(out, path);
}

void read_pgm16(const std::filesystem::path& path, int& width, int& height,
                std::vector<std::uint16_t>& values) {
  auto in = open_in(path, true);
  int maxval = 0;
  read_pnm_header(in, path, "P5", width, height, maxval);
  if (maxval != 65535) {
    throw ParseError(path.string(), 1, "only 16-bit grayscale supported");
  }
  const std::size_t count = static_cast<std::size_t>(width) * height;
  std::vector<std::uint8_t> bytes(count * 2);
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw ParseError(path.string(), 1, "truncated image data");
  }
  values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    values[i] = static_cast<std::uint16_t>((bytes[2 * i] << 8) |
                                           bytes[2 * i + 1]);
  }
}

void write_label_grid(const std::filesystem::path& dir, int frame,
                      const LabelGrid& grid) {
  const std::size_t n = grid.pixel_count();
  if (grid.color.size() != n || grid.depth.size() != n ||
      grid.gt_label.size() != n) {
    throw DimensionMismatch("label grid channels disagree in size");
  }

  std::vector<std::uint8_t> rgb(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(grid.color[i](c), 0.0, 1.0);
      rgb[3 * i + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  write_ppm(dir / frame_file_name("color", frame, "ppm"), grid.width,
            grid.height, rgb);

  std::vector<std::uint16_t> depth(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double mm = std::clamp(grid.depth[i] / kDepthUnit, 0.0, 65535.0);
    depth[i] = static_cast<std::uint16_t>(std::llround(mm));
  }
  write_pgm16(dir / frame_file_name("depth", frame, "pgm"), grid.width,
              grid.height, depth);

  std::vector<std::uint16_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = grid.gt_label[i];
    if (label < 0 || label > 65535) {
      throw ConfigError("grid label " + std::to_string(label) +
                        " does not fit the 16-bit label image");
    }
    labels[i] = static_cast<std::uint16_t>(label);
  }
  write_pgm16(dir / frame_file_name("gtlabel", frame, "pgm"), grid.width,
              grid.height, labels);
}

LabelGrid read_label_grid(const std::filesystem::path& dir, int frame) {
  int w = 0, h = 0;
  std::vector<std::uint8_t> rgb;
  read_ppm(dir / frame_file_name("color", frame, "ppm"), w, h, rgb);

  LabelGrid grid;
  grid.resize(w, h);
  for (std::size_t i = 0; i < grid.pixel_count(); ++i) {
    grid.color[i] = {rgb[3 * i] / 255.0, rgb[3 * i + 1] / 255.0,
                     rgb[3 * i + 2] / 255.0};
  }

  int dw = 0, dh = 0;
  std::vector<std::uint16_t> depth;
  read_pgm16(dir / frame_file_name("depth", frame, "pgm"), dw, dh, depth);
  if (dw != w || dh != h) {
    throw DimensionMismatch("depth image size differs from color image");
  }
  for (std::size_t i = 0; i < depth.size(); ++i) {
    grid.depth[i] = depth[i] * kDepthUnit;
  }

  int lw = 0, lh = 0;
  std::vector<std::uint16_t> labels;
  read_pgm16(dir / frame_file_name("gtlabel", frame, "pgm"), lw, lh, labels);
  if (lw != w || lh != h) {
    throw DimensionMismatch("label image size differs from color image");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    grid.gt_label[i] = labels[i];
  }
  return grid;
}

void write_label_mask(const std::filesystem::path& path,
                      const mask::LabelMask& mask) {
  std::vector<std::uint16_t> values(mask.labels.size());
  for (std::size_t i = 0; i < mask.labels.size(); ++i) {
    const int label = mask.labels[i];
    if (label < 0 || label > 65535) {
      throw ConfigError("mask label " + std::to_string(label) +
                        " does not fit the 16-bit label image");
    }
    values[i] = static_cast<std::uint16_t>(label);
  }
  write_pgm16(path, mask.width, mask.height, values);
}

mask::LabelMask read_label_mask(const std::filesystem::path& path) {
  mask::LabelMask mask;
  std::vector<std::uint16_t> values;
  read_pgm16(path, mask.width, mask.height, values);
  mask.labels.assign(values.begin(), values.end());
  return mask;
}

void write_track_labels(const std::filesystem::path& path,
                        const std::map<std::int64_t, int>& labels) {
  auto out = open_out(path, false);
  out << kLabelsHeader << "\n";
  for (const auto& [id, label] : labels) {
    out << id << " " << label << "\n";
  }
  finish_write(out, path);
}

std::map<std::int64_t, int> read_track_labels(
    const std::filesystem::path& path) {
  auto in = open_in(path, false);
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError(path.string(), 1, "missing labels header");
  }
  if (line != kLabelsHeader) {
    if (line.rfind("# dymlabels", 0) == 0) {
      throw VersionMismatch("unsupported labels version '" + line + "' in '" +
                            path.string() + "'");
    }
    line_error(path, 1, "expected '" + std::string(kLabelsHeader) + "'");
  }

  std::map<std::int64_t, int> labels;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::int64_t id = 0;
    int label = 0;
    if (!(ls >> id >> label)) {
      line_error(path, line_no, "expected 'track_id label'");
    }
    std::string tail;
    if (ls >> tail) line_error(path, line_no, "trailing data");
    if (!labels.emplace(id, label).second) {
      line_error(path, line_no, "duplicate track id");
    }
  }
  return labels;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9f", v);
  return buf;
}

double info_double(const std::map<std::string, std::string>& info,
                   const std::filesystem::path& path, const std::string& key) {
  auto it = info.find(key);
  if (it == info.end()) {
    throw ParseError(path.string(), 0, "missing key '" + key + "'");
  }
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw ParseError(path.string(), 0, "bad value for key '" + key + "'");
  }
}

}  // namespace

void write_sequence(const std::filesystem::path& dir,
                    const sim::SceneSpec& spec,
                    const sim::SimulationResult& result) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "frames", ec);
  fs::create_directories(dir / "grids", ec);
  fs::create_directories(dir / "gt", ec);
  if (ec) {
    throw IoFailure("cannot create sequence directory '" + dir.string() +
                    "': " + ec.message());
  }

  const int frame_count = static_cast<int>(result.frames.size());
  io::KeyValues info = {
      {"frame_count", std::to_string(frame_count)},
      {"grid_scale", format_double(spec.grid_scale)},
      {"far_plane", format_double(spec.far_plane)},
      {"pixel_noise", format_double(spec.pixel_noise_sigma)},
      {"seed", std::to_string(spec.rng_seed)},
      {"fx", format_double(spec.camera.fx)},
      {"fy", format_double(spec.camera.fy)},
      {"cx", format_double(spec.camera.cx)},
      {"cy", format_double(spec.camera.cy)},
      {"baseline", format_double(spec.camera.baseline)},
      {"image_width", std::to_string(spec.camera.image_width)},
      {"image_height", std::to_string(spec.camera.image_height)},
  };
  io::write_key_value_file(dir / "sequence_info.txt", info,
                           "stereo sequence description");

  std::vector<double> timestamps(static_cast<std::size_t>(frame_count));
  std::vector<Pose> camera_poses(static_cast<std::size_t>(frame_count));
  std::vector<std::vector<Pose>> object_poses(spec.objects.size());

  for (int f = 0; f < frame_count; ++f) {
    const auto& frame = result.frames[static_cast<std::size_t>(f)];
    FrameFeatures features;
    features.reserve(frame.tracks.size());
    for (const auto& t : frame.tracks) {
      StereoFeature sf;
      sf.track_id = t.track_id;
      sf.ul = t.left_px.x();
      sf.vl = t.left_px.y();
      sf.ur = t.right_px.x();
      sf.vr = t.right_px.y();
      sf.gt_label = t.gt_label;
      features.push_back(sf);
    }
    write_sequence_frame(dir / "frames" / frame_file_name("frame", f, "txt"),
                         features);
    write_label_grid(dir / "grids", f, result.grids[static_cast<std::size_t>(f)]);

    timestamps[static_cast<std::size_t>(f)] = f;
    camera_poses[static_cast<std::size_t>(f)] = frame.gt_camera_pose;
    for (std::size_t i = 0; i < frame.gt_object_poses.size(); ++i) {
      object_poses[i].push_back(frame.gt_object_poses[i]);
    }
  }

  io::write_trajectory(dir / "gt" / "trajectory_camera.txt", timestamps,
                       camera_poses);
  for (std::size_t i = 0; i < object_poses.size(); ++i) {
    const std::string file =
        "trajectory_object_" + std::to_string(i + 1) + ".txt";
    io::write_trajectory(dir / "gt" / file, timestamps, object_poses[i]);
  }
}

SequenceData read_sequence(const std::filesystem::path& dir, bool with_grids) {
  const auto sections = io::read_key_value_file(dir / "sequence_info.txt");
  auto top = sections.find("");
  if (top == sections.end()) {
    throw ParseError((dir / "sequence_info.txt").string(), 0,
                     "empty sequence info");
  }
  const auto& info = top->second;
  const auto info_path = dir / "sequence_info.txt";

  SequenceData seq;
  seq.frame_count = static_cast<int>(info_double(info, info_path, "frame_count"));
  seq.grid_scale = info_double(info, info_path, "grid_scale");
  seq.far_plane = info_double(info, info_path, "far_plane");
  seq.pixel_noise = info_double(info, info_path, "pixel_noise");
  seq.seed = static_cast<std::uint64_t>(info_double(info, info_path, "seed"));
  seq.camera.fx = info_double(info, info_path, "fx");
  seq.camera.fy = info_double(info, info_path, "fy");
  seq.camera.cx = info_double(info, info_path, "cx");
  seq.camera.cy = info_double(info, info_path, "cy");
  seq.camera.baseline = info_double(info, info_path, "baseline");
  seq.camera.image_width =
      static_cast<int>(info_double(info, info_path, "image_width"));
  seq.camera.image_height =
      static_cast<int>(info_double(info, info_path, "image_height"));
  seq.camera.validate();

  if (seq.frame_count < 1) {
    throw ParseError(info_path.string(), 0, "frame_count must be positive");
  }

  seq.frames.reserve(static_cast<std::size_t>(seq.frame_count));
  if (with_grids) seq.grids.reserve(static_cast<std::size_t>(seq.frame_count));
  for (int f = 0; f < seq.frame_count; ++f) {
    seq.frames.push_back(read_sequence_frame(
        dir / "frames" / frame_file_name("frame", f, "txt")));
    if (with_grids) {
      seq.grids.push_back(read_label_grid(dir / "grids", f));
    }
  }

  seq.gt_camera = io::read_trajectory(dir / "gt" / "trajectory_camera.txt");
  if (static_cast<int>(seq.gt_camera.poses.size()) != seq.frame_count) {
    throw DimensionMismatch(
        "ground-truth camera trajectory length does not match frame count");
  }

  for (int label = 1;; ++label) {
    const auto file = dir / "gt" /
        ("trajectory_object_" + std::to_string(label) + ".txt");
    if (!std::filesystem::exists(file)) break;
    seq.gt_objects[label] = io::read_trajectory(file);
  }
  return seq;
}

}  // namespace dym::pipeline
