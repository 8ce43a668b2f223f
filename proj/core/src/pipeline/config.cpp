#include "dym/pipeline/config.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "dym/errors.hpp"
#include "dym/io/formats.hpp"

namespace dym::pipeline {

namespace {

[[noreturn]] void bad_value(const std::string& section, const std::string& key,
                            const std::string& value) {
  throw ConfigError("config key '" + key + "' in section [" + section +
                    "] has invalid value '" + value + "'");
}

double to_double(const std::string& section, const std::string& key,
                 const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    bad_value(section, key, value);
  }
  if (used != value.size() || !std::isfinite(v)) bad_value(section, key, value);
  return v;
}

int to_int(const std::string& section, const std::string& key,
           const std::string& value) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(value, &used);
  } catch (const std::exception&) {
    bad_value(section, key, value);
  }
  if (used != value.size()) bad_value(section, key, value);
  return static_cast<int>(v);
}

std::uint64_t to_seed(const std::string& section, const std::string& key,
                      const std::string& value) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &used);
  } catch (const std::exception&) {
    bad_value(section, key, value);
  }
  if (used != value.size()) bad_value(section, key, value);
  return v;
}

Eigen::Vector3d to_vec3(const std::string& section, const std::string& key,
                        const std::string& value) {
  std::istringstream in(value);
  Eigen::Vector3d v;
  if (!(in >> v.x() >> v.y() >> v.z())) bad_value(section, key, value);
  std::string rest;
  if (in >> rest) bad_value(section, key, value);
  if (!v.allFinite()) bad_value(section, key, value);
  return v;
}

using KeyHandler = std::function<void(const std::string&)>;
using SectionSchema = std::map<std::string, KeyHandler>;
using SectionValues = std::map<std::string, std::string>;

void apply_section(const std::string& section, const SectionValues& values,
                   const SectionSchema& schema) {
  for (const auto& [key, value] : values) {
    auto it = schema.find(key);
    if (it == schema.end()) {
      throw ConfigError("unknown config key '" + key + "' in section [" +
                        section + "]");
    }
    it->second(value);
  }
}

}  // namespace

void ReconstructionParams::validate() const {
  if (!(object_voxel_edge > 0.0) || !(static_voxel_edge > 0.0)) {
    throw ConfigError("voxel edges must be positive");
  }
  if (!(mask_splat_radius_px > 0.0)) {
    throw ConfigError("mask_splat_radius_px must be positive");
  }
}

void PipelineConfig::validate() const {
  segmentation.validate();
  tracker.validate();
  densify.validate();
  reconstruction.validate();
  if (!(segmentation_max_depth > 0.0)) {
    throw ConfigError("max_depth must be positive");
  }
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  const auto sections = io::read_key_value_file(path);
  PipelineConfig cfg;

  for (const auto& [name, values] : sections) {
    if (name.empty()) {
      if (!values.empty()) {
        throw ConfigError("config key '" + values.begin()->first +
                          "' appears before any section");
      }
      continue;
    }
    if (name == "segmentation") {
      auto& p = cfg.segmentation;
      apply_section(name, values,
                    {{"theta", [&](const std::string& v) { p.theta = to_int(name, "theta", v); }},
                     {"lambda", [&](const std::string& v) { p.lambda = to_int(name, "lambda", v); }},
                     {"hypothesis_count", [&](const std::string& v) { p.hypothesis_count = to_int(name, "hypothesis_count", v); }},
                     {"min_cluster_size", [&](const std::string& v) { p.min_cluster_size = to_int(name, "min_cluster_size", v); }},
                     {"refinement_rounds", [&](const std::string& v) { p.refinement_rounds = to_int(name, "refinement_rounds", v); }},
                     {"inlier_threshold", [&](const std::string& v) { p.inlier_threshold = to_double(name, "inlier_threshold", v); }},
                     {"guided_fraction", [&](const std::string& v) { p.guided_fraction = to_double(name, "guided_fraction", v); }},
                     {"max_depth", [&](const std::string& v) { cfg.segmentation_max_depth = to_double(name, "max_depth", v); }},
                     {"seed", [&](const std::string& v) { p.rng_seed = to_seed(name, "seed", v); }}});
    } else if (name == "tracking") {
      auto& p = cfg.tracker;
      apply_section(name, values,
                    {{"window_length", [&](const std::string& v) { p.window_length = to_int(name, "window_length", v); }},
                     {"coast_limit", [&](const std::string& v) { p.coast_limit = to_int(name, "coast_limit", v); }},
                     {"inlier_threshold", [&](const std::string& v) { p.inlier_threshold = to_double(name, "inlier_threshold", v); }},
                     {"ransac_iterations", [&](const std::string& v) { p.ransac_iterations = to_int(name, "ransac_iterations", v); }},
                     {"camera_takeover_ratio", [&](const std::string& v) { p.camera_takeover_ratio = to_double(name, "camera_takeover_ratio", v); }},
                     {"camera_takeover_frames", [&](const std::string& v) { p.camera_takeover_frames = to_int(name, "camera_takeover_frames", v); }},
                     {"seed", [&](const std::string& v) { p.rng_seed = to_seed(name, "seed", v); }}});
    } else if (name == "densify") {
      auto& p = cfg.densify;
      apply_section(name, values,
                    {{"superpixel_count", [&](const std::string& v) { p.target_count = to_int(name, "superpixel_count", v); }},
                     {"color_normalizer", [&](const std::string& v) { p.color_normalizer = to_double(name, "color_normalizer", v); }},
                     {"spatial_normalizer", [&](const std::string& v) { p.spatial_normalizer = to_double(name, "spatial_normalizer", v); }},
                     {"inv_depth_normalizer", [&](const std::string& v) { p.inv_depth_normalizer = to_double(name, "inv_depth_normalizer", v); }},
                     {"iterations", [&](const std::string& v) { p.iterations = to_int(name, "iterations", v); }},
                     {"knn", [&](const std::string& v) { p.knn_k = to_int(name, "knn", v); }},
                     {"overlap_threshold", [&](const std::string& v) { p.overlap_threshold = to_double(name, "overlap_threshold", v); }}});
    } else if (name == "reconstruction") {
      auto& p = cfg.reconstruction;
      apply_section(name, values,
                    {{"object_voxel_edge", [&](const std::string& v) { p.object_voxel_edge = to_double(name, "object_voxel_edge", v); }},
                     {"static_voxel_edge", [&](const std::string& v) { p.static_voxel_edge = to_double(name, "static_voxel_edge", v); }},
                     {"mask_splat_radius_px", [&](const std::string& v) { p.mask_splat_radius_px = to_double(name, "mask_splat_radius_px", v); }}});
    } else {
      throw ConfigError("unknown config section [" + name + "]");
    }
  }

  cfg.validate();
  return cfg;
}

namespace {

/// One parsed trajectory recipe, expanded to per-frame poses once the frame
/// count is known.
struct MotionRecipe {
  std::string kind;  // static | line | spin | rect | orbit
  Eigen::Vector3d start = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d axis = Eigen::Vector3d::UnitY();
  double rate = 0.0;
  double half_x = 0.0;
  double half_z = 0.0;
  double speed = 0.0;
  double radius = 0.0;
  double period = 0.0;

  bool has_kind = false;
};

bool known_motion_kind(const std::string& v) {
  return v == "static" || v == "line" || v == "spin" || v == "rect" ||
         v == "orbit";
}

/// Position along an axis-aligned rectangle in the xz plane, walked at unit
/// parameter speed, starting at the (-half_x, -half_z) corner and moving in
/// +x first. `s` is arc length, wrapped around the perimeter.
Eigen::Vector3d rect_point(double half_x, double half_z, double s) {
  const double w = 2.0 * half_x;
  const double d = 2.0 * half_z;
  const double perimeter = 2.0 * (w + d);
  s = std::fmod(s, perimeter);
  if (s < 0.0) s += perimeter;
  if (s < w) return {-half_x + s, 0.0, -half_z};
  s -= w;
  if (s < d) return {half_x, 0.0, -half_z + s};
  s -= d;
  if (s < w) return {half_x - s, 0.0, half_z};
  s -= w;
  return {-half_x, 0.0, half_z - s};
}

std::vector<Pose> expand_motion(const std::string& section,
                                const MotionRecipe& m, int frame_count) {
  if (!m.has_kind) {
    throw ConfigError("section [" + section + "] is missing key 'kind'");
  }
  std::vector<Pose> traj;
  traj.reserve(static_cast<std::size_t>(frame_count));
  for (int t = 0; t < frame_count; ++t) {
    if (m.kind == "static") {
      traj.push_back(Pose::translate(m.start));
    } else if (m.kind == "line") {
      traj.push_back(Pose::translate(m.start + t * m.velocity));
    } else if (m.kind == "spin") {
      if (m.axis.norm() <= 0.0) bad_value(section, "axis", "zero vector");
      traj.push_back(Pose::translate(m.center) *
                     Pose::from_axis_angle(m.axis.normalized(), m.rate * t));
    } else if (m.kind == "orbit") {
      if (!(m.period > 0.0) || !(m.radius > 0.0)) {
        throw ConfigError("section [" + section +
                          "]: orbit needs positive radius and period");
      }
      const double phase = 2.0 * kPi * t / m.period;
      const Eigen::Vector3d offset{m.radius * std::cos(phase),
                                   m.radius * std::sin(phase), 0.0};
      traj.push_back(Pose::translate(m.start + t * m.velocity + offset));
    } else {  // rect
      if (!(m.half_x > 0.0) || !(m.half_z > 0.0)) {
        throw ConfigError("section [" + section +
                          "]: rect needs positive half_x and half_z");
      }
      traj.push_back(
          Pose::translate(m.center + rect_point(m.half_x, m.half_z,
                                                m.speed * t)));
    }
  }
  return traj;
}

MotionRecipe read_motion(const std::string& section,
                         const SectionValues& values) {
  MotionRecipe m;
  apply_section(
      section, values,
      {{"kind",
        [&](const std::string& v) {
          if (!known_motion_kind(v)) bad_value(section, "kind", v);
          m.kind = v;
          m.has_kind = true;
        }},
       {"start", [&](const std::string& v) { m.start = to_vec3(section, "start", v); }},
       {"velocity", [&](const std::string& v) { m.velocity = to_vec3(section, "velocity", v); }},
       {"center", [&](const std::string& v) { m.center = to_vec3(section, "center", v); }},
       {"axis", [&](const std::string& v) { m.axis = to_vec3(section, "axis", v); }},
       {"rate", [&](const std::string& v) { m.rate = to_double(section, "rate", v); }},
       {"half_x", [&](const std::string& v) { m.half_x = to_double(section, "half_x", v); }},
       {"half_z", [&](const std::string& v) { m.half_z = to_double(section, "half_z", v); }},
       {"speed", [&](const std::string& v) { m.speed = to_double(section, "speed", v); }},
       {"radius", [&](const std::string& v) { m.radius = to_double(section, "radius", v); }},
       {"period", [&](const std::string& v) { m.period = to_double(section, "period", v); }}});
  return m;
}

}  // namespace

sim::SceneSpec load_scene_spec(const std::filesystem::path& path) {
  const auto sections = io::read_key_value_file(path);
  sim::SceneSpec spec;
  spec.camera = StereoCamera{};

  // Frame count has to be known before motions can be expanded, so motion
  // sections are collected first and expanded at the end.
  std::map<std::string, MotionRecipe> motions;  // section name -> recipe
  std::map<int, sim::ObjectSpec> objects;       // object index -> spec

  for (const auto& [name, values] : sections) {
    if (name.empty()) {
      if (!values.empty()) {
        throw ConfigError("scene key '" + values.begin()->first +
                          "' appears before any section");
      }
      continue;
    }
    if (name == "scene") {
      apply_section(
          name, values,
          {{"static_points", [&](const std::string& v) { spec.static_point_count = to_int(name, "static_points", v); }},
           {"bounds_min", [&](const std::string& v) { spec.static_bounds_min = to_vec3(name, "bounds_min", v); }},
           {"bounds_max", [&](const std::string& v) { spec.static_bounds_max = to_vec3(name, "bounds_max", v); }},
           {"frames", [&](const std::string& v) { spec.frame_count = to_int(name, "frames", v); }},
           {"seed", [&](const std::string& v) { spec.rng_seed = to_seed(name, "seed", v); }},
           {"pixel_noise", [&](const std::string& v) { spec.pixel_noise_sigma = to_double(name, "pixel_noise", v); }},
           {"far_plane", [&](const std::string& v) { spec.far_plane = to_double(name, "far_plane", v); }},
           {"grid_scale", [&](const std::string& v) { spec.grid_scale = to_double(name, "grid_scale", v); }}});
    } else if (name == "camera") {
      auto& c = spec.camera;
      apply_section(
          name, values,
          {{"fx", [&](const std::string& v) { c.fx = to_double(name, "fx", v); }},
           {"fy", [&](const std::string& v) { c.fy = to_double(name, "fy", v); }},
           {"cx", [&](const std::string& v) { c.cx = to_double(name, "cx", v); }},
           {"cy", [&](const std::string& v) { c.cy = to_double(name, "cy", v); }},
           {"baseline", [&](const std::string& v) { c.baseline = to_double(name, "baseline", v); }},
           {"width", [&](const std::string& v) { c.image_width = to_int(name, "width", v); }},
           {"height", [&](const std::string& v) { c.image_height = to_int(name, "height", v); }}});
    } else if (name == "camera_motion") {
      motions[name] = read_motion(name, values);
    } else if (name.rfind("object_", 0) == 0) {
      const std::string tail = name.substr(7);
      std::size_t used = 0;
      int index = 0;
      try {
        index = std::stoi(tail, &used);
      } catch (const std::exception&) {
        throw ConfigError("bad object section [" + name + "]");
      }
      if (used != tail.size() || index < 1) {
        throw ConfigError("bad object section [" + name + "]");
      }
      sim::ObjectSpec obj;
      MotionRecipe motion;
      // Object sections mix shape keys and motion keys.
      apply_section(
          name, values,
          {{"shape",
            [&](const std::string& v) {
              if (v == "box") {
                obj.shape = sim::ShapeKind::kBox;
              } else if (v == "cylinder") {
                obj.shape = sim::ShapeKind::kCylinder;
              } else {
                bad_value(name, "shape", v);
              }
            }},
           {"extent", [&](const std::string& v) { obj.extent = to_vec3(name, "extent", v); }},
           {"color", [&](const std::string& v) { obj.base_color = to_vec3(name, "color", v); }},
           {"points", [&](const std::string& v) { obj.point_count = to_int(name, "points", v); }},
           {"kind",
            [&](const std::string& v) {
              if (!known_motion_kind(v)) bad_value(name, "kind", v);
              motion.kind = v;
              motion.has_kind = true;
            }},
           {"start", [&](const std::string& v) { motion.start = to_vec3(name, "start", v); }},
           {"velocity", [&](const std::string& v) { motion.velocity = to_vec3(name, "velocity", v); }},
           {"center", [&](const std::string& v) { motion.center = to_vec3(name, "center", v); }},
           {"axis", [&](const std::string& v) { motion.axis = to_vec3(name, "axis", v); }},
           {"rate", [&](const std::string& v) { motion.rate = to_double(name, "rate", v); }},
           {"half_x", [&](const std::string& v) { motion.half_x = to_double(name, "half_x", v); }},
           {"half_z", [&](const std::string& v) { motion.half_z = to_double(name, "half_z", v); }},
           {"speed", [&](const std::string& v) { motion.speed = to_double(name, "speed", v); }},
           {"radius", [&](const std::string& v) { motion.radius = to_double(name, "radius", v); }},
           {"period", [&](const std::string& v) { motion.period = to_double(name, "period", v); }}});
      motions[name] = motion;
      objects[index] = obj;
    } else {
      throw ConfigError("unknown scene section [" + name + "]");
    }
  }

  if (spec.frame_count < 2) {
    throw ConfigError("scene needs a [scene] section with frames >= 2");
  }
  if (!(spec.far_plane > 0.0) || spec.far_plane > 65.0) {
    throw ConfigError(
        "far_plane must be in (0, 65] so depth images fit 16-bit "
        "millimeters");
  }

  auto cam_motion = motions.find("camera_motion");
  if (cam_motion == motions.end()) {
    throw ConfigError("scene is missing a [camera_motion] section");
  }
  spec.camera_trajectory =
      expand_motion("camera_motion", cam_motion->second, spec.frame_count);

  int expected = 1;
  for (const auto& [index, obj] : objects) {
    if (index != expected) {
      throw ConfigError("object sections must be numbered consecutively "
                        "from object_1");
    }
    ++expected;
    sim::ObjectSpec filled = obj;
    const std::string section = "object_" + std::to_string(index);
    filled.trajectory =
        expand_motion(section, motions.at(section), spec.frame_count);
    spec.objects.push_back(std::move(filled));
  }

  spec.validate();
  return spec;
}

}  // namespace dym::pipeline
