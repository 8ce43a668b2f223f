#include "dym/sim/simulator.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "dym/errors.hpp"

namespace dym::sim {

namespace {

constexpr double kRayEps = 1e-9;
constexpr double kMinDepth = 0.05;

bool checker(const Eigen::Vector3d& p, double cell) {
  const long cx = static_cast<long>(std::floor(p.x() / cell));
  const long cy = static_cast<long>(std::floor(p.y() / cell));
  const long cz = static_cast<long>(std::floor(p.z() / cell));
  return ((cx + cy + cz) & 1L) != 0;
}

Eigen::Vector3d wall_color(const Eigen::Vector3d& p_world, int face_axis) {
  static const Eigen::Vector3d tint[3] = {
      {0.66, 0.52, 0.46}, {0.50, 0.64, 0.50}, {0.50, 0.52, 0.68}};
  return tint[face_axis] * (checker(p_world, 0.5) ? 1.0 : 0.72);
}

Eigen::Vector3d body_color(const Eigen::Vector3d& base,
                           const Eigen::Vector3d& p_obj) {
  const Eigen::Vector3d c = base * (checker(p_obj, 0.1) ? 1.0 : 0.75);
  return c.cwiseMin(1.0).cwiseMax(0.0);
}

struct RayHit {
  double z = std::numeric_limits<double>::infinity();
  int label = 0;
  Eigen::Vector3d color = {0.15, 0.15, 0.18};
};

// Per-frame world geometry with cached inverse object poses.
struct FrameGeom {
  const SceneSpec* spec = nullptr;
  int frame = 0;
  bool has_walls = false;
  std::vector<Pose> world_to_object;

  FrameGeom(const SceneSpec& s, int f) : spec(&s), frame(f) {
    has_walls =
        (s.static_bounds_max.array() > s.static_bounds_min.array()).all();
    world_to_object.reserve(s.objects.size());
    for (const auto& obj : s.objects) {
      world_to_object.push_back(obj.trajectory[f].inverse());
    }
  }
};

void hit_walls(const FrameGeom& g, const Eigen::Vector3d& o,
               const Eigen::Vector3d& d, RayHit* best) {
  const Eigen::Vector3d& lo = g.spec->static_bounds_min;
  const Eigen::Vector3d& hi = g.spec->static_bounds_max;
  for (int axis = 0; axis < 3; ++axis) {
    if (std::abs(d[axis]) < 1e-15) continue;
    for (double bound : {lo[axis], hi[axis]}) {
      const double t = (bound - o[axis]) / d[axis];
      if (t <= kRayEps || t >= best->z) continue;
      const Eigen::Vector3d p = o + t * d;
      const int a1 = (axis + 1) % 3;
      const int a2 = (axis + 2) % 3;
      const double tol = 1e-9;
      if (p[a1] < lo[a1] - tol || p[a1] > hi[a1] + tol) continue;
      if (p[a2] < lo[a2] - tol || p[a2] > hi[a2] + tol) continue;
      best->z = t;
      best->label = 0;
      best->color = wall_color(p, axis);
    }
  }
}

// Ray vs axis-aligned box of half extents h centered at the origin.
// Returns the smallest positive parameter or infinity.
double box_entry(const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                 const Eigen::Vector3d& h) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    if (std::abs(d[axis]) < 1e-15) {
      if (o[axis] < -h[axis] || o[axis] > h[axis]) {
        return std::numeric_limits<double>::infinity();
      }
      continue;
    }
    double ta = (-h[axis] - o[axis]) / d[axis];
    double tb = (h[axis] - o[axis]) / d[axis];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::numeric_limits<double>::infinity();
  }
  if (t1 <= kRayEps) return std::numeric_limits<double>::infinity();
  return t0 > kRayEps ? t0 : t1;
}

// Ray vs upright cylinder (radius r, |z| <= hz), caps included.
double cylinder_entry(const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                      double r, double hz) {
  double best = std::numeric_limits<double>::infinity();
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a > 1e-15) {
    const double b = 2.0 * (o.x() * d.x() + o.y() * d.y());
    const double c = o.x() * o.x() + o.y() * o.y() - r * r;
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
        if (t > kRayEps && t < best && std::abs(o.z() + t * d.z()) <= hz) {
          best = t;
        }
      }
    }
  }
  if (std::abs(d.z()) > 1e-15) {
    for (double zc : {-hz, hz}) {
      const double t = (zc - o.z()) / d.z();
      if (t <= kRayEps || t >= best) continue;
      const double x = o.x() + t * d.x();
      const double y = o.y() + t * d.y();
      if (x * x + y * y <= r * r) best = t;
    }
  }
  return best;
}

// origin/dir in world coordinates; dir scaled so the parameter equals the
// depth in the camera frame (unit z component in camera coordinates).
RayHit cast_ray(const FrameGeom& g, const Eigen::Vector3d& origin,
                const Eigen::Vector3d& dir) {
  RayHit best;
  if (g.has_walls) hit_walls(g, origin, dir, &best);
  for (std::size_t i = 0; i < g.spec->objects.size(); ++i) {
    const auto& obj = g.spec->objects[i];
    const Pose& w2o = g.world_to_object[i];
    const Eigen::Vector3d o = w2o.apply(origin);
    const Eigen::Vector3d d = w2o.rotation_matrix() * dir;
    double t;
    if (obj.shape == ShapeKind::kBox) {
      t = box_entry(o, d, obj.extent * 0.5);
    } else {
      t = cylinder_entry(o, d, obj.extent.x() * 0.5, obj.extent.z() * 0.5);
    }
    if (t < best.z) {
      best.z = t;
      best.label = static_cast<int>(i) + 1;
      best.color = body_color(obj.base_color, o + t * d);
    }
  }
  if (best.z >= g.spec->far_plane) {
    best = RayHit{};
    best.z = g.spec->far_plane;
  }
  return best;
}

Eigen::Vector3d pixel_dir_cam(const StereoCamera& cam,
                              const Eigen::Vector2d& px) {
  return {(px.x() - cam.cx) / cam.fx, (px.y() - cam.cy) / cam.fy, 1.0};
}

std::vector<Point3> sample_aabb_surface(const Eigen::Vector3d& lo,
                                        const Eigen::Vector3d& hi, int n,
                                        std::mt19937_64& rng) {
  const Eigen::Vector3d ext = hi - lo;
  double area[3];   // per axis, one of the two opposing faces
  double cum[6];
  double total = 0.0;
  for (int axis = 0; axis < 3; ++axis) {
    area[axis] = ext[(axis + 1) % 3] * ext[(axis + 2) % 3];
    cum[2 * axis] = total += area[axis];
    cum[2 * axis + 1] = total += area[axis];
  }
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Point3> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double pick = u01(rng) * total;
    int face = 5;
    while (face > 0 && cum[face - 1] > pick) --face;
    const int axis = face / 2;
    const int a1 = (axis + 1) % 3;
    const int a2 = (axis + 2) % 3;
    Point3 p;
    p[axis] = (face % 2 == 0) ? lo[axis] : hi[axis];
    p[a1] = lo[a1] + u01(rng) * ext[a1];
    p[a2] = lo[a2] + u01(rng) * ext[a2];
    pts.push_back(p);
  }
  return pts;
}

std::vector<Point3> sample_box_surface(const Eigen::Vector3d& extent, int n,
                                       std::mt19937_64& rng) {
  const Eigen::Vector3d h = extent * 0.5;
  return sample_aabb_surface(-h, h, n, rng);
}

std::vector<Point3> sample_cylinder_surface(double r, double hz, int n,
                                            std::mt19937_64& rng) {
  const double side_area = 2.0 * kPi * r * (2.0 * hz);
  const double cap_area = kPi * r * r;
  const double total = side_area + 2.0 * cap_area;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Point3> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double pick = u01(rng) * total;
    const double ang = u01(rng) * 2.0 * kPi;
    if (pick < side_area) {
      const double z = -hz + u01(rng) * 2.0 * hz;
      pts.emplace_back(r * std::cos(ang), r * std::sin(ang), z);
    } else {
      const double rr = r * std::sqrt(u01(rng));
      const double z = pick < side_area + cap_area ? -hz : hz;
      pts.emplace_back(rr * std::cos(ang), rr * std::sin(ang), z);
    }
  }
  return pts;
}

struct ScenePoint {
  Point3 p_local;      // world coords for static points, object frame otherwise
  int object = -1;     // -1 static, else object index
  std::int64_t active_track = -1;
};

}  // namespace

void SceneSpec::validate() const {
  if (frame_count < 2) {
    throw ConfigError("scene: frame_count must be >= 2, got " +
                      std::to_string(frame_count));
  }
  if (static_cast<int>(camera_trajectory.size()) != frame_count) {
    throw ConfigError("scene: camera trajectory has " +
                      std::to_string(camera_trajectory.size()) +
                      " poses for " + std::to_string(frame_count) + " frames");
  }
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& obj = objects[i];
    if (static_cast<int>(obj.trajectory.size()) != frame_count) {
      throw ConfigError("scene: object " + std::to_string(i) +
                        " trajectory has " +
                        std::to_string(obj.trajectory.size()) + " poses for " +
                        std::to_string(frame_count) + " frames");
    }
    if (obj.point_count <= 0) {
      throw ConfigError("scene: object " + std::to_string(i) +
                        " needs a positive point count");
    }
    if (!(obj.extent.array() > 0.0).all()) {
      throw ConfigError("scene: object " + std::to_string(i) +
                        " extent must be positive on all axes");
    }
  }
  if (pixel_noise_sigma < 0.0) {
    throw ConfigError("scene: pixel_noise_sigma must be >= 0, got " +
                      std::to_string(pixel_noise_sigma));
  }
  if (static_point_count < 0) {
    throw ConfigError("scene: static_point_count must be >= 0");
  }
  if (static_point_count > 0 &&
      !(static_bounds_max.array() > static_bounds_min.array()).all()) {
    throw ConfigError("scene: static bounds must have positive extent");
  }
  if (!(far_plane > 0.0)) {
    throw ConfigError("scene: far_plane must be positive");
  }
  if (!(grid_scale > 0.0) || grid_scale > 1.0) {
    throw ConfigError("scene: grid_scale must be in (0, 1]");
  }
  camera.validate();
}

std::pair<Eigen::Vector2d, Eigen::Vector2d> project_stereo(
    const StereoCamera& cam, const Pose& camera_pose, const Point3& p_world) {
  const Eigen::Vector3d p_cam = camera_pose.inverse().apply(p_world);
  const Eigen::Vector2d left = cam.project(p_cam);  // throws BehindCamera
  const Eigen::Vector2d right(left.x() - cam.disparity_at(p_cam.z()),
                              left.y());
  if (!cam.in_image(left) || !cam.in_image(right)) {
    throw OutOfImage("stereo projection outside the image");
  }
  return {left, right};
}

LabelGrid render_label_grid(const SceneSpec& spec, int frame) {
  if (frame < 0 || frame >= spec.frame_count) {
    throw ConfigError("render_label_grid: frame " + std::to_string(frame) +
                      " outside [0, " + std::to_string(spec.frame_count) +
                      ")");
  }
  const StereoCamera grid_cam = spec.camera.scaled(spec.grid_scale);
  LabelGrid out;
  out.resize(grid_cam.image_width, grid_cam.image_height);
  const FrameGeom geom(spec, frame);
  const Pose& cam_pose = spec.camera_trajectory[frame];
  const Eigen::Matrix3d rot = cam_pose.rotation_matrix();
  const Eigen::Vector3d origin = cam_pose.translation();
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const Eigen::Vector3d dir =
          rot * pixel_dir_cam(grid_cam, {static_cast<double>(x),
                                         static_cast<double>(y)});
      const RayHit hit = cast_ray(geom, origin, dir);
      const std::size_t i = out.index(x, y);
      out.depth[i] = hit.z;
      out.gt_label[i] = hit.label;
      out.color[i] = hit.color;
    }
  }
  return out;
}

SimulationResult generate_sequence(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.rng_seed);

  std::vector<ScenePoint> points;
  for (const Point3& p : sample_aabb_surface(
           spec.static_bounds_min, spec.static_bounds_max,
           spec.static_point_count, rng)) {
    points.push_back({p, -1, -1});
  }
  for (std::size_t oi = 0; oi < spec.objects.size(); ++oi) {
    const auto& obj = spec.objects[oi];
    std::vector<Point3> pts;
    if (obj.shape == ShapeKind::kBox) {
      pts = sample_box_surface(obj.extent, obj.point_count, rng);
    } else {
      pts = sample_cylinder_surface(obj.extent.x() * 0.5,
                                    obj.extent.z() * 0.5, obj.point_count,
                                    rng);
    }
    for (const Point3& p : pts) {
      points.push_back({p, static_cast<int>(oi), -1});
    }
  }

  std::normal_distribution<double> noise(0.0, spec.pixel_noise_sigma);
  std::int64_t next_track = 0;
  std::size_t total_emitted = 0;

  SimulationResult result;
  result.frames.reserve(spec.frame_count);
  const Pose global_from_world = spec.camera_trajectory.front().inverse();

  for (int f = 0; f < spec.frame_count; ++f) {
    const Pose& cam_pose = spec.camera_trajectory[f];
    const Pose world_to_cam = cam_pose.inverse();
    const Eigen::Matrix3d rot = cam_pose.rotation_matrix();
    const Eigen::Vector3d cam_origin = cam_pose.translation();
    const Eigen::Vector3d right_origin =
        cam_origin + rot * Eigen::Vector3d(spec.camera.baseline, 0.0, 0.0);
    const FrameGeom geom(spec, f);

    FrameObservation obs;
    obs.frame_index = f;
    obs.gt_camera_pose = global_from_world * cam_pose;
    for (const auto& obj : spec.objects) {
      obs.gt_object_poses.push_back(global_from_world * obj.trajectory[f]);
    }

    for (auto& sp : points) {
      const Point3 p_world = sp.object < 0
                                 ? sp.p_local
                                 : spec.objects[sp.object]
                                       .trajectory[f]
                                       .apply(sp.p_local);
      const Eigen::Vector3d p_cam = world_to_cam.apply(p_world);
      bool visible =
          p_cam.z() > kMinDepth && p_cam.z() < spec.far_plane;
      Eigen::Vector2d left = Eigen::Vector2d::Zero();
      Eigen::Vector2d right = Eigen::Vector2d::Zero();
      if (visible) {
        left = spec.camera.project(p_cam);
        right = {left.x() - spec.camera.disparity_at(p_cam.z()), left.y()};
        visible = spec.camera.in_image(left) && spec.camera.in_image(right);
      }
      if (visible) {
        // Occlusion along both view rays, against the analytic surfaces.
        const double tol = 1e-6 * p_cam.z() + 1e-9;
        const Eigen::Vector3d dir_l = rot * pixel_dir_cam(spec.camera, left);
        if (cast_ray(geom, cam_origin, dir_l).z < p_cam.z() - tol) {
          visible = false;
        } else {
          const Eigen::Vector3d dir_r = rot * pixel_dir_cam(spec.camera, right);
          if (cast_ray(geom, right_origin, dir_r).z < p_cam.z() - tol) {
            visible = false;
          }
        }
      }
      if (visible && spec.pixel_noise_sigma > 0.0) {
        left.x() += noise(rng);
        left.y() += noise(rng);
        right.x() += noise(rng);
        right.y() = left.y();
        visible = spec.camera.in_image(left) && spec.camera.in_image(right) &&
                  left.x() - right.x() > 0.0;
      } else if (visible) {
        right.y() = left.y();
      }
      if (visible) {
        TrackObservation t;
        t.track_id = sp.active_track >= 0 ? sp.active_track : next_track++;
        sp.active_track = t.track_id;
        t.left_px = left;
        t.right_px = right;
        t.gt_label = sp.object + 1;
        obs.tracks.push_back(t);
        ++total_emitted;
      } else {
        sp.active_track = -1;
      }
    }
    result.frames.push_back(std::move(obs));
  }

  if (total_emitted == 0) {
    throw EmptyScene("no scene point was ever observed");
  }

  result.grids.reserve(spec.frame_count);
  for (int f = 0; f < spec.frame_count; ++f) {
    result.grids.push_back(render_label_grid(spec, f));
  }
  return result;
}

}  // namespace dym::sim
