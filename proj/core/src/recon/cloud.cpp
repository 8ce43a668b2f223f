#include "dym/recon/cloud.hpp"

#include <cmath>
#include <utility>

namespace dym::recon {

std::size_t VoxelCloud::KeyHash::operator()(const Key& k) const {
  // splitmix64-style mixing of the three lattice coordinates.
  std::uint64_t h = 0x9e3779b97f4a7c15ull;
  for (std::uint64_t v : {static_cast<std::uint64_t>(k.x),
                          static_cast<std::uint64_t>(k.y),
                          static_cast<std::uint64_t>(k.z)}) {
    h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h *= 0xbf58476d1ce4e5b9ull;
    h ^= h >> 31;
  }
  return static_cast<std::size_t>(h);
}

VoxelCloud::VoxelCloud(double voxel_edge, FrameTag tag) : edge_(voxel_edge) {
  if (!(voxel_edge > 0.0)) {
    throw ConfigError("voxel edge must be > 0");
  }
  cloud_.frame = tag;
}

VoxelCloud::Key VoxelCloud::key_of(const Eigen::Vector3d& p) const {
  return {static_cast<std::int64_t>(std::floor(p.x() / edge_)),
          static_cast<std::int64_t>(std::floor(p.y() / edge_)),
          static_cast<std::int64_t>(std::floor(p.z() / edge_))};
}

bool VoxelCloud::insert(const Eigen::Vector3d& point,
                        const Eigen::Vector3d& color) {
  if (!point.allFinite()) {
    throw ConfigError("point coordinates must be finite");
  }
  const Key k = key_of(point);
  auto [it, fresh] = index_.try_emplace(k, cloud_.points.size());
  if (fresh) {
    cloud_.points.push_back(point);
    cloud_.colors.push_back(color);
    hits_.push_back(1);
    return true;
  }
  const std::size_t i = it->second;
  const double n = static_cast<double>(hits_[i]);
  cloud_.colors[i] = (cloud_.colors[i] * n + color) / (n + 1.0);
  ++hits_[i];
  return false;
}

void VoxelCloud::rigid_transform(const Pose& t) {
  PointCloud moved;
  moved.frame = cloud_.frame;
  std::vector<long> moved_hits;
  index_.clear();
  for (std::size_t i = 0; i < cloud_.points.size(); ++i) {
    const Eigen::Vector3d p = t.apply(cloud_.points[i]);
    const Key k = key_of(p);
    auto [it, fresh] = index_.try_emplace(k, moved.points.size());
    if (fresh) {
      moved.points.push_back(p);
      moved.colors.push_back(cloud_.colors[i]);
      moved_hits.push_back(hits_[i]);
    } else {
      // Two voxels collapsed: keep the earlier point, pool the colors.
      const std::size_t j = it->second;
      const double a = static_cast<double>(moved_hits[j]);
      const double b = static_cast<double>(hits_[i]);
      moved.colors[j] = (moved.colors[j] * a + cloud_.colors[i] * b) / (a + b);
      moved_hits[j] += hits_[i];
    }
  }
  cloud_ = std::move(moved);
  hits_ = std::move(moved_hits);
}

void accumulate_static_map(VoxelCloud& map, const LabelGrid& grid,
                           const mask::LabelMask& labels,
                           const Pose& camera_pose, const StereoCamera& cam,
                           double max_depth) {
  if (map.cloud().frame != FrameTag::kGlobal) {
    throw ConfigError("static map must be a global-frame cloud");
  }
  if (labels.width != grid.width || labels.height != grid.height ||
      cam.image_width != grid.width || cam.image_height != grid.height) {
    throw DimensionMismatch("grid, label mask, and camera sizes must agree");
  }
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const std::size_t i = grid.index(x, y);
      if (labels.labels[i] != 0) continue;
      const double z = grid.depth[i];
      if (!(z > 0.0) || z >= max_depth) continue;
      const Eigen::Vector3d p_cam = cam.back_project(
          {static_cast<double>(x), static_cast<double>(y)}, z);
      map.insert(camera_pose.apply(p_cam), grid.color[i]);
    }
  }
}

void stitch_object_model(ObjectModel& model,
                         const std::vector<Eigen::Vector3d>& points_camera,
                         const std::vector<Eigen::Vector3d>& colors,
                         const Pose& ego_increment) {
  if (points_camera.size() != colors.size()) {
    throw LengthMismatch("object points and colors differ in size");
  }
  // Old points sit in the previous frame's camera coordinates; the inverse
  // of the ego increment is the apparent motion that carries them into the
  // current frame.
  model.cloud.rigid_transform(ego_increment.inverse());
  for (std::size_t i = 0; i < points_camera.size(); ++i) {
    model.cloud.insert(points_camera[i], colors[i]);
  }
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (const Eigen::Vector3d& p : model.cloud.cloud().points) sum += p;
  model.gravity_center = model.cloud.size() == 0
                             ? Eigen::Vector3d::Zero()
                             : Eigen::Vector3d(sum / model.cloud.size());
}

}  // namespace dym::recon
