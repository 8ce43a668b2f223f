#include "dym/mask/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

namespace dym::mask {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SuperpixelParams resolved(const SuperpixelParams& params, double spacing) {
  SuperpixelParams p = params;
  if (p.spatial_normalizer <= 0.0) p.spatial_normalizer = spacing;
  return p;
}

/// Plurality label of (label -> count) votes; any tie for the top count
/// resolves to the static label 0.
int plurality_label(const std::map<int, int>& votes) {
  int best_label = 0;
  int best_count = 0;
  bool tied = false;
  for (const auto& [label, count] : votes) {
    if (count > best_count) {
      best_label = label;
      best_count = count;
      tied = false;
    } else if (count == best_count) {
      tied = true;
    }
  }
  if (tied || best_count == 0) return 0;
  return best_label;
}

struct Accumulator {
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  double x = 0.0;
  double y = 0.0;
  double depth = 0.0;
  long n = 0;

  void add(const SuperpixelFeature& f) {
    color += f.color;
    x += f.x;
    y += f.y;
    depth += f.depth;
    ++n;
  }
  SuperpixelFeature mean() const {
    const double inv = 1.0 / static_cast<double>(n);
    return {color * inv, x * inv, y * inv, depth * inv};
  }
};

/// Recomputes every center as the exact mean of its members. Returns the
/// member count per superpixel.
std::vector<long> update_centers(const LabelGrid& grid,
                                 const std::vector<int>& assignment,
                                 std::vector<SuperpixelFeature>& centers) {
  std::vector<Accumulator> acc(centers.size());
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      acc[assignment[grid.index(x, y)]].add(pixel_feature(grid, x, y));
    }
  }
  std::vector<long> sizes(centers.size(), 0);
  for (std::size_t i = 0; i < centers.size(); ++i) {
    sizes[i] = acc[i].n;
    if (acc[i].n > 0) centers[i] = acc[i].mean();
  }
  return sizes;
}

void dilate3x3(const BinaryMask& in, BinaryMask& out) {
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      bool v = false;
      for (int dy = -1; dy <= 1 && !v; ++dy) {
        for (int dx = -1; dx <= 1 && !v; ++dx) {
          const int nx = x + dx;
          const int ny = y + dy;
          if (nx >= 0 && nx < in.width && ny >= 0 && ny < in.height) {
            v = in.at(nx, ny);
          }
        }
      }
      out.set(x, y, v);
    }
  }
}

/// Erosion that treats pixels outside the image as set, so a closing does
/// not eat mask area touching the border.
void erode3x3(const BinaryMask& in, BinaryMask& out) {
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      bool v = true;
      for (int dy = -1; dy <= 1 && v; ++dy) {
        for (int dx = -1; dx <= 1 && v; ++dx) {
          const int nx = x + dx;
          const int ny = y + dy;
          if (nx >= 0 && nx < in.width && ny >= 0 && ny < in.height) {
            v = in.at(nx, ny);
          }
        }
      }
      out.set(x, y, v);
    }
  }
}

}  // namespace

void SuperpixelParams::validate() const {
  if (target_count < 1) {
    throw ConfigError("superpixel target_count must be >= 1, got " +
                      std::to_string(target_count));
  }
  if (color_normalizer <= 0.0) {
    throw ConfigError("color_normalizer must be > 0");
  }
  if (spatial_normalizer < 0.0) {
    throw ConfigError("spatial_normalizer must be >= 0 (0 = lattice spacing)");
  }
  if (inv_depth_normalizer <= 0.0) {
    throw ConfigError("inv_depth_normalizer must be > 0");
  }
  if (iterations < 1) {
    throw ConfigError("iterations must be >= 1, got " +
                      std::to_string(iterations));
  }
  if (knn_k < 1) {
    throw ConfigError("knn_k must be >= 1, got " + std::to_string(knn_k));
  }
  if (overlap_threshold <= 0.0 || overlap_threshold > 1.0) {
    throw ConfigError("overlap_threshold must be in (0, 1]");
  }
}

double superpixel_distance(const SuperpixelFeature& a,
                           const SuperpixelFeature& b,
                           const SuperpixelParams& params, bool use_depth) {
  if (params.color_normalizer <= 0.0 || params.spatial_normalizer <= 0.0) {
    throw ConfigError("superpixel_distance needs positive normalizers");
  }
  const double du2 = (a.color - b.color).squaredNorm();
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  double d = du2 / (params.color_normalizer * params.color_normalizer) +
             (dx * dx + dy * dy) /
                 (params.spatial_normalizer * params.spatial_normalizer);
  if (use_depth) {
    if (params.inv_depth_normalizer <= 0.0) {
      throw ConfigError("superpixel_distance needs a positive depth normalizer");
    }
    if (a.depth <= 0.0 || b.depth <= 0.0) {
      throw NonPositiveDepth("superpixel feature depth must be > 0");
    }
    const double dz = 1.0 / a.depth - 1.0 / b.depth;
    d += dz * dz / (params.inv_depth_normalizer * params.inv_depth_normalizer);
  }
  return d;
}

SuperpixelGrid compute_superpixels(const LabelGrid& grid,
                                   const SuperpixelParams& params) {
  params.validate();
  if (grid.width <= 0 || grid.height <= 0) {
    throw ConfigError("cannot cluster an empty grid");
  }
  const std::size_t npix = grid.pixel_count();
  if (static_cast<std::size_t>(params.target_count) > npix) {
    throw ConfigError("superpixel target_count exceeds the pixel count");
  }
  for (double d : grid.depth) {
    if (d <= 0.0) throw NonPositiveDepth("grid depth must be > 0 everywhere");
  }

  const double spacing =
      std::sqrt(static_cast<double>(npix) / params.target_count);
  const SuperpixelParams p = resolved(params, spacing);

  // Seed lattice: round the per-axis count so cells stay near-square.
  const int nx = std::max(1, static_cast<int>(std::lround(grid.width / spacing)));
  const int ny = std::max(1, static_cast<int>(std::lround(grid.height / spacing)));
  const double step_x = static_cast<double>(grid.width) / nx;
  const double step_y = static_cast<double>(grid.height) / ny;

  std::vector<SuperpixelFeature> centers;
  centers.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int sx = std::min(grid.width - 1,
                              static_cast<int>((i + 0.5) * step_x));
      const int sy = std::min(grid.height - 1,
                              static_cast<int>((j + 0.5) * step_y));
      centers.push_back(pixel_feature(grid, sx, sy));
    }
  }

  std::vector<int> assignment(npix, -1);
  std::vector<double> best(npix, kInf);
  const int window = static_cast<int>(std::ceil(2.0 * spacing));

  for (int iter = 0; iter < p.iterations; ++iter) {
    std::fill(best.begin(), best.end(), kInf);
    std::fill(assignment.begin(), assignment.end(), -1);
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const int x0 = std::max(0, static_cast<int>(centers[c].x) - window);
      const int x1 = std::min(grid.width - 1,
                              static_cast<int>(centers[c].x) + window);
      const int y0 = std::max(0, static_cast<int>(centers[c].y) - window);
      const int y1 = std::min(grid.height - 1,
                              static_cast<int>(centers[c].y) + window);
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const std::size_t idx = grid.index(x, y);
          const double d =
              superpixel_distance(pixel_feature(grid, x, y), centers[c], p, true);
          if (d < best[idx]) {
            best[idx] = d;
            assignment[idx] = static_cast<int>(c);
          }
        }
      }
    }
    // Centers drift, so a pixel can fall outside every window; give it the
    // globally nearest center instead of leaving it orphaned.
    for (int y = 0; y < grid.height; ++y) {
      for (int x = 0; x < grid.width; ++x) {
        const std::size_t idx = grid.index(x, y);
        if (assignment[idx] >= 0) continue;
        const SuperpixelFeature f = pixel_feature(grid, x, y);
        double bd = kInf;
        for (std::size_t c = 0; c < centers.size(); ++c) {
          const double d = superpixel_distance(f, centers[c], p, true);
          if (d < bd) {
            bd = d;
            assignment[idx] = static_cast<int>(c);
          }
        }
      }
    }
    update_centers(grid, assignment, centers);
  }

  // Connectivity: keep each superpixel's largest 4-connected component and
  // fold every other fragment into the adjacent superpixel whose center is
  // closest to the fragment's mean feature.
  const int w = grid.width;
  const int h = grid.height;
  std::vector<int> comp(npix, -1);
  std::vector<std::vector<std::size_t>> comp_pixels;
  std::vector<int> comp_owner;
  for (std::size_t start = 0; start < npix; ++start) {
    if (comp[start] >= 0) continue;
    const int id = static_cast<int>(comp_pixels.size());
    const int owner = assignment[start];
    comp_pixels.emplace_back();
    comp_owner.push_back(owner);
    std::vector<std::size_t> stack{start};
    comp[start] = id;
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      comp_pixels[id].push_back(cur);
      const int cx = static_cast<int>(cur % w);
      const int cy = static_cast<int>(cur / w);
      const int nbr_x[4] = {cx - 1, cx + 1, cx, cx};
      const int nbr_y[4] = {cy, cy, cy - 1, cy + 1};
      for (int k = 0; k < 4; ++k) {
        if (nbr_x[k] < 0 || nbr_x[k] >= w || nbr_y[k] < 0 || nbr_y[k] >= h) {
          continue;
        }
        const std::size_t nidx = grid.index(nbr_x[k], nbr_y[k]);
        if (comp[nidx] < 0 && assignment[nidx] == owner) {
          comp[nidx] = id;
          stack.push_back(nidx);
        }
      }
    }
  }

  std::vector<int> main_comp(centers.size(), -1);
  for (std::size_t c = 0; c < comp_pixels.size(); ++c) {
    const int owner = comp_owner[c];
    if (main_comp[owner] < 0 ||
        comp_pixels[c].size() > comp_pixels[main_comp[owner]].size()) {
      main_comp[owner] = static_cast<int>(c);
    }
  }

  std::vector<bool> anchored(comp_pixels.size(), false);
  std::vector<int> orphans;
  for (std::size_t c = 0; c < comp_pixels.size(); ++c) {
    if (main_comp[comp_owner[c]] == static_cast<int>(c)) {
      anchored[c] = true;
    } else {
      orphans.push_back(static_cast<int>(c));
    }
  }

  while (!orphans.empty()) {
    std::vector<int> remaining;
    bool progress = false;
    for (int c : orphans) {
      // Superpixels whose anchored territory touches this fragment. The
      // fragment's own superpixel counts too: other merges may have grown
      // anchored land right up to it, and rejoining is then a no-op
      // reassignment that still anchors the fragment as a bridge.
      std::vector<int> adjacent;
      Accumulator acc;
      for (std::size_t idx : comp_pixels[c]) {
        const int cx = static_cast<int>(idx % w);
        const int cy = static_cast<int>(idx / w);
        acc.add(pixel_feature(grid, cx, cy));
        const int nbr_x[4] = {cx - 1, cx + 1, cx, cx};
        const int nbr_y[4] = {cy, cy, cy - 1, cy + 1};
        for (int k = 0; k < 4; ++k) {
          if (nbr_x[k] < 0 || nbr_x[k] >= w || nbr_y[k] < 0 || nbr_y[k] >= h) {
            continue;
          }
          const std::size_t nidx = grid.index(nbr_x[k], nbr_y[k]);
          if (anchored[comp[nidx]]) {
            adjacent.push_back(assignment[nidx]);
          }
        }
      }
      if (adjacent.empty()) {
        remaining.push_back(c);
        continue;
      }
      std::sort(adjacent.begin(), adjacent.end());
      adjacent.erase(std::unique(adjacent.begin(), adjacent.end()),
                     adjacent.end());
      const SuperpixelFeature f = acc.mean();
      int target = adjacent.front();
      double bd = kInf;
      for (int s : adjacent) {
        const double d = superpixel_distance(f, centers[s], p, true);
        if (d < bd) {
          bd = d;
          target = s;
        }
      }
      for (std::size_t idx : comp_pixels[c]) {
        assignment[idx] = target;
        comp[idx] = main_comp[target];
      }
      anchored[c] = true;  // merged away; no longer blocks neighbors
      progress = true;
    }
    if (!progress) break;  // unreachable on a connected image; stay safe
    orphans = std::move(remaining);
  }

  // Drop empty superpixels and compact the index range.
  std::vector<long> sizes = update_centers(grid, assignment, centers);
  std::vector<int> remap(centers.size(), -1);
  std::vector<SuperpixelFeature> packed;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    if (sizes[c] > 0) {
      remap[c] = static_cast<int>(packed.size());
      packed.push_back(centers[c]);
    }
  }
  for (auto& a : assignment) a = remap[a];

  SuperpixelGrid out;
  out.width = w;
  out.height = h;
  out.assignment = std::move(assignment);
  out.centers = std::move(packed);
  out.spacing = spacing;
  return out;
}

std::vector<int> vote_superpixel_labels(
    const SuperpixelGrid& grid, const std::vector<LabeledFeature>& features,
    const SuperpixelParams& params) {
  params.validate();
  if (grid.count() == 0) throw ConfigError("superpixel grid is empty");
  const SuperpixelParams p = resolved(params, grid.spacing);
  if (p.spatial_normalizer <= 0.0) {
    throw ConfigError("superpixel grid has no resolved spacing");
  }

  const int n = grid.count();
  std::vector<std::map<int, int>> votes(static_cast<std::size_t>(n));
  bool any = false;
  for (const LabeledFeature& f : features) {
    const int x = static_cast<int>(std::lround(f.pixel.x()));
    const int y = static_cast<int>(std::lround(f.pixel.y()));
    if (x < 0 || x >= grid.width || y < 0 || y >= grid.height) continue;
    ++votes[grid.assignment[grid.index(x, y)]][f.label];
    any = true;
  }
  if (!any) throw EmptyScene("no labeled feature lands on the grid");

  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  std::vector<bool> labeled(static_cast<std::size_t>(n), false);
  for (int i = 0; i < n; ++i) {
    if (!votes[i].empty()) {
      labels[i] = plurality_label(votes[i]);
      labeled[i] = true;
    }
  }

  // Precompute each unlabeled superpixel's k nearest peers once; the
  // neighborhoods are fixed, only their labels evolve between rounds.
  const int k = std::min(p.knn_k, n - 1);
  std::vector<std::vector<int>> nearest(static_cast<std::size_t>(n));
  if (k > 0) {
    std::vector<std::pair<double, int>> order;
    for (int i = 0; i < n; ++i) {
      if (labeled[i]) continue;
      order.clear();
      order.reserve(static_cast<std::size_t>(n) - 1);
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        order.emplace_back(
            superpixel_distance(grid.centers[i], grid.centers[j], p, true), j);
      }
      std::partial_sort(order.begin(), order.begin() + k, order.end());
      nearest[i].reserve(static_cast<std::size_t>(k));
      for (int t = 0; t < k; ++t) nearest[i].push_back(order[t].second);
    }
  }

  std::size_t pending = static_cast<std::size_t>(
      std::count(labeled.begin(), labeled.end(), false));
  while (pending > 0) {
    std::vector<int> next_labels = labels;
    std::vector<bool> next_labeled = labeled;
    bool progress = false;
    for (int i = 0; i < n; ++i) {
      if (labeled[i]) continue;
      std::map<int, int> tally;
      for (int j : nearest[i]) {
        if (labeled[j]) ++tally[labels[j]];
      }
      if (tally.empty()) continue;
      next_labels[i] = plurality_label(tally);
      next_labeled[i] = true;
      --pending;
      progress = true;
    }
    labels = std::move(next_labels);
    labeled = std::move(next_labeled);
    if (progress || pending == 0) continue;

    // An island whose k nearest peers are all unlabeled too: copy from the
    // nearest labeled center so the pass always terminates complete.
    for (int i = 0; i < n; ++i) {
      if (labeled[i]) continue;
      double bd = kInf;
      int src = -1;
      for (int j = 0; j < n; ++j) {
        if (!labeled[j] || j == i) continue;
        const double d =
            superpixel_distance(grid.centers[i], grid.centers[j], p, true);
        if (d < bd) {
          bd = d;
          src = j;
        }
      }
      labels[i] = labels[src];
      labeled[i] = true;
    }
    pending = 0;
  }
  return labels;
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(
      std::count_if(data.begin(), data.end(), [](std::uint8_t v) { return v != 0; }));
}

BinaryMask project_model_mask(const std::vector<Eigen::Vector3d>& points,
                              const Pose& model_pose, const Pose& camera_pose,
                              const StereoCamera& cam, double splat_radius_px) {
  cam.validate();
  if (splat_radius_px <= 0.0) {
    throw ConfigError("splat_radius_px must be > 0");
  }
  BinaryMask mask;
  mask.width = cam.image_width;
  mask.height = cam.image_height;
  mask.data.assign(static_cast<std::size_t>(mask.width) * mask.height, 0);

  const Pose to_camera = camera_pose.inverse() * model_pose;
  bool landed = false;
  for (const Eigen::Vector3d& p : points) {
    const Eigen::Vector3d q = to_camera.apply(p);
    if (q.z() <= 0.0) continue;
    const Eigen::Vector2d px = cam.project(q);
    const double r = splat_radius_px / q.z();
    const int x0 = std::max(0, static_cast<int>(std::floor(px.x() - r)));
    const int x1 = std::min(mask.width - 1, static_cast<int>(std::ceil(px.x() + r)));
    const int y0 = std::max(0, static_cast<int>(std::floor(px.y() - r)));
    const int y1 = std::min(mask.height - 1, static_cast<int>(std::ceil(px.y() + r)));
    const double r2 = r * r;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - px.x();
        const double dy = y - px.y();
        if (dx * dx + dy * dy <= r2) {
          mask.set(x, y, true);
          landed = true;
        }
      }
    }
    // A distant point's disk can miss every lattice site; keep at least
    // the pixel under the projection.
    const int cxp = static_cast<int>(std::lround(px.x()));
    const int cyp = static_cast<int>(std::lround(px.y()));
    if (cxp >= 0 && cxp < mask.width && cyp >= 0 && cyp < mask.height) {
      mask.set(cxp, cyp, true);
      landed = true;
    }
  }
  if (!landed) return mask;

  BinaryMask tmp = mask;
  dilate3x3(mask, tmp);
  erode3x3(tmp, mask);
  return mask;
}

std::vector<int> refine_with_projected_mask(
    const SuperpixelGrid& grid, const std::vector<int>& labels,
    const std::map<int, BinaryMask>& masks, double threshold) {
  if (threshold < 0.0 || threshold > 1.0) {
    throw ConfigError("refinement threshold must be in [0, 1]");
  }
  if (labels.size() != static_cast<std::size_t>(grid.count())) {
    throw LengthMismatch("per-superpixel label count does not match the grid");
  }
  for (const auto& [label, m] : masks) {
    if (m.width != grid.width || m.height != grid.height) {
      throw DimensionMismatch("projected mask size differs from the grid");
    }
  }

  std::vector<long> size(labels.size(), 0);
  std::vector<long> overlap(labels.size(), 0);
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const int s = grid.assignment[grid.index(x, y)];
      ++size[s];
      const int label = labels[s];
      if (label <= 0) continue;
      const auto it = masks.find(label);
      if (it != masks.end() && it->second.at(x, y)) ++overlap[s];
    }
  }

  std::vector<int> refined = labels;
  for (std::size_t s = 0; s < refined.size(); ++s) {
    const int label = refined[s];
    if (label <= 0 || masks.find(label) == masks.end()) continue;
    if (static_cast<double>(overlap[s]) < threshold * static_cast<double>(size[s])) {
      refined[s] = 0;
    }
  }
  return refined;
}

LabelMask expand_to_mask(const SuperpixelGrid& grid,
                         const std::vector<int>& labels) {
  if (labels.size() != static_cast<std::size_t>(grid.count())) {
    throw LengthMismatch("per-superpixel label count does not match the grid");
  }
  LabelMask out;
  out.width = grid.width;
  out.height = grid.height;
  out.labels.resize(grid.assignment.size());
  for (std::size_t i = 0; i < grid.assignment.size(); ++i) {
    out.labels[i] = labels[grid.assignment[i]];
  }
  return out;
}

}  // namespace dym::mask
