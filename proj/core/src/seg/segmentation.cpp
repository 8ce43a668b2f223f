#include "dym/seg/segmentation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <queue>
#include <random>
#include <string>

#include "dym/alignment.hpp"
#include "dym/errors.hpp"
#include "dym/ransac.hpp"

namespace dym::seg {

namespace {

constexpr double kDegenerateResidualRange = 1e-9;  // meters
constexpr int kProximityNeighbors = 15;
constexpr int kRefitIterations = 500;
constexpr double kMergeRotationRad = 1.0 * kPi / 180.0;

// Nearest neighbors of every pair's previous-frame point, used to bias
// minimal samples toward spatially coherent triples.
std::vector<std::vector<int>> build_neighbor_table(
    const std::vector<Correspondence3D>& pairs) {
  const int n = static_cast<int>(pairs.size());
  const int k = std::min(kProximityNeighbors, n - 1);
  std::vector<std::vector<int>> table(n);
  std::vector<std::pair<double, int>> dist(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      dist[j] = {(pairs[i].p_prev - pairs[j].p_prev).squaredNorm(), j};
    }
    dist[i].first = std::numeric_limits<double>::infinity();
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    table[i].reserve(k);
    for (int j = 0; j < k; ++j) table[i].push_back(dist[j].second);
  }
  return table;
}

double jaccard_distance(const std::uint64_t* a, const std::uint64_t* b,
                        int words) {
  int inter = 0;
  int uni = 0;
  for (int w = 0; w < words; ++w) {
    inter += std::popcount(a[w] & b[w]);
    uni += std::popcount(a[w] | b[w]);
  }
  if (uni == 0) return 1.0;
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

ClusterSet finalize_clusters(std::vector<std::vector<int>> groups,
                             std::vector<int> unassigned,
                             int min_cluster_size) {
  ClusterSet out;
  for (auto& g : groups) {
    std::sort(g.begin(), g.end());
    if (static_cast<int>(g.size()) >= min_cluster_size) {
      out.clusters.push_back(std::move(g));
    } else {
      unassigned.insert(unassigned.end(), g.begin(), g.end());
    }
  }
  std::sort(out.clusters.begin(), out.clusters.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  std::sort(unassigned.begin(), unassigned.end());
  out.unassigned = std::move(unassigned);
  return out;
}

// Connected components of the "supports intersect" graph. Equivalent to
// single linkage with the stop-at-distance-1 rule.
ClusterSet cluster_single(const BitMatrix& support,
                          const std::vector<int>& live,
                          std::vector<int> unassigned, int min_cluster_size) {
  const int words = support.words_per_row();
  UnionFind uf(static_cast<int>(live.size()));
  for (std::size_t a = 0; a < live.size(); ++a) {
    const std::uint64_t* ra = support.row(live[a]);
    for (std::size_t b = a + 1; b < live.size(); ++b) {
      if (uf.find(static_cast<int>(a)) == uf.find(static_cast<int>(b))) {
        continue;
      }
      const std::uint64_t* rb = support.row(live[b]);
      for (int w = 0; w < words; ++w) {
        if (ra[w] & rb[w]) {
          uf.unite(static_cast<int>(a), static_cast<int>(b));
          break;
        }
      }
    }
  }
  std::vector<std::vector<int>> groups(live.size());
  for (std::size_t a = 0; a < live.size(); ++a) {
    groups[uf.find(static_cast<int>(a))].push_back(live[a]);
  }
  groups.erase(std::remove_if(groups.begin(), groups.end(),
                              [](const auto& g) { return g.empty(); }),
               groups.end());
  return finalize_clusters(std::move(groups), std::move(unassigned),
                           min_cluster_size);
}

// Agglomerative merging where a cluster's preference is the intersection of
// its members' supports; the closest pair (lowest indices on ties) merges
// first, until every remaining pair is disjoint.
ClusterSet cluster_intersection(const BitMatrix& support,
                                const std::vector<int>& live,
                                std::vector<int> unassigned,
                                int min_cluster_size) {
  const int words = support.words_per_row();
  const int n = static_cast<int>(live.size());

  std::vector<std::vector<std::uint64_t>> pref(n);
  std::vector<std::vector<int>> members(n);
  std::vector<int> version(n, 0);
  std::vector<bool> alive(n, true);
  for (int i = 0; i < n; ++i) {
    pref[i].assign(support.row(live[i]), support.row(live[i]) + words);
    members[i] = {live[i]};
  }

  struct Edge {
    double dist;
    int a, b;
    int va, vb;
  };
  auto worse = [](const Edge& x, const Edge& y) {
    if (x.dist != y.dist) return x.dist > y.dist;
    if (x.a != y.a) return x.a > y.a;
    return x.b > y.b;
  };
  std::priority_queue<Edge, std::vector<Edge>, decltype(worse)> heap(worse);

  auto push_edges_from = [&](int a) {
    for (int b = 0; b < n; ++b) {
      if (b == a || !alive[b]) continue;
      const double d =
          jaccard_distance(pref[a].data(), pref[b].data(), words);
      if (d < 1.0) {
        heap.push({d, std::min(a, b), std::max(a, b), version[std::min(a, b)],
                   version[std::max(a, b)]});
      }
    }
  };
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      const double d =
          jaccard_distance(pref[a].data(), pref[b].data(), words);
      if (d < 1.0) heap.push({d, a, b, 0, 0});
    }
  }

  while (!heap.empty()) {
    const Edge e = heap.top();
    heap.pop();
    if (!alive[e.a] || !alive[e.b] || version[e.a] != e.va ||
        version[e.b] != e.vb) {
      continue;  // stale entry
    }
    for (int w = 0; w < words; ++w) pref[e.a][w] &= pref[e.b][w];
    members[e.a].insert(members[e.a].end(), members[e.b].begin(),
                        members[e.b].end());
    alive[e.b] = false;
    ++version[e.a];
    push_edges_from(e.a);
  }

  std::vector<std::vector<int>> groups;
  for (int i = 0; i < n; ++i) {
    if (alive[i]) groups.push_back(std::move(members[i]));
  }
  return finalize_clusters(std::move(groups), std::move(unassigned),
                           min_cluster_size);
}

}  // namespace

void SegmentationParams::validate() const {
  if (theta < 100 || theta > 800) {
    throw ConfigError("segmentation: theta must be in [100, 800], got " +
                      std::to_string(theta));
  }
  if (lambda < 1 || lambda > 50) {
    throw ConfigError("segmentation: lambda must be in [1, 50], got " +
                      std::to_string(lambda));
  }
  if (min_cluster_size < 3) {
    throw ConfigError("segmentation: min_cluster_size must be >= 3, got " +
                      std::to_string(min_cluster_size));
  }
  if (hypothesis_count < 1) {
    throw ConfigError("segmentation: hypothesis_count must be >= 1");
  }
  if (refinement_rounds < 1) {
    throw ConfigError("segmentation: refinement_rounds must be >= 1");
  }
  if (!(inlier_threshold > 0.0)) {
    throw ConfigError("segmentation: inlier_threshold must be positive");
  }
  if (guided_fraction < 0.0 || guided_fraction > 1.0) {
    throw ConfigError("segmentation: guided_fraction must be in [0, 1]");
  }
}

std::vector<Pose> sample_hypotheses(const std::vector<Correspondence3D>& pairs,
                                    int count, const ClusterSet* guidance,
                                    std::uint64_t seed,
                                    double guided_fraction) {
  const int n = static_cast<int>(pairs.size());
  if (n < 3) {
    throw DegenerateGeometry("hypothesis sampling needs 3 pairs, got " +
                             std::to_string(n));
  }
  if (count < 1) {
    throw ConfigError("hypothesis count must be >= 1, got " +
                      std::to_string(count));
  }

  std::vector<const std::vector<int>*> guide_clusters;
  std::vector<double> guide_cumulative;
  if (guidance != nullptr) {
    double total = 0.0;
    for (const auto& c : guidance->clusters) {
      if (c.size() >= 3) {
        guide_clusters.push_back(&c);
        total += static_cast<double>(c.size());
        guide_cumulative.push_back(total);
      }
    }
  }

  const auto neighbors = build_neighbor_table(pairs);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<int> pick_any(0, n - 1);

  std::vector<Pose> hypotheses;
  hypotheses.reserve(count);
  const int max_attempts = std::max(200, 20 * count);
  for (int attempt = 0;
       attempt < max_attempts && static_cast<int>(hypotheses.size()) < count;
       ++attempt) {
    int idx[3];
    if (!guide_clusters.empty() && u01(rng) < guided_fraction) {
      const double pick = u01(rng) * guide_cumulative.back();
      std::size_t c = 0;
      while (guide_cumulative[c] <= pick &&
             c + 1 < guide_cumulative.size()) {
        ++c;
      }
      const auto& cluster = *guide_clusters[c];
      std::uniform_int_distribution<int> pick_member(
          0, static_cast<int>(cluster.size()) - 1);
      idx[0] = cluster[pick_member(rng)];
      do {
        idx[1] = cluster[pick_member(rng)];
      } while (idx[1] == idx[0]);
      do {
        idx[2] = cluster[pick_member(rng)];
      } while (idx[2] == idx[0] || idx[2] == idx[1]);
    } else {
      idx[0] = pick_any(rng);
      const auto& near = neighbors[idx[0]];
      std::uniform_int_distribution<int> pick_near(
          0, static_cast<int>(near.size()) - 1);
      idx[1] = near[pick_near(rng)];
      do {
        idx[2] = near[pick_near(rng)];
      } while (idx[2] == idx[1]);
    }
    try {
      hypotheses.push_back(estimate_rigid_alignment(
          {pairs[idx[0]], pairs[idx[1]], pairs[idx[2]]}));
    } catch (const DegenerateGeometry&) {
      // skip collinear samples
    }
  }

  if (2 * static_cast<int>(hypotheses.size()) < count) {
    throw InsufficientHypotheses(
        "only " + std::to_string(hypotheses.size()) + " of " +
        std::to_string(count) + " hypotheses could be fit");
  }
  return hypotheses;
}

ResidualMatrix compute_residuals(const std::vector<Pose>& hypotheses,
                                 const std::vector<Correspondence3D>& pairs) {
  if (hypotheses.empty() || pairs.empty()) {
    throw ConfigError("compute_residuals: empty input");
  }
  ResidualMatrix r(pairs.size(), hypotheses.size());
  for (std::size_t j = 0; j < hypotheses.size(); ++j) {
    const Eigen::Matrix3d rot = hypotheses[j].rotation_matrix();
    const Eigen::Vector3d t = hypotheses[j].translation();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      r(i, j) = (rot * pairs[i].p_prev + t - pairs[i].p_curr).norm();
    }
  }
  return r;
}

PreferenceMatrix quantize_preferences(const ResidualMatrix& residuals,
                                      int theta, int lambda) {
  const int n = static_cast<int>(residuals.rows());
  const int m = static_cast<int>(residuals.cols());
  PreferenceMatrix out;
  out.values = Eigen::MatrixXi::Zero(n, m);
  out.support = BitMatrix(n, m);
  for (int j = 0; j < m; ++j) {
    const double lo = residuals.col(j).minCoeff();
    const double hi = residuals.col(j).maxCoeff();
    const double range = hi - lo;
    if (range <= kDegenerateResidualRange) {
      for (int i = 0; i < n; ++i) out.support.set(i, j);
      continue;  // q-check is 0 everywhere, all rows supported
    }
    for (int i = 0; i < n; ++i) {
      const long q = std::lround((residuals(i, j) - lo) / range *
                                 static_cast<double>(theta));
      if (q <= lambda) {
        out.values(i, j) = static_cast<int>(q);
        out.support.set(i, j);
      }
    }
  }
  return out;
}

ClusterSet linkage_cluster(const PreferenceMatrix& preferences,
                           int min_cluster_size, LinkagePolicy policy) {
  const int n = preferences.support.rows();
  const int words = preferences.support.words_per_row();
  std::vector<int> live;
  std::vector<int> unassigned;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t* row = preferences.support.row(i);
    bool any = false;
    for (int w = 0; w < words && !any; ++w) any = row[w] != 0;
    (any ? live : unassigned).push_back(i);
  }
  if (policy == LinkagePolicy::kSingle) {
    return cluster_single(preferences.support, live, std::move(unassigned),
                          min_cluster_size);
  }
  return cluster_intersection(preferences.support, live, std::move(unassigned),
                              min_cluster_size);
}

MotionSegmentation segment_motions(const std::vector<Correspondence3D>& pairs,
                                   const SegmentationParams& params) {
  params.validate();
  const int n = static_cast<int>(pairs.size());
  if (n < 2 * params.min_cluster_size) {
    throw NoModelsFound("segmentation needs at least " +
                        std::to_string(2 * params.min_cluster_size) +
                        " pairs, got " + std::to_string(n));
  }

  std::mt19937_64 seeder(params.rng_seed);
  ClusterSet clusters;
  for (int round = 0; round < params.refinement_rounds; ++round) {
    const std::uint64_t round_seed = seeder();
    const ClusterSet* guidance = round == 0 ? nullptr : &clusters;
    const auto hypotheses =
        sample_hypotheses(pairs, params.hypothesis_count, guidance, round_seed,
                          params.guided_fraction);
    const auto residuals = compute_residuals(hypotheses, pairs);
    const auto preferences =
        quantize_preferences(residuals, params.theta, params.lambda);
    clusters = linkage_cluster(preferences, params.min_cluster_size,
                               params.linkage_policy);
  }

  // Robust refit per cluster.
  struct Fitted {
    Pose pose;
    std::vector<int> pair_indices;  // into the input list
  };
  std::vector<Fitted> fitted;
  for (const auto& cluster : clusters.clusters) {
    std::vector<Correspondence3D> subset;
    subset.reserve(cluster.size());
    for (int idx : cluster) subset.push_back(pairs[idx]);
    try {
      const auto res = ransac_rigid(subset, params.inlier_threshold,
                                    kRefitIterations, seeder());
      Fitted f;
      f.pose = res.pose;
      f.pair_indices.reserve(res.inlier_indices.size());
      for (std::size_t k : res.inlier_indices) {
        f.pair_indices.push_back(cluster[k]);
      }
      fitted.push_back(std::move(f));
    } catch (const DegenerateGeometry&) {
      // cluster too degenerate to carry a model; its tracks stay unassigned
    }
  }

  // Merge clusters whose refit poses are near-identical: either close in
  // rotation angle and translation, or moving every member point to within
  // the inlier threshold of each other (two noisy fits of one motion can
  // disagree by a few degrees while displacing nothing measurably).
  const auto same_motion = [&](const Fitted& a, const Fitted& b) {
    if (rotation_angle_between_rad(a.pose, b.pose) < kMergeRotationRad &&
        (a.pose.translation() - b.pose.translation()).norm() <
            params.inlier_threshold) {
      return true;
    }
    double max_disp = 0.0;
    for (const auto* f : {&a, &b}) {
      for (int idx : f->pair_indices) {
        const Eigen::Vector3d& p = pairs[idx].p_prev;
        max_disp = std::max(max_disp, (a.pose.apply(p) - b.pose.apply(p)).norm());
        if (max_disp >= params.inlier_threshold) return false;
      }
    }
    return max_disp < params.inlier_threshold;
  };
  UnionFind uf(static_cast<int>(fitted.size()));
  for (std::size_t a = 0; a < fitted.size(); ++a) {
    for (std::size_t b = a + 1; b < fitted.size(); ++b) {
      if (same_motion(fitted[a], fitted[b])) {
        uf.unite(static_cast<int>(a), static_cast<int>(b));
      }
    }
  }
  std::vector<std::vector<int>> merged_groups(fitted.size());
  for (std::size_t a = 0; a < fitted.size(); ++a) {
    auto& dst = merged_groups[uf.find(static_cast<int>(a))];
    dst.insert(dst.end(), fitted[a].pair_indices.begin(),
               fitted[a].pair_indices.end());
  }

  struct Candidate {
    Pose pose;
    std::vector<int> pair_indices;
  };
  std::vector<Candidate> candidates;
  for (auto& group : merged_groups) {
    if (group.empty()) continue;
    std::sort(group.begin(), group.end());
    std::vector<Correspondence3D> subset;
    subset.reserve(group.size());
    for (int idx : group) subset.push_back(pairs[idx]);
    try {
      const auto res = ransac_rigid(subset, params.inlier_threshold,
                                    kRefitIterations, seeder());
      Candidate c;
      c.pose = res.pose;
      for (std::size_t k : res.inlier_indices) {
        c.pair_indices.push_back(group[k]);
      }
      if (static_cast<int>(c.pair_indices.size()) >= params.min_cluster_size) {
        candidates.push_back(std::move(c));
      }
    } catch (const DegenerateGeometry&) {
    }
  }

  if (candidates.empty()) {
    throw NoModelsFound("no motion model reached the minimum cluster size");
  }

  // Final consensus assignment: each pair goes to the model explaining it
  // best within the inlier threshold. Models starved below the minimum size
  // are dropped and their points redistributed among the survivors.
  std::vector<int> assignment(n, -1);
  std::vector<bool> active(candidates.size(), true);
  while (true) {
    std::vector<int> counts(candidates.size(), 0);
    for (int i = 0; i < n; ++i) {
      double best = params.inlier_threshold;
      int best_k = -1;
      for (std::size_t k = 0; k < candidates.size(); ++k) {
        if (!active[k]) continue;
        const double r = (candidates[k].pose.apply(pairs[i].p_prev) -
                          pairs[i].p_curr)
                             .norm();
        if (r < best) {
          best = r;
          best_k = static_cast<int>(k);
        }
      }
      assignment[i] = best_k;
      if (best_k >= 0) ++counts[best_k];
    }
    int drop = -1;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      if (!active[k] || counts[k] >= params.min_cluster_size) continue;
      if (drop < 0 || counts[k] < counts[drop]) drop = static_cast<int>(k);
    }
    if (drop < 0) break;
    active[drop] = false;
    if (std::none_of(active.begin(), active.end(), [](bool a) { return a; })) {
      throw NoModelsFound("every motion model fell below the minimum size");
    }
  }

  // Tighten each surviving pose on its full consensus set.
  std::vector<std::vector<int>> assigned(candidates.size());
  for (int i = 0; i < n; ++i) {
    if (assignment[i] >= 0) assigned[assignment[i]].push_back(i);
  }
  std::vector<Candidate> finals;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (!active[k]) continue;
    Candidate c;
    c.pair_indices = std::move(assigned[k]);
    std::vector<Correspondence3D> subset;
    std::vector<double> subset_weights;
    subset.reserve(c.pair_indices.size());
    subset_weights.reserve(c.pair_indices.size());
    for (int idx : c.pair_indices) {
      subset.push_back(pairs[idx]);
      subset_weights.push_back(pairs[idx].weight);
    }
    try {
      c.pose = estimate_rigid_alignment(subset, subset_weights);
    } catch (const DegenerateGeometry&) {
      c.pose = candidates[k].pose;
    }
    finals.push_back(std::move(c));
  }

  std::sort(finals.begin(), finals.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.pair_indices.size() != b.pair_indices.size()) {
                return a.pair_indices.size() > b.pair_indices.size();
              }
              return a.pair_indices.front() < b.pair_indices.front();
            });

  MotionSegmentation out;
  out.labels.assign(n, 0);
  for (std::size_t k = 0; k < finals.size(); ++k) {
    MotionModel model;
    model.label = static_cast<int>(k) + 1;
    model.pose = finals[k].pose;
    for (int idx : finals[k].pair_indices) {
      out.labels[idx] = model.label;
      model.inlier_track_ids.push_back(pairs[idx].track_id);
    }
    out.models.push_back(std::move(model));
  }
  return out;
}

}  // namespace dym::seg
