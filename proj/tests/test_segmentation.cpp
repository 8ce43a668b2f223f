#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "dym/errors.hpp"
#include "dym/seg/segmentation.hpp"
#include "dym/stereo_camera.hpp"

using dym::Correspondence3D;
using dym::Pose;
namespace seg = dym::seg;

namespace {

dym::StereoCamera make_rig() {
  dym::StereoCamera cam;
  cam.fx = 500.0;
  cam.fy = 500.0;
  cam.cx = 320.0;
  cam.cy = 240.0;
  cam.baseline = 0.12;
  cam.image_width = 640;
  cam.image_height = 480;
  return cam;
}

struct TestScene {
  std::vector<Correspondence3D> pairs;
  std::vector<int> gt;  // motion index per pair
};

// Builds pairs for several rigid motions, each a blob of points. With
// px_sigma > 0 both endpoints are re-triangulated from noisy stereo pixels,
// reproducing the depth-dependent error of a real rig.
TestScene make_scene(const std::vector<Pose>& motions,
                     const std::vector<int>& counts,
                     const std::vector<Eigen::Vector3d>& centers,
                     double radius, double px_sigma, std::uint64_t seed) {
  const auto cam = make_rig();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-radius, radius);
  std::normal_distribution<double> px_noise(0.0, px_sigma);
  TestScene scene;
  std::int64_t id = 0;
  auto observe = [&](const Eigen::Vector3d& p) {
    if (px_sigma <= 0.0) return p;
    Eigen::Vector2d left = cam.project(p);
    Eigen::Vector2d right(left.x() - cam.disparity_at(p.z()), left.y());
    left.x() += px_noise(rng);
    left.y() += px_noise(rng);
    right.x() += px_noise(rng);
    right.y() = left.y();
    return cam.triangulate(left, right);
  };
  for (std::size_t m = 0; m < motions.size(); ++m) {
    for (int i = 0; i < counts[m]; ++i) {
      const Eigen::Vector3d p = centers[m] + Eigen::Vector3d(u(rng), u(rng), u(rng));
      Correspondence3D c;
      c.track_id = id++;
      c.p_prev = observe(p);
      c.p_curr = observe(motions[m].apply(p));
      scene.pairs.push_back(c);
      scene.gt.push_back(static_cast<int>(m));
    }
  }
  return scene;
}

// Maps each model label to the majority ground-truth motion and counts
// disagreements. Unassigned pairs count as misassigned.
struct Agreement {
  int misassigned = 0;
  bool bijective = false;
};

Agreement score(const TestScene& scene, const seg::MotionSegmentation& result,
                std::size_t expected_models) {
  std::map<int, std::map<int, int>> votes;  // label -> gt -> count
  for (std::size_t i = 0; i < scene.pairs.size(); ++i) {
    if (result.labels[i] != 0) votes[result.labels[i]][scene.gt[i]]++;
  }
  std::map<int, int> label_to_gt;
  std::set<int> used;
  for (const auto& [label, hist] : votes) {
    int best_gt = -1;
    int best = -1;
    for (const auto& [gt, n] : hist) {
      if (n > best) {
        best = n;
        best_gt = gt;
      }
    }
    label_to_gt[label] = best_gt;
    used.insert(best_gt);
  }
  Agreement a;
  a.bijective = used.size() == votes.size() && votes.size() == expected_models;
  for (std::size_t i = 0; i < scene.pairs.size(); ++i) {
    if (result.labels[i] == 0 || label_to_gt[result.labels[i]] != scene.gt[i]) {
      ++a.misassigned;
    }
  }
  return a;
}

seg::SegmentationParams noiseless_params(std::uint64_t seed) {
  seg::SegmentationParams p;
  p.theta = 200;
  p.lambda = 1;
  p.hypothesis_count = 200;
  p.min_cluster_size = 5;
  p.refinement_rounds = 2;
  p.inlier_threshold = 0.01;
  p.rng_seed = seed;
  return p;
}

}  // namespace

TEST_CASE("three pairs and count one produce the exact fit") {
  const Pose truth = Pose::from_axis_angle({0, 1, 0}, 0.4, {0.1, -0.2, 0.05});
  std::vector<Correspondence3D> pairs;
  int id = 0;
  for (const Eigen::Vector3d p :
       {Eigen::Vector3d(0, 0, 2), Eigen::Vector3d(0.5, 0.1, 2.2),
        Eigen::Vector3d(-0.3, 0.4, 1.8)}) {
    pairs.push_back({id++, p, truth.apply(p)});
  }
  const auto hyps = seg::sample_hypotheses(pairs, 1, nullptr, 7);
  REQUIRE(hyps.size() == 1);
  CHECK(dym::approx_equal(hyps[0], truth, 1e-9, 1e-9));
}

TEST_CASE("a single rigid motion yields only near-exact hypotheses") {
  const Pose truth = Pose::from_axis_angle({0.3, 1, 0}, 0.2, {0.05, 0, -0.1});
  const auto scene = make_scene({truth}, {50}, {{0, 0, 1.8}}, 0.4, 0.0, 3);
  const auto hyps = seg::sample_hypotheses(scene.pairs, 100, nullptr, 11);
  REQUIRE(hyps.size() == 100);
  for (const auto& h : hyps) {
    CHECK(dym::rotation_angle_between_rad(h, truth) < 1e-6);
    CHECK((h.translation() - truth.translation()).norm() < 1e-6);
  }
}

TEST_CASE("guided sampling keeps most hypotheses inside one true motion") {
  const Pose a = Pose::translate({0.15, 0, 0});
  const Pose b = Pose::from_axis_angle({0, 0, 1}, 0.1, {-0.1, 0.05, 0});
  const auto scene = make_scene({a, b}, {40, 40},
                                {{-0.5, 0, 1.6}, {0.5, 0, 1.8}}, 0.25, 0.0, 5);
  seg::ClusterSet guide;
  guide.clusters.resize(2);
  for (int i = 0; i < 40; ++i) guide.clusters[0].push_back(i);
  for (int i = 40; i < 80; ++i) guide.clusters[1].push_back(i);

  const auto hyps = seg::sample_hypotheses(scene.pairs, 200, &guide, 13, 0.7);
  REQUIRE(hyps.size() == 200);
  const Pose truths[2] = {a, b};
  int pure = 0;
  for (const auto& h : hyps) {
    for (int m = 0; m < 2; ++m) {
      bool all_in = true;
      for (std::size_t i = 0; i < scene.pairs.size(); ++i) {
        if (scene.gt[i] != m) continue;
        if ((h.apply(scene.pairs[i].p_prev) - scene.pairs[i].p_curr).norm() >
            1e-6) {
          all_in = false;
          break;
        }
      }
      if (all_in) {
        ++pure;
        break;
      }
    }
  }
  CHECK(pure >= 140);  // at least the guided 70%
}

TEST_CASE("collinear data cannot produce hypotheses") {
  std::vector<Correspondence3D> pairs;
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector3d p(0.1 * i, 0.2 * i, 1.0 + 0.05 * i);
    pairs.push_back({i, p, p + Eigen::Vector3d(0.1, 0, 0)});
  }
  CHECK_THROWS_AS(seg::sample_hypotheses(pairs, 50, nullptr, 1),
                  dym::InsufficientHypotheses);
}

TEST_CASE("residual matrix definition") {
  SUBCASE("true motion gives a zero column") {
    const Pose truth = Pose::from_axis_angle({1, 0, 0}, 0.3, {0, 0.2, 0});
    const auto scene = make_scene({truth}, {20}, {{0, 0, 2}}, 0.3, 0.0, 9);
    const auto r = seg::compute_residuals({truth}, scene.pairs);
    CHECK(r.col(0).maxCoeff() < 1e-12);
  }
  SUBCASE("identity hypothesis and a 1 m displacement give exactly 1") {
    std::vector<Correspondence3D> pairs = {
        {0, {0, 0, 2}, {1, 0, 2}}};
    const auto r = seg::compute_residuals({Pose::identity()}, pairs);
    CHECK(r(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("random entries match an independent recomputation") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Correspondence3D> pairs;
    std::vector<Pose> hyps;
    for (int i = 0; i < 15; ++i) {
      pairs.push_back({i,
                       {g(rng), g(rng), g(rng) + 3},
                       {g(rng), g(rng), g(rng) + 3}});
    }
    for (int j = 0; j < 7; ++j) {
      Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
      q.normalize();
      hyps.emplace_back(q, Eigen::Vector3d(g(rng), g(rng), g(rng)));
    }
    const auto r = seg::compute_residuals(hyps, pairs);
    for (int i = 0; i < 15; ++i) {
      for (int j = 0; j < 7; ++j) {
        const Eigen::Vector3d expect =
            hyps[j].rotation_matrix() * pairs[i].p_prev +
            hyps[j].translation() - pairs[i].p_curr;
        CHECK(r(i, j) == doctest::Approx(expect.norm()).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("quantization follows the corrected min-max formula") {
  SUBCASE("hand-evaluated column") {
    seg::ResidualMatrix r(3, 1);
    r << 0.0, 0.5, 1.0;
    const auto q = seg::quantize_preferences(r, 200, 1);
    CHECK(q.values(0, 0) == 0);
    CHECK(q.values(1, 0) == 0);  // q-check 100, truncated
    CHECK(q.values(2, 0) == 0);  // q-check 200, truncated
    CHECK(q.support.test(0, 0));
    CHECK_FALSE(q.support.test(1, 0));
    CHECK_FALSE(q.support.test(2, 0));
  }
  SUBCASE("kept values at or below lambda survive, larger ones truncate") {
    seg::ResidualMatrix r(5, 1);
    r << 0.0, 0.25, 0.5, 0.75, 100.0;
    // range 100: quantized column is [0, 1, 2, 3, 400] with theta 400
    const auto q = seg::quantize_preferences(r, 400, 2);
    CHECK(q.values(0, 0) == 0);
    CHECK(q.values(1, 0) == 1);
    CHECK(q.values(2, 0) == 2);
    CHECK(q.values(3, 0) == 0);  // 3 > lambda, truncated
    CHECK(q.values(4, 0) == 0);
    CHECK(q.support.test(0, 0));
    CHECK(q.support.test(1, 0));
    CHECK(q.support.test(2, 0));
    CHECK_FALSE(q.support.test(3, 0));
    CHECK_FALSE(q.support.test(4, 0));
  }
  SUBCASE("constant column is fully supported at zero") {
    seg::ResidualMatrix r(4, 2);
    r.col(0) << 0.3, 0.3, 0.3, 0.3;
    r.col(1) << 0.0, 0.1, 0.2, 0.4;
    const auto q = seg::quantize_preferences(r, 200, 1);
    for (int i = 0; i < 4; ++i) {
      CHECK(q.values(i, 0) == 0);
      CHECK(q.support.test(i, 0));
    }
  }
  SUBCASE("lambda equal to theta disables truncation") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    seg::ResidualMatrix r(20, 5);
    for (int i = 0; i < 20; ++i) {
      for (int j = 0; j < 5; ++j) r(i, j) = u(rng);
    }
    const auto q = seg::quantize_preferences(r, 200, 200);
    for (int j = 0; j < 5; ++j) {
      const double lo = r.col(j).minCoeff();
      const double range = r.col(j).maxCoeff() - lo;
      for (int i = 0; i < 20; ++i) {
        CHECK(q.support.test(i, j));
        const long expect = std::lround((r(i, j) - lo) / range * 200.0);
        CHECK(q.values(i, j) == static_cast<int>(expect));
      }
    }
  }
}

TEST_CASE("quantization properties") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.5);
  seg::ResidualMatrix r(40, 8);
  for (int i = 0; i < 40; ++i) {
    for (int j = 0; j < 8; ++j) r(i, j) = u(rng);
  }
  SUBCASE("per-column scale invariance") {
    const auto q1 = seg::quantize_preferences(r, 200, 3);
    seg::ResidualMatrix scaled = r;
    scaled.col(2) *= 7.5;
    scaled.col(5) *= 0.01;
    const auto q2 = seg::quantize_preferences(scaled, 200, 3);
    CHECK(q1.values == q2.values);
    for (int i = 0; i < 40; ++i) {
      for (int j = 0; j < 8; ++j) {
        CHECK(q1.support.test(i, j) == q2.support.test(i, j));
      }
    }
  }
  SUBCASE("support grows monotonically with lambda") {
    const auto qa = seg::quantize_preferences(r, 200, 2);
    const auto qb = seg::quantize_preferences(r, 200, 9);
    for (int i = 0; i < 40; ++i) {
      for (int j = 0; j < 8; ++j) {
        if (qa.support.test(i, j)) CHECK(qb.support.test(i, j));
      }
    }
  }
  SUBCASE("values vanish wherever support is false and stay below theta") {
    const auto q = seg::quantize_preferences(r, 150, 4);
    for (int i = 0; i < 40; ++i) {
      for (int j = 0; j < 8; ++j) {
        if (!q.support.test(i, j)) CHECK(q.values(i, j) == 0);
        CHECK(q.values(i, j) <= 150);
      }
    }
  }
}

namespace {

seg::PreferenceMatrix make_support(int rows, int cols,
                                   const std::vector<std::vector<int>>& sets) {
  seg::PreferenceMatrix q;
  q.values = Eigen::MatrixXi::Zero(rows, cols);
  q.support = seg::BitMatrix(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int c : sets[i]) q.support.set(i, c);
  }
  return q;
}

}  // namespace

TEST_CASE("linkage clustering on crafted support sets") {
  SUBCASE("disjoint supports give two clusters under both policies") {
    std::vector<std::vector<int>> sets(10);
    for (int i = 0; i < 5; ++i) sets[i] = {0, 1, 2, 3};
    for (int i = 5; i < 10; ++i) sets[i] = {4, 5, 6, 7};
    const auto q = make_support(10, 8, sets);
    for (auto policy :
         {seg::LinkagePolicy::kSingle, seg::LinkagePolicy::kIntersection}) {
      const auto cs = seg::linkage_cluster(q, 3, policy);
      REQUIRE(cs.clusters.size() == 2);
      CHECK(cs.clusters[0] == std::vector<int>({0, 1, 2, 3, 4}));
      CHECK(cs.clusters[1] == std::vector<int>({5, 6, 7, 8, 9}));
      CHECK(cs.unassigned.empty());
    }
  }
  SUBCASE("identical rows collapse to one cluster") {
    std::vector<std::vector<int>> sets(6, std::vector<int>{1, 3, 5});
    const auto q = make_support(6, 8, sets);
    for (auto policy :
         {seg::LinkagePolicy::kSingle, seg::LinkagePolicy::kIntersection}) {
      const auto cs = seg::linkage_cluster(q, 3, policy);
      REQUIRE(cs.clusters.size() == 1);
      CHECK(cs.clusters[0].size() == 6);
    }
  }
  SUBCASE("empty-support rows are unassigned") {
    std::vector<std::vector<int>> sets(5, std::vector<int>{0, 1});
    sets[4] = {};
    const auto q = make_support(5, 4, sets);
    const auto cs = seg::linkage_cluster(q, 3);
    REQUIRE(cs.clusters.size() == 1);
    CHECK(cs.unassigned == std::vector<int>({4}));
  }
  SUBCASE("small clusters are reported unassigned") {
    std::vector<std::vector<int>> sets(6);
    for (int i = 0; i < 4; ++i) sets[i] = {0, 1};
    for (int i = 4; i < 6; ++i) sets[i] = {5, 6};
    const auto q = make_support(6, 8, sets);
    const auto cs = seg::linkage_cluster(q, 3);
    REQUIRE(cs.clusters.size() == 1);
    CHECK(cs.unassigned == std::vector<int>({4, 5}));
  }
  SUBCASE("a single bridge row chains components only under single linkage") {
    std::vector<std::vector<int>> sets(11);
    for (int i = 0; i < 5; ++i) sets[i] = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    for (int i = 5; i < 10; ++i) sets[i] = {10, 11, 12, 13, 14, 15, 16, 17, 18, 19};
    sets[10] = {9, 10};
    const auto q = make_support(11, 20, sets);
    const auto single = seg::linkage_cluster(q, 3, seg::LinkagePolicy::kSingle);
    CHECK(single.clusters.size() == 1);
    const auto inter =
        seg::linkage_cluster(q, 3, seg::LinkagePolicy::kIntersection);
    CHECK(inter.clusters.size() == 2);
  }
}

TEST_CASE("two-motion scene clusters without misassignment") {
  const Pose a = Pose::translate({0.12, 0, 0});
  const Pose b = Pose::translate({-0.02, 0.1, 0.05});
  const auto scene = make_scene({a, b}, {50, 50},
                                {{-0.5, 0, 1.6}, {0.5, 0.1, 1.9}}, 0.3, 0.0, 21);
  const auto hyps = seg::sample_hypotheses(scene.pairs, 200, nullptr, 22);
  const auto r = seg::compute_residuals(hyps, scene.pairs);
  const auto q = seg::quantize_preferences(r, 200, 1);
  const auto cs = seg::linkage_cluster(q, 5);
  REQUIRE(cs.clusters.size() == 2);
  for (const auto& cluster : cs.clusters) {
    std::set<int> gts;
    for (int of : cluster) gts.insert(scene.gt[of]);
    CHECK(gts.size() == 1);
  }
  CHECK(cs.clusters[0].size() + cs.clusters[1].size() == 100);
}

TEST_CASE("column permutation permutes preferences and preserves clusters") {
  const Pose a = Pose::translate({0.1, 0, 0});
  const Pose b = Pose::from_axis_angle({0, 1, 0}, 0.08, {0, 0.05, 0});
  const auto scene = make_scene({a, b}, {30, 30},
                                {{-0.4, 0, 1.5}, {0.4, 0, 1.8}}, 0.25, 0.0, 33);
  auto hyps = seg::sample_hypotheses(scene.pairs, 60, nullptr, 34);
  const auto r1 = seg::compute_residuals(hyps, scene.pairs);
  const auto q1 = seg::quantize_preferences(r1, 200, 1);

  std::vector<int> perm(hyps.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(35);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Pose> permuted(hyps.size());
  for (std::size_t j = 0; j < hyps.size(); ++j) permuted[perm[j]] = hyps[j];
  const auto r2 = seg::compute_residuals(permuted, scene.pairs);
  const auto q2 = seg::quantize_preferences(r2, 200, 1);

  for (int i = 0; i < static_cast<int>(scene.pairs.size()); ++i) {
    for (std::size_t j = 0; j < hyps.size(); ++j) {
      CHECK(q1.support.test(i, static_cast<int>(j)) ==
            q2.support.test(i, perm[j]));
      CHECK(q1.values(i, static_cast<int>(j)) == q2.values(i, perm[j]));
    }
  }
  const auto c1 = seg::linkage_cluster(q1, 5);
  const auto c2 = seg::linkage_cluster(q2, 5);
  CHECK(c1.clusters == c2.clusters);  // members sorted, cluster order canonical
  CHECK(c1.unassigned == c2.unassigned);
}

TEST_CASE("single noiseless motion segments into one exact model") {
  const Pose truth = Pose::from_axis_angle({0, 1, 0}, 0.05, {0.08, 0, -0.03});
  const auto scene = make_scene({truth}, {60}, {{0, 0, 1.8}}, 0.5, 0.0, 41);
  const auto result = seg::segment_motions(scene.pairs, noiseless_params(42));
  REQUIRE(result.models.size() == 1);
  CHECK(result.models[0].inlier_track_ids.size() == 60);
  for (int label : result.labels) CHECK(label == 1);
  CHECK(dym::rotation_angle_between_rad(result.models[0].pose, truth) < 1e-9);
  CHECK((result.models[0].pose.translation() - truth.translation()).norm() <
        1e-9);
}

TEST_CASE("noiseless camera plus two objects give exactly three models") {
  const Pose cam = Pose::from_axis_angle({0, 1, 0}, 0.01, {0.01, 0, -0.02});
  const Pose obj1 = Pose::translate({0.12, 0.04, 0});
  const Pose obj2 = Pose::from_axis_angle({0, 0, 1}, 0.12, {-0.08, 0.06, 0.03});
  const auto scene = make_scene(
      {cam, obj1, obj2}, {60, 40, 40},
      {{0, 0, 1.9}, {0.7, 0.2, 1.6}, {-0.7, -0.2, 1.7}}, 0.35, 0.0, 51);
  const auto result = seg::segment_motions(scene.pairs, noiseless_params(52));
  REQUIRE(result.models.size() == 3);
  const auto a = score(scene, result, 3);
  CHECK(a.bijective);
  CHECK(a.misassigned == 0);
}

TEST_CASE("noiseless scenes with up to four motions are recovered exactly") {
  const std::vector<Pose> all_motions = {
      Pose::from_axis_angle({0, 1, 0}, 0.008, {0.01, 0.0, -0.015}),
      Pose::translate({0.11, 0.03, 0.0}),
      Pose::from_axis_angle({0, 0, 1}, 0.1, {-0.09, 0.05, 0.02}),
      Pose::from_axis_angle({1, 0, 0}, 0.06, {0.03, -0.1, 0.05})};
  const std::vector<Eigen::Vector3d> all_centers = {
      {0, 0, 1.9}, {0.6, 0.25, 1.6}, {-0.6, -0.2, 1.7}, {0.1, -0.35, 1.4}};
  for (int k = 2; k <= 4; ++k) {
    std::vector<Pose> motions(all_motions.begin(), all_motions.begin() + k);
    std::vector<Eigen::Vector3d> centers(all_centers.begin(),
                                         all_centers.begin() + k);
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto scene = make_scene(motions, std::vector<int>(k, 35), centers,
                                    0.3, 0.0, 100 + s);
      const auto result =
          seg::segment_motions(scene.pairs, noiseless_params(200 + s));
      REQUIRE(result.models.size() == static_cast<std::size_t>(k));
      const auto a = score(scene, result, k);
      CHECK(a.bijective);
      CHECK(a.misassigned == 0);
    }
  }
}

TEST_CASE("segmentation is deterministic for a fixed seed") {
  const Pose a = Pose::translate({0.1, 0, 0});
  const Pose b = Pose::translate({-0.05, 0.08, 0});
  const auto scene = make_scene({a, b}, {40, 40},
                                {{-0.5, 0, 1.7}, {0.5, 0, 1.8}}, 0.3, 0.5, 61);
  auto params = noiseless_params(62);
  params.lambda = 30;
  params.inlier_threshold = 0.1;
  const auto r1 = seg::segment_motions(scene.pairs, params);
  const auto r2 = seg::segment_motions(scene.pairs, params);
  CHECK(r1.labels == r2.labels);
  REQUIRE(r1.models.size() == r2.models.size());
  for (std::size_t k = 0; k < r1.models.size(); ++k) {
    CHECK(r1.models[k].pose.translation() == r2.models[k].pose.translation());
    CHECK(r1.models[k].inlier_track_ids == r2.models[k].inlier_track_ids);
  }
}

TEST_CASE("noisy three-motion scene stays under five percent misassignment") {
  const Pose cam = Pose::from_axis_angle({0, 1, 0}, 0.005, {0.01, 0, -0.015});
  const Pose obj1 = Pose::translate({0.18, 0.05, -0.02});
  const Pose obj2 = Pose::from_axis_angle({0, 0, 1}, 0.15, {-0.15, 0.1, 0.04});
  int total = 0;
  int wrong = 0;
  int three_models = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto scene = make_scene(
        {cam, obj1, obj2}, {60, 40, 40},
        {{0, 0, 1.5}, {0.5, 0.15, 1.3}, {-0.5, -0.15, 1.4}}, 0.25, 0.5,
        300 + s);
    seg::SegmentationParams params;
    params.theta = 200;
    params.lambda = 30;
    params.hypothesis_count = 300;
    params.min_cluster_size = 8;
    params.refinement_rounds = 3;
    params.inlier_threshold = 0.1;
    params.rng_seed = 400 + s;
    const auto result = seg::segment_motions(scene.pairs, params);
    if (result.models.size() == 3) ++three_models;
    const auto a = score(scene, result, 3);
    total += static_cast<int>(scene.pairs.size());
    wrong += a.misassigned;
  }
  CHECK(three_models >= 18);
  CHECK(static_cast<double>(wrong) / total < 0.05);
}

TEST_CASE("error conditions of the segmentation loop") {
  SUBCASE("too few pairs") {
    const auto scene =
        make_scene({Pose::identity()}, {5}, {{0, 0, 1.5}}, 0.2, 0.0, 71);
    CHECK_THROWS_AS(seg::segment_motions(scene.pairs, noiseless_params(72)),
                    dym::NoModelsFound);
  }
  SUBCASE("invalid params") {
    const auto scene =
        make_scene({Pose::identity()}, {30}, {{0, 0, 1.5}}, 0.2, 0.0, 73);
    auto p = noiseless_params(74);
    p.theta = 99;
    CHECK_THROWS_AS(seg::segment_motions(scene.pairs, p), dym::ConfigError);
    p = noiseless_params(74);
    p.lambda = 0;
    CHECK_THROWS_AS(seg::segment_motions(scene.pairs, p), dym::ConfigError);
    p = noiseless_params(74);
    p.min_cluster_size = 2;
    CHECK_THROWS_AS(seg::segment_motions(scene.pairs, p), dym::ConfigError);
  }
}
