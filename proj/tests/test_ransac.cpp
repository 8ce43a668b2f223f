#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "dym/errors.hpp"
#include "dym/ransac.hpp"

using dym::Correspondence3D;
using dym::Pose;

namespace {

struct OutlierScene {
  std::vector<Correspondence3D> pairs;
  std::vector<std::size_t> outlier_indices;
  Pose truth;
};

OutlierScene make_scene(int n_inliers, int n_outliers, std::uint64_t seed) {
  OutlierScene scene;
  scene.truth = Pose::from_axis_angle({0.1, 0.9, 0.2}, 0.35, {0.4, -0.1, 1.2});
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-3.0, 3.0);
  std::uniform_real_distribution<double> junk(-10.0, 10.0);
  int id = 0;
  for (int i = 0; i < n_inliers; ++i) {
    Correspondence3D c;
    c.track_id = id++;
    c.p_prev = {coord(rng), coord(rng), coord(rng) + 5.0};
    c.p_curr = scene.truth.apply(c.p_prev);
    scene.pairs.push_back(c);
  }
  for (int i = 0; i < n_outliers; ++i) {
    Correspondence3D c;
    c.track_id = id++;
    c.p_prev = {coord(rng), coord(rng), coord(rng) + 5.0};
    c.p_curr = {junk(rng), junk(rng), junk(rng)};
    scene.outlier_indices.push_back(scene.pairs.size());
    scene.pairs.push_back(c);
  }
  return scene;
}

}  // namespace

TEST_CASE("recovers the motion under 20 percent gross outliers") {
  const auto scene = make_scene(80, 20, 1234);
  const auto res = dym::ransac_rigid(scene.pairs, 0.05, 500, 99);
  CHECK(dym::rotation_angle_between_rad(scene.truth, res.pose) < 1e-9);
  CHECK((scene.truth.translation() - res.pose.translation()).norm() < 1e-9);
  // The consensus set is exactly the clean pairs.
  CHECK(res.inlier_indices.size() == 80);
  for (std::size_t idx : res.inlier_indices) {
    CHECK(std::find(scene.outlier_indices.begin(),
                    scene.outlier_indices.end(),
                    idx) == scene.outlier_indices.end());
  }
}

TEST_CASE("identical seed and input give identical results") {
  const auto scene = make_scene(60, 25, 777);
  const auto a = dym::ransac_rigid(scene.pairs, 0.05, 400, 2024);
  const auto b = dym::ransac_rigid(scene.pairs, 0.05, 400, 2024);
  CHECK(a.iterations_run == b.iterations_run);
  CHECK(a.inlier_indices == b.inlier_indices);
  CHECK(a.pose.translation() == b.pose.translation());
  CHECK(a.pose.rotation().coeffs() == b.pose.rotation().coeffs());
}

TEST_CASE("different seeds still find the same consensus on an easy scene") {
  const auto scene = make_scene(90, 10, 31);
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 50ull}) {
    const auto res = dym::ransac_rigid(scene.pairs, 0.05, 500, seed);
    CHECK(res.inlier_indices.size() == 90);
    CHECK(dym::rotation_angle_between_rad(scene.truth, res.pose) < 1e-9);
  }
}

TEST_CASE("adaptive schedule stops well before the cap on clean data") {
  const auto scene = make_scene(100, 0, 5);
  const auto res = dym::ransac_rigid(scene.pairs, 0.05, 10000, 8);
  CHECK(res.iterations_run < 100);
  CHECK(res.inlier_indices.size() == 100);
}

TEST_CASE("all-outlier data raises a geometry error") {
  // Random pairs: no rigid model explains 3 of them within a tight threshold.
  std::mt19937_64 rng(444);
  std::uniform_real_distribution<double> junk(-10.0, 10.0);
  std::vector<Correspondence3D> pairs;
  for (int i = 0; i < 30; ++i) {
    pairs.push_back({i,
                     {junk(rng), junk(rng), junk(rng)},
                     {junk(rng), junk(rng), junk(rng)}});
  }
  CHECK_THROWS_AS(dym::ransac_rigid(pairs, 1e-6, 200, 9),
                  dym::DegenerateGeometry);
}

TEST_CASE("input and parameter validation") {
  const auto scene = make_scene(10, 0, 2);
  std::vector<Correspondence3D> two(scene.pairs.begin(),
                                    scene.pairs.begin() + 2);
  CHECK_THROWS_AS(dym::ransac_rigid(two, 0.05, 100, 1),
                  dym::DegenerateGeometry);
  CHECK_THROWS_AS(dym::ransac_rigid(scene.pairs, 0.0, 100, 1),
                  dym::ConfigError);
  CHECK_THROWS_AS(dym::ransac_rigid(scene.pairs, 0.05, 0, 1),
                  dym::ConfigError);
}

TEST_CASE("final pose is refit on the full consensus set") {
  // Small noise: the minimal-sample pose is worse than the consensus refit.
  auto scene = make_scene(50, 10, 21);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> noise(0.0, 0.004);
  for (int i = 0; i < 50; ++i) {
    scene.pairs[i].p_curr += Eigen::Vector3d(noise(rng), noise(rng), noise(rng));
  }
  const auto res = dym::ransac_rigid(scene.pairs, 0.03, 1000, 3);
  REQUIRE(res.inlier_indices.size() >= 45);
  std::vector<Correspondence3D> consensus;
  for (std::size_t idx : res.inlier_indices) consensus.push_back(scene.pairs[idx]);
  const Pose refit = dym::estimate_rigid_alignment(consensus);
  CHECK(dym::rotation_angle_between_rad(refit, res.pose) < 1e-12);
  CHECK((refit.translation() - res.pose.translation()).norm() < 1e-12);
}
