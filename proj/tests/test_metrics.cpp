#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <vector>

#include <dym/eval/metrics.hpp>

using namespace dym;
namespace fs = std::filesystem;

namespace {

std::vector<Pose> wiggly_trajectory(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Pose> out;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d axis =
        Eigen::Vector3d(u(rng), u(rng), u(rng)).normalized();
    out.emplace_back(Eigen::Quaterniond(Eigen::AngleAxisd(u(rng), axis)),
                     Eigen::Vector3d(u(rng), 2.0 * u(rng), 0.5 * u(rng)));
  }
  return out;
}

mask::LabelMask make_mask(int w, int h, int fill = 0) {
  return {w, h, std::vector<int>(static_cast<std::size_t>(w) * h, fill)};
}

/// Exhaustive reference for the label matching: tries every injective map
/// from the smaller label set into the larger one and keeps the best
/// agreement. Only viable for tiny label counts, which is the point.
double brute_force_rate(const std::map<std::int64_t, int>& est,
                        const std::map<std::int64_t, int>& gt) {
  std::vector<int> est_labels;
  std::vector<int> gt_labels;
  std::vector<std::pair<int, int>> pairs;
  for (const auto& [track, el] : est) {
    const auto it = gt.find(track);
    if (it == gt.end()) continue;
    pairs.emplace_back(el, it->second);
    if (std::find(est_labels.begin(), est_labels.end(), el) ==
        est_labels.end())
      est_labels.push_back(el);
    if (std::find(gt_labels.begin(), gt_labels.end(), it->second) ==
        gt_labels.end())
      gt_labels.push_back(it->second);
  }
  // Permute the larger side so every injective assignment of the smaller
  // side appears as a prefix selection.
  const bool est_small = est_labels.size() <= gt_labels.size();
  auto& small = est_small ? est_labels : gt_labels;
  auto& large = est_small ? gt_labels : est_labels;
  std::sort(large.begin(), large.end());
  long best = 0;
  do {
    long agree = 0;
    for (const auto& [el, gl] : pairs) {
      const auto i = std::find(small.begin(), small.end(), est_small ? el : gl) -
                     small.begin();
      if (static_cast<std::size_t>(i) < large.size() &&
          large[i] == (est_small ? gl : el)) {
        ++agree;
      }
    }
    best = std::max(best, agree);
  } while (std::next_permutation(large.begin(), large.end()));
  return static_cast<double>(static_cast<long>(pairs.size()) - best) /
         static_cast<double>(pairs.size());
}

}  // namespace

TEST_CASE("identical trajectories score zero error") {
  const auto traj = wiggly_trajectory(20, 1);
  const auto err = eval::trajectory_rmse(traj, traj);
  CHECK(err.position_rmse == 0.0);
  CHECK(err.rotation_rmse == 0.0);
  REQUIRE(err.position_errors.size() == 20);
  for (double e : err.position_errors) CHECK(e == 0.0);
}

TEST_CASE("constant translation offset gives its norm as position RMSE") {
  const auto gt = wiggly_trajectory(15, 2);
  std::vector<Pose> est;
  for (const auto& p : gt) {
    est.emplace_back(p.rotation(),
                     p.translation() + Eigen::Vector3d(0.01, 0.01, 0.01));
  }
  const auto err = eval::trajectory_rmse(est, gt);
  CHECK(err.position_rmse ==
        doctest::Approx(std::sqrt(3.0) * 0.01).epsilon(1e-12));
  CHECK(err.rotation_rmse < 1e-10);
}

TEST_CASE("constant yaw error gives its angle as rotation RMSE") {
  const auto gt = wiggly_trajectory(15, 3);
  const Pose yaw = Pose::from_axis_angle(Eigen::Vector3d::UnitZ(),
                                         deg_to_rad(2.0));
  std::vector<Pose> est;
  for (const auto& p : gt) est.push_back(p * yaw);
  const auto err = eval::trajectory_rmse(est, gt);
  CHECK(err.rotation_rmse == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(err.position_rmse < 1e-12);
}

TEST_CASE("RMSE fields equal the RMS of the per-frame lists") {
  // Per-frame position errors 3 and 4 give sqrt((9+16)/2).
  std::vector<Pose> gt = {Pose::identity(), Pose::identity()};
  std::vector<Pose> est = {Pose::translate({3.0, 0.0, 0.0}),
                           Pose::translate({0.0, 4.0, 0.0})};
  auto err = eval::trajectory_rmse(est, gt);
  CHECK(err.position_rmse == doctest::Approx(std::sqrt(12.5)).epsilon(1e-12));

  const auto a = wiggly_trajectory(40, 4);
  const auto b = wiggly_trajectory(40, 5);
  err = eval::trajectory_rmse(a, b);
  double pos = 0.0;
  double rot = 0.0;
  for (double e : err.position_errors) pos += e * e;
  for (double e : err.rotation_errors_deg) rot += e * e;
  CHECK(err.position_rmse == doctest::Approx(std::sqrt(pos / 40.0)).epsilon(1e-12));
  CHECK(err.rotation_rmse == doctest::Approx(std::sqrt(rot / 40.0)).epsilon(1e-12));
}

TEST_CASE("trajectory comparison rejects length mismatches, allows empty") {
  CHECK_THROWS_AS(
      eval::trajectory_rmse(wiggly_trajectory(3, 6), wiggly_trajectory(4, 6)),
      LengthMismatch);
  const auto err = eval::trajectory_rmse({}, {});
  CHECK(err.position_rmse == 0.0);
  CHECK(err.rotation_rmse == 0.0);
}

TEST_CASE("trajectory error is invariant under a common global transform") {
  const auto gt = wiggly_trajectory(12, 7);
  const auto est = wiggly_trajectory(12, 8);
  const auto base = eval::trajectory_rmse(est, gt);

  const Pose x(Eigen::Quaterniond(Eigen::AngleAxisd(
                   1.1, Eigen::Vector3d(2, -1, 4).normalized())),
               {5.0, -3.0, 7.0});
  std::vector<Pose> gt_moved;
  std::vector<Pose> est_moved;
  for (const auto& p : gt) gt_moved.push_back(x * p);
  for (const auto& p : est) est_moved.push_back(x * p);
  const auto moved = eval::trajectory_rmse(est_moved, gt_moved);

  CHECK(moved.position_rmse == doctest::Approx(base.position_rmse).epsilon(1e-9));
  CHECK(moved.rotation_rmse == doctest::Approx(base.rotation_rmse).epsilon(1e-9));
}

TEST_CASE("mask IoU matches hand-counted overlaps") {
  auto est = make_mask(8, 4);
  auto gt = make_mask(8, 4);

  SUBCASE("identical masks") {
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 3; ++x) {
        est.labels[est.index(x, y)] = 1;
        gt.labels[gt.index(x, y)] = 1;
      }
    CHECK(eval::mask_iou(est, gt, 1) == 1.0);
  }
  SUBCASE("disjoint non-empty masks") {
    est.labels[est.index(0, 0)] = 1;
    gt.labels[gt.index(5, 2)] = 1;
    CHECK(eval::mask_iou(est, gt, 1) == 0.0);
  }
  SUBCASE("equal rectangles overlapping on half their area") {
    // est covers columns 0..3, gt covers 2..5: both 16 px, overlap 8,
    // union 24.
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 4; ++x) est.labels[est.index(x, y)] = 1;
      for (int x = 2; x < 6; ++x) gt.labels[gt.index(x, y)] = 1;
    }
    CHECK(eval::mask_iou(est, gt, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("label absent from both sides") {
    CHECK(eval::mask_iou(est, gt, 9) == 1.0);
  }
  SUBCASE("size mismatch") {
    auto small = make_mask(4, 4);
    CHECK_THROWS_AS(eval::mask_iou(est, small, 1), DimensionMismatch);
  }
}

TEST_CASE("mask IoU is symmetric and agrees with the grid overload") {
  std::mt19937 rng(99);
  std::uniform_int_distribution<int> label(0, 2);
  auto a = make_mask(16, 12);
  auto b = make_mask(16, 12);
  for (auto& l : a.labels) l = label(rng);
  for (auto& l : b.labels) l = label(rng);

  for (int l = 0; l <= 2; ++l) {
    CHECK(eval::mask_iou(a, b, l) == eval::mask_iou(b, a, l));
  }

  LabelGrid grid;
  grid.resize(16, 12);
  grid.gt_label = b.labels;
  for (int l = 0; l <= 2; ++l) {
    CHECK(eval::mask_iou(a, grid, l) == eval::mask_iou(a, b, l));
  }
}

TEST_CASE("IoU series tracks per-label means and rejects bad values") {
  eval::IoUSeries series;
  series.add(1, 0.5);
  series.add(1, 1.0);
  series.add(2, 0.25);
  const auto means = series.mean_per_label();
  CHECK(means.at(1) == doctest::Approx(0.75));
  CHECK(means.at(2) == doctest::Approx(0.25));
  CHECK_THROWS_AS(series.add(1, 1.5), ConfigError);
  CHECK_THROWS_AS(series.add(1, -0.1), ConfigError);
}

TEST_CASE("perfect labeling scores zero under any label permutation") {
  std::map<std::int64_t, int> gt;
  std::map<std::int64_t, int> est;
  for (int i = 0; i < 90; ++i) {
    const int label = i % 3;            // gt uses 0,1,2
    const int renamed[] = {5, 0, 7};    // est uses a shuffled alphabet
    gt[i] = label;
    est[i] = renamed[label];
  }
  CHECK(eval::segmentation_accuracy(est, gt) == 0.0);
}

TEST_CASE("one mislabeled track out of 100 scores 0.01") {
  std::map<std::int64_t, int> gt;
  std::map<std::int64_t, int> est;
  for (int i = 0; i < 100; ++i) {
    gt[i] = i < 50 ? 0 : 1;
    est[i] = gt[i];
  }
  est[3] = 1;
  CHECK(eval::segmentation_accuracy(est, gt) == doctest::Approx(0.01));
}

TEST_CASE("random labels over two balanced classes score about one half") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> coin(0, 1);
  std::map<std::int64_t, int> gt;
  std::map<std::int64_t, int> est;
  for (int i = 0; i < 1000; ++i) {
    gt[i] = i % 2;
    est[i] = coin(rng);
  }
  const double rate = eval::segmentation_accuracy(est, gt);
  CHECK(rate > 0.45);
  CHECK(rate < 0.55);
}

TEST_CASE("only tracks known to both sides are scored") {
  std::map<std::int64_t, int> gt;
  std::map<std::int64_t, int> est;
  for (int i = 0; i < 10; ++i) {
    gt[i] = i % 2;
    est[i] = i % 2;
  }
  for (int i = 100; i < 105; ++i) est[i] = 9;  // unmatched noise
  CHECK(eval::segmentation_accuracy(est, gt) == 0.0);

  std::map<std::int64_t, int> disjoint{{500, 1}};
  CHECK_THROWS_AS(eval::segmentation_accuracy(disjoint, gt), NoOverlap);
}

TEST_CASE("label matching agrees with exhaustive search on random cases") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> est_label(0, 2);
  std::uniform_int_distribution<int> gt_label(0, 3);
  std::uniform_int_distribution<int> track_count(4, 30);
  for (int trial = 0; trial < 60; ++trial) {
    std::map<std::int64_t, int> gt;
    std::map<std::int64_t, int> est;
    const int n = track_count(rng);
    for (int i = 0; i < n; ++i) {
      gt[i] = gt_label(rng);
      est[i] = est_label(rng);
    }
    CHECK(eval::segmentation_accuracy(est, gt) ==
          doctest::Approx(brute_force_rate(est, gt)).epsilon(1e-12));
  }
}

TEST_CASE("accuracy is invariant under relabeling either side") {
  std::mt19937_64 rng(55);
  std::uniform_int_distribution<int> label(0, 3);
  std::map<std::int64_t, int> gt;
  std::map<std::int64_t, int> est;
  for (int i = 0; i < 200; ++i) {
    gt[i] = label(rng);
    est[i] = label(rng);
  }
  const double base = eval::segmentation_accuracy(est, gt);

  const int perm[] = {11, 3, 8, 6};
  std::map<std::int64_t, int> est_renamed;
  std::map<std::int64_t, int> gt_renamed;
  for (const auto& [k, v] : est) est_renamed[k] = perm[v];
  for (const auto& [k, v] : gt) gt_renamed[k] = perm[v];

  CHECK(eval::segmentation_accuracy(est_renamed, gt) == doctest::Approx(base));
  CHECK(eval::segmentation_accuracy(est, gt_renamed) == doctest::Approx(base));
}

TEST_CASE("metrics table writes one row per entry") {
  const fs::path dir = fs::temp_directory_path() / "dym_metrics_test";
  fs::remove_all(dir);
  fs::create_directories(dir);

  eval::write_metrics_csv(dir / "m.csv", {{0, "iou", 1, 0.5},
                                          {1, "position_error", 0, 0.0125}});
  std::ifstream in(dir / "m.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "frame,metric,label,value");
  std::getline(in, line);
  CHECK(line == "0,iou,1,0.500000000");
  std::getline(in, line);
  CHECK(line == "1,position_error,0,0.012500000");
  CHECK_FALSE(std::getline(in, line));

  CHECK_THROWS_AS(eval::write_metrics_csv(dir / "m.csv", {{0, "a,b", 0, 0.0}}),
                  ConfigError);
  CHECK_THROWS_AS(eval::write_metrics_csv(dir / "missing" / "m.csv", {}),
                  IoFailure);
}
