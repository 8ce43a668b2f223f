#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <dym/io/formats.hpp>

using namespace dym;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dym_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

recon::PointCloud sample_cloud() {
  recon::PointCloud cloud;
  cloud.points = {{1.5, -2.25, 0.125}, {0.0, 0.0, 3.5}, {-10.75, 4.5, 0.001}};
  cloud.colors = {{1.0, 0.0, 0.5}, {0.2, 0.4, 0.6}, {0.0, 1.0, 1.0}};
  return cloud;
}

}  // namespace

TEST_CASE("point cloud file round-trips positions and colors") {
  const auto dir = fresh_dir("ply_roundtrip");
  const auto cloud = sample_cloud();
  io::write_ply(dir / "c.ply", cloud);
  const auto back = io::read_ply(dir / "c.ply");

  REQUIRE(back.size() == cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    // Positions carry 6 decimals, colors are quantized to 8 bits.
    CHECK((back.points[i] - cloud.points[i]).norm() < 1e-5);
    CHECK((back.colors[i] - cloud.colors[i]).cwiseAbs().maxCoeff() <
          0.5 / 255.0 + 1e-12);
  }
}

TEST_CASE("point cloud file layout is exact") {
  const auto dir = fresh_dir("ply_layout");
  recon::PointCloud cloud;
  cloud.points = {{1.5, -2.25, 0.125}};
  cloud.colors = {{1.0, 0.0, 0.5}};
  io::write_ply(dir / "c.ply", cloud);

  const auto lines = read_lines(dir / "c.ply");
  REQUIRE(lines.size() == 11);
  CHECK(lines[0] == "ply");
  CHECK(lines[1] == "format ascii 1.0");
  CHECK(lines[2] == "element vertex 1");
  CHECK(lines[3] == "property float x");
  CHECK(lines[4] == "property float y");
  CHECK(lines[5] == "property float z");
  CHECK(lines[6] == "property uchar red");
  CHECK(lines[7] == "property uchar green");
  CHECK(lines[8] == "property uchar blue");
  CHECK(lines[9] == "end_header");
  CHECK(lines[10] == "1.500000 -2.250000 0.125000 255 0 128");
}

TEST_CASE("empty point cloud file round-trips") {
  const auto dir = fresh_dir("ply_empty");
  io::write_ply(dir / "c.ply", recon::PointCloud{});
  const auto back = io::read_ply(dir / "c.ply");
  CHECK(back.size() == 0);
}

TEST_CASE("color channels are clamped before quantization") {
  const auto dir = fresh_dir("ply_clamp");
  recon::PointCloud cloud;
  cloud.points = {{0.0, 0.0, 1.0}};
  cloud.colors = {{-0.5, 1.5, 0.999}};
  io::write_ply(dir / "c.ply", cloud);
  const auto back = io::read_ply(dir / "c.ply");
  CHECK(back.colors[0].x() == doctest::Approx(0.0));
  CHECK(back.colors[0].y() == doctest::Approx(1.0));
}

TEST_CASE("point cloud reader rejects malformed files") {
  const auto dir = fresh_dir("ply_bad");
  const std::string header =
      "ply\nformat ascii 1.0\nelement vertex 1\n"
      "property float x\nproperty float y\nproperty float z\n"
      "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      "end_header\n";

  SUBCASE("missing file") {
    CHECK_THROWS_AS(io::read_ply(dir / "nope.ply"), IoFailure);
  }
  SUBCASE("bad magic") {
    write_text(dir / "f.ply", "plx\nformat ascii 1.0\n");
    CHECK_THROWS_AS(io::read_ply(dir / "f.ply"), ParseError);
  }
  SUBCASE("binary format declared") {
    write_text(dir / "f.ply", "ply\nformat binary_little_endian 1.0\n");
    CHECK_THROWS_AS(io::read_ply(dir / "f.ply"), ParseError);
  }
  SUBCASE("unexpected property") {
    write_text(dir / "f.ply",
               "ply\nformat ascii 1.0\nelement vertex 0\n"
               "property float x\nproperty float nx\nend_header\n");
    CHECK_THROWS_AS(io::read_ply(dir / "f.ply"), ParseError);
  }
  SUBCASE("missing properties") {
    write_text(dir / "f.ply",
               "ply\nformat ascii 1.0\nelement vertex 0\n"
               "property float x\nproperty float y\nproperty float z\n"
               "end_header\n");
    CHECK_THROWS_AS(io::read_ply(dir / "f.ply"), ParseError);
  }
  SUBCASE("fewer vertices than declared") {
    write_text(dir / "f.ply", header);  // declares 1, provides none
    CHECK_THROWS_AS(io::read_ply(dir / "f.ply"), ParseError);
  }
  SUBCASE("more vertices than declared") {
    write_text(dir / "f.ply", header + "0 0 1 10 10 10\n0 0 2 10 10 10\n");
    CHECK_THROWS_AS(io::read_ply(dir / "f.ply"), ParseError);
  }
  SUBCASE("non-numeric coordinate") {
    write_text(dir / "f.ply", header + "0 zero 1 10 10 10\n");
    CHECK_THROWS_AS(io::read_ply(dir / "f.ply"), ParseError);
  }
  SUBCASE("trailing field on vertex line") {
    write_text(dir / "f.ply", header + "0 0 1 10 10 10 extra\n");
    try {
      io::read_ply(dir / "f.ply");
      FAIL("expected a parse failure");
    } catch (const ParseError& e) {
      CHECK(e.line() == 11);
      CHECK(e.path() == (dir / "f.ply").string());
    }
  }
  SUBCASE("comments in the header are fine") {
    write_text(dir / "f.ply",
               "ply\nformat ascii 1.0\ncomment made by hand\n"
               "element vertex 1\n"
               "property float x\nproperty float y\nproperty float z\n"
               "property uchar red\nproperty uchar green\nproperty uchar "
               "blue\nend_header\n1 2 3 4 5 6\n");
    const auto cloud = io::read_ply(dir / "f.ply");
    REQUIRE(cloud.size() == 1);
    CHECK(cloud.points[0] == Eigen::Vector3d(1, 2, 3));
  }
}

TEST_CASE("trajectory file round-trips poses and timestamps") {
  const auto dir = fresh_dir("traj_roundtrip");
  const std::vector<double> times = {0.0, 0.5, 2.0};
  const std::vector<Pose> poses = {
      Pose::identity(),
      Pose(Eigen::Quaterniond(Eigen::AngleAxisd(0.3, Eigen::Vector3d::UnitZ())),
           {1.0, -2.0, 3.0}),
      Pose(Eigen::Quaterniond(
               Eigen::AngleAxisd(1.2, Eigen::Vector3d(1, 1, 0).normalized())),
           {-0.25, 0.125, 10.0}),
  };
  io::write_trajectory(dir / "t.txt", times, poses);
  const auto back = io::read_trajectory(dir / "t.txt");

  REQUIRE(back.poses.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.timestamps[i] == doctest::Approx(times[i]).epsilon(1e-9));
    CHECK(translation_distance(back.poses[i], poses[i]) < 1e-8);
    CHECK(rotation_angle_between_rad(back.poses[i], poses[i]) < 1e-7);
  }
}

TEST_CASE("trajectory line format is exact and scalar-last") {
  const auto dir = fresh_dir("traj_layout");
  io::write_trajectory(dir / "t.txt", {0.0},
                       {Pose(Eigen::Quaterniond::Identity(), {1.0, 2.0, 3.0})});
  const auto lines = read_lines(dir / "t.txt");
  REQUIRE(lines.size() == 1);
  CHECK(lines[0] ==
        "0.000000000 1.000000000 2.000000000 3.000000000 "
        "0.000000000 0.000000000 0.000000000 1.000000000");
}

TEST_CASE("trajectory reader renormalizes quaternions") {
  const auto dir = fresh_dir("traj_norm");
  write_text(dir / "t.txt", "0 0 0 0 0 0 0 2\n");
  const auto back = io::read_trajectory(dir / "t.txt");
  REQUIRE(back.poses.size() == 1);
  CHECK(back.poses[0].rotation().norm() == doctest::Approx(1.0));
  CHECK(rotation_angle_between_rad(back.poses[0], Pose::identity()) < 1e-12);
}

TEST_CASE("trajectory reader rejects malformed lines") {
  const auto dir = fresh_dir("traj_bad");
  SUBCASE("missing file") {
    CHECK_THROWS_AS(io::read_trajectory(dir / "nope.txt"), IoFailure);
  }
  SUBCASE("too few fields") {
    write_text(dir / "t.txt", "0 0 0 0 0 0 1\n");
    CHECK_THROWS_AS(io::read_trajectory(dir / "t.txt"), ParseError);
  }
  SUBCASE("too many fields") {
    write_text(dir / "t.txt", "0 0 0 0 0 0 0 1 9\n");
    CHECK_THROWS_AS(io::read_trajectory(dir / "t.txt"), ParseError);
  }
  SUBCASE("zero quaternion") {
    write_text(dir / "t.txt", "0 1 2 3 0 0 0 0\n");
    CHECK_THROWS_AS(io::read_trajectory(dir / "t.txt"), ParseError);
  }
  SUBCASE("mismatched write inputs") {
    CHECK_THROWS_AS(
        io::write_trajectory(dir / "t.txt", {0.0, 1.0}, {Pose::identity()}),
        LengthMismatch);
  }
}

TEST_CASE("key-value file round-trips and parses sections") {
  const auto dir = fresh_dir("kv");
  io::write_key_value_file(dir / "f.txt",
                           {{"alpha", "1"}, {"path", "a b.txt"}}, "header");
  auto parsed = io::read_key_value_file(dir / "f.txt");
  CHECK(parsed[""].at("alpha") == "1");
  CHECK(parsed[""].at("path") == "a b.txt");

  write_text(dir / "s.txt",
             "# comment\n"
             "top = yes\n"
             "\n"
             "[camera]\n"
             "fx = 500.0\n"
             "fx_note = pixels\n"
             "[empty_section]\n"
             "[motion]\n"
             "fx = reused name in a new section\n");
  parsed = io::read_key_value_file(dir / "s.txt");
  CHECK(parsed[""].at("top") == "yes");
  CHECK(parsed["camera"].at("fx") == "500.0");
  CHECK(parsed["motion"].at("fx") == "reused name in a new section");
  CHECK(parsed.count("empty_section") == 1);
  CHECK(parsed["empty_section"].empty());
}

TEST_CASE("key-value reader rejects malformed input") {
  const auto dir = fresh_dir("kv_bad");
  SUBCASE("duplicate key in one section") {
    write_text(dir / "f.txt", "a = 1\na = 2\n");
    CHECK_THROWS_AS(io::read_key_value_file(dir / "f.txt"), ParseError);
  }
  SUBCASE("line without separator") {
    write_text(dir / "f.txt", "just words\n");
    CHECK_THROWS_AS(io::read_key_value_file(dir / "f.txt"), ParseError);
  }
  SUBCASE("empty key") {
    write_text(dir / "f.txt", " = 2\n");
    CHECK_THROWS_AS(io::read_key_value_file(dir / "f.txt"), ParseError);
  }
  SUBCASE("unterminated section header") {
    write_text(dir / "f.txt", "[camera\n");
    CHECK_THROWS_AS(io::read_key_value_file(dir / "f.txt"), ParseError);
  }
  SUBCASE("empty section name") {
    write_text(dir / "f.txt", "[ ]\n");
    CHECK_THROWS_AS(io::read_key_value_file(dir / "f.txt"), ParseError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(io::read_key_value_file(dir / "nope.txt"), IoFailure);
  }
}
