#include <gtest/gtest.h>

#include <Eigen/Geometry>
#include <filesystem>
#include <random>

#include "proca/errors.hpp"
#include "proca/geometry.hpp"
#include "support.hpp"

using namespace proca;
using proca::testing::oracle_rotate;
using proca::testing::values;

TEST(GeometricTransform, QuarterTurnsWrapModuloFour) {
  EXPECT_EQ(GeometricTransform(5).quarter_turns(), 1);
  EXPECT_EQ(GeometricTransform(-1).quarter_turns(), 3);
  EXPECT_TRUE(GeometricTransform(4).is_identity());
  EXPECT_EQ(GeometricTransform(1).inverse(), GeometricTransform(3));
  EXPECT_EQ(GeometricTransform(3).compose(GeometricTransform(2)), GeometricTransform(1));
}

TEST(GeometricTransform, RotationMatchesIndexPermutation) {
  auto x = torch::rand({2, 3, 5, 5}, torch::kFloat64);
  for (int q = 0; q < 4; ++q) {
    EXPECT_EQ(values(apply_transform(x, GeometricTransform(q))), oracle_rotate(values(x), 5, q)) << "q=" << q;
  }
}

TEST(GeometricTransform, ClockwiseCorner) {
  // top-left moves to top-right under one clockwise quarter turn
  auto x = torch::zeros({1, 3, 3});
  x[0][0][0] = 1.0;
  auto r = apply_transform(x, GeometricTransform(1));
  EXPECT_EQ(r[0][0][2].item<float>(), 1.0f);
  EXPECT_EQ(r.sum().item<float>(), 1.0f);
}

TEST(GeometricTransform, GroupLawIsBitExact) {
  auto x = torch::randn({2, 3, 8, 8});
  const GeometricTransform f(1);
  auto y = x;
  for (int i = 0; i < 4; ++i) y = apply_transform(y, f);
  EXPECT_TRUE(torch::equal(x, y));
  EXPECT_TRUE(torch::equal(apply_transform(apply_transform(x, f), f.inverse()), x));
  EXPECT_TRUE(torch::equal(apply_transform(apply_transform(x, f.inverse()), f), x));
}

TEST(GeometricTransform, RejectsNonSquare) {
  EXPECT_THROW(apply_transform(torch::zeros({1, 3, 4, 5}), GeometricTransform(1)), ShapeError);
}

namespace {

Pose6DoF random_pose(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Pose6DoF p;
  p.translation = Eigen::Vector3d(n(rng), n(rng), n(rng)) * 3.0;
  p.rotation = Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng)).normalized();
  return p;
}

}  // namespace

TEST(PoseError, MatchesRotationMatrixTraceOracle) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto a = random_pose(rng), b = random_pose(rng);
    const auto e = pose_error(a, b);
    const Eigen::Matrix3d r = a.rotation.toRotationMatrix().transpose() * b.rotation.toRotationMatrix();
    const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
    EXPECT_NEAR(e.degrees, std::acos(c) * 180.0 / M_PI, 1e-5);
    EXPECT_NEAR(e.meters, (a.translation - b.translation).norm(), 1e-12);
  }
}

TEST(PoseError, DoubleCoverAndKnownAngles) {
  Pose6DoF a, b;
  b.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(10.0 * M_PI / 180.0, Eigen::Vector3d::UnitY()));
  b.translation = Eigen::Vector3d(3, 4, 0);
  EXPECT_NEAR(pose_error(a, b).degrees, 10.0, 1e-9);
  EXPECT_DOUBLE_EQ(pose_error(a, b).meters, 5.0);
  Pose6DoF c = b;
  c.rotation.coeffs() *= -1.0;
  EXPECT_NEAR(pose_error(b, c).degrees, 0.0, 1e-6);
}

TEST(Pose, ValidateRejectsNonUnitQuaternion) {
  Pose6DoF p;
  p.rotation.coeffs() << 0.0, 0.0, 0.0, 1.1;
  EXPECT_THROW(p.validate(), ValidationError);
}

TEST(PoseManifest, RoundTripsExactly) {
  std::mt19937_64 rng(9);
  std::vector<PoseRecord> recs;
  for (int i = 0; i < 5; ++i) recs.push_back({"img_" + std::to_string(i) + ".png", random_pose(rng)});
  const auto file = std::filesystem::temp_directory_path() / "proca_pose_manifest.txt";
  write_pose_manifest(file, recs);
  const auto back = read_pose_manifest(file);
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(back[i].path, recs[i].path);
    EXPECT_EQ(back[i].pose.translation, recs[i].pose.translation);
    EXPECT_EQ(back[i].pose.rotation.coeffs(), recs[i].pose.rotation.coeffs());
  }
}

TEST(PoseManifest, MalformedLineIsDataError) {
  EXPECT_THROW(parse_pose({"1", "2", "x", "1", "0", "0", "0"}, 0), DataError);
  EXPECT_THROW(parse_pose({"1", "2"}, 0), DataError);
}
