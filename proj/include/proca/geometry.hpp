#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <torch/torch.h>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace proca {

// A rotation of the pixel lattice by a multiple of 90 degrees clockwise.
// Arithmetic on quarter turns is modulo 4.
class GeometricTransform {
 public:
  GeometricTransform() = default;
  explicit GeometricTransform(int quarter_turns);

  int quarter_turns() const { return quarter_turns_; }
  bool is_identity() const { return quarter_turns_ == 0; }

  GeometricTransform inverse() const;
  GeometricTransform compose(const GeometricTransform& other) const;

  friend bool operator==(const GeometricTransform&, const GeometricTransform&) = default;

 private:
  int quarter_turns_ = 0;
};

inline GeometricTransform inverse_transform(const GeometricTransform& t) { return t.inverse(); }

// Rotates the last two (square) axes of `pixels`. Works on any tensor of rank
// >= 2, so images, batches and spatial codes all go through the same path.
// (row r, col c) moves to (row c, col H-1-r) for every quarter turn.
torch::Tensor apply_transform(const torch::Tensor& pixels, const GeometricTransform& t);

struct Pose6DoF {
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  // Unit quaternion; (w, x, y, z) in the text formats.
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();

  // Throws ValidationError if |q| deviates from 1 by more than `tol`.
  void validate(double tol = 1e-6) const;
};

struct PoseError {
  double meters = 0.0;
  double degrees = 0.0;
};

// Euclidean translation distance and the double-cover angle
// 2 acos(|<qa, qb>|) in degrees.
PoseError pose_error(const Pose6DoF& a, const Pose6DoF& b);

struct PoseRecord {
  std::string path;
  Pose6DoF pose;
};

// "path tx ty tz qw qx qy qz", one record per line. Blank lines and lines
// starting with '#' are skipped.
std::vector<PoseRecord> read_pose_manifest(const std::filesystem::path& file);
void write_pose_manifest(const std::filesystem::path& file, const std::vector<PoseRecord>& records);

// Pose fields in the manifest encoding (7 numbers, full round-trip precision).
std::string format_pose(const Pose6DoF& pose);
// Parses 7 whitespace-separated numbers; throws DataError on malformed input.
Pose6DoF parse_pose(const std::vector<std::string>& fields, std::size_t offset);

}  // namespace proca
