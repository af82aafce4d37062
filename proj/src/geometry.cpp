#include "proca/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "proca/errors.hpp"

namespace proca {

GeometricTransform::GeometricTransform(int quarter_turns)
    : quarter_turns_(((quarter_turns % 4) + 4) % 4) {}

GeometricTransform GeometricTransform::inverse() const {
  return GeometricTransform((4 - quarter_turns_) % 4);
}

GeometricTransform GeometricTransform::compose(const GeometricTransform& other) const {
  return GeometricTransform(quarter_turns_ + other.quarter_turns_);
}

torch::Tensor apply_transform(const torch::Tensor& pixels, const GeometricTransform& t) {
  if (pixels.dim() < 2) {
    throw ShapeError("apply_transform: expected at least 2 dimensions, got " +
                     std::to_string(pixels.dim()));
  }
  const auto h = pixels.size(-2);
  const auto w = pixels.size(-1);
  if (h != w) {
    throw ShapeError("apply_transform: image must be square, got " + std::to_string(h) + "x" +
                     std::to_string(w));
  }
  if (t.is_identity()) {
    return pixels;
  }
  // torch::rot90 turns counter-clockwise for positive k.
  return torch::rot90(pixels, -t.quarter_turns(), {-2, -1}).contiguous();
}

void Pose6DoF::validate(double tol) const {
  const double n = rotation.coeffs().norm();
  if (!std::isfinite(n) || std::abs(n - 1.0) > tol) {
    std::ostringstream os;
    os << "quaternion is not unit-norm (|q| = " << std::setprecision(12) << n << ")";
    throw ValidationError(os.str());
  }
  if (!translation.allFinite()) {
    throw ValidationError("translation has non-finite components");
  }
}

PoseError pose_error(const Pose6DoF& a, const Pose6DoF& b) {
  a.validate();
  b.validate();
  PoseError e;
  e.meters = (a.translation - b.translation).norm();
  const double dot = std::clamp(std::abs(a.rotation.coeffs().dot(b.rotation.coeffs())), 0.0, 1.0);
  e.degrees = 2.0 * std::acos(dot) * 180.0 / std::numbers::pi;
  return e;
}

std::string format_pose(const Pose6DoF& pose) {
  std::ostringstream os;
  os << std::setprecision(17);
  const auto& t = pose.translation;
  const auto& q = pose.rotation;
  os << t.x() << ' ' << t.y() << ' ' << t.z() << ' ' << q.w() << ' ' << q.x() << ' ' << q.y()
     << ' ' << q.z();
  return os.str();
}

Pose6DoF parse_pose(const std::vector<std::string>& fields, std::size_t offset) {
  if (fields.size() < offset + 7) {
    throw DataError("pose needs 7 numbers, found " +
                    std::to_string(fields.size() > offset ? fields.size() - offset : 0));
  }
  double v[7];
  for (int i = 0; i < 7; ++i) {
    const auto& f = fields[offset + i];
    std::size_t used = 0;
    try {
      v[i] = std::stod(f, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != f.size()) {
      throw DataError("malformed pose number '" + f + "'");
    }
  }
  Pose6DoF pose;
  pose.translation = Eigen::Vector3d(v[0], v[1], v[2]);
  pose.rotation = Eigen::Quaterniond(v[3], v[4], v[5], v[6]);
  try {
    pose.validate();
  } catch (const ValidationError& e) {
    throw DataError(e.what());
  }
  return pose;
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

}  // namespace

std::vector<PoseRecord> read_pose_manifest(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open pose manifest " + file.string());
  std::vector<PoseRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto fields = split_ws(line);
    if (fields.empty() || fields[0].starts_with('#')) continue;
    if (fields.size() != 8) {
      throw DataError(file.string() + ":" + std::to_string(lineno) + ": expected 8 fields, got " +
                      std::to_string(fields.size()));
    }
    try {
      records.push_back({fields[0], parse_pose(fields, 1)});
    } catch (const DataError& e) {
      throw DataError(file.string() + ":" + std::to_string(lineno) + " (" + fields[0] +
                      "): " + e.what());
    }
  }
  return records;
}

void write_pose_manifest(const std::filesystem::path& file, const std::vector<PoseRecord>& records) {
  std::ofstream out(file);
  if (!out) throw DataError("cannot write pose manifest " + file.string());
  for (const auto& r : records) out << r.path << ' ' << format_pose(r.pose) << '\n';
}

}  // namespace proca
