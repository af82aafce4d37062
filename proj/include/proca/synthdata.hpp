#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "proca/geometry.hpp"
#include "proca/image_batch.hpp"

namespace proca {

// Ground-truth factors of one synthetic image. Same place_id means the same
// underlying layout no matter the other factors.
struct SceneSpec {
  int64_t place_id = 0;
  int64_t appearance_domain = 0;
  bool occluded = false;
  Pose6DoF pose;
  uint64_t render_seed = 0;
};

// Deterministic render, 3 x size x size in [-1, 1]. The layout comes from
// place_id (plus a small pan from the pose), occluder "vehicles" are drawn on
// top when occluded, and the appearance domain applies a strictly
// increasing per-channel intensity transform to the result.
torch::Tensor render_scene(const SceneSpec& spec, int64_t size);

// Boolean size x size mask of the pixels covered by occluders (all false when
// spec.occluded is false).
torch::Tensor occluder_mask(const SceneSpec& spec, int64_t size);

// Canonical pose of a place plus the per-view perturbation.
Pose6DoF place_pose(int64_t place_id, double lateral_m, double yaw_deg);

enum class Split { kDatabase, kQuery };

struct ManifestRecord {
  std::string path;  // relative to the manifest's directory
  SceneSpec spec;
  Split split = Split::kQuery;
};

// Plain-text manifest, one record per line:
//   path place_id appearance_domain occluded(0/1) tx ty tz qw qx qy qz
// Plain pose manifests ("path tx ty tz qw qx qy qz") are also accepted on
// read; those records get place_id -1, domain 0, not occluded.
struct DatasetManifest {
  std::vector<ManifestRecord> records;

  static DatasetManifest read(const std::filesystem::path& file);
  void write(const std::filesystem::path& file) const;
};

struct SynthOptions {
  int64_t n_places = 32;
  int64_t domain_count = 3;
  int64_t views_per_place = 4;
  int64_t size = 64;
  uint64_t seed = 0;
  // Appearance domain / occlusion side of the reference (database) cell.
  int64_t database_domain = 0;
};

// Every (place, domain, occlusion, view) cell is rendered. Writes
//   images/*.png, manifest.txt (all), database.txt, query.txt,
//   poses.txt (pose-manifest format, all records)
// into out_dir and returns the full manifest.
DatasetManifest build_synthetic_dataset(const SynthOptions& options, const std::filesystem::path& out_dir);

// In-memory specs of the same grid without touching the filesystem.
std::vector<ManifestRecord> synthetic_records(const SynthOptions& options);

// File-backed dataset; images are decoded on demand, resized to `size` and
// mapped from 8-bit to [-1, 1].
class ImageDataset {
 public:
  static ImageDataset open(const std::filesystem::path& manifest, int64_t size);

  std::size_t size() const { return records_.size(); }
  int64_t image_size() const { return image_size_; }
  const ManifestRecord& record(std::size_t i) const { return records_.at(i); }
  const std::vector<ManifestRecord>& records() const { return records_; }
  std::filesystem::path image_path(std::size_t i) const;

  // 3 x size x size. Throws DataError naming the record on failure.
  torch::Tensor load(std::size_t i) const;
  ImageBatch load_batch(const std::vector<std::size_t>& indices) const;
  ImageBatch load_all() const;

 private:
  std::filesystem::path root_;
  std::vector<ManifestRecord> records_;
  int64_t image_size_ = 0;
};

// Reads an 8-bit image file, resizes to size x size, returns 3 x size x size
// in [-1, 1]. Throws DataError.
torch::Tensor read_image(const std::filesystem::path& file, int64_t size);
// Writes a 3 x H x W tensor in [-1, 1] as 8-bit RGB.
void write_image(const std::filesystem::path& file, const torch::Tensor& pixels);

}  // namespace proca
