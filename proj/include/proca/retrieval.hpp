#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <string>
#include <vector>

#include "proca/geometry.hpp"
#include "proca/networks.hpp"
#include "proca/synthdata.hpp"

namespace proca {

// Unit-norm place descriptors with the pose and id of every database image.
struct DescriptorIndex {
  torch::Tensor descriptors;  // N x L, float32, unit rows
  std::vector<Pose6DoF> poses;
  std::vector<std::string> ids;
  std::vector<int64_t> place_ids;  // ground-truth place, -1 when unknown
  std::string fingerprint;         // parameter_fingerprint of the encoder

  std::size_t size() const { return ids.size(); }
  int64_t length() const { return descriptors.size(1); }

  // Row norms within 1e-5 of 1, matching lengths. Throws ValidationError.
  void validate() const;

  void save(const std::filesystem::path& path) const;
  // Throws DataError for unreadable or inconsistent files.
  static DescriptorIndex load(const std::filesystem::path& path);
};

// Test-time encoding: resize to the model's crop size, encode the place
// code, flatten and normalize. pixels is N x 3 x H x W.
torch::Tensor encode_descriptors(const ModelParams& params, const torch::Tensor& pixels, int64_t chunk = 16);

DescriptorIndex build_index(const ModelParams& params, const ImageDataset& database);

struct Match {
  std::size_t row = 0;
  std::string id;
  double similarity = 0.0;
};

// Ranked by cosine similarity, descending; ties by ascending id.
// Returns min(top_k, N) matches. Throws ValidationError for an empty index.
std::vector<Match> query(const DescriptorIndex& index, const torch::Tensor& descriptor, int64_t top_k);
// Encodes `image` (3 x H x W) first; the encoder must carry the index's
// fingerprint.
std::vector<Match> query(const DescriptorIndex& index, const ModelParams& params, const torch::Tensor& image,
                         int64_t top_k);

// Pairwise cosine similarity of unit rows (M x M, float64).
torch::Tensor similarity_matrix(const torch::Tensor& descriptors);
// Rows of `a` against rows of `b` (M x K, float64). With a and b listing the
// same places under two conditions the ground truth is the diagonal.
torch::Tensor cross_similarity(const torch::Tensor& a, const torch::Tensor& b);

enum class CodeType { kAll, kAppearance, kOcclusion, kPlace };
std::string code_type_name(CodeType t);

// Unit-norm descriptors of one factor code. kAll concatenates the three
// normalized codes (an entangled view of the same model).
torch::Tensor encode_code_descriptors(const ModelParams& params, const ImageBatch& images, CodeType type,
                                      int64_t chunk = 16);

// mean(diag) - mean(offdiag) of a square matrix.
double diagonal_dominance(const torch::Tensor& similarity);

// Plain whitespace-separated grid, one row per line.
void write_matrix_text(const std::filesystem::path& file, const torch::Tensor& matrix);

struct PoseThreshold {
  double meters = 0.0;
  double degrees = 0.0;
};

// (0.25 m, 2 deg), (0.5 m, 5 deg), (5 m, 10 deg)
std::vector<PoseThreshold> default_thresholds();

struct LocalizationResult {
  std::vector<PoseThreshold> thresholds;
  std::vector<double> accuracy;  // fraction of queries per threshold

  // "a / b / c" percentages with one decimal.
  std::string format() const;
};

// A query is localized at (d, theta) when both pose errors are within it.
LocalizationResult score_localization(const std::vector<Pose6DoF>& estimated, const std::vector<Pose6DoF>& truth,
                                      const std::vector<PoseThreshold>& thresholds = default_thresholds());

// Each query adopts the pose of its top-1 database match.
LocalizationResult evaluate_localization(const DescriptorIndex& index, const torch::Tensor& query_descriptors,
                                         const std::vector<Pose6DoF>& query_poses,
                                         const std::vector<PoseThreshold>& thresholds = default_thresholds());
LocalizationResult evaluate_localization(const DescriptorIndex& index, const ImageDataset& queries,
                                         const ModelParams& params,
                                         const std::vector<PoseThreshold>& thresholds = default_thresholds());

// Fraction of queries whose top-1 match has the same place id.
double place_recognition_accuracy(const DescriptorIndex& index, const torch::Tensor& query_descriptors,
                                  const std::vector<int64_t>& query_place_ids);

}  // namespace proca
