#pragma once

#include <torch/torch.h>

#include <cstdint>

#include "proca/geometry.hpp"

namespace proca {

// B x 3 x H x W pixels in [-1, 1] with per-item domain labels.
struct ImageBatch {
  torch::Tensor pixels;             // float, B x 3 x H x W
  torch::Tensor appearance_domain;  // int64, B
  torch::Tensor occlusion_flag;     // bool, B; true = "with occlusion" side

  int64_t size() const { return pixels.defined() ? pixels.size(0) : 0; }
  int64_t height() const { return pixels.size(2); }
  int64_t width() const { return pixels.size(3); }

  // Checks rank, label lengths, finiteness and the [-1, 1] range.
  void validate(int64_t domain_count) const;

  ImageBatch select(const torch::Tensor& index) const;
  static ImageBatch concat(const ImageBatch& a, const ImageBatch& b);
};

// Rotates the pixels; labels are carried over unchanged.
ImageBatch apply_transform(const ImageBatch& batch, const GeometricTransform& t);

// Per-item one-hot appearance domain codes (B x k).
class DomainLabel {
 public:
  DomainLabel(torch::Tensor indices, int64_t domain_count);

  static DomainLabel of(const ImageBatch& batch, int64_t domain_count) {
    return DomainLabel(batch.appearance_domain, domain_count);
  }

  const torch::Tensor& indices() const { return indices_; }
  int64_t domain_count() const { return domain_count_; }
  int64_t size() const { return indices_.size(0); }

  torch::Tensor one_hot(torch::Dtype dtype = torch::kFloat32) const;

 private:
  torch::Tensor indices_;
  int64_t domain_count_;
};

}  // namespace proca
