#include "proca/image_batch.hpp"

#include <string>

#include "proca/errors.hpp"

namespace proca {

void ImageBatch::validate(int64_t domain_count) const {
  if (!pixels.defined() || pixels.dim() != 4 || pixels.size(1) != 3) {
    throw ShapeError("ImageBatch: pixels must be B x 3 x H x W");
  }
  const auto b = pixels.size(0);
  if (appearance_domain.numel() != b || occlusion_flag.numel() != b) {
    throw ShapeError("ImageBatch: label count does not match batch size " + std::to_string(b));
  }
  if (b > 0) {
    if (!torch::isfinite(pixels).all().item<bool>()) {
      throw ValidationError("ImageBatch: non-finite pixel values");
    }
    if (pixels.abs().max().item<double>() > 1.0) {
      throw ValidationError("ImageBatch: pixel values outside [-1, 1]");
    }
    const auto lo = appearance_domain.min().item<int64_t>();
    const auto hi = appearance_domain.max().item<int64_t>();
    if (lo < 0 || hi >= domain_count) {
      throw ValidationError("ImageBatch: appearance domain outside [0, " +
                            std::to_string(domain_count) + ")");
    }
  }
}

ImageBatch ImageBatch::select(const torch::Tensor& index) const {
  return {pixels.index_select(0, index), appearance_domain.index_select(0, index),
          occlusion_flag.index_select(0, index)};
}

ImageBatch ImageBatch::concat(const ImageBatch& a, const ImageBatch& b) {
  return {torch::cat({a.pixels, b.pixels}), torch::cat({a.appearance_domain, b.appearance_domain}),
          torch::cat({a.occlusion_flag, b.occlusion_flag})};
}

ImageBatch apply_transform(const ImageBatch& batch, const GeometricTransform& t) {
  return {apply_transform(batch.pixels, t), batch.appearance_domain, batch.occlusion_flag};
}

DomainLabel::DomainLabel(torch::Tensor indices, int64_t domain_count)
    : indices_(indices.to(torch::kLong).flatten()), domain_count_(domain_count) {
  if (domain_count_ < 1) throw ValidationError("DomainLabel: domain count must be positive");
  if (indices_.numel() > 0) {
    const auto lo = indices_.min().item<int64_t>();
    const auto hi = indices_.max().item<int64_t>();
    if (lo < 0 || hi >= domain_count_) {
      throw ValidationError("DomainLabel: domain index " + std::to_string(hi >= domain_count_ ? hi : lo) +
                            " outside [0, " + std::to_string(domain_count_) + ")");
    }
  }
}

torch::Tensor DomainLabel::one_hot(torch::Dtype dtype) const {
  return torch::one_hot(indices_, domain_count_).to(dtype);
}

}  // namespace proca
