#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "proca/losses.hpp"

namespace proca {

// Everything that fixes parameter shapes. Two configs with equal
// NetworkConfig produce checkpoints that load into each other.
struct NetworkConfig {
  int64_t crop_size = 64;
  int64_t base_width = 16;  // first encoder conv; doubles once before the code width
  int64_t place_channels = 64;
  int64_t occlusion_channels = 16;
  int64_t appearance_dim = 8;
  int64_t domain_count = 3;
  int64_t encoder_res_blocks = 2;
  int64_t generator_res_blocks = 2;
  int64_t appearance_width = 16;
  int64_t critic_width = 16;
  int64_t place_critic_width = 32;
  int64_t mlp_width = 64;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

struct TrainConfig {
  int64_t image_size = 72;
  NetworkConfig net;
  LossWeights weights;

  double lr_generator = 1e-4;
  double lr_discriminator = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;

  int64_t total_steps = 1000;
  int64_t batch_size = 2;
  uint64_t seed = 0;
  int64_t checkpoint_every = 0;  // 0 = only at the end

  int quarter_turns = 1;
  bool resample_transform = false;  // draw a fresh non-identity turn every step
  bool deterministic_appearance = false;
  bool anti_occlusion_enabled = true;
  bool appearance_enabled = true;
  bool multidomain = true;

  int64_t crop_size() const { return net.crop_size; }
  int64_t domain_count() const { return net.domain_count; }

  // crop_size <= image_size, crop_size % 4 == 0, k >= 2, weights valid, ...
  void validate() const;

  // Flat "key = value" text; every field, one per line, stable order.
  std::string to_text() const;
  std::map<std::string, std::string> to_map() const;

  // Applies "key = value" pairs on top of `base`; unknown keys are errors.
  static TrainConfig from_map(const std::map<std::string, std::string>& kv, TrainConfig base);
  static TrainConfig from_map(const std::map<std::string, std::string>& kv);
  static TrainConfig from_text(const std::string& text, TrainConfig base);
  static TrainConfig from_text(const std::string& text);
  static TrainConfig from_file(const std::filesystem::path& file, TrainConfig base);
  static TrainConfig from_file(const std::filesystem::path& file);

  // 64x64 crops, C_p = 64, C_o = 16, C_a = 8, k = 3.
  static TrainConfig desk();
  // 256 resize, 216 crop, 256-channel place code at 54 x 54.
  static TrainConfig paper();
};

inline TrainConfig TrainConfig::from_map(const std::map<std::string, std::string>& kv) {
  return from_map(kv, TrainConfig{});
}
inline TrainConfig TrainConfig::from_text(const std::string& text) { return from_text(text, TrainConfig{}); }
inline TrainConfig TrainConfig::from_file(const std::filesystem::path& file) { return from_file(file, TrainConfig{}); }

std::map<std::string, std::string> parse_key_values(const std::string& text);

}  // namespace proca
