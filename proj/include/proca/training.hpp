#pragma once

#include <torch/torch.h>

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "proca/config.hpp"
#include "proca/losses.hpp"
#include "proca/networks.hpp"
#include "proca/synthdata.hpp"

namespace proca {

// Images held in memory at image_size, grouped by (appearance, occluded) cell.
struct TrainingSet {
  torch::Tensor pixels;      // N x 3 x S x S
  torch::Tensor appearance;  // N, int64
  torch::Tensor occluded;    // N, bool
  std::vector<int64_t> place_ids;
  int64_t domain_count = 0;
  std::map<std::pair<int64_t, bool>, std::vector<int64_t>> cells;

  static TrainingSet from_batch(const ImageBatch& batch, std::vector<int64_t> place_ids, int64_t domain_count);
  static TrainingSet from_dataset(const ImageDataset& dataset, int64_t domain_count);
  std::size_t size() const { return place_ids.size(); }
};

struct UnpairedSample {
  ImageBatch x;
  ImageBatch y;
  int64_t x_domain = 0, y_domain = 0;
  bool x_occluded = false, y_occluded = false;
};

// x and y come from two distinct cells with different appearance domains;
// every item of a side shares its cell. When anti-occlusion is enabled y is
// always drawn from an occlusion-free cell. Only non-empty cells are drawn.
// Images are randomly cropped from image_size to crop_size.
// Throws DataError when no valid (x, y) cell pair exists.
UnpairedSample sample_unpaired(const TrainingSet& data, std::mt19937_64& rng, const TrainConfig& cfg);

// Center crop / resize used at test time.
torch::Tensor prepare_for_test(const torch::Tensor& pixels, int64_t crop_size);

// Random draws consumed by one forward pass; fixing them makes the graph a
// deterministic function of (params, x, y).
struct StepNoise {
  torch::Tensor eps_xy;    // 2B x C_a, first encoding of [x; y]
  torch::Tensor eps_bar;   // 2B x C_a, encoding of the translated [y_bar; x_bar]
  torch::Tensor z_random;  // B x C_a, prior draw for appearance latent regression

  static StepNoise draw(int64_t batch, int64_t appearance_dim, uint64_t seed);
};

// Every image of the translation graph. Pairs are stacked [x-side; y-side]
// along the batch axis so each network runs once per stage.
struct StepOutputs {
  ImageBatch xy;                // [x; y]
  FactorCodes codes;            // z_x, z_y
  torch::Tensor bar;            // [y_bar; x_bar] first swap
  FactorCodes bar_codes;        // z_{y_bar}, z_{x_bar}
  torch::Tensor hat;            // [x_hat; y_hat] second swap
  torch::Tensor tilde;          // [x_tilde; y_tilde] self-reconstruction
  torch::Tensor z_random;       // [z; z]
  torch::Tensor z_recovered;    // appearance re-encoded from G(z_p, z_o, z)
  // geometry path; undefined when disabled
  torch::Tensor xy_prime;       // [x'; y'] = f([x; y])
  torch::Tensor bar_prime;      // [y_bar'; x_bar']
  torch::Tensor y_hat_prime;
  GeometricTransform transform;

  int64_t half() const { return xy.size() / 2; }
  torch::Tensor x() const { return xy.pixels.narrow(0, 0, half()); }
  torch::Tensor y() const { return xy.pixels.narrow(0, half(), half()); }
  torch::Tensor x_bar() const { return bar.narrow(0, half(), half()); }
  torch::Tensor y_bar() const { return bar.narrow(0, 0, half()); }
  torch::Tensor x_hat() const { return hat.narrow(0, 0, half()); }
  torch::Tensor y_hat() const { return hat.narrow(0, half(), half()); }
  torch::Tensor x_tilde() const { return tilde.narrow(0, 0, half()); }
  torch::Tensor y_tilde() const { return tilde.narrow(0, half(), half()); }
  torch::Tensor x_prime() const { return xy_prime.narrow(0, 0, half()); }
  torch::Tensor y_prime() const { return xy_prime.narrow(0, half(), half()); }
  torch::Tensor x_bar_prime() const { return bar_prime.narrow(0, half(), half()); }
  torch::Tensor y_bar_prime() const { return bar_prime.narrow(0, 0, half()); }
};

// The four networks the translation graph is built from. ModelParams is the
// trainable realization; tests substitute hand-built exact inverses.
class TranslationNetworks {
 public:
  virtual ~TranslationNetworks() = default;
  virtual torch::Tensor encode_place(const torch::Tensor& pixels) const = 0;
  virtual torch::Tensor encode_occlusion(const torch::Tensor& pixels) const = 0;
  virtual AppearanceCode encode_appearance(const torch::Tensor& pixels, const DomainLabel& d,
                                           const AppearanceSampling& sampling) const = 0;
  virtual torch::Tensor generate(const torch::Tensor& place, const torch::Tensor& occlusion,
                                 const torch::Tensor& appearance, const DomainLabel& d) const = 0;
  virtual int64_t domain_count() const = 0;
  // Width of the zero stand-in when the occlusion code is disabled.
  virtual int64_t occlusion_channels() const = 0;
};

class ModelNetworks final : public TranslationNetworks {
 public:
  explicit ModelNetworks(ModelParams params) : params_(std::move(params)) {}
  torch::Tensor encode_place(const torch::Tensor& pixels) const override;
  torch::Tensor encode_occlusion(const torch::Tensor& pixels) const override;
  AppearanceCode encode_appearance(const torch::Tensor& pixels, const DomainLabel& d,
                                   const AppearanceSampling& sampling) const override;
  torch::Tensor generate(const torch::Tensor& place, const torch::Tensor& occlusion, const torch::Tensor& appearance,
                         const DomainLabel& d) const override;
  int64_t domain_count() const override { return params_->config.domain_count; }
  int64_t occlusion_channels() const override { return params_->config.occlusion_channels; }

 private:
  ModelParams params_;
};

struct GraphOptions {
  bool geometry_path = true;
  bool appearance_latent_path = true;
  bool use_occlusion = true;   // false: occlusion code replaced by zeros
  bool use_appearance = true;  // false: appearance code replaced by zeros
  bool deterministic_appearance = false;

  static GraphOptions from(const TrainConfig& cfg);
};

// Swap the two halves of a stacked [a; b] tensor.
torch::Tensor swap_halves(const torch::Tensor& t);

StepOutputs forward_graph(const TranslationNetworks& nets, const ImageBatch& x, const ImageBatch& y,
                          const GeometricTransform& t, const GraphOptions& options, const StepNoise& noise);
StepOutputs forward_graph(const ModelParams& params, const ImageBatch& x, const ImageBatch& y,
                          const GeometricTransform& t, const GraphOptions& options, const StepNoise& noise);

// cc, gc, cgc, recon, lat_app, lat_place and kl: the terms that need no
// critic. Terms whose path was not run stay undefined.
std::array<torch::Tensor, kNumLossTerms> reconstruction_terms(const StepOutputs& out);

// All generator-side terms (undefined = not evaluated). Terms with zero
// weight are skipped.
std::array<torch::Tensor, kNumLossTerms> generator_terms(const ModelParams& params, const StepOutputs& out,
                                                         const TrainConfig& cfg);

// Discriminator-side terms on detached translations.
struct DiscriminatorTerms {
  torch::Tensor adv_app, adv_occ, adv_place, cls;
};
DiscriminatorTerms discriminator_terms(const ModelParams& params, const ImageBatch& x, const ImageBatch& y,
                                       const TrainConfig& cfg, const StepNoise& noise);

LossReport to_report(const std::array<torch::Tensor, kNumLossTerms>& terms, const TrainConfig& cfg);

struct StepReport {
  int64_t step = 0;
  LossReport generator;
  LossReport discriminator;  // only adv_app, adv_occ, adv_place, cls are set
};

// Owns the model and both optimizer groups. One train_step is one
// discriminator half-step followed by one encoder/generator half-step.
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);
  Trainer(TrainConfig cfg, ModelParams params, int64_t step);

  const TrainConfig& config() const { return cfg_; }
  const ModelParams& params() const { return params_; }
  int64_t step() const { return step_; }

  // Seeds for the noise / transform / sampling of a given step.
  uint64_t step_seed(int64_t step, uint64_t stream) const;
  GeometricTransform transform_for(int64_t step) const;

  StepReport train_step(const UnpairedSample& batch);
  StepReport train_step(const TrainingSet& data);

  // Half-steps, exposed for tests.
  LossReport discriminator_half_step(const UnpairedSample& batch, const StepNoise& noise);
  LossReport generator_half_step(const UnpairedSample& batch, const StepNoise& noise, const GeometricTransform& t);
  // Weighted generator objective without updating anything.
  double generator_objective(const UnpairedSample& batch, const StepNoise& noise, const GeometricTransform& t);

  void save(const std::filesystem::path& path) const;
  static Trainer resume(const std::filesystem::path& path, const TrainConfig* expected = nullptr);

  torch::optim::Adam& generator_optimizer() { return *gen_opt_; }
  torch::optim::Adam& discriminator_optimizer() { return *disc_opt_; }

 private:
  void make_optimizers();

  TrainConfig cfg_;
  ModelParams params_{nullptr};
  std::unique_ptr<torch::optim::Adam> gen_opt_, disc_opt_;
  int64_t step_ = 0;
};

// ---- checkpoints -------------------------------------------------------------

struct Checkpoint {
  ModelParams params{nullptr};
  TrainConfig config;
  int64_t step = 0;
  // Serialized optimizer archives; empty when the checkpoint has none.
  std::string generator_optimizer;
  std::string discriminator_optimizer;
};

// Atomic: written to a temporary sibling then renamed.
void save_checkpoint(const ModelParams& params, const TrainConfig& cfg, int64_t step, const std::filesystem::path& path,
                     const torch::optim::Adam* gen_opt = nullptr, const torch::optim::Adam* disc_opt = nullptr);

// Throws DataError for unreadable / corrupt archives or shape disagreement.
// With `expected`, the stored network config must match it exactly.
Checkpoint load_checkpoint(const std::filesystem::path& path, const TrainConfig* expected = nullptr);

// Hex digest of parameter names, shapes and bytes.
std::string parameter_fingerprint(const ModelParams& params);

// One NDJSON line: {"step": s, "cc": ..., ..., "total": ..., "d_adv_app": ...}
std::string report_json_line(const StepReport& report);
// First line of a loss log: {"config": {...}}
std::string log_header_line(const TrainConfig& cfg);

}  // namespace proca
