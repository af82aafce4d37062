#pragma once

#include <torch/torch.h>

#include <optional>
#include <string>
#include <vector>

#include "proca/config.hpp"
#include "proca/image_batch.hpp"

namespace proca {

// conv3 - IN - ReLU - conv3 - IN, plus identity skip.
struct ResidualBlockImpl : torch::nn::Module {
  explicit ResidualBlockImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
  torch::nn::InstanceNorm2d norm1{nullptr}, norm2{nullptr};
};
TORCH_MODULE(ResidualBlock);

// Shared spatial encoder used for both the place and the occlusion code:
// conv7, two stride-2 convs (H -> H/4), then residual blocks.
struct ContentEncoderImpl : torch::nn::Module {
  ContentEncoderImpl(int64_t base_width, int64_t out_channels, int64_t res_blocks);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Sequential stem{nullptr};
  torch::nn::Sequential blocks{nullptr};
  int64_t out_channels;
};
TORCH_MODULE(ContentEncoder);

// Domain-conditioned global encoder: the one-hot domain is broadcast as
// extra input planes; conv stack, global pooling, then fully-connected
// mean / log-variance heads.
struct AppearanceEncoderImpl : torch::nn::Module {
  AppearanceEncoderImpl(int64_t width, int64_t domain_count, int64_t code_dim);
  std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& x, const torch::Tensor& domain_one_hot);

  torch::nn::Sequential convs{nullptr};
  torch::nn::Linear mean_head{nullptr}, logvar_head{nullptr};
};
TORCH_MODULE(AppearanceEncoder);

// Instance norm without learned affine; scale and shift come from outside.
torch::Tensor modulated_norm(const torch::Tensor& x, const torch::Tensor& gamma, const torch::Tensor& beta);

struct ModulatedResidualBlockImpl : torch::nn::Module {
  explicit ModulatedResidualBlockImpl(int64_t channels);
  // `style` holds (gamma1, beta1, gamma2, beta2), each B x C.
  torch::Tensor forward(const torch::Tensor& x, const std::vector<torch::Tensor>& style);

  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
};
TORCH_MODULE(ModulatedResidualBlock);

// Place (+) occlusion are concatenated on channels, fused by a conv, and run
// through residual blocks whose normalizations are modulated per channel by
// an MLP of (appearance code, domain one-hot). Two transposed convs restore
// the input resolution; tanh output.
struct GeneratorImpl : torch::nn::Module {
  GeneratorImpl(const NetworkConfig& cfg);
  torch::Tensor forward(const torch::Tensor& place, const torch::Tensor& occlusion, const torch::Tensor& appearance,
                        const torch::Tensor& domain_one_hot);

  int64_t width;
  int64_t modulated_layers;
  torch::nn::Sequential mlp{nullptr};
  torch::nn::Conv2d fuse{nullptr};
  torch::nn::ModuleList blocks{nullptr};
  torch::nn::Sequential head{nullptr};
};
TORCH_MODULE(Generator);

// PatchGAN critic with an auxiliary domain classification head.
struct ImageCriticImpl : torch::nn::Module {
  ImageCriticImpl(int64_t width, int64_t domain_count);
  // (realness logits B x 1 x h' x h', domain logits B x k)
  std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& x);

  torch::nn::Sequential trunk{nullptr};
  torch::nn::Conv2d realness{nullptr};
  torch::nn::Linear classifier{nullptr};
};
TORCH_MODULE(ImageCritic);

// Small conv head over the spatial place code; one logit per item.
struct PlaceCriticImpl : torch::nn::Module {
  PlaceCriticImpl(int64_t in_channels, int64_t width);
  torch::Tensor forward(const torch::Tensor& code);

  torch::nn::Sequential net{nullptr};
  torch::nn::Linear out{nullptr};
};
TORCH_MODULE(PlaceCritic);

// Every learnable array of the model, keyed by role. Forward passes only read
// parameters and may run concurrently; updates need exclusive access. No
// internal locking is done.
struct ModelParamsImpl : torch::nn::Module {
  explicit ModelParamsImpl(const NetworkConfig& cfg);

  NetworkConfig config;
  ContentEncoder place_encoder{nullptr};
  ContentEncoder occlusion_encoder{nullptr};
  AppearanceEncoder appearance_encoder{nullptr};
  Generator generator{nullptr};
  ImageCritic appearance_critic{nullptr};
  ImageCritic occlusion_critic_without{nullptr};  // D_o for the occlusion-free side
  ImageCritic occlusion_critic_with{nullptr};
  PlaceCritic place_critic{nullptr};

  // Encoders and generator.
  std::vector<torch::Tensor> generator_parameters() const;
  // Image critics and the place critic.
  std::vector<torch::Tensor> discriminator_parameters() const;

  int64_t parameter_count() const;
};
TORCH_MODULE(ModelParams);

// Gaussian(0, 0.02) for conv / linear weights, zero biases, unit norm scales.
void initialize_weights(torch::nn::Module& module);

ModelParams make_model(const NetworkConfig& cfg, uint64_t seed);

// --- operations -------------------------------------------------------------

struct AppearanceCode {
  torch::Tensor mean;    // B x C_a
  torch::Tensor logvar;  // B x C_a
  torch::Tensor sample;  // mean + exp(0.5 logvar) * eps, or mean
  torch::Tensor eps;     // recorded noise; undefined in deterministic mode
};

struct FactorCodes {
  torch::Tensor place;
  torch::Tensor occlusion;
  AppearanceCode appearance;
};

struct AppearanceSampling {
  bool deterministic = true;
  // Used verbatim when defined; otherwise drawn from the global generator.
  torch::Tensor eps;
};

struct CriticOutput {
  torch::Tensor realness_logits;  // B x 1 x h' x h'
  torch::Tensor realness;         // sigmoid of the above
  torch::Tensor domain_logits;    // B x k
};

torch::Tensor encode_place(const ModelParams& params, const torch::Tensor& pixels);
torch::Tensor encode_occlusion(const ModelParams& params, const torch::Tensor& pixels);
AppearanceCode encode_appearance(const ModelParams& params, const torch::Tensor& pixels, const DomainLabel& d,
                                 const AppearanceSampling& sampling = {});
FactorCodes encode(const ModelParams& params, const ImageBatch& img, const AppearanceSampling& sampling = {});

torch::Tensor generate(const ModelParams& params, const torch::Tensor& place, const torch::Tensor& occlusion,
                       const torch::Tensor& appearance, const DomainLabel& d);

// occlusion_side = false: the multi-domain appearance critic.
// occlusion_side = true:  the occlusion critic pair, each item routed to the
//                         critic of its own occlusion_flag.
CriticOutput discriminate_image(const ModelParams& params, const ImageBatch& img, bool occlusion_side);

torch::Tensor discriminate_place(const ModelParams& params, const torch::Tensor& place);

// Row-major flatten then L2 normalize. Accepts C x h x w (returns L) or
// B x C x h x w (returns B x L). Throws ValidationError for an all-zero code.
torch::Tensor flatten_place_descriptor(const torch::Tensor& place);

// Expected code spatial size for an input of `size` pixels; ShapeError
// unless divisible by 4.
int64_t code_size_for(int64_t size);

}  // namespace proca
