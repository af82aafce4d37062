#include "proca/networks.hpp"

#include <sstream>

#include "proca/errors.hpp"

namespace proca {

namespace nn = torch::nn;

namespace {

nn::Conv2d conv(int64_t in, int64_t out, int64_t kernel, int64_t stride, int64_t padding,
                nn::detail::conv_padding_mode_t mode = torch::kZeros) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, kernel).stride(stride).padding(padding).padding_mode(mode));
}

nn::InstanceNorm2d instance_norm(int64_t channels, bool affine = true) {
  return nn::InstanceNorm2d(nn::InstanceNorm2dOptions(channels).affine(affine));
}

std::string shape_of(const torch::Tensor& t) {
  std::ostringstream os;
  os << t.sizes();
  return os.str();
}

void require_image(const char* op, const torch::Tensor& pixels) {
  if (!pixels.defined() || pixels.dim() != 4 || pixels.size(1) != 3) {
    throw ShapeError(std::string(op) + ": expected B x 3 x H x W pixels, got " +
                     (pixels.defined() ? shape_of(pixels) : std::string("undefined")));
  }
  if (pixels.size(2) != pixels.size(3)) {
    throw ShapeError(std::string(op) + ": expected square images, got " + shape_of(pixels));
  }
  code_size_for(pixels.size(2));
}

}  // namespace

int64_t code_size_for(int64_t size) {
  if (size <= 0 || size % 4 != 0) {
    throw ShapeError("image size " + std::to_string(size) + " is not divisible by 4");
  }
  return size / 4;
}

ResidualBlockImpl::ResidualBlockImpl(int64_t channels) {
  conv1 = register_module("conv1", conv(channels, channels, 3, 1, 1, torch::kReflect));
  norm1 = register_module("norm1", instance_norm(channels));
  conv2 = register_module("conv2", conv(channels, channels, 3, 1, 1, torch::kReflect));
  norm2 = register_module("norm2", instance_norm(channels));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
  auto h = torch::relu(norm1(conv1(x)));
  return x + norm2(conv2(h));
}

ContentEncoderImpl::ContentEncoderImpl(int64_t base_width, int64_t channels, int64_t res_blocks)
    : out_channels(channels) {
  stem = register_module(
      "stem", nn::Sequential(conv(3, base_width, 7, 1, 3, torch::kReflect), instance_norm(base_width),
                             nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)),
                             conv(base_width, 2 * base_width, 4, 2, 1), instance_norm(2 * base_width), nn::ReLU(),
                             conv(2 * base_width, channels, 4, 2, 1), instance_norm(channels), nn::ReLU()));
  blocks = register_module("blocks", nn::Sequential());
  for (int64_t i = 0; i < res_blocks; ++i) blocks->push_back(ResidualBlock(channels));
}

torch::Tensor ContentEncoderImpl::forward(const torch::Tensor& x) {
  auto h = stem->forward(x);
  return blocks->is_empty() ? h : blocks->forward(h);
}

AppearanceEncoderImpl::AppearanceEncoderImpl(int64_t width, int64_t domain_count, int64_t code_dim) {
  convs = register_module(
      "convs", nn::Sequential(conv(3 + domain_count, width, 7, 1, 3, torch::kReflect), nn::ReLU(),
                              conv(width, 2 * width, 4, 2, 1), nn::ReLU(), conv(2 * width, 4 * width, 4, 2, 1),
                              nn::ReLU(), conv(4 * width, 4 * width, 4, 2, 1), nn::ReLU(),
                              nn::AdaptiveAvgPool2d(nn::AdaptiveAvgPool2dOptions(1)), nn::Flatten()));
  mean_head = register_module("mean_head", nn::Linear(4 * width, code_dim));
  logvar_head = register_module("logvar_head", nn::Linear(4 * width, code_dim));
}

std::pair<torch::Tensor, torch::Tensor> AppearanceEncoderImpl::forward(const torch::Tensor& x,
                                                                       const torch::Tensor& domain_one_hot) {
  const auto planes = domain_one_hot.to(x.dtype()).view({x.size(0), -1, 1, 1}).expand(
      {x.size(0), domain_one_hot.size(1), x.size(2), x.size(3)});
  auto h = convs->forward(torch::cat({x, planes}, 1));
  return {mean_head(h), logvar_head(h)};
}

torch::Tensor modulated_norm(const torch::Tensor& x, const torch::Tensor& gamma, const torch::Tensor& beta) {
  auto normed = torch::instance_norm(x, {}, {}, {}, {}, /*use_input_stats=*/true, 0.1, 1e-5, false);
  return normed * (1.0 + gamma.unsqueeze(-1).unsqueeze(-1)) + beta.unsqueeze(-1).unsqueeze(-1);
}

ModulatedResidualBlockImpl::ModulatedResidualBlockImpl(int64_t channels) {
  conv1 = register_module("conv1", conv(channels, channels, 3, 1, 1, torch::kReflect));
  conv2 = register_module("conv2", conv(channels, channels, 3, 1, 1, torch::kReflect));
}

torch::Tensor ModulatedResidualBlockImpl::forward(const torch::Tensor& x, const std::vector<torch::Tensor>& style) {
  auto h = torch::relu(modulated_norm(conv1(x), style[0], style[1]));
  return x + modulated_norm(conv2(h), style[2], style[3]);
}

GeneratorImpl::GeneratorImpl(const NetworkConfig& cfg)
    : width(cfg.place_channels), modulated_layers(1 + 2 * cfg.generator_res_blocks) {
  const int64_t cond = cfg.appearance_dim + cfg.domain_count;
  mlp = register_module("mlp", nn::Sequential(nn::Linear(cond, cfg.mlp_width), nn::ReLU(),
                                              nn::Linear(cfg.mlp_width, cfg.mlp_width), nn::ReLU(),
                                              nn::Linear(cfg.mlp_width, 2 * width * modulated_layers)));
  fuse = register_module("fuse", conv(cfg.place_channels + cfg.occlusion_channels, width, 3, 1, 1, torch::kReflect));
  blocks = register_module("blocks", nn::ModuleList());
  for (int64_t i = 0; i < cfg.generator_res_blocks; ++i) blocks->push_back(ModulatedResidualBlock(width));
  const int64_t half = std::max<int64_t>(width / 2, 1);
  const int64_t quarter = std::max<int64_t>(width / 4, 1);
  head = register_module(
      "head",
      nn::Sequential(nn::ConvTranspose2d(nn::ConvTranspose2dOptions(width, half, 4).stride(2).padding(1)),
                     instance_norm(half), nn::ReLU(),
                     nn::ConvTranspose2d(nn::ConvTranspose2dOptions(half, quarter, 4).stride(2).padding(1)),
                     instance_norm(quarter), nn::ReLU(), conv(quarter, 3, 7, 1, 3, torch::kReflect), nn::Tanh()));
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& place, const torch::Tensor& occlusion,
                                     const torch::Tensor& appearance, const torch::Tensor& domain_one_hot) {
  // Per layer: (gamma, beta), each B x width.
  auto style = mlp->forward(torch::cat({appearance, domain_one_hot.to(appearance.dtype())}, 1));
  auto chunks = style.chunk(2 * modulated_layers, 1);
  auto h = torch::relu(modulated_norm(fuse(torch::cat({place, occlusion}, 1)), chunks[0], chunks[1]));
  std::size_t next = 2;
  for (const auto& m : *blocks) {
    std::vector<torch::Tensor> s(chunks.begin() + next, chunks.begin() + next + 4);
    h = m->as<ModulatedResidualBlockImpl>()->forward(h, s);
    next += 4;
  }
  return head->forward(h);
}

ImageCriticImpl::ImageCriticImpl(int64_t width, int64_t domain_count) {
  auto lrelu = [] { return nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)); };
  trunk = register_module("trunk", nn::Sequential(conv(3, width, 4, 2, 1), lrelu(), conv(width, 2 * width, 4, 2, 1),
                                                  lrelu(), conv(2 * width, 4 * width, 4, 2, 1), lrelu()));
  realness = register_module("realness", conv(4 * width, 1, 3, 1, 1));
  classifier = register_module("classifier", nn::Linear(4 * width, domain_count));
}

std::pair<torch::Tensor, torch::Tensor> ImageCriticImpl::forward(const torch::Tensor& x) {
  auto h = trunk->forward(x);
  return {realness(h), classifier(h.mean({2, 3}))};
}

PlaceCriticImpl::PlaceCriticImpl(int64_t in_channels, int64_t width) {
  auto lrelu = [] { return nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)); };
  net = register_module("net", nn::Sequential(conv(in_channels, width, 3, 2, 1), lrelu(), conv(width, width, 3, 2, 1),
                                              lrelu(), nn::AdaptiveAvgPool2d(nn::AdaptiveAvgPool2dOptions(1)),
                                              nn::Flatten()));
  out = register_module("out", nn::Linear(width, 1));
}

torch::Tensor PlaceCriticImpl::forward(const torch::Tensor& code) { return out(net->forward(code)).squeeze(1); }

ModelParamsImpl::ModelParamsImpl(const NetworkConfig& cfg) : config(cfg) {
  place_encoder = register_module("place_encoder",
                                  ContentEncoder(cfg.base_width, cfg.place_channels, cfg.encoder_res_blocks));
  occlusion_encoder = register_module(
      "occlusion_encoder", ContentEncoder(cfg.base_width, cfg.occlusion_channels, cfg.encoder_res_blocks));
  appearance_encoder = register_module(
      "appearance_encoder", AppearanceEncoder(cfg.appearance_width, cfg.domain_count, cfg.appearance_dim));
  generator = register_module("generator", Generator(cfg));
  appearance_critic = register_module("appearance_critic", ImageCritic(cfg.critic_width, cfg.domain_count));
  occlusion_critic_without =
      register_module("occlusion_critic_without", ImageCritic(cfg.critic_width, cfg.domain_count));
  occlusion_critic_with = register_module("occlusion_critic_with", ImageCritic(cfg.critic_width, cfg.domain_count));
  place_critic = register_module("place_critic", PlaceCritic(cfg.place_channels, cfg.place_critic_width));
}

namespace {

void append(std::vector<torch::Tensor>& out, const torch::nn::Module& m) {
  for (const auto& p : m.parameters()) out.push_back(p);
}

// Forward passes only read parameters; torch modules just lack const call operators.
ModelParams mutable_params(const ModelParams& params) { return params; }

}  // namespace

std::vector<torch::Tensor> ModelParamsImpl::generator_parameters() const {
  std::vector<torch::Tensor> out;
  append(out, *place_encoder);
  append(out, *occlusion_encoder);
  append(out, *appearance_encoder);
  append(out, *generator);
  return out;
}

std::vector<torch::Tensor> ModelParamsImpl::discriminator_parameters() const {
  std::vector<torch::Tensor> out;
  append(out, *appearance_critic);
  append(out, *occlusion_critic_without);
  append(out, *occlusion_critic_with);
  append(out, *place_critic);
  return out;
}

int64_t ModelParamsImpl::parameter_count() const {
  int64_t n = 0;
  for (const auto& p : parameters()) n += p.numel();
  return n;
}

void initialize_weights(torch::nn::Module& module) {
  torch::NoGradGuard guard;
  module.apply([](torch::nn::Module& m) {
    if (auto* c = m.as<nn::Conv2dImpl>()) {
      nn::init::normal_(c->weight, 0.0, 0.02);
      if (c->bias.defined()) nn::init::zeros_(c->bias);
    } else if (auto* t = m.as<nn::ConvTranspose2dImpl>()) {
      nn::init::normal_(t->weight, 0.0, 0.02);
      if (t->bias.defined()) nn::init::zeros_(t->bias);
    } else if (auto* l = m.as<nn::LinearImpl>()) {
      nn::init::normal_(l->weight, 0.0, 0.02);
      if (l->bias.defined()) nn::init::zeros_(l->bias);
    } else if (auto* n = m.as<nn::InstanceNorm2dImpl>()) {
      if (n->weight.defined()) nn::init::ones_(n->weight);
      if (n->bias.defined()) nn::init::zeros_(n->bias);
    }
  });
}

ModelParams make_model(const NetworkConfig& cfg, uint64_t seed) {
  torch::manual_seed(seed);
  ModelParams model(cfg);
  initialize_weights(*model);
  return model;
}

torch::Tensor encode_place(const ModelParams& params, const torch::Tensor& pixels) {
  require_image("encode_place", pixels);
  return mutable_params(params)->place_encoder->forward(pixels);
}

torch::Tensor encode_occlusion(const ModelParams& params, const torch::Tensor& pixels) {
  require_image("encode_occlusion", pixels);
  return mutable_params(params)->occlusion_encoder->forward(pixels);
}

AppearanceCode encode_appearance(const ModelParams& params, const torch::Tensor& pixels, const DomainLabel& d,
                                 const AppearanceSampling& sampling) {
  require_image("encode_appearance", pixels);
  if (d.domain_count() != params->config.domain_count) {
    throw ValidationError("encode_appearance: label has " + std::to_string(d.domain_count()) +
                          " domains, model expects " + std::to_string(params->config.domain_count));
  }
  if (d.size() != pixels.size(0)) throw ShapeError("encode_appearance: one domain label per image required");
  AppearanceCode code;
  std::tie(code.mean, code.logvar) = mutable_params(params)->appearance_encoder->forward(pixels, d.one_hot(pixels.scalar_type()));
  if (sampling.deterministic) {
    code.sample = code.mean;
  } else {
    code.eps = sampling.eps.defined() ? sampling.eps : torch::randn_like(code.mean);
    if (code.eps.sizes() != code.mean.sizes()) throw ShapeError("encode_appearance: eps shape mismatch");
    code.sample = code.mean + torch::exp(0.5 * code.logvar) * code.eps;
  }
  return code;
}

FactorCodes encode(const ModelParams& params, const ImageBatch& img, const AppearanceSampling& sampling) {
  FactorCodes codes;
  codes.place = encode_place(params, img.pixels);
  codes.occlusion = encode_occlusion(params, img.pixels);
  codes.appearance =
      encode_appearance(params, img.pixels, DomainLabel::of(img, params->config.domain_count), sampling);
  return codes;
}

torch::Tensor generate(const ModelParams& params, const torch::Tensor& place, const torch::Tensor& occlusion,
                       const torch::Tensor& appearance, const DomainLabel& d) {
  const auto& cfg = params->config;
  if (place.dim() != 4 || occlusion.dim() != 4 || place.size(0) != occlusion.size(0) ||
      place.size(2) != occlusion.size(2) || place.size(3) != occlusion.size(3)) {
    throw ShapeError("generate: place " + shape_of(place) + " and occlusion " + shape_of(occlusion) +
                     " codes are not spatially aligned");
  }
  if (place.size(1) != cfg.place_channels || occlusion.size(1) != cfg.occlusion_channels) {
    throw ShapeError("generate: code channel counts do not match the model");
  }
  if (appearance.dim() != 2 || appearance.size(1) != cfg.appearance_dim || appearance.size(0) != place.size(0)) {
    throw ShapeError("generate: appearance code must be B x " + std::to_string(cfg.appearance_dim));
  }
  if (d.domain_count() != cfg.domain_count || d.size() != place.size(0)) {
    throw ValidationError("generate: domain labels do not match the batch / model");
  }
  return mutable_params(params)->generator->forward(place, occlusion, appearance, d.one_hot(place.scalar_type()));
}

CriticOutput discriminate_image(const ModelParams& params, const ImageBatch& img, bool occlusion_side) {
  require_image("discriminate_image", img.pixels);
  CriticOutput out;
  if (!occlusion_side) {
    std::tie(out.realness_logits, out.domain_logits) = mutable_params(params)->appearance_critic->forward(img.pixels);
  } else {
    const auto flags = img.occlusion_flag.to(torch::kBool);
    const auto with_idx = torch::nonzero(flags).flatten();
    const auto without_idx = torch::nonzero(flags.logical_not()).flatten();
    if (without_idx.numel() == img.size()) {
      std::tie(out.realness_logits, out.domain_logits) = mutable_params(params)->occlusion_critic_without->forward(img.pixels);
    } else if (with_idx.numel() == img.size()) {
      std::tie(out.realness_logits, out.domain_logits) = mutable_params(params)->occlusion_critic_with->forward(img.pixels);
    } else {
      auto [r_with, d_with] = mutable_params(params)->occlusion_critic_with->forward(img.pixels.index_select(0, with_idx));
      auto [r_without, d_without] = mutable_params(params)->occlusion_critic_without->forward(img.pixels.index_select(0, without_idx));
      auto r_shape = r_with.sizes().vec();
      r_shape[0] = img.size();
      auto d_shape = d_with.sizes().vec();
      d_shape[0] = img.size();
      out.realness_logits = torch::zeros(r_shape, r_with.options())
                                .index_copy(0, with_idx, r_with)
                                .index_copy(0, without_idx, r_without);
      out.domain_logits = torch::zeros(d_shape, d_with.options())
                              .index_copy(0, with_idx, d_with)
                              .index_copy(0, without_idx, d_without);
    }
  }
  out.realness = torch::sigmoid(out.realness_logits);
  return out;
}

torch::Tensor discriminate_place(const ModelParams& params, const torch::Tensor& place) {
  if (place.dim() != 4 || place.size(1) != params->config.place_channels) {
    throw ShapeError("discriminate_place: expected B x " + std::to_string(params->config.place_channels) +
                     " x h x h place code, got " + shape_of(place));
  }
  return mutable_params(params)->place_critic->forward(place);
}

torch::Tensor flatten_place_descriptor(const torch::Tensor& place) {
  if (place.dim() != 3 && place.dim() != 4) {
    throw ShapeError("flatten_place_descriptor: expected C x h x w or B x C x h x w, got " + shape_of(place));
  }
  const bool single = place.dim() == 3;
  auto flat = (single ? place.unsqueeze(0) : place).contiguous().flatten(1);
  auto norms = flat.norm(2, 1, /*keepdim=*/true);
  if ((norms == 0).any().item<bool>()) {
    throw ValidationError("flatten_place_descriptor: all-zero code has no direction");
  }
  auto desc = flat / norms;
  return single ? desc.squeeze(0) : desc;
}

}  // namespace proca
