#include "proca/training.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <sstream>

#include "proca/errors.hpp"
#include "proca/hash.hpp"

namespace proca {

// ---- data ------------------------------------------------------------------

TrainingSet TrainingSet::from_batch(const ImageBatch& batch, std::vector<int64_t> place_ids, int64_t domain_count) {
  TrainingSet s;
  s.pixels = batch.pixels;
  s.appearance = batch.appearance_domain.to(torch::kLong);
  s.occluded = batch.occlusion_flag.to(torch::kBool);
  s.place_ids = std::move(place_ids);
  s.domain_count = domain_count;
  const auto n = s.appearance.size(0);
  auto app = s.appearance.accessor<int64_t, 1>();
  auto occ = s.occluded.accessor<bool, 1>();
  for (int64_t i = 0; i < n; ++i) {
    if (app[i] < 0 || app[i] >= domain_count) {
      throw DataError("training set: record " + std::to_string(i) + " has appearance domain " +
                      std::to_string(app[i]) + " outside [0, " + std::to_string(domain_count) + ")");
    }
    s.cells[{app[i], occ[i]}].push_back(i);
  }
  return s;
}

TrainingSet TrainingSet::from_dataset(const ImageDataset& dataset, int64_t domain_count) {
  std::vector<int64_t> places;
  for (const auto& r : dataset.records()) places.push_back(r.spec.place_id);
  return from_batch(dataset.load_all(), std::move(places), domain_count);
}

namespace {

int64_t uniform_index(std::mt19937_64& rng, int64_t n) {
  return static_cast<int64_t>(rng() % static_cast<uint64_t>(n));
}

ImageBatch draw_side(const TrainingSet& data, std::mt19937_64& rng, const std::vector<int64_t>& cell,
                     const TrainConfig& cfg) {
  const int64_t b = cfg.batch_size;
  const int64_t s = data.pixels.size(2);
  const int64_t crop = cfg.crop_size();
  std::vector<torch::Tensor> px;
  std::vector<int64_t> idx;
  for (int64_t i = 0; i < b; ++i) {
    const int64_t pick = cell[uniform_index(rng, static_cast<int64_t>(cell.size()))];
    idx.push_back(pick);
    auto img = data.pixels[pick];
    if (s > crop) {
      const int64_t oy = uniform_index(rng, s - crop + 1);
      const int64_t ox = uniform_index(rng, s - crop + 1);
      img = img.narrow(1, oy, crop).narrow(2, ox, crop);
    } else if (s < crop) {
      throw ValidationError("training images are smaller than crop_size");
    }
    px.push_back(img);
  }
  const auto index = torch::tensor(idx, torch::kLong);
  return {torch::stack(px).contiguous(), data.appearance.index_select(0, index),
          data.occluded.index_select(0, index)};
}

}  // namespace

UnpairedSample sample_unpaired(const TrainingSet& data, std::mt19937_64& rng, const TrainConfig& cfg) {
  const int64_t k = cfg.domain_count();
  if (data.domain_count != k) throw ValidationError("training set domain count differs from the config");

  using Cell = std::pair<int64_t, bool>;
  auto populated = [&](const Cell& c) {
    auto it = data.cells.find(c);
    return it != data.cells.end() && !it->second.empty();
  };
  std::vector<Cell> all;
  for (int64_t a = 0; a < k; ++a) {
    for (bool occ : {false, true}) {
      if (populated({a, occ})) all.push_back({a, occ});
    }
  }
  auto x_cells_for = [&](int64_t y_app) {
    std::vector<Cell> out;
    for (const auto& c : all) {
      if (c.first != y_app) out.push_back(c);
    }
    return out;
  };
  std::vector<Cell> y_cells;
  for (const auto& c : all) {
    if (cfg.anti_occlusion_enabled && c.second) continue;
    if (!x_cells_for(c.first).empty()) y_cells.push_back(c);
  }
  if (y_cells.empty()) {
    throw DataError(cfg.anti_occlusion_enabled
                        ? "no occlusion-free cell with a second appearance domain to pair it with"
                        : "training data covers fewer than two appearance domains");
  }

  UnpairedSample s;
  const Cell yc = y_cells[uniform_index(rng, static_cast<int64_t>(y_cells.size()))];
  const auto xs = x_cells_for(yc.first);
  const Cell xc = xs[uniform_index(rng, static_cast<int64_t>(xs.size()))];
  s.x_domain = xc.first;
  s.x_occluded = xc.second;
  s.y_domain = yc.first;
  s.y_occluded = yc.second;
  s.x = draw_side(data, rng, data.cells.at(xc), cfg);
  s.y = draw_side(data, rng, data.cells.at(yc), cfg);
  return s;
}

torch::Tensor prepare_for_test(const torch::Tensor& pixels, int64_t crop_size) {
  const bool single = pixels.dim() == 3;
  auto batch = single ? pixels.unsqueeze(0) : pixels;
  if (batch.size(2) != crop_size || batch.size(3) != crop_size) {
    batch = torch::nn::functional::interpolate(batch, torch::nn::functional::InterpolateFuncOptions()
                                                          .size(std::vector<int64_t>{crop_size, crop_size})
                                                          .mode(torch::kBilinear)
                                                          .align_corners(false)
                                                          .antialias(true))
                .clamp(-1.0, 1.0);
  }
  return single ? batch.squeeze(0) : batch;
}

StepNoise StepNoise::draw(int64_t batch, int64_t appearance_dim, uint64_t seed) {
  auto gen = torch::make_generator<torch::CPUGeneratorImpl>(seed);
  StepNoise n;
  n.eps_xy = torch::randn({2 * batch, appearance_dim}, gen);
  n.eps_bar = torch::randn({2 * batch, appearance_dim}, gen);
  n.z_random = torch::randn({batch, appearance_dim}, gen);
  return n;
}

// ---- graph -----------------------------------------------------------------

torch::Tensor ModelNetworks::encode_place(const torch::Tensor& pixels) const {
  return proca::encode_place(params_, pixels);
}
torch::Tensor ModelNetworks::encode_occlusion(const torch::Tensor& pixels) const {
  return proca::encode_occlusion(params_, pixels);
}
AppearanceCode ModelNetworks::encode_appearance(const torch::Tensor& pixels, const DomainLabel& d,
                                                const AppearanceSampling& sampling) const {
  return proca::encode_appearance(params_, pixels, d, sampling);
}
torch::Tensor ModelNetworks::generate(const torch::Tensor& place, const torch::Tensor& occlusion,
                                      const torch::Tensor& appearance, const DomainLabel& d) const {
  return proca::generate(params_, place, occlusion, appearance, d);
}

GraphOptions GraphOptions::from(const TrainConfig& cfg) {
  GraphOptions o;
  o.use_occlusion = cfg.anti_occlusion_enabled;
  o.use_appearance = cfg.appearance_enabled;
  o.geometry_path = cfg.anti_occlusion_enabled && (cfg.weights.gc > 0 || cfg.weights.cgc > 0);
  o.appearance_latent_path = cfg.appearance_enabled && cfg.weights.lat_app > 0;
  o.deterministic_appearance = cfg.deterministic_appearance;
  return o;
}

torch::Tensor swap_halves(const torch::Tensor& t) {
  const auto h = t.size(0) / 2;
  return torch::cat({t.narrow(0, h, h), t.narrow(0, 0, h)});
}

namespace {

AppearanceCode appearance_or_zeros(const TranslationNetworks& nets, const torch::Tensor& pixels,
                                   const DomainLabel& d, const GraphOptions& o, const torch::Tensor& eps,
                                   int64_t dim) {
  if (!o.use_appearance) {
    AppearanceCode c;
    c.mean = torch::zeros({pixels.size(0), dim}, pixels.options());
    c.logvar = c.mean;
    c.sample = c.mean;
    return c;
  }
  AppearanceSampling s;
  s.deterministic = o.deterministic_appearance;
  if (!s.deterministic) s.eps = eps.to(pixels.dtype());
  return nets.encode_appearance(pixels, d, s);
}

torch::Tensor occlusion_or_zeros(const TranslationNetworks& nets, const torch::Tensor& pixels,
                                 const torch::Tensor& place, const GraphOptions& o) {
  if (o.use_occlusion) return nets.encode_occlusion(pixels);
  return torch::zeros({pixels.size(0), nets.occlusion_channels(), place.size(2), place.size(3)}, place.options());
}

FactorCodes encode_all(const TranslationNetworks& nets, const torch::Tensor& pixels, const DomainLabel& d,
                       const GraphOptions& o, const torch::Tensor& eps, int64_t app_dim) {
  FactorCodes c;
  c.place = nets.encode_place(pixels);
  c.occlusion = occlusion_or_zeros(nets, pixels, c.place, o);
  c.appearance = appearance_or_zeros(nets, pixels, d, o, eps, app_dim);
  return c;
}

void check_pair(const ImageBatch& x, const ImageBatch& y) {
  const int64_t b = x.size();
  if (b == 0 || y.size() != b) throw ShapeError("x and y must be non-empty batches of equal size");
  if ((x.appearance_domain == y.appearance_domain).any().item<bool>()) {
    throw ValidationError("sampling error: an x item and its y partner share an appearance domain");
  }
}

}  // namespace

StepOutputs forward_graph(const TranslationNetworks& nets, const ImageBatch& x, const ImageBatch& y,
                          const GeometricTransform& t, const GraphOptions& o, const StepNoise& noise) {
  check_pair(x, y);
  const int64_t b = x.size();
  const int64_t k = nets.domain_count();
  const int64_t app_dim = noise.z_random.size(1);

  StepOutputs out;
  out.transform = t;
  out.xy = ImageBatch::concat(x, y);
  const auto& labels = out.xy.appearance_domain;
  const DomainLabel d_xy(labels, k);
  const DomainLabel d_swapped(swap_halves(labels), k);
  const DomainLabel d_twice(torch::cat({labels, labels}), k);

  out.codes = encode_all(nets, out.xy.pixels, d_xy, o, noise.eps_xy, app_dim);
  const auto& za = out.codes.appearance.sample;

  // [y_bar; x_bar]: each place rendered with its partner's occlusion and appearance
  out.bar = nets.generate(swap_halves(out.codes.place), out.codes.occlusion, za, d_xy);
  out.bar_codes = encode_all(nets, out.bar, d_xy, o, noise.eps_bar, app_dim);

  // second swap and self-reconstruction share one generator call
  auto both = nets.generate(torch::cat({swap_halves(out.bar_codes.place), out.codes.place}),
                            torch::cat({out.bar_codes.occlusion, out.codes.occlusion}),
                            torch::cat({out.bar_codes.appearance.sample, za}), d_twice);
  out.hat = both.narrow(0, 0, 2 * b);
  out.tilde = both.narrow(0, 2 * b, 2 * b);

  if (o.appearance_latent_path) {
    const auto z = noise.z_random.to(out.xy.pixels.dtype());
    out.z_random = torch::cat({z, z});
    auto drawn = nets.generate(out.codes.place, out.codes.occlusion, out.z_random, d_swapped);
    AppearanceSampling det;
    det.deterministic = true;
    out.z_recovered = nets.encode_appearance(drawn, d_swapped, det).mean;
  }

  if (o.geometry_path) {
    out.xy_prime = apply_transform(out.xy.pixels, t);
    auto place_prime = nets.encode_place(out.xy_prime);
    out.bar_prime = nets.generate(swap_halves(place_prime), out.codes.occlusion, za, d_xy);
    const DomainLabel d_y(labels.narrow(0, b, b), k);
    out.y_hat_prime = nets.generate(nets.encode_place(out.y_bar_prime()), out.bar_codes.occlusion.narrow(0, b, b),
                                    out.bar_codes.appearance.sample.narrow(0, b, b), d_y);
  }
  return out;
}

StepOutputs forward_graph(const ModelParams& params, const ImageBatch& x, const ImageBatch& y,
                          const GeometricTransform& t, const GraphOptions& options, const StepNoise& noise) {
  return forward_graph(ModelNetworks(params), x, y, t, options, noise);
}

// ---- terms -----------------------------------------------------------------

namespace {

torch::Tensor& at(std::array<torch::Tensor, kNumLossTerms>& terms, LossTerm t) {
  return terms[static_cast<std::size_t>(t)];
}

bool term_enabled(LossTerm term, const TrainConfig& cfg) {
  if (weight_of(cfg.weights, term) == 0.0) return false;
  switch (term) {
    case LossTerm::kGeometry:
    case LossTerm::kCrossCycleGeometry:
    case LossTerm::kAdvOcclusion:
      return cfg.anti_occlusion_enabled;
    case LossTerm::kAdvAppearance:
    case LossTerm::kLatentAppearance:
    case LossTerm::kKl:
      return cfg.appearance_enabled;
    case LossTerm::kDomainClass:
      return cfg.appearance_enabled && cfg.multidomain;
    default:
      return true;
  }
}

// Mean of the per-half classification losses over the critics in use.
torch::Tensor classification_over_halves(const std::vector<torch::Tensor>& logits, const torch::Tensor& labels,
                                         ClassifierSide side) {
  const auto h = labels.size(0) / 2;
  torch::Tensor sum;
  for (const auto& l : logits) {
    auto v = domain_classification_loss(l.narrow(0, 0, h), labels.narrow(0, 0, h), side) +
             domain_classification_loss(l.narrow(0, h, h), labels.narrow(0, h, h), side);
    sum = sum.defined() ? sum + v : v;
  }
  return sum / static_cast<double>(logits.size());
}

}  // namespace

std::array<torch::Tensor, kNumLossTerms> reconstruction_terms(const StepOutputs& out) {
  std::array<torch::Tensor, kNumLossTerms> terms;
  at(terms, LossTerm::kCrossCycle) = cross_cycle_loss(out.x(), out.y(), out.x_hat(), out.y_hat());
  at(terms, LossTerm::kRecon) = self_reconstruction_loss(out.x(), out.x_tilde(), out.y(), out.y_tilde());
  at(terms, LossTerm::kLatentPlace) =
      place_latent_regression_loss(out.codes.place.detach(), swap_halves(out.bar_codes.place));
  if (out.bar_prime.defined()) {
    at(terms, LossTerm::kGeometry) = geometry_consistency_loss(out.x_bar(), out.x_bar_prime(), out.transform);
    at(terms, LossTerm::kCrossCycleGeometry) = cross_cycle_geometry_loss(out.y_hat_prime, out.y_prime());
  }
  if (out.z_recovered.defined()) {
    at(terms, LossTerm::kLatentAppearance) = appearance_latent_regression_loss(out.z_random, out.z_recovered);
  }
  if (out.codes.appearance.logvar.defined()) {
    at(terms, LossTerm::kKl) = kl_loss(out.codes.appearance.mean, out.codes.appearance.logvar);
  }
  return terms;
}

std::array<torch::Tensor, kNumLossTerms> generator_terms(const ModelParams& params, const StepOutputs& out,
                                                         const TrainConfig& cfg) {
  auto terms = reconstruction_terms(out);
  const auto h = out.half();
  const ImageBatch fake{out.bar, out.xy.appearance_domain, out.xy.occlusion_flag};
  std::vector<torch::Tensor> class_logits;

  const bool need_app = term_enabled(LossTerm::kAdvAppearance, cfg) || term_enabled(LossTerm::kDomainClass, cfg);
  if (need_app) {
    auto c = discriminate_image(params, fake, false);
    at(terms, LossTerm::kAdvAppearance) = image_adversarial_loss_from_logits({}, c.realness_logits,
                                                                             AdversarialSide::kGenerator);
    class_logits.push_back(c.domain_logits);
  }
  const bool need_occ = cfg.anti_occlusion_enabled && (term_enabled(LossTerm::kAdvOcclusion, cfg) ||
                                                       term_enabled(LossTerm::kDomainClass, cfg));
  if (need_occ) {
    auto c = discriminate_image(params, fake, true);
    at(terms, LossTerm::kAdvOcclusion) = image_adversarial_loss_from_logits({}, c.realness_logits,
                                                                            AdversarialSide::kGenerator);
    class_logits.push_back(c.domain_logits);
  }
  if (term_enabled(LossTerm::kDomainClass, cfg) && !class_logits.empty()) {
    at(terms, LossTerm::kDomainClass) =
        classification_over_halves(class_logits, out.xy.appearance_domain, ClassifierSide::kGeneratorOnFake);
  }
  if (term_enabled(LossTerm::kAdvPlace, cfg)) {
    auto logits = discriminate_place(params, out.codes.place);
    at(terms, LossTerm::kAdvPlace) = place_adversarial_loss(logits.narrow(0, 0, h), logits.narrow(0, h, h),
                                                            AdversarialSide::kGenerator);
  }
  for (std::size_t i = 0; i < kNumLossTerms; ++i) {
    if (!term_enabled(static_cast<LossTerm>(i), cfg)) terms[i] = torch::Tensor();
  }
  return terms;
}

DiscriminatorTerms discriminator_terms(const ModelParams& params, const ImageBatch& x, const ImageBatch& y,
                                       const TrainConfig& cfg, const StepNoise& noise) {
  check_pair(x, y);
  const auto xy = ImageBatch::concat(x, y);
  const auto h = x.size();
  const auto o = GraphOptions::from(cfg);
  const int64_t k = params->config.domain_count;

  FactorCodes codes;
  torch::Tensor bar;
  {
    torch::NoGradGuard no_grad;
    ModelNetworks nets(params);
    const DomainLabel d_xy(xy.appearance_domain, k);
    codes = encode_all(nets, xy.pixels, d_xy, o, noise.eps_xy, params->config.appearance_dim);
    bar = nets.generate(swap_halves(codes.place), codes.occlusion, codes.appearance.sample, d_xy);
  }
  const ImageBatch fake{bar, xy.appearance_domain, xy.occlusion_flag};

  DiscriminatorTerms d;
  std::vector<torch::Tensor> class_logits;
  const bool cls = term_enabled(LossTerm::kDomainClass, cfg);
  if (term_enabled(LossTerm::kAdvAppearance, cfg) || cls) {
    auto real = discriminate_image(params, xy, false);
    auto fk = discriminate_image(params, fake, false);
    if (term_enabled(LossTerm::kAdvAppearance, cfg)) {
      d.adv_app = image_adversarial_loss_from_logits(real.realness_logits, fk.realness_logits,
                                                     AdversarialSide::kDiscriminator);
    }
    class_logits.push_back(real.domain_logits);
  }
  if (cfg.anti_occlusion_enabled && (term_enabled(LossTerm::kAdvOcclusion, cfg) || cls)) {
    auto real = discriminate_image(params, xy, true);
    if (term_enabled(LossTerm::kAdvOcclusion, cfg)) {
      auto fk = discriminate_image(params, fake, true);
      d.adv_occ = image_adversarial_loss_from_logits(real.realness_logits, fk.realness_logits,
                                                     AdversarialSide::kDiscriminator);
    }
    class_logits.push_back(real.domain_logits);
  }
  if (cls && !class_logits.empty()) {
    d.cls = classification_over_halves(class_logits, xy.appearance_domain, ClassifierSide::kDiscriminatorOnReal);
  }
  if (term_enabled(LossTerm::kAdvPlace, cfg)) {
    auto logits = discriminate_place(params, codes.place);
    d.adv_place = place_adversarial_loss(logits.narrow(0, 0, h), logits.narrow(0, h, h),
                                         AdversarialSide::kDiscriminator);
  }
  return d;
}

LossReport to_report(const std::array<torch::Tensor, kNumLossTerms>& terms, const TrainConfig& cfg) {
  LossReport r;
  for (std::size_t i = 0; i < kNumLossTerms; ++i) {
    r.terms[i] = terms[i].defined() ? terms[i].item<double>() : 0.0;
  }
  r.total = total_loss(r, cfg.weights, cfg.multidomain);
  return r;
}

// ---- trainer ---------------------------------------------------------------

namespace {

constexpr uint64_t kNoiseStream = 0;
constexpr uint64_t kSampleStream = 1;
constexpr uint64_t kTransformStream = 2;

void set_requires_grad(const std::vector<torch::Tensor>& ps, bool on) {
  for (auto p : ps) p.set_requires_grad(on);
}

void check_finite(const torch::Tensor& total, const std::array<torch::Tensor, kNumLossTerms>& terms) {
  if (std::isfinite(total.item<double>())) return;
  for (std::size_t i = 0; i < kNumLossTerms; ++i) {
    if (terms[i].defined() && !std::isfinite(terms[i].item<double>())) {
      throw NumericError(std::string(term_name(static_cast<LossTerm>(i))), "non-finite loss term");
    }
  }
  throw NumericError("total", "non-finite loss total");
}

}  // namespace

Trainer::Trainer(TrainConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  params_ = make_model(cfg_.net, cfg_.seed);
  make_optimizers();
}

Trainer::Trainer(TrainConfig cfg, ModelParams params, int64_t step)
    : cfg_(std::move(cfg)), params_(std::move(params)), step_(step) {
  cfg_.validate();
  if (!(params_->config == cfg_.net)) throw ValidationError("model parameters do not match the network config");
  make_optimizers();
}

void Trainer::make_optimizers() {
  gen_opt_ = std::make_unique<torch::optim::Adam>(
      params_->generator_parameters(),
      torch::optim::AdamOptions(cfg_.lr_generator).betas({cfg_.beta1, cfg_.beta2}));
  disc_opt_ = std::make_unique<torch::optim::Adam>(
      params_->discriminator_parameters(),
      torch::optim::AdamOptions(cfg_.lr_discriminator).betas({cfg_.beta1, cfg_.beta2}));
}

uint64_t Trainer::step_seed(int64_t step, uint64_t stream) const {
  return mix_seed({cfg_.seed, static_cast<uint64_t>(step), stream});
}

GeometricTransform Trainer::transform_for(int64_t step) const {
  if (!cfg_.resample_transform) return GeometricTransform(cfg_.quarter_turns);
  return GeometricTransform(static_cast<int>(step_seed(step, kTransformStream) % 3) + 1);
}

StepReport Trainer::train_step(const TrainingSet& data) {
  std::mt19937_64 rng(step_seed(step_, kSampleStream));
  return train_step(sample_unpaired(data, rng, cfg_));
}

StepReport Trainer::train_step(const UnpairedSample& batch) {
  const auto noise = StepNoise::draw(batch.x.size(), cfg_.net.appearance_dim, step_seed(step_, kNoiseStream));
  StepReport r;
  r.discriminator = discriminator_half_step(batch, noise);
  r.generator = generator_half_step(batch, noise, transform_for(step_));
  ++step_;
  r.step = step_;
  return r;
}

LossReport Trainer::discriminator_half_step(const UnpairedSample& batch, const StepNoise& noise) {
  auto d = discriminator_terms(params_, batch.x, batch.y, cfg_, noise);
  std::array<torch::Tensor, kNumLossTerms> terms;
  at(terms, LossTerm::kAdvAppearance) = d.adv_app;
  at(terms, LossTerm::kAdvOcclusion) = d.adv_occ;
  at(terms, LossTerm::kAdvPlace) = d.adv_place;
  at(terms, LossTerm::kDomainClass) = d.cls;
  auto total = total_loss(terms, cfg_.weights, cfg_.multidomain);
  check_finite(total, terms);
  disc_opt_->zero_grad(true);
  if (total.requires_grad()) {
    total.backward();
    disc_opt_->step();
  }
  return to_report(terms, cfg_);
}

LossReport Trainer::generator_half_step(const UnpairedSample& batch, const StepNoise& noise,
                                        const GeometricTransform& t) {
  const auto critics = params_->discriminator_parameters();
  set_requires_grad(critics, false);
  try {
    auto out = forward_graph(params_, batch.x, batch.y, t, GraphOptions::from(cfg_), noise);
    auto terms = generator_terms(params_, out, cfg_);
    auto total = total_loss(terms, cfg_.weights, cfg_.multidomain);
    check_finite(total, terms);
    gen_opt_->zero_grad(true);
    if (total.requires_grad()) {
      total.backward();
      gen_opt_->step();
    }
    set_requires_grad(critics, true);
    return to_report(terms, cfg_);
  } catch (...) {
    set_requires_grad(critics, true);
    throw;
  }
}

double Trainer::generator_objective(const UnpairedSample& batch, const StepNoise& noise,
                                    const GeometricTransform& t) {
  torch::NoGradGuard no_grad;
  auto out = forward_graph(params_, batch.x, batch.y, t, GraphOptions::from(cfg_), noise);
  return to_report(generator_terms(params_, out, cfg_), cfg_).total;
}

void Trainer::save(const std::filesystem::path& path) const {
  save_checkpoint(params_, cfg_, step_, path, gen_opt_.get(), disc_opt_.get());
}

Trainer Trainer::resume(const std::filesystem::path& path, const TrainConfig* expected) {
  auto ck = load_checkpoint(path, expected);
  TrainConfig cfg = expected ? *expected : ck.config;
  Trainer t(cfg, ck.params, ck.step);
  auto restore = [](torch::optim::Adam& opt, const std::string& bytes) {
    if (bytes.empty()) return;
    std::istringstream in(bytes);
    torch::serialize::InputArchive archive;
    archive.load_from(in);
    opt.load(archive);
  };
  try {
    restore(*t.gen_opt_, ck.generator_optimizer);
    restore(*t.disc_opt_, ck.discriminator_optimizer);
  } catch (const c10::Error& e) {
    throw DataError("checkpoint " + path.string() + ": unreadable optimizer state");
  }
  return t;
}

// ---- logs ------------------------------------------------------------------

std::string report_json_line(const StepReport& report) {
  nlohmann::ordered_json j;
  j["step"] = report.step;
  for (std::size_t i = 0; i < kNumLossTerms; ++i) {
    j[std::string(term_name(static_cast<LossTerm>(i)))] = report.generator.terms[i];
  }
  j["total"] = report.generator.total;
  j["d_adv_app"] = report.discriminator[LossTerm::kAdvAppearance];
  j["d_adv_occ"] = report.discriminator[LossTerm::kAdvOcclusion];
  j["d_adv_place"] = report.discriminator[LossTerm::kAdvPlace];
  j["d_cls"] = report.discriminator[LossTerm::kDomainClass];
  j["d_total"] = report.discriminator.total;
  return j.dump();
}

std::string log_header_line(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["config"] = cfg.to_map();
  return j.dump();
}

}  // namespace proca
