#include "support.hpp"

#include <algorithm>
#include <cmath>

namespace proca::testing {

std::vector<double> values(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kFloat64).contiguous();
  return std::vector<double>(c.data_ptr<double>(), c.data_ptr<double>() + c.numel());
}

double oracle_mean_abs(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

std::vector<double> oracle_rotate(const std::vector<double>& v, int64_t h, int quarter_turns) {
  std::vector<double> cur = v;
  const int64_t plane = h * h;
  const int turns = ((quarter_turns % 4) + 4) % 4;
  for (int q = 0; q < turns; ++q) {
    std::vector<double> next(cur.size());
    for (std::size_t base = 0; base < cur.size(); base += plane) {
      for (int64_t r = 0; r < h; ++r) {
        for (int64_t c = 0; c < h; ++c) next[base + c * h + (h - 1 - r)] = cur[base + r * h + c];
      }
    }
    cur.swap(next);
  }
  return cur;
}

double oracle_log_sigmoid(double l) {
  return l >= 0 ? -std::log1p(std::exp(-l)) : l - std::log1p(std::exp(l));
}

double oracle_kl(const std::vector<double>& mean, const std::vector<double>& logvar, int64_t batch, int64_t dim) {
  double total = 0.0;
  for (int64_t b = 0; b < batch; ++b) {
    double row = 0.0;
    for (int64_t c = 0; c < dim; ++c) {
      const double m = mean[b * dim + c], lv = logvar[b * dim + c];
      row += 0.5 * (m * m + std::exp(lv) - 1.0 - lv);
    }
    total += row;
  }
  return total / static_cast<double>(batch);
}

double oracle_cross_entropy(const std::vector<double>& logits, const std::vector<int64_t>& labels, int64_t batch,
                            int64_t k) {
  double total = 0.0;
  for (int64_t b = 0; b < batch; ++b) {
    double mx = logits[b * k];
    for (int64_t j = 1; j < k; ++j) mx = std::max(mx, logits[b * k + j]);
    double s = 0.0;
    for (int64_t j = 0; j < k; ++j) s += std::exp(logits[b * k + j] - mx);
    total += -(logits[b * k + labels[b]] - mx - std::log(s));
  }
  return total / static_cast<double>(batch);
}

double integrated_kl(double mu, double logvar) {
  const double sd = std::exp(0.5 * logvar);
  const double lo = mu - 14.0 * sd, hi = mu + 14.0 * sd;
  const int n = 200000;  // even
  const double h = (hi - lo) / n;
  auto f = [&](double x) {
    const double zq = (x - mu) / sd;
    const double log_q = -0.5 * zq * zq - std::log(sd) - 0.5 * std::log(2.0 * M_PI);
    const double log_p = -0.5 * x * x - 0.5 * std::log(2.0 * M_PI);
    return std::exp(log_q) * (log_q - log_p);
  };
  double s = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) s += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

namespace {

double rel(double got, double want) { return std::abs(got - want) / std::max(std::abs(want), 1e-12); }

torch::Tensor uniform(std::mt19937_64& rng, std::vector<int64_t> shape, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  auto t = torch::empty(shape, torch::kFloat64);
  auto* p = t.data_ptr<double>();
  for (int64_t i = 0; i < t.numel(); ++i) p[i] = u(rng);
  return t;
}

int64_t pick(std::mt19937_64& rng, int64_t lo, int64_t hi) {
  return std::uniform_int_distribution<int64_t>(lo, hi)(rng);
}

}  // namespace

std::vector<OracleResult> run_loss_oracles(int cases, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<OracleResult> out;
  auto record = [&](const std::string& name, double got, double want) {
    auto it = std::find_if(out.begin(), out.end(), [&](const OracleResult& r) { return r.name == name; });
    if (it == out.end()) {
      out.push_back({name, 0.0, 0});
      it = out.end() - 1;
    }
    it->worst_relative_error = std::max(it->worst_relative_error, rel(got, want));
    ++it->cases;
  };

  for (int c = 0; c < cases; ++c) {
    const int64_t b = pick(rng, 1, 4), ch = pick(rng, 1, 3), h = pick(rng, 2, 6);
    const std::vector<int64_t> img{b, ch, h, h};
    const auto x = uniform(rng, img, -1, 1), y = uniform(rng, img, -1, 1);
    const auto xh = uniform(rng, img, -1, 1), yh = uniform(rng, img, -1, 1);

    record("cross_cycle", cross_cycle_loss(x, y, xh, yh).item<double>(),
           oracle_mean_abs(values(xh), values(x)) + oracle_mean_abs(values(yh), values(y)));
    record("self_reconstruction", self_reconstruction_loss(x, xh, y, yh).item<double>(),
           oracle_mean_abs(values(xh), values(x)) + oracle_mean_abs(values(yh), values(y)));
    record("cross_cycle_geometry", cross_cycle_geometry_loss(xh, x).item<double>(),
           oracle_mean_abs(values(xh), values(x)));

    const int q = static_cast<int>(pick(rng, 0, 3));
    const GeometricTransform t(q);
    const auto vb = values(x), vbp = values(xh);
    record("geometry_consistency", geometry_consistency_loss(x, xh, t).item<double>(),
           oracle_mean_abs(vb, oracle_rotate(vbp, h, 4 - q)) + oracle_mean_abs(vbp, oracle_rotate(vb, h, q)));

    const int64_t ca = pick(rng, 1, 8);
    const auto za = uniform(rng, {b, ca}, -3, 3), zr = uniform(rng, {b, ca}, -3, 3);
    record("appearance_latent_regression", appearance_latent_regression_loss(za, zr).item<double>(),
           oracle_mean_abs(values(zr), values(za)));
    record("place_latent_regression", place_latent_regression_loss(x, xh).item<double>(),
           oracle_mean_abs(values(xh), values(x)));

    const auto sr = uniform(rng, {b, 1, h, h}, 0.01, 0.99), sf = uniform(rng, {b, 1, h, h}, 0.01, 0.99);
    {
      double lr = 0.0, lf = 0.0, l1f = 0.0;
      for (double v : values(sr)) lr += std::log(v);
      for (double v : values(sf)) {
        lf += std::log(v);
        l1f += std::log(1.0 - v);
      }
      const double n = static_cast<double>(sr.numel());
      record("image_adversarial_generator",
             image_adversarial_loss(sr, sf, AdversarialSide::kGenerator).item<double>(), -lf / n);
      record("image_adversarial_discriminator",
             image_adversarial_loss(sr, sf, AdversarialSide::kDiscriminator).item<double>(), -(lr / n + l1f / n));
    }
    const auto lr = uniform(rng, {b, 1, h, h}, -6, 6), lf = uniform(rng, {b, 1, h, h}, -6, 6);
    {
      double gr = 0.0, gf = 0.0, gnf = 0.0;
      for (double v : values(lr)) gr += oracle_log_sigmoid(v);
      for (double v : values(lf)) {
        gf += oracle_log_sigmoid(v);
        gnf += oracle_log_sigmoid(-v);
      }
      const double n = static_cast<double>(lr.numel());
      record("image_adversarial_logits_generator",
             image_adversarial_loss_from_logits(lr, lf, AdversarialSide::kGenerator).item<double>(), -gf / n);
      record("image_adversarial_logits_discriminator",
             image_adversarial_loss_from_logits(lr, lf, AdversarialSide::kDiscriminator).item<double>(),
             -(gr / n + gnf / n));
    }
    const auto px = uniform(rng, {b}, -5, 5), py = uniform(rng, {b}, -5, 5);
    {
      double dx = 0.0, dy = 0.0, cx = 0.0, cy = 0.0;
      for (double v : values(px)) {
        dx += oracle_log_sigmoid(v);
        cx += -0.5 * oracle_log_sigmoid(v) - 0.5 * oracle_log_sigmoid(-v);
      }
      for (double v : values(py)) {
        dy += oracle_log_sigmoid(-v);
        cy += -0.5 * oracle_log_sigmoid(v) - 0.5 * oracle_log_sigmoid(-v);
      }
      const double n = static_cast<double>(b);
      record("place_adversarial_discriminator",
             place_adversarial_loss(px, py, AdversarialSide::kDiscriminator).item<double>(), -(dx / n + dy / n));
      record("place_adversarial_encoder", place_adversarial_loss(px, py, AdversarialSide::kGenerator).item<double>(),
             cx / n + cy / n);
    }
    const auto mu = uniform(rng, {b, ca}, -2, 2), lv = uniform(rng, {b, ca}, -2, 2);
    record("kl", kl_loss(mu, lv).item<double>(), oracle_kl(values(mu), values(lv), b, ca));

    const int64_t k = pick(rng, 2, 5);
    const auto logits = uniform(rng, {b, k}, -4, 4);
    std::vector<int64_t> labels;
    for (int64_t i = 0; i < b; ++i) labels.push_back(pick(rng, 0, k - 1));
    record("domain_classification",
           domain_classification_loss(logits, torch::tensor(labels), ClassifierSide::kDiscriminatorOnReal)
               .item<double>(),
           oracle_cross_entropy(values(logits), labels, b, k));

    LossReport report;
    LossWeights w;
    double want = 0.0;
    const bool multi = (c % 2) == 0;
    std::uniform_real_distribution<double> u(0.0, 5.0);
    double* wp[] = {&w.cc, &w.gc, &w.cgc, &w.recon, &w.adv_app, &w.adv_occ, &w.adv_place, &w.lat_app, &w.lat_place,
                    &w.kl, &w.cls};
    for (std::size_t i = 0; i < kNumLossTerms; ++i) {
      *wp[i] = u(rng);
      report.terms[i] = u(rng);
      if (i == kNumLossTerms - 1 && !multi) continue;
      want += *wp[i] * report.terms[i];
    }
    record("total_loss", total_loss(report, w, multi), want);
    std::array<torch::Tensor, kNumLossTerms> tensors;
    for (std::size_t i = 0; i < kNumLossTerms; ++i) tensors[i] = torch::tensor(report.terms[i], torch::kFloat64);
    record("total_loss_tensor", total_loss(tensors, w, multi).item<double>(), want);
  }
  return out;
}

torch::Tensor finite_difference(const std::function<torch::Tensor(const torch::Tensor&)>& f, const torch::Tensor& x,
                                double h) {
  torch::NoGradGuard no_grad;
  auto base = x.detach().clone().to(torch::kFloat64).contiguous();
  auto grad = torch::zeros_like(base);
  auto* p = base.data_ptr<double>();
  auto* g = grad.data_ptr<double>();
  for (int64_t i = 0; i < base.numel(); ++i) {
    const double orig = p[i];
    p[i] = orig + h;
    const double up = f(base).item<double>();
    p[i] = orig - h;
    const double down = f(base).item<double>();
    p[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double relative_error(const torch::Tensor& a, const torch::Tensor& b) {
  const double diff = (a - b).norm().item<double>();
  const double scale = std::max({a.norm().item<double>(), b.norm().item<double>(), 1e-12});
  return diff / scale;
}

namespace {

using Inputs = std::vector<torch::Tensor>;

// Max over inputs of the analytic-vs-numeric relative error.
double gradient_error(const std::function<torch::Tensor(const Inputs&)>& f, Inputs inputs) {
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Inputs leaf = inputs;
    leaf[i] = inputs[i].detach().clone().requires_grad_(true);
    auto y = f(leaf);
    auto analytic = torch::autograd::grad({y}, {leaf[i]})[0];
    auto numeric = finite_difference(
        [&](const torch::Tensor& v) {
          Inputs probe = inputs;
          probe[i] = v;
          return f(probe);
        },
        inputs[i]);
    worst = std::max(worst, relative_error(analytic, numeric));
  }
  return worst;
}

// b = a + s * U(0.1, 1) with random sign: differences stay far from the L1 kink.
torch::Tensor offset(std::mt19937_64& rng, const torch::Tensor& a) {
  auto mag = uniform(rng, a.sizes().vec(), 0.1, 1.0);
  auto sign = uniform(rng, a.sizes().vec(), -1.0, 1.0).sign();
  return a + mag * sign;
}

}  // namespace

std::vector<GradientResult> run_gradient_checks(uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GradientResult> out;
  const std::vector<int64_t> img{2, 2, 3, 3};
  const auto x = uniform(rng, img, -1, 1), y = uniform(rng, img, -1, 1);
  const auto xh = offset(rng, x), yh = offset(rng, y);

  out.push_back({"cc", gradient_error([](const Inputs& v) { return cross_cycle_loss(v[0], v[1], v[2], v[3]); },
                                      {x, y, xh, yh})});
  {
    const GeometricTransform t(1);
    const auto xbar = uniform(rng, img, -1, 1);
    // x_bar' = f(x_bar) + offset keeps both rotated differences away from 0.
    const auto xbar_prime = offset(rng, apply_transform(xbar, t));
    out.push_back({"gc", gradient_error([&](const Inputs& v) { return geometry_consistency_loss(v[0], v[1], t); },
                                        {xbar, xbar_prime})});
  }
  out.push_back({"cgc", gradient_error([](const Inputs& v) { return cross_cycle_geometry_loss(v[0], v[1]); },
                                       {xh, x})});
  out.push_back({"recon", gradient_error(
                              [](const Inputs& v) { return self_reconstruction_loss(v[0], v[1], v[2], v[3]); },
                              {x, xh, y, yh})});
  const auto lr = uniform(rng, {2, 1, 2, 2}, -3, 3), lf = uniform(rng, {2, 1, 2, 2}, -3, 3);
  out.push_back({"adv_app", std::max(gradient_error(
                                         [](const Inputs& v) {
                                           return image_adversarial_loss_from_logits(v[0], v[1],
                                                                                     AdversarialSide::kDiscriminator);
                                         },
                                         {lr, lf}),
                                     gradient_error(
                                         [](const Inputs& v) {
                                           return image_adversarial_loss_from_logits({}, v[0],
                                                                                     AdversarialSide::kGenerator);
                                         },
                                         {lf}))});
  const auto sr = uniform(rng, {2, 1, 2, 2}, 0.1, 0.9), sf = uniform(rng, {2, 1, 2, 2}, 0.1, 0.9);
  out.push_back({"adv_occ", std::max(gradient_error(
                                         [](const Inputs& v) {
                                           return image_adversarial_loss(v[0], v[1], AdversarialSide::kDiscriminator);
                                         },
                                         {sr, sf}),
                                     gradient_error(
                                         [&](const Inputs& v) {
                                           return image_adversarial_loss(sr, v[0], AdversarialSide::kGenerator);
                                         },
                                         {sf}))});
  const auto px = uniform(rng, {3}, -3, 3), py = uniform(rng, {3}, -3, 3);
  out.push_back({"adv_place",
                 std::max(gradient_error(
                              [](const Inputs& v) {
                                return place_adversarial_loss(v[0], v[1], AdversarialSide::kDiscriminator);
                              },
                              {px, py}),
                          gradient_error(
                              [](const Inputs& v) {
                                return place_adversarial_loss(v[0], v[1], AdversarialSide::kGenerator);
                              },
                              {px, py}))});
  const auto za = uniform(rng, {2, 4}, -2, 2);
  out.push_back({"lat_app", gradient_error(
                                [](const Inputs& v) { return appearance_latent_regression_loss(v[0], v[1]); },
                                {za, offset(rng, za)})});
  out.push_back({"lat_place", gradient_error(
                                  [](const Inputs& v) { return place_latent_regression_loss(v[0], v[1]); },
                                  {x, offset(rng, x)})});
  out.push_back({"kl", gradient_error([](const Inputs& v) { return kl_loss(v[0], v[1]); },
                                      {uniform(rng, {2, 4}, -2, 2), uniform(rng, {2, 4}, -2, 2)})});
  const auto labels = torch::tensor(std::vector<int64_t>{0, 2, 1});
  out.push_back({"cls", gradient_error(
                            [&](const Inputs& v) {
                              return domain_classification_loss(v[0], labels, ClassifierSide::kGeneratorOnFake);
                            },
                            {uniform(rng, {3, 3}, -3, 3)})});
  return out;
}

// ---- stub networks ---------------------------------------------------------

torch::Tensor StubNetworks::encode_place(const torch::Tensor& pixels) const {
  return pixels - pixels.mean({2, 3}, true);
}

torch::Tensor StubNetworks::encode_occlusion(const torch::Tensor& pixels) const {
  return torch::zeros({pixels.size(0), 1, pixels.size(2), pixels.size(3)}, pixels.options());
}

AppearanceCode StubNetworks::encode_appearance(const torch::Tensor& pixels, const DomainLabel&,
                                               const AppearanceSampling& sampling) const {
  AppearanceCode c;
  c.mean = pixels.mean({2, 3});
  c.logvar = torch::zeros_like(c.mean);
  if (sampling.deterministic) {
    c.sample = c.mean;
  } else {
    c.eps = sampling.eps;
    c.sample = c.mean + c.eps;
  }
  return c;
}

torch::Tensor StubNetworks::generate(const torch::Tensor& place, const torch::Tensor&,
                                     const torch::Tensor& appearance, const DomainLabel&) const {
  return place + appearance.unsqueeze(-1).unsqueeze(-1);
}

ImageBatch dyadic_batch(std::mt19937_64& rng, int64_t batch, int64_t size, int64_t domain, bool occluded) {
  std::uniform_int_distribution<int> d(-8, 8);
  auto px = torch::empty({batch, 3, size, size}, torch::kFloat64);
  auto* p = px.data_ptr<double>();
  for (int64_t i = 0; i < px.numel(); ++i) p[i] = d(rng) / 8.0;
  return {px, torch::full({batch}, domain, torch::kLong), torch::full({batch}, occluded, torch::kBool)};
}

StepNoise dyadic_noise(std::mt19937_64& rng, int64_t batch, int64_t dim) {
  std::uniform_int_distribution<int> d(-4, 4);
  auto draw = [&](int64_t rows) {
    auto t = torch::empty({rows, dim}, torch::kFloat64);
    auto* p = t.data_ptr<double>();
    for (int64_t i = 0; i < t.numel(); ++i) p[i] = d(rng) / 8.0;
    return t;
  };
  StepNoise n;
  n.eps_xy = draw(2 * batch);
  n.eps_bar = draw(2 * batch);
  n.z_random = draw(batch);
  return n;
}

FixedPointResult run_fixed_point(uint64_t seed, int quarter_turns) {
  std::mt19937_64 rng(seed);
  StubNetworks nets(3);
  const auto x = dyadic_batch(rng, 2, 4, 0, true);
  const auto y = dyadic_batch(rng, 2, 4, 1, false);
  GraphOptions o;
  o.deterministic_appearance = true;
  const auto out = forward_graph(nets, x, y, GeometricTransform(quarter_turns), o, dyadic_noise(rng, 2, 3));
  const auto terms = reconstruction_terms(out);
  FixedPointResult r;
  for (std::size_t i = 0; i < kNumLossTerms; ++i) r.terms[i] = terms[i].defined() ? terms[i].item<double>() : -1.0;
  r.kl_at_origin = kl_loss(torch::zeros({2, 3}, torch::kFloat64), torch::zeros({2, 3}, torch::kFloat64))
                       .item<double>();
  return r;
}

NetworkConfig tiny_network() {
  NetworkConfig n;
  n.crop_size = 8;
  n.base_width = 2;
  n.place_channels = 4;
  n.occlusion_channels = 2;
  n.appearance_dim = 2;
  n.domain_count = 2;
  n.encoder_res_blocks = 1;
  n.generator_res_blocks = 1;
  n.appearance_width = 4;
  n.critic_width = 4;
  n.place_critic_width = 4;
  n.mlp_width = 8;
  return n;
}

}  // namespace proca::testing
