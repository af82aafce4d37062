#include "proca/losses.hpp"

#include <cmath>
#include <sstream>

#include "proca/errors.hpp"

namespace proca {

namespace {

void require_same_shape(const char* op, const torch::Tensor& a, const torch::Tensor& b) {
  if (!a.defined() || !b.defined() || a.sizes() != b.sizes()) {
    std::ostringstream os;
    os << op << ": shape mismatch";
    if (a.defined() && b.defined()) os << " " << a.sizes() << " vs " << b.sizes();
    throw ShapeError(os.str());
  }
}

torch::Tensor mean_abs(const torch::Tensor& a, const torch::Tensor& b) { return (a - b).abs().mean(); }

void require_finite(const char* op, const torch::Tensor& t) {
  if (!torch::isfinite(t).all().item<bool>()) {
    throw ValidationError(std::string(op) + ": non-finite input");
  }
}

// Non-finite network outputs reaching a loss abort training under the term's name.
void require_finite_term(const char* op, const char* term, const torch::Tensor& t) {
  if (!torch::isfinite(t).all().item<bool>()) {
    throw NumericError(term, std::string(op) + ": non-finite input");
  }
}

void require_open_unit(const char* op, const torch::Tensor& scores) {
  if (scores.numel() == 0) throw ShapeError(std::string(op) + ": empty score tensor");
  require_finite(op, scores);
  if (scores.min().item<double>() <= 0.0 || scores.max().item<double>() >= 1.0) {
    throw ValidationError(std::string(op) + ": scores must lie strictly inside (0, 1)");
  }
}

}  // namespace

void LossWeights::validate() const {
  const double all[] = {cc, gc, cgc, recon, adv_app, adv_occ, adv_place, lat_app, lat_place, kl, cls};
  for (std::size_t i = 0; i < kNumLossTerms; ++i) {
    if (!std::isfinite(all[i]) || all[i] < 0.0) {
      throw ValidationError("loss weight '" + std::string(term_name(static_cast<LossTerm>(i))) +
                            "' must be finite and >= 0");
    }
  }
}

LossWeights LossWeights::scaled(double f) const {
  LossWeights w = *this;
  for (double* p : {&w.cc, &w.gc, &w.cgc, &w.recon, &w.adv_app, &w.adv_occ, &w.adv_place, &w.lat_app,
                    &w.lat_place, &w.kl, &w.cls}) {
    *p *= f;
  }
  return w;
}

std::string_view term_name(LossTerm term) {
  switch (term) {
    case LossTerm::kCrossCycle: return "cc";
    case LossTerm::kGeometry: return "gc";
    case LossTerm::kCrossCycleGeometry: return "cgc";
    case LossTerm::kRecon: return "recon";
    case LossTerm::kAdvAppearance: return "adv_app";
    case LossTerm::kAdvOcclusion: return "adv_occ";
    case LossTerm::kAdvPlace: return "adv_place";
    case LossTerm::kLatentAppearance: return "lat_app";
    case LossTerm::kLatentPlace: return "lat_place";
    case LossTerm::kKl: return "kl";
    case LossTerm::kDomainClass: return "cls";
  }
  return "?";
}

double weight_of(const LossWeights& w, LossTerm term) {
  switch (term) {
    case LossTerm::kCrossCycle: return w.cc;
    case LossTerm::kGeometry: return w.gc;
    case LossTerm::kCrossCycleGeometry: return w.cgc;
    case LossTerm::kRecon: return w.recon;
    case LossTerm::kAdvAppearance: return w.adv_app;
    case LossTerm::kAdvOcclusion: return w.adv_occ;
    case LossTerm::kAdvPlace: return w.adv_place;
    case LossTerm::kLatentAppearance: return w.lat_app;
    case LossTerm::kLatentPlace: return w.lat_place;
    case LossTerm::kKl: return w.kl;
    case LossTerm::kDomainClass: return w.cls;
  }
  return 0.0;
}

torch::Tensor cross_cycle_loss(const torch::Tensor& x, const torch::Tensor& y, const torch::Tensor& x_hat,
                               const torch::Tensor& y_hat) {
  require_same_shape("cross_cycle_loss", x, x_hat);
  require_same_shape("cross_cycle_loss", y, y_hat);
  require_same_shape("cross_cycle_loss", x, y);
  return mean_abs(x_hat, x) + mean_abs(y_hat, y);
}

torch::Tensor geometry_consistency_loss(const torch::Tensor& x_bar, const torch::Tensor& x_bar_prime,
                                        const GeometricTransform& t) {
  require_same_shape("geometry_consistency_loss", x_bar, x_bar_prime);
  return mean_abs(x_bar, apply_transform(x_bar_prime, t.inverse())) +
         mean_abs(x_bar_prime, apply_transform(x_bar, t));
}

torch::Tensor cross_cycle_geometry_loss(const torch::Tensor& y_hat_prime, const torch::Tensor& y_prime) {
  require_same_shape("cross_cycle_geometry_loss", y_hat_prime, y_prime);
  return mean_abs(y_hat_prime, y_prime);
}

torch::Tensor self_reconstruction_loss(const torch::Tensor& x, const torch::Tensor& x_tilde,
                                       const torch::Tensor& y, const torch::Tensor& y_tilde) {
  require_same_shape("self_reconstruction_loss", x, x_tilde);
  require_same_shape("self_reconstruction_loss", y, y_tilde);
  return mean_abs(x_tilde, x) + mean_abs(y_tilde, y);
}

torch::Tensor appearance_latent_regression_loss(const torch::Tensor& z_drawn, const torch::Tensor& z_recovered) {
  require_same_shape("appearance_latent_regression_loss", z_drawn, z_recovered);
  return mean_abs(z_recovered, z_drawn);
}

torch::Tensor place_latent_regression_loss(const torch::Tensor& z_p_original,
                                           const torch::Tensor& z_p_of_translated) {
  require_same_shape("place_latent_regression_loss", z_p_original, z_p_of_translated);
  return mean_abs(z_p_of_translated, z_p_original);
}

torch::Tensor image_adversarial_loss(const torch::Tensor& real_scores, const torch::Tensor& fake_scores,
                                     AdversarialSide side) {
  require_open_unit("image_adversarial_loss", fake_scores);
  if (side == AdversarialSide::kGenerator) {
    return -torch::log(fake_scores).mean();
  }
  require_open_unit("image_adversarial_loss", real_scores);
  return -(torch::log(real_scores).mean() + torch::log1p(-fake_scores).mean());
}

torch::Tensor image_adversarial_loss_from_logits(const torch::Tensor& real_logits,
                                                 const torch::Tensor& fake_logits, AdversarialSide side) {
  // log(1 - s(l)) = log s(-l)
  if (side == AdversarialSide::kGenerator) {
    return -torch::log_sigmoid(fake_logits).mean();
  }
  return -(torch::log_sigmoid(real_logits).mean() + torch::log_sigmoid(-fake_logits).mean());
}

torch::Tensor place_adversarial_loss(const torch::Tensor& logits_x, const torch::Tensor& logits_y,
                                     AdversarialSide side) {
  if (!logits_x.defined() || !logits_y.defined() || logits_x.numel() == 0 || logits_y.numel() == 0) {
    throw ShapeError("place_adversarial_loss: empty logits");
  }
  require_finite_term("place_adversarial_loss", "adv_place", logits_x);
  require_finite_term("place_adversarial_loss", "adv_place", logits_y);
  if (side == AdversarialSide::kDiscriminator) {
    return -(torch::log_sigmoid(logits_x).mean() + torch::log_sigmoid(-logits_y).mean());
  }
  auto confusion = [](const torch::Tensor& l) {
    return -0.5 * (torch::log_sigmoid(l) + torch::log_sigmoid(-l));
  };
  return confusion(logits_x).mean() + confusion(logits_y).mean();
}

torch::Tensor kl_loss(const torch::Tensor& mean, const torch::Tensor& logvar) {
  require_same_shape("kl_loss", mean, logvar);
  if (mean.dim() != 2) throw ShapeError("kl_loss: expected B x C inputs");
  require_finite_term("kl_loss", "kl", mean);
  require_finite_term("kl_loss", "kl", logvar);
  return 0.5 * (mean.pow(2) + logvar.exp() - 1.0 - logvar).sum(1).mean();
}

torch::Tensor domain_classification_loss(const torch::Tensor& domain_logits, const torch::Tensor& labels,
                                         ClassifierSide /*side*/) {
  if (domain_logits.dim() != 2 || labels.dim() != 1 || labels.size(0) != domain_logits.size(0)) {
    throw ShapeError("domain_classification_loss: expected B x k logits and B labels");
  }
  const auto k = domain_logits.size(1);
  const auto idx = labels.to(torch::kLong);
  if (idx.numel() > 0 && (idx.min().item<int64_t>() < 0 || idx.max().item<int64_t>() >= k)) {
    throw ValidationError("domain_classification_loss: label outside [0, " + std::to_string(k) + ")");
  }
  return torch::nll_loss(torch::log_softmax(domain_logits, 1), idx);
}

double total_loss(const LossReport& report, const LossWeights& w, bool multidomain) {
  double total = 0.0;
  for (std::size_t i = 0; i < kNumLossTerms; ++i) {
    const auto term = static_cast<LossTerm>(i);
    if (term == LossTerm::kDomainClass && !multidomain) continue;
    const double v = report.terms[i];
    if (!std::isfinite(v)) {
      throw NumericError(std::string(term_name(term)), "loss term '" + std::string(term_name(term)) +
                                                           "' is not finite");
    }
    total += weight_of(w, term) * v;
  }
  return total;
}

torch::Tensor total_loss(const std::array<torch::Tensor, kNumLossTerms>& terms, const LossWeights& w,
                         bool multidomain) {
  torch::Tensor total;
  for (std::size_t i = 0; i < kNumLossTerms; ++i) {
    const auto term = static_cast<LossTerm>(i);
    if (term == LossTerm::kDomainClass && !multidomain) continue;
    if (!terms[i].defined()) continue;
    if (!std::isfinite(terms[i].item<double>())) {
      throw NumericError(std::string(term_name(term)), "loss term '" + std::string(term_name(term)) +
                                                           "' is not finite");
    }
    const double wi = weight_of(w, term);
    if (wi == 0.0) continue;
    auto weighted = terms[i] * wi;
    total = total.defined() ? total + weighted : weighted;
  }
  if (!total.defined()) {
    for (const auto& t : terms) {
      if (t.defined()) return torch::zeros({}, t.options());
    }
    return torch::zeros({});
  }
  return total;
}

}  // namespace proca
