#pragma once

#include <torch/torch.h>

#include <array>
#include <string>
#include <string_view>

#include "proca/geometry.hpp"

namespace proca {

// Trade-off weights of the full objective. All finite and >= 0.
struct LossWeights {
  double cc = 10.0;         // cross-cycle consistency
  double gc = 10.0;         // geometry consistency
  double cgc = 10.0;        // cross-cycle geometry consistency
  double recon = 10.0;      // self-reconstruction
  double adv_app = 1.0;     // image adversarial, appearance critic
  double adv_occ = 1.0;     // image adversarial, occlusion critics
  double adv_place = 1.0;   // feature-level place adversarial
  double lat_app = 10.0;    // appearance latent regression
  double lat_place = 10.0;  // place latent regression
  double kl = 0.01;
  double cls = 1.0;  // auxiliary domain classification (multi-domain only)

  void validate() const;
  LossWeights scaled(double factor) const;
};

enum class LossTerm : int {
  kCrossCycle,
  kGeometry,
  kCrossCycleGeometry,
  kRecon,
  kAdvAppearance,
  kAdvOcclusion,
  kAdvPlace,
  kLatentAppearance,
  kLatentPlace,
  kKl,
  kDomainClass,
};
inline constexpr std::size_t kNumLossTerms = 11;

// Stable short names used in logs: cc, gc, cgc, recon, adv_app, ...
std::string_view term_name(LossTerm term);
double weight_of(const LossWeights& w, LossTerm term);

// One named scalar per term plus the weighted total.
struct LossReport {
  std::array<double, kNumLossTerms> terms{};
  double total = 0.0;

  double& operator[](LossTerm t) { return terms[static_cast<std::size_t>(t)]; }
  double operator[](LossTerm t) const { return terms[static_cast<std::size_t>(t)]; }
};

enum class AdversarialSide { kGenerator, kDiscriminator };
enum class ClassifierSide { kDiscriminatorOnReal, kGeneratorOnFake };

// --- L1 family; every term is a mean absolute error -------------------------

// mean|x_hat - x| + mean|y_hat - y|
torch::Tensor cross_cycle_loss(const torch::Tensor& x, const torch::Tensor& y,
                               const torch::Tensor& x_hat, const torch::Tensor& y_hat);

// mean|x_bar - f^-1(x_bar')| + mean|x_bar' - f(x_bar)|
torch::Tensor geometry_consistency_loss(const torch::Tensor& x_bar, const torch::Tensor& x_bar_prime,
                                        const GeometricTransform& t);

// mean|y_hat' - y'|
torch::Tensor cross_cycle_geometry_loss(const torch::Tensor& y_hat_prime, const torch::Tensor& y_prime);

// mean|x_tilde - x| + mean|y_tilde - y|
torch::Tensor self_reconstruction_loss(const torch::Tensor& x, const torch::Tensor& x_tilde,
                                       const torch::Tensor& y, const torch::Tensor& y_tilde);

torch::Tensor appearance_latent_regression_loss(const torch::Tensor& z_drawn,
                                                const torch::Tensor& z_recovered);

torch::Tensor place_latent_regression_loss(const torch::Tensor& z_p_original,
                                           const torch::Tensor& z_p_of_translated);

// --- adversarial ------------------------------------------------------------

// Scores are probabilities in (0, 1).
//   discriminator: -[E log D(real) + E log(1 - D(fake))]
//   generator:     -E log D(fake)            (non-saturating)
torch::Tensor image_adversarial_loss(const torch::Tensor& real_scores, const torch::Tensor& fake_scores,
                                     AdversarialSide side);

// Same objective evaluated from pre-sigmoid logits with log-sigmoid, which
// stays finite when the critic saturates. `real_logits` is ignored on the
// generator side and may be undefined.
torch::Tensor image_adversarial_loss_from_logits(const torch::Tensor& real_logits,
                                                 const torch::Tensor& fake_logits,
                                                 AdversarialSide side);

// Feature-level place critic, one logit per item.
//   discriminator: -[E_x log s(l_x) + E_y log(1 - s(l_y))]
//   encoder:       E_x BCE(l_x, 1/2) + E_y BCE(l_y, 1/2)
// Non-finite logits throw NumericError("adv_place").
torch::Tensor place_adversarial_loss(const torch::Tensor& logits_x, const torch::Tensor& logits_y,
                                     AdversarialSide side);

// --- distributional ---------------------------------------------------------

// Closed-form KL(N(mu, exp(logvar)) || N(0, 1)), summed over channels and
// averaged over the batch. Inputs are B x C. Non-finite inputs throw
// NumericError("kl").
torch::Tensor kl_loss(const torch::Tensor& mean, const torch::Tensor& logvar);

// Softmax cross-entropy of the true class, averaged over the batch. The side
// only documents which of the two sub-objectives the caller evaluates; the
// arithmetic is the same.
torch::Tensor domain_classification_loss(const torch::Tensor& domain_logits, const torch::Tensor& labels,
                                         ClassifierSide side);

// Weighted sum over the report's terms. The classification term only enters
// when `multidomain` is set. Throws NumericError naming the first non-finite
// weighted term.
double total_loss(const LossReport& report, const LossWeights& w, bool multidomain);

// Tensor-valued counterpart used by the optimizer; terms may be undefined
// (treated as absent, contributing 0).
torch::Tensor total_loss(const std::array<torch::Tensor, kNumLossTerms>& terms, const LossWeights& w,
                         bool multidomain);

}  // namespace proca
