#pragma once

// Shared by the unit tests and the acceptance runner: scalar-loop loss
// oracles, finite-difference helpers and hand-built exact-inverse networks.

#include <torch/torch.h>

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "proca/geometry.hpp"
#include "proca/losses.hpp"
#include "proca/training.hpp"

namespace proca::testing {

// Flat double copy of any tensor (row-major).
std::vector<double> values(const torch::Tensor& t);

// ---- scalar-loop oracles ---------------------------------------------------

double oracle_mean_abs(const std::vector<double>& a, const std::vector<double>& b);
// Quarter turns clockwise of a ... x H x H array by explicit index remapping.
std::vector<double> oracle_rotate(const std::vector<double>& v, int64_t height, int quarter_turns);
double oracle_log_sigmoid(double l);
double oracle_kl(const std::vector<double>& mean, const std::vector<double>& logvar, int64_t batch, int64_t dim);
double oracle_cross_entropy(const std::vector<double>& logits, const std::vector<int64_t>& labels, int64_t batch,
                            int64_t k);
// KL(N(mu, s^2) || N(0, 1)) by composite Simpson integration of q log(q / p).
double integrated_kl(double mu, double logvar);

// One comparison per loss operation; `worst` receives the largest relative
// error seen.
struct OracleResult {
  std::string name;
  double worst_relative_error = 0.0;
  int cases = 0;
};
std::vector<OracleResult> run_loss_oracles(int cases, uint64_t seed);

// ---- gradients -------------------------------------------------------------

// Central-difference gradient of f at x (float64, any shape).
torch::Tensor finite_difference(const std::function<torch::Tensor(const torch::Tensor&)>& f, const torch::Tensor& x,
                                double h = 1e-6);
// ||a - b|| / max(||a||, ||b||, tiny)
double relative_error(const torch::Tensor& a, const torch::Tensor& b);

struct GradientResult {
  std::string term;
  double relative_error = 0.0;
};
// Every one of the eleven terms, every differentiable input.
std::vector<GradientResult> run_gradient_checks(uint64_t seed);

// ---- exact-inverse stub networks -------------------------------------------

// place = image minus its per-channel spatial mean, occlusion = zeros,
// appearance = per-channel mean (log-variance 0), G(p, o, a) = p + a.
// On dyadic inputs every reconstruction in the graph is exact.
class StubNetworks final : public TranslationNetworks {
 public:
  explicit StubNetworks(int64_t domain_count) : k_(domain_count) {}
  torch::Tensor encode_place(const torch::Tensor& pixels) const override;
  torch::Tensor encode_occlusion(const torch::Tensor& pixels) const override;
  AppearanceCode encode_appearance(const torch::Tensor& pixels, const DomainLabel& d,
                                   const AppearanceSampling& sampling) const override;
  torch::Tensor generate(const torch::Tensor& place, const torch::Tensor& occlusion, const torch::Tensor& appearance,
                         const DomainLabel& d) const override;
  int64_t domain_count() const override { return k_; }
  int64_t occlusion_channels() const override { return 1; }

 private:
  int64_t k_;
};

// B x 3 x size x size float64 batch with values in {-1, -7/8, ..., 1}.
ImageBatch dyadic_batch(std::mt19937_64& rng, int64_t batch, int64_t size, int64_t domain, bool occluded);
// Dyadic appearance prior draws (multiples of 1/8 in [-1/2, 1/2]).
StepNoise dyadic_noise(std::mt19937_64& rng, int64_t batch, int64_t dim);

struct FixedPointResult {
  std::array<double, kNumLossTerms> terms{};
  double kl_at_origin = 0.0;
};
FixedPointResult run_fixed_point(uint64_t seed, int quarter_turns);

// A tiny float64 model for end-to-end gradient checks.
NetworkConfig tiny_network();

}  // namespace proca::testing
