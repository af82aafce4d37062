#include <gtest/gtest.h>

#include "proca/config.hpp"
#include "proca/errors.hpp"
#include "proca/networks.hpp"
#include "support.hpp"

using namespace proca;

namespace {

ImageBatch random_batch(int64_t b, int64_t size, int64_t k) {
  return {torch::rand({b, 3, size, size}) * 2 - 1, torch::arange(b) % k, torch::arange(b) % 2 == 0};
}

}  // namespace

TEST(Networks, DeskShapes) {
  const auto cfg = TrainConfig::desk().net;
  auto m = make_model(cfg, 0);
  const auto img = random_batch(2, 64, cfg.domain_count);
  const auto codes = encode(m, img);
  EXPECT_EQ(codes.place.sizes(), (std::vector<int64_t>{2, cfg.place_channels, 16, 16}));
  EXPECT_EQ(codes.occlusion.sizes(), (std::vector<int64_t>{2, cfg.occlusion_channels, 16, 16}));
  EXPECT_EQ(codes.appearance.mean.sizes(), (std::vector<int64_t>{2, cfg.appearance_dim}));
  const auto out = generate(m, codes.place, codes.occlusion, codes.appearance.sample,
                            DomainLabel::of(img, cfg.domain_count));
  EXPECT_EQ(out.sizes(), img.pixels.sizes());
  EXPECT_LE(out.abs().max().item<float>(), 1.0f);
  const auto c = discriminate_image(m, img, false);
  EXPECT_EQ(c.domain_logits.sizes(), (std::vector<int64_t>{2, cfg.domain_count}));
  EXPECT_EQ(c.realness_logits.size(0), 2);
  EXPECT_EQ(discriminate_place(m, codes.place).sizes(), (std::vector<int64_t>{2}));
  EXPECT_EQ(flatten_place_descriptor(codes.place).sizes(), (std::vector<int64_t>{2, cfg.place_channels * 256}));
}

TEST(Networks, PaperScalePlaceCode) {
  const auto cfg = TrainConfig::paper();
  EXPECT_EQ(code_size_for(cfg.crop_size()), 54);
  ContentEncoder enc(cfg.net.base_width, cfg.net.place_channels, cfg.net.encoder_res_blocks);
  torch::NoGradGuard g;
  const auto code = enc->forward(torch::zeros({1, 3, 216, 216}));
  EXPECT_EQ(code.sizes(), (std::vector<int64_t>{1, 256, 54, 54}));
  EXPECT_EQ(flatten_place_descriptor(code[0] + 1.0).numel(), 746496);
}

TEST(Networks, InitializationStatistics) {
  auto m = make_model(TrainConfig::desk().net, 1);
  for (const auto& p : m->named_parameters()) {
    const auto& name = p.key();
    if (name.find("norm") != std::string::npos && name.ends_with("weight")) {
      EXPECT_TRUE(torch::all(p.value() == 1).item<bool>()) << name;
    } else if (name.ends_with("bias")) {
      EXPECT_TRUE(torch::all(p.value() == 0).item<bool>()) << name;
    } else if (p.value().numel() > 2000) {
      EXPECT_NEAR(p.value().std().item<double>(), 0.02, 0.002) << name;
    }
  }
}

TEST(Networks, SameSeedSameParameters) {
  auto a = make_model(TrainConfig::desk().net, 4), b = make_model(TrainConfig::desk().net, 4);
  auto pa = a->parameters(), pb = b->parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE(torch::equal(pa[i], pb[i]));
}

TEST(Networks, ParameterGroupsPartitionTheModel) {
  auto m = make_model(TrainConfig::desk().net, 0);
  int64_t g = 0, d = 0;
  for (const auto& p : m->generator_parameters()) g += p.numel();
  for (const auto& p : m->discriminator_parameters()) d += p.numel();
  EXPECT_EQ(g + d, m->parameter_count());
  EXPECT_GT(g, 0);
  EXPECT_GT(d, 0);
}

TEST(Networks, AppearanceSamplingUsesRecordedNoise) {
  const auto cfg = TrainConfig::desk().net;
  auto m = make_model(cfg, 0);
  const auto img = random_batch(2, 64, cfg.domain_count);
  AppearanceSampling s;
  s.deterministic = false;
  s.eps = torch::randn({2, cfg.appearance_dim});
  const auto code = encode_appearance(m, img.pixels, DomainLabel::of(img, cfg.domain_count), s);
  EXPECT_TRUE(torch::allclose(code.sample, code.mean + torch::exp(0.5 * code.logvar) * s.eps));
  EXPECT_TRUE(torch::equal(code.eps, s.eps));
  const auto det = encode_appearance(m, img.pixels, DomainLabel::of(img, cfg.domain_count));
  EXPECT_TRUE(torch::equal(det.sample, det.mean));
}

TEST(Networks, OcclusionCriticRoutingMatchesSeparateCalls) {
  const auto cfg = TrainConfig::desk().net;
  auto m = make_model(cfg, 0);
  auto img = random_batch(4, 64, cfg.domain_count);
  img.occlusion_flag = torch::tensor({true, false, false, true});
  torch::NoGradGuard g;
  const auto mixed = discriminate_image(m, img, true);
  for (int64_t i = 0; i < 4; ++i) {
    auto& critic = img.occlusion_flag[i].item<bool>() ? m->occlusion_critic_with : m->occlusion_critic_without;
    auto [r, d] = critic->forward(img.pixels.narrow(0, i, 1));
    EXPECT_TRUE(torch::allclose(mixed.realness_logits.narrow(0, i, 1), r, 1e-5, 1e-6));
    EXPECT_TRUE(torch::allclose(mixed.domain_logits.narrow(0, i, 1), d, 1e-5, 1e-6));
  }
}

TEST(Networks, ShapeAndLabelErrors) {
  const auto cfg = TrainConfig::desk().net;
  auto m = make_model(cfg, 0);
  EXPECT_THROW(encode_place(m, torch::zeros({1, 3, 62, 62})), ShapeError);
  EXPECT_THROW(encode_place(m, torch::zeros({3, 64, 64})), ShapeError);
  EXPECT_THROW(code_size_for(30), ShapeError);
  const auto img = random_batch(2, 64, cfg.domain_count);
  const auto codes = encode(m, img);
  EXPECT_THROW(generate(m, codes.place, codes.occlusion.narrow(2, 0, 8), codes.appearance.sample,
                        DomainLabel::of(img, cfg.domain_count)),
               ShapeError);
  EXPECT_THROW(encode_appearance(m, img.pixels, DomainLabel(img.appearance_domain, 5)), ValidationError);
  EXPECT_THROW(DomainLabel(torch::tensor({0, 3}), 3), ValidationError);
}

TEST(Descriptors, UnitNormAndScaleInvariant) {
  auto code = torch::randn({3, 4, 5, 5});
  auto d = flatten_place_descriptor(code);
  EXPECT_TRUE(torch::allclose(d.norm(2, 1), torch::ones({3}), 0, 1e-5));
  EXPECT_TRUE(torch::allclose(flatten_place_descriptor(code * 7.5), d, 1e-6, 1e-6));
  EXPECT_THROW(flatten_place_descriptor(torch::zeros({4, 5, 5})), ValidationError);
}

TEST(Networks, TinyFloat64ModelRuns) {
  auto m = make_model(proca::testing::tiny_network(), 0);
  m->to(torch::kFloat64);
  auto img = random_batch(2, 8, 2);
  img.pixels = img.pixels.to(torch::kFloat64);
  const auto codes = encode(m, img);
  EXPECT_EQ(codes.place.sizes(), (std::vector<int64_t>{2, 4, 2, 2}));
  EXPECT_EQ(generate(m, codes.place, codes.occlusion, codes.appearance.sample, DomainLabel::of(img, 2)).sizes(),
            img.pixels.sizes());
}
