#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "proca/errors.hpp"
#include "proca/synthdata.hpp"

using namespace proca;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SceneSpec spec_of(int64_t place, int64_t domain, bool occluded, uint64_t seed = 1) {
  SceneSpec s;
  s.place_id = place;
  s.appearance_domain = domain;
  s.occluded = occluded;
  s.pose = place_pose(place, 0.1, 0.5);
  s.render_seed = seed;
  return s;
}

}  // namespace

TEST(Synth, RecordGridAndSplits) {
  SynthOptions o;
  o.n_places = 5;
  o.views_per_place = 2;
  const auto recs = synthetic_records(o);
  EXPECT_EQ(recs.size(), 5u * 3 * 2 * 2);
  int db = 0;
  for (const auto& r : recs) {
    if (r.split == Split::kDatabase) {
      ++db;
      EXPECT_EQ(r.spec.appearance_domain, 0);
      EXPECT_FALSE(r.spec.occluded);
    }
    const auto e = pose_error(r.spec.pose, place_pose(r.spec.place_id, 0.0, 0.0));
    EXPECT_LE(e.meters, 0.5);
    EXPECT_LE(e.degrees, 2.0 + 1e-9);
  }
  EXPECT_EQ(db, 5 * 2);
}

TEST(Synth, RenderIsDeterministicAndInRange) {
  const auto a = render_scene(spec_of(3, 1, true), 32), b = render_scene(spec_of(3, 1, true), 32);
  EXPECT_TRUE(torch::equal(a, b));
  EXPECT_EQ(a.sizes(), (std::vector<int64_t>{3, 32, 32}));
  EXPECT_LE(a.abs().max().item<float>(), 1.0f);
}

TEST(Synth, PlacesDiffer) {
  EXPECT_GT((render_scene(spec_of(1, 0, false), 32) - render_scene(spec_of(2, 0, false), 32)).abs().mean().item<float>(),
            0.05f);
}

TEST(Synth, OccludersOnlyTouchTheirMask) {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const auto with = render_scene(spec_of(4, 2, true, seed), 64);
    const auto without = render_scene(spec_of(4, 2, false, seed), 64);
    const auto mask = occluder_mask(spec_of(4, 2, true, seed), 64);
    const auto free = mask.logical_not().unsqueeze(0).expand({3, 64, 64});
    EXPECT_TRUE(torch::equal(with.masked_select(free), without.masked_select(free)));
    const double frac = mask.to(torch::kFloat64).mean().item<double>();
    EXPECT_GT(frac, 0.08) << seed;
    EXPECT_LT(frac, 0.36) << seed;
    EXPECT_FALSE(occluder_mask(spec_of(4, 2, false, seed), 64).any().item<bool>());
  }
}

TEST(Synth, AppearancePreservesIntensityOrder) {
  const auto base = render_scene(spec_of(6, 0, false), 32);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int64_t> pix(0, 32 * 32 - 1);
  for (int64_t domain : {1, 2, 5}) {
    const auto other = render_scene(spec_of(6, domain, false), 32);
    // domain 0 never clips, so its green channel is a strictly increasing
    // function of the scene luminance
    const auto g0 = base[1].flatten(), g1 = other[1].flatten();
    for (int i = 0; i < 2000; ++i) {
      const auto p = pix(rng), q = pix(rng);
      if (g0[p].item<float>() < g0[q].item<float>()) EXPECT_LE(g1[p].item<float>(), g1[q].item<float>());
    }
    EXPECT_GT((other - base).abs().mean().item<float>(), 0.02f);
  }
}

TEST(Synth, DatasetOnDiskIsReproducible) {
  SynthOptions o;
  o.n_places = 2;
  o.views_per_place = 1;
  o.size = 16;
  const auto d1 = fs::temp_directory_path() / "proca_synth_a", d2 = fs::temp_directory_path() / "proca_synth_b";
  fs::remove_all(d1);
  fs::remove_all(d2);
  const auto m = build_synthetic_dataset(o, d1);
  build_synthetic_dataset(o, d2);
  EXPECT_EQ(m.records.size(), 2u * 3 * 2);
  for (auto f : {"manifest.txt", "database.txt", "query.txt", "poses.txt"}) EXPECT_EQ(slurp(d1 / f), slurp(d2 / f));
  for (const auto& r : m.records) EXPECT_EQ(slurp(d1 / r.path), slurp(d2 / r.path));

  const auto ds = ImageDataset::open(d1 / "manifest.txt", 16);
  ASSERT_EQ(ds.size(), m.records.size());
  const auto img = ds.load(0);
  EXPECT_EQ(img.sizes(), (std::vector<int64_t>{3, 16, 16}));
  // 8-bit quantization only
  EXPECT_LE((img - render_scene(m.records[0].spec, 16)).abs().max().item<float>(), 1.0f / 255.0f + 1e-6f);
  const auto batch = ds.load_all();
  EXPECT_EQ(batch.size(), static_cast<int64_t>(ds.size()));
  EXPECT_NO_THROW(batch.validate(3));
}

TEST(Synth, ManifestRoundTripAndPoseOnlyFormat) {
  SynthOptions o;
  o.n_places = 2;
  o.views_per_place = 1;
  DatasetManifest m;
  m.records = synthetic_records(o);
  const auto f = fs::temp_directory_path() / "proca_manifest.txt";
  m.write(f);
  const auto back = DatasetManifest::read(f);
  ASSERT_EQ(back.records.size(), m.records.size());
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    EXPECT_EQ(back.records[i].path, m.records[i].path);
    EXPECT_EQ(back.records[i].spec.place_id, m.records[i].spec.place_id);
    EXPECT_EQ(back.records[i].spec.occluded, m.records[i].spec.occluded);
    EXPECT_EQ(back.records[i].spec.pose.translation, m.records[i].spec.pose.translation);
  }
  std::ofstream(f) << "# pose manifest\nimg.png 1 2 3 1 0 0 0\n";
  const auto poses = DatasetManifest::read(f);
  ASSERT_EQ(poses.records.size(), 1u);
  EXPECT_EQ(poses.records[0].spec.place_id, -1);
  EXPECT_EQ(poses.records[0].spec.pose.translation.z(), 3.0);
  std::ofstream(f) << "img.png 1 2\n";
  EXPECT_THROW(DatasetManifest::read(f), DataError);
}

TEST(Synth, MissingImageIsDataErrorNamingTheRecord) {
  const auto dir = fs::temp_directory_path() / "proca_missing";
  fs::create_directories(dir);
  std::ofstream(dir / "m.txt") << "nope.png 0 0 0 0 0 0 1 0 0 0\n";
  const auto ds = ImageDataset::open(dir / "m.txt", 16);
  try {
    ds.load(0);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("nope.png"), std::string::npos);
  }
}
