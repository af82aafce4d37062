#include "proca/synthdata.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "proca/errors.hpp"
#include "proca/hash.hpp"

namespace proca {

namespace fs = std::filesystem;

namespace {

// ---- scene layout ----------------------------------------------------------

struct Building {
  double u0, u1, top, intensity;
  double window_du, window_dv, window_intensity;
};

struct Tree {
  double cu, cv, radius, intensity;
};

struct Layout {
  double horizon;
  double sky_top, sky_bottom;
  double ground, dash_intensity, dash_period, dash_phase;
  std::vector<Building> buildings;
  std::vector<Tree> trees;
};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  // Explicit arithmetic rather than std::uniform_real_distribution so renders
  // do not depend on the standard library's distribution algorithm.
  return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// How far a place strays from the shared street template (0 = every place
// identical, 1 = independent layouts).
constexpr double kPlaceJitter = 0.15;

Layout make_layout(int64_t place_id) {
  std::mt19937_64 trng(0x7e3b1a7e);
  std::mt19937_64 rng(mix_seed({0x5ce7e, static_cast<uint64_t>(place_id)}));
  auto mix = [&](double lo, double hi) {
    const double t = uniform(trng, lo, hi), p = uniform(rng, lo, hi);
    return t + kPlaceJitter * (p - t);
  };
  Layout l;
  l.horizon = mix(0.58, 0.72);
  l.sky_top = mix(0.72, 0.9);
  l.sky_bottom = mix(0.6, 0.8);
  l.ground = mix(0.22, 0.4);
  l.dash_intensity = mix(0.55, 0.7);
  l.dash_period = mix(0.12, 0.3);
  l.dash_phase = mix(0.0, 1.0);
  for (int i = 0; i < 6; ++i) {
    Building b;
    b.u0 = mix(-0.25, 1.1);
    b.u1 = b.u0 + mix(0.12, 0.4);
    b.top = mix(0.08, l.horizon - 0.12);
    b.intensity = mix(0.08, 0.6);
    b.window_du = mix(0.04, 0.1);
    b.window_dv = mix(0.05, 0.1);
    b.window_intensity = std::clamp(b.intensity + (rng() % 2 ? 0.25 : -0.2), 0.02, 0.9);
    l.buildings.push_back(b);
  }
  for (int i = 0; i < 2; ++i) {
    Tree t;
    t.cu = mix(-0.1, 1.1);
    t.cv = l.horizon - mix(0.0, 0.12);
    t.radius = mix(0.05, 0.12);
    t.intensity = mix(0.15, 0.45);
    l.trees.push_back(t);
  }
  return l;
}

double layout_intensity(const Layout& l, double u, double v) {
  double value;
  if (v < l.horizon) {
    value = l.sky_top + (l.sky_bottom - l.sky_top) * (v / l.horizon);
  } else {
    value = l.ground;
    const double lane = l.horizon + 0.55 * (1.0 - l.horizon);
    if (std::abs(v - lane) < 0.02) {
      const double t = u / l.dash_period + l.dash_phase;
      if (t - std::floor(t) < 0.5) value = l.dash_intensity;
    }
  }
  for (const auto& t : l.trees) {
    const double du = u - t.cu, dv = v - t.cv;
    if (du * du + dv * dv < t.radius * t.radius) value = t.intensity;
  }
  for (const auto& b : l.buildings) {
    if (u >= b.u0 && u < b.u1 && v >= b.top && v < l.horizon) {
      value = b.intensity;
      const double wu = (u - b.u0) / b.window_du;
      const double wv = (v - b.top) / b.window_dv;
      const double fu = wu - std::floor(wu), fv = wv - std::floor(wv);
      if (fu > 0.3 && fu < 0.7 && fv > 0.3 && fv < 0.75 && v < l.horizon - 0.03) value = b.window_intensity;
    }
  }
  return value;
}

// Horizontal pan (in image widths) induced by the pose's deviation from the
// place's canonical pose.
double pan_of(const SceneSpec& spec) {
  const double lateral = spec.pose.translation.x() - 25.0 * static_cast<double>(spec.place_id);
  const Eigen::Vector3d fwd = spec.pose.rotation * Eigen::Vector3d::UnitZ();
  const double yaw_deg = std::atan2(fwd.x(), fwd.z()) * 180.0 / std::numbers::pi;
  return 0.03 * lateral + 0.008 * yaw_deg;
}

// ---- occluders ---------------------------------------------------------------

struct Vehicle {
  int x0, y0, x1, y1;  // inclusive-exclusive pixel box
  double body, window;
};

std::vector<Vehicle> make_vehicles(const SceneSpec& spec, int64_t size) {
  std::vector<Vehicle> out;
  if (!spec.occluded) return out;
  std::mt19937_64 rng(mix_seed({spec.render_seed, 0x0cc1}));
  const int n = 1 + static_cast<int>(rng() % 3);
  const double target = uniform(rng, 0.14, 0.30);
  const int s = static_cast<int>(size);
  std::vector<int> widths(n), heights(n);
  for (int i = 0; i < n; ++i) {
    heights[i] = std::max(1, static_cast<int>(std::lround(s * uniform(rng, 0.30, 0.45))));
    const int max_w = std::max(1, (s - 2) / n);
    widths[i] = std::clamp(static_cast<int>(std::lround(target * s * s / (n * heights[i]))), 1, max_w);
  }
  int used = 0;
  for (int w : widths) used += w;
  const int free_px = s - used;
  // Gaps follow the pose, so vehicles move with the camera.
  const double phase = std::abs(spec.pose.translation.x()) * 0.37 + pan_of(spec) * 5.0;
  std::vector<double> gap(n + 1);
  double gap_sum = 0.0;
  for (int j = 0; j <= n; ++j) {
    const double t = phase * (j + 1) * 1.6180339887 + uniform(rng, 0.0, 1.0);
    gap[j] = 0.2 + (t - std::floor(t));
    gap_sum += gap[j];
  }
  int x = 0;
  for (int i = 0; i < n; ++i) {
    x += static_cast<int>(std::floor(free_px * gap[i] / gap_sum));
    Vehicle v;
    v.x0 = x;
    v.x1 = x + widths[i];
    v.y1 = s - static_cast<int>(std::lround(s * uniform(rng, 0.0, 0.08)));
    v.y0 = std::max(0, v.y1 - heights[i]);
    v.body = rng() % 2 ? uniform(rng, 0.02, 0.1) : uniform(rng, 0.88, 0.98);
    v.window = uniform(rng, 0.35, 0.6);
    out.push_back(v);
    x = v.x1;
  }
  return out;
}

// ---- appearance --------------------------------------------------------------

struct Appearance {
  double gamma;
  std::array<double, 3> gain, offset;
};

Appearance appearance_of(int64_t domain) {
  switch (domain) {
    case 0: return {1.0, {1.0, 0.97, 0.9}, {0.0, 0.01, 0.03}};
    // washed out: the bright half of the layout clips to white
    case 1: return {0.6, {1.7, 1.65, 1.8}, {0.05, 0.08, 0.12}};
    // dusk: the dark half of the layout clips to black
    case 2: return {2.2, {1.6, 1.1, 0.8}, {-0.3, -0.25, -0.15}};
    default: break;
  }
  std::mt19937_64 rng(mix_seed({0xa99e, static_cast<uint64_t>(domain)}));
  Appearance a;
  a.gamma = uniform(rng, 0.5, 2.0);
  for (int c = 0; c < 3; ++c) {
    a.gain[c] = uniform(rng, 0.5, 1.1);
    a.offset[c] = uniform(rng, 0.0, 0.3);
  }
  return a;
}

}  // namespace

Pose6DoF place_pose(int64_t place_id, double lateral_m, double yaw_deg) {
  Pose6DoF p;
  p.translation = Eigen::Vector3d(25.0 * static_cast<double>(place_id) + lateral_m, 0.0, 0.0);
  p.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(yaw_deg * std::numbers::pi / 180.0, Eigen::Vector3d::UnitY()));
  p.rotation.normalize();
  return p;
}

torch::Tensor occluder_mask(const SceneSpec& spec, int64_t size) {
  auto mask = torch::zeros({size, size}, torch::kBool);
  auto acc = mask.accessor<bool, 2>();
  for (const auto& v : make_vehicles(spec, size)) {
    for (int y = v.y0; y < v.y1; ++y)
      for (int x = v.x0; x < v.x1; ++x) acc[y][x] = true;
  }
  return mask;
}

torch::Tensor render_scene(const SceneSpec& spec, int64_t size) {
  if (size <= 0) throw ValidationError("render_scene: size must be positive");
  const Layout layout = make_layout(spec.place_id);
  const double pan = pan_of(spec);
  const auto vehicles = make_vehicles(spec, size);
  const Appearance app = appearance_of(spec.appearance_domain);

  auto out = torch::empty({3, size, size}, torch::kFloat32);
  auto acc = out.accessor<float, 3>();
  const double inv = 1.0 / static_cast<double>(size);
  for (int64_t y = 0; y < size; ++y) {
    for (int64_t x = 0; x < size; ++x) {
      double lum = 0.0;
      for (int sy = 0; sy < 2; ++sy)
        for (int sx = 0; sx < 2; ++sx)
          lum += layout_intensity(layout, (x + 0.25 + 0.5 * sx) * inv + pan, (y + 0.25 + 0.5 * sy) * inv);
      lum *= 0.25;
      for (const auto& v : vehicles) {
        if (x >= v.x0 && x < v.x1 && y >= v.y0 && y < v.y1) {
          const bool window_band = y < v.y0 + (v.y1 - v.y0) * 0.4 && y >= v.y0 + (v.y1 - v.y0) * 0.1 &&
                                   x >= v.x0 + 1 && x < v.x1 - 1;
          lum = window_band ? v.window : v.body;
        }
      }
      const double shaded = std::pow(std::clamp(lum, 0.0, 1.0), app.gamma);
      for (int c = 0; c < 3; ++c) {
        const double value = std::clamp(app.gain[c] * shaded + app.offset[c], 0.0, 1.0);
        acc[c][y][x] = static_cast<float>(2.0 * value - 1.0);
      }
    }
  }
  return out;
}

// ---- manifests ---------------------------------------------------------------

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

int64_t parse_int_field(const std::string& s, const char* what) {
  std::size_t used = 0;
  int64_t v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw DataError(std::string("malformed ") + what + " '" + s + "'");
  return v;
}

}  // namespace

DatasetManifest DatasetManifest::read(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open manifest " + file.string());
  DatasetManifest m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto f = split_ws(line);
    if (f.empty() || f[0].starts_with('#')) continue;
    ManifestRecord r;
    r.path = f[0];
    try {
      if (f.size() == 11) {
        r.spec.place_id = parse_int_field(f[1], "place_id");
        r.spec.appearance_domain = parse_int_field(f[2], "appearance_domain");
        const auto occ = parse_int_field(f[3], "occluded flag");
        if (occ != 0 && occ != 1) throw DataError("occluded flag must be 0 or 1");
        r.spec.occluded = occ == 1;
        r.spec.pose = parse_pose(f, 4);
      } else if (f.size() == 8) {
        r.spec.place_id = -1;
        r.spec.pose = parse_pose(f, 1);
      } else {
        throw DataError("expected 11 (or 8) fields, got " + std::to_string(f.size()));
      }
    } catch (const DataError& e) {
      throw DataError(file.string() + ":" + std::to_string(lineno) + " (" + r.path + "): " + e.what());
    }
    m.records.push_back(std::move(r));
  }
  return m;
}

void DatasetManifest::write(const fs::path& file) const {
  std::ofstream out(file);
  if (!out) throw DataError("cannot write manifest " + file.string());
  for (const auto& r : records) {
    out << r.path << ' ' << r.spec.place_id << ' ' << r.spec.appearance_domain << ' ' << (r.spec.occluded ? 1 : 0)
        << ' ' << format_pose(r.spec.pose) << '\n';
  }
  if (!out) throw DataError("failed writing manifest " + file.string());
}

std::vector<ManifestRecord> synthetic_records(const SynthOptions& o) {
  if (o.n_places < 2) throw ValidationError("synthetic dataset needs at least 2 places");
  if (o.domain_count < 1 || o.views_per_place < 1 || o.size < 4) {
    throw ValidationError("synthetic dataset: domains, views and size must be positive");
  }
  std::vector<ManifestRecord> records;
  for (int64_t p = 0; p < o.n_places; ++p) {
    for (int64_t a = 0; a < o.domain_count; ++a) {
      for (int occ = 0; occ < 2; ++occ) {
        for (int64_t v = 0; v < o.views_per_place; ++v) {
          const uint64_t key = mix_seed({o.seed, static_cast<uint64_t>(p), static_cast<uint64_t>(a),
                                         static_cast<uint64_t>(occ), static_cast<uint64_t>(v)});
          std::mt19937_64 rng(key);
          ManifestRecord r;
          r.spec.place_id = p;
          r.spec.appearance_domain = a;
          r.spec.occluded = occ == 1;
          const double lateral = uniform(rng, -0.5, 0.5);
          const double yaw = uniform(rng, -2.0, 2.0);
          r.spec.pose = place_pose(p, lateral, yaw);
          r.spec.render_seed = splitmix64(key);
          r.split = (a == o.database_domain && occ == 0) ? Split::kDatabase : Split::kQuery;
          char name[96];
          std::snprintf(name, sizeof(name), "images/p%03lld_a%lld_o%d_v%lld.png", static_cast<long long>(p),
                        static_cast<long long>(a), occ, static_cast<long long>(v));
          r.path = name;
          records.push_back(std::move(r));
        }
      }
    }
  }
  return records;
}

DatasetManifest build_synthetic_dataset(const SynthOptions& options, const fs::path& out_dir) {
  auto records = synthetic_records(options);
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (ec) throw DataError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  DatasetManifest all, database, query;
  std::vector<PoseRecord> poses;
  for (auto& r : records) {
    write_image(out_dir / r.path, render_scene(r.spec, options.size));
    (r.split == Split::kDatabase ? database : query).records.push_back(r);
    poses.push_back({r.path, r.spec.pose});
    all.records.push_back(std::move(r));
  }
  all.write(out_dir / "manifest.txt");
  database.write(out_dir / "database.txt");
  query.write(out_dir / "query.txt");
  write_pose_manifest(out_dir / "poses.txt", poses);
  return all;
}

// ---- image IO ----------------------------------------------------------------

torch::Tensor read_image(const fs::path& file, int64_t size) {
  if (!fs::exists(file)) throw DataError("missing image file " + file.string());
  cv::Mat bgr = cv::imread(file.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw DataError("unreadable image " + file.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  if (rgb.rows != size || rgb.cols != size) {
    const int interp = (rgb.rows > size || rgb.cols > size) ? cv::INTER_AREA : cv::INTER_LINEAR;
    cv::resize(rgb, rgb, cv::Size(static_cast<int>(size), static_cast<int>(size)), 0, 0, interp);
  }
  auto t = torch::from_blob(rgb.data, {size, size, 3}, torch::kUInt8).clone();
  return t.permute({2, 0, 1}).to(torch::kFloat32).div(127.5).sub(1.0).contiguous();
}

void write_image(const fs::path& file, const torch::Tensor& pixels) {
  if (pixels.dim() != 3 || pixels.size(0) != 3) throw ShapeError("write_image: expected 3 x H x W");
  auto u8 = pixels.detach()
                .to(torch::kFloat64)
                .add(1.0)
                .mul(127.5)
                .round()
                .clamp(0, 255)
                .to(torch::kUInt8)
                .permute({1, 2, 0})
                .contiguous();
  cv::Mat rgb(static_cast<int>(u8.size(0)), static_cast<int>(u8.size(1)), CV_8UC3, u8.data_ptr());
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(file.string(), bgr)) throw DataError("cannot write image " + file.string());
}

ImageDataset ImageDataset::open(const fs::path& manifest, int64_t size) {
  ImageDataset d;
  d.root_ = manifest.parent_path();
  d.records_ = DatasetManifest::read(manifest).records;
  d.image_size_ = size;
  return d;
}

fs::path ImageDataset::image_path(std::size_t i) const {
  const fs::path p = records_.at(i).path;
  return p.is_absolute() ? p : root_ / p;
}

torch::Tensor ImageDataset::load(std::size_t i) const {
  try {
    return read_image(image_path(i), image_size_);
  } catch (const DataError& e) {
    throw DataError("record " + std::to_string(i) + " (" + records_.at(i).path + "): " + e.what());
  }
}

ImageBatch ImageDataset::load_batch(const std::vector<std::size_t>& indices) const {
  std::vector<torch::Tensor> px;
  std::vector<int64_t> dom;
  std::vector<uint8_t> occ;
  for (auto i : indices) {
    px.push_back(load(i));
    dom.push_back(records_.at(i).spec.appearance_domain);
    occ.push_back(records_.at(i).spec.occluded ? 1 : 0);
  }
  ImageBatch b;
  b.pixels = px.empty() ? torch::empty({0, 3, image_size_, image_size_}) : torch::stack(px);
  b.appearance_domain = torch::tensor(dom, torch::kLong);
  b.occlusion_flag = torch::tensor(std::vector<int64_t>(occ.begin(), occ.end()), torch::kLong).to(torch::kBool);
  return b;
}

ImageBatch ImageDataset::load_all() const {
  std::vector<std::size_t> idx(records_.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return load_batch(idx);
}

}  // namespace proca
