#include "proca/retrieval.hpp"

#include <torch/script.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include "proca/errors.hpp"
#include "proca/training.hpp"

namespace proca {

namespace {

constexpr const char* kIndexFormat = "proca-index-1";

using Dict = c10::impl::GenericDict;

torch::Tensor pose_table(const std::vector<Pose6DoF>& poses) {
  auto t = torch::empty({static_cast<int64_t>(poses.size()), 7}, torch::kFloat64);
  auto a = t.accessor<double, 2>();
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const auto& p = poses[i];
    const double v[7] = {p.translation.x(), p.translation.y(), p.translation.z(), p.rotation.w(),
                         p.rotation.x(),     p.rotation.y(),     p.rotation.z()};
    for (int j = 0; j < 7; ++j) a[i][j] = v[j];
  }
  return t;
}

std::vector<Pose6DoF> poses_from(const torch::Tensor& t) {
  auto c = t.to(torch::kFloat64).contiguous();
  auto a = c.accessor<double, 2>();
  std::vector<Pose6DoF> out(c.size(0));
  for (int64_t i = 0; i < c.size(0); ++i) {
    out[i].translation = Eigen::Vector3d(a[i][0], a[i][1], a[i][2]);
    out[i].rotation = Eigen::Quaterniond(a[i][3], a[i][4], a[i][5], a[i][6]);
  }
  return out;
}

torch::Tensor unit_rows(const torch::Tensor& d) {
  return d.dim() == 1 ? d.unsqueeze(0) : d;
}

}  // namespace

void DescriptorIndex::validate() const {
  if (!descriptors.defined() || descriptors.dim() != 2) throw ValidationError("index descriptors must be N x L");
  const auto n = static_cast<std::size_t>(descriptors.size(0));
  if (poses.size() != n || ids.size() != n || place_ids.size() != n) {
    throw ValidationError("index has " + std::to_string(n) + " descriptors but " + std::to_string(poses.size()) +
                          " poses, " + std::to_string(ids.size()) + " ids and " +
                          std::to_string(place_ids.size()) + " place ids");
  }
  if (n == 0) return;
  const auto norms = descriptors.to(torch::kFloat64).norm(2, 1);
  if (!torch::allclose(norms, torch::ones_like(norms), 0.0, 1e-5)) {
    throw ValidationError("index descriptors are not unit-norm");
  }
}

void DescriptorIndex::save(const std::filesystem::path& path) const {
  validate();
  Dict d(c10::StringType::get(), c10::AnyType::get());
  c10::List<std::string> id_list;
  for (const auto& id : ids) id_list.push_back(id);
  d.insert("format", std::string(kIndexFormat));
  d.insert("descriptors", descriptors.contiguous());
  d.insert("poses", pose_table(poses));
  d.insert("ids", id_list);
  d.insert("place_ids", torch::tensor(place_ids, torch::kLong));
  d.insert("fingerprint", fingerprint);
  const auto data = torch::pickle_save(d);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw DataError("cannot write index " + path.string());
}

DescriptorIndex DescriptorIndex::load(const std::filesystem::path& path) {
  const std::string where = "index " + path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(where + ": cannot open");
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  DescriptorIndex idx;
  try {
    const auto d = torch::pickle_load(data).toGenericDict();
    if (d.at("format").toStringRef() != kIndexFormat) throw DataError(where + ": unknown format");
    idx.descriptors = d.at("descriptors").toTensor();
    idx.poses = poses_from(d.at("poses").toTensor());
    for (const auto& v : d.at("ids").toList()) idx.ids.push_back(v.get().toStringRef());
    auto places = d.at("place_ids").toTensor().contiguous();
    idx.place_ids.assign(places.data_ptr<int64_t>(), places.data_ptr<int64_t>() + places.numel());
    idx.fingerprint = d.at("fingerprint").toStringRef();
  } catch (const c10::Error&) {
    throw DataError(where + ": corrupt or truncated");
  } catch (const std::out_of_range&) {
    throw DataError(where + ": missing fields");
  }
  try {
    idx.validate();
  } catch (const ValidationError& e) {
    throw DataError(where + ": " + e.what());
  }
  return idx;
}

torch::Tensor encode_descriptors(const ModelParams& params, const torch::Tensor& pixels, int64_t chunk) {
  torch::NoGradGuard no_grad;
  const int64_t crop = params->config.crop_size;
  std::vector<torch::Tensor> parts;
  for (int64_t i = 0; i < pixels.size(0); i += chunk) {
    const auto n = std::min(chunk, pixels.size(0) - i);
    auto batch = prepare_for_test(pixels.narrow(0, i, n), crop);
    parts.push_back(flatten_place_descriptor(encode_place(params, batch)));
  }
  if (parts.empty()) return torch::empty({0, 0});
  return torch::cat(parts).contiguous();
}

DescriptorIndex build_index(const ModelParams& params, const ImageDataset& database) {
  if (database.size() == 0) throw DataError("database manifest is empty");
  DescriptorIndex idx;
  for (const auto& r : database.records()) {
    try {
      r.spec.pose.validate();
    } catch (const ValidationError& e) {
      throw DataError("database record " + r.path + ": invalid pose: " + e.what());
    }
    idx.poses.push_back(r.spec.pose);
    idx.ids.push_back(r.path);
    idx.place_ids.push_back(r.spec.place_id);
  }
  idx.descriptors = encode_descriptors(params, database.load_all().pixels);
  idx.fingerprint = parameter_fingerprint(params);
  idx.validate();
  return idx;
}

std::vector<Match> query(const DescriptorIndex& index, const torch::Tensor& descriptor, int64_t top_k) {
  if (index.size() == 0) throw ValidationError("query against an empty index");
  if (top_k <= 0) throw ValidationError("top_k must be positive");
  const auto q = descriptor.reshape({-1}).to(torch::kFloat64);
  if (q.size(0) != index.length()) {
    throw ShapeError("query descriptor has length " + std::to_string(q.size(0)) + ", index expects " +
                     std::to_string(index.length()));
  }
  const auto sims = index.descriptors.to(torch::kFloat64).matmul(q).contiguous();
  const auto* s = sims.data_ptr<double>();
  std::vector<Match> all(index.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = {i, index.ids[i], s[i]};
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(top_k), all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                    [](const Match& a, const Match& b) {
                      if (a.similarity != b.similarity) return a.similarity > b.similarity;
                      return a.id < b.id;
                    });
  all.resize(k);
  return all;
}

std::vector<Match> query(const DescriptorIndex& index, const ModelParams& params, const torch::Tensor& image,
                         int64_t top_k) {
  if (parameter_fingerprint(params) != index.fingerprint) {
    throw ValidationError("encoder fingerprint does not match the index");
  }
  return query(index, encode_descriptors(params, image.unsqueeze(0))[0], top_k);
}

torch::Tensor similarity_matrix(const torch::Tensor& descriptors) {
  const auto d = unit_rows(descriptors).to(torch::kFloat64);
  return d.matmul(d.t()).clamp(-1.0, 1.0);
}

torch::Tensor cross_similarity(const torch::Tensor& a, const torch::Tensor& b) {
  const auto da = unit_rows(a).to(torch::kFloat64);
  const auto db = unit_rows(b).to(torch::kFloat64);
  if (da.size(1) != db.size(1)) throw ShapeError("cross_similarity: descriptor lengths differ");
  return da.matmul(db.t()).clamp(-1.0, 1.0);
}

std::string code_type_name(CodeType t) {
  switch (t) {
    case CodeType::kAll: return "all";
    case CodeType::kAppearance: return "appearance";
    case CodeType::kOcclusion: return "occlusion";
    case CodeType::kPlace: return "place";
  }
  return "?";
}

torch::Tensor encode_code_descriptors(const ModelParams& params, const ImageBatch& images, CodeType type,
                                      int64_t chunk) {
  torch::NoGradGuard no_grad;
  const int64_t crop = params->config.crop_size;
  const int64_t k = params->config.domain_count;
  auto unit = [](const torch::Tensor& t) {
    auto flat = t.flatten(1);
    return flat / flat.norm(2, 1, true).clamp_min(1e-12);
  };
  std::vector<torch::Tensor> parts;
  for (int64_t i = 0; i < images.size(); i += chunk) {
    const auto n = std::min(chunk, images.size() - i);
    const auto px = prepare_for_test(images.pixels.narrow(0, i, n), crop);
    const DomainLabel d(images.appearance_domain.narrow(0, i, n), k);
    torch::Tensor out;
    switch (type) {
      case CodeType::kPlace:
        out = flatten_place_descriptor(encode_place(params, px));
        break;
      case CodeType::kOcclusion:
        out = unit(encode_occlusion(params, px));
        break;
      case CodeType::kAppearance:
        out = unit(encode_appearance(params, px, d).mean);
        break;
      case CodeType::kAll:
        out = unit(torch::cat({unit(encode_place(params, px)), unit(encode_occlusion(params, px)),
                               unit(encode_appearance(params, px, d).mean)},
                              1));
        break;
    }
    parts.push_back(out);
  }
  if (parts.empty()) throw ValidationError("no images to encode");
  return torch::cat(parts).contiguous();
}

double diagonal_dominance(const torch::Tensor& similarity) {
  if (similarity.dim() != 2 || similarity.size(0) != similarity.size(1) || similarity.size(0) < 2) {
    throw ShapeError("diagonal_dominance needs a square matrix of size >= 2");
  }
  const auto n = similarity.size(0);
  const auto s = similarity.to(torch::kFloat64);
  const double diag = s.diagonal().sum().item<double>();
  const double total = s.sum().item<double>();
  return diag / n - (total - diag) / static_cast<double>(n * (n - 1));
}

void write_matrix_text(const std::filesystem::path& file, const torch::Tensor& matrix) {
  const auto m = matrix.to(torch::kFloat64).contiguous();
  auto a = m.accessor<double, 2>();
  std::ofstream out(file);
  if (!out) throw DataError("cannot write " + file.string());
  out << std::setprecision(9);
  for (int64_t i = 0; i < m.size(0); ++i) {
    for (int64_t j = 0; j < m.size(1); ++j) out << (j ? " " : "") << a[i][j];
    out << '\n';
  }
}

std::vector<PoseThreshold> default_thresholds() { return {{0.25, 2.0}, {0.5, 5.0}, {5.0, 10.0}}; }

std::string LocalizationResult::format() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(1);
  for (std::size_t i = 0; i < accuracy.size(); ++i) out << (i ? " / " : "") << 100.0 * accuracy[i];
  return out.str();
}

LocalizationResult score_localization(const std::vector<Pose6DoF>& estimated, const std::vector<Pose6DoF>& truth,
                                      const std::vector<PoseThreshold>& thresholds) {
  if (truth.empty()) throw ValidationError("no queries to score");
  if (estimated.size() != truth.size()) throw ValidationError("estimated and true pose counts differ");
  LocalizationResult r;
  r.thresholds = thresholds;
  std::vector<std::size_t> hits(thresholds.size(), 0);
  for (std::size_t q = 0; q < truth.size(); ++q) {
    const auto e = pose_error(estimated[q], truth[q]);
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      if (e.meters <= thresholds[t].meters && e.degrees <= thresholds[t].degrees) ++hits[t];
    }
  }
  for (auto h : hits) r.accuracy.push_back(static_cast<double>(h) / static_cast<double>(truth.size()));
  return r;
}

LocalizationResult evaluate_localization(const DescriptorIndex& index, const torch::Tensor& query_descriptors,
                                         const std::vector<Pose6DoF>& query_poses,
                                         const std::vector<PoseThreshold>& thresholds) {
  const auto q = unit_rows(query_descriptors);
  if (q.size(0) == 0 || query_poses.empty()) throw ValidationError("empty query set");
  if (static_cast<std::size_t>(q.size(0)) != query_poses.size()) {
    throw ValidationError("query descriptor and pose counts differ");
  }
  std::vector<Pose6DoF> estimated;
  for (int64_t i = 0; i < q.size(0); ++i) estimated.push_back(index.poses[query(index, q[i], 1).front().row]);
  return score_localization(estimated, query_poses, thresholds);
}

LocalizationResult evaluate_localization(const DescriptorIndex& index, const ImageDataset& queries,
                                         const ModelParams& params, const std::vector<PoseThreshold>& thresholds) {
  if (queries.size() == 0) throw ValidationError("empty query set");
  if (parameter_fingerprint(params) != index.fingerprint) {
    throw ValidationError("encoder fingerprint does not match the index");
  }
  std::vector<Pose6DoF> truth;
  for (const auto& r : queries.records()) truth.push_back(r.spec.pose);
  return evaluate_localization(index, encode_descriptors(params, queries.load_all().pixels), truth, thresholds);
}

double place_recognition_accuracy(const DescriptorIndex& index, const torch::Tensor& query_descriptors,
                                  const std::vector<int64_t>& query_place_ids) {
  const auto q = unit_rows(query_descriptors);
  if (q.size(0) == 0) throw ValidationError("empty query set");
  if (static_cast<std::size_t>(q.size(0)) != query_place_ids.size()) {
    throw ValidationError("query descriptor and place id counts differ");
  }
  std::size_t hits = 0;
  for (int64_t i = 0; i < q.size(0); ++i) {
    if (index.place_ids[query(index, q[i], 1).front().row] == query_place_ids[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(q.size(0));
}

}  // namespace proca
