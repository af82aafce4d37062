#include <torch/script.h>
#include <torch/torch.h>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include "proca/errors.hpp"
#include "proca/hash.hpp"
#include "proca/training.hpp"

namespace proca {

namespace {

constexpr const char* kFormat = "proca-checkpoint-1";

using Dict = c10::impl::GenericDict;

Dict make_dict() { return Dict(c10::StringType::get(), c10::AnyType::get()); }

torch::Tensor bytes_tensor(const std::string& bytes) {
  auto t = torch::empty({static_cast<int64_t>(bytes.size())}, torch::kUInt8);
  if (!bytes.empty()) std::memcpy(t.data_ptr(), bytes.data(), bytes.size());
  return t;
}

std::string tensor_bytes(const torch::Tensor& t) {
  auto c = t.contiguous();
  return std::string(static_cast<const char*>(c.data_ptr()), static_cast<std::size_t>(c.numel()));
}

std::string optimizer_bytes(const torch::optim::Adam* opt) {
  if (!opt) return {};
  torch::serialize::OutputArchive archive;
  opt->save(archive);
  std::ostringstream out;
  archive.save_to(out);
  return out.str();
}

std::vector<std::pair<std::string, torch::Tensor>> state_of(const ModelParams& params) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& p : params->named_parameters(true)) out.emplace_back(p.key(), p.value());
  for (const auto& b : params->named_buffers(true)) out.emplace_back("buffer:" + b.key(), b.value());
  return out;
}

c10::IValue lookup(const Dict& d, const std::string& key, const std::string& where) {
  auto it = d.find(key);
  if (it == d.end()) throw DataError(where + ": missing field '" + key + "'");
  return it->value();
}

}  // namespace

void save_checkpoint(const ModelParams& params, const TrainConfig& cfg, int64_t step,
                     const std::filesystem::path& path, const torch::optim::Adam* gen_opt,
                     const torch::optim::Adam* disc_opt) {
  Dict tensors = make_dict();
  for (const auto& [name, t] : state_of(params)) tensors.insert(name, t.detach().contiguous());

  Dict root = make_dict();
  root.insert("format", std::string(kFormat));
  root.insert("config", cfg.to_text());
  root.insert("step", step);
  root.insert("params", tensors);
  root.insert("generator_optimizer", bytes_tensor(optimizer_bytes(gen_opt)));
  root.insert("discriminator_optimizer", bytes_tensor(optimizer_bytes(disc_opt)));

  const auto data = torch::pickle_save(root);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw DataError("cannot write checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const TrainConfig* expected) {
  const std::string where = "checkpoint " + path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(where + ": cannot open");
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  c10::IValue root_value;
  try {
    root_value = torch::pickle_load(data);
  } catch (const c10::Error&) {
    throw DataError(where + ": corrupt or truncated");
  }
  if (!root_value.isGenericDict()) throw DataError(where + ": not a checkpoint");
  const auto root = root_value.toGenericDict();

  Checkpoint ck;
  try {
    if (lookup(root, "format", where).toStringRef() != kFormat) throw DataError(where + ": unknown format");
    ck.config = TrainConfig::from_text(lookup(root, "config", where).toStringRef());
    ck.step = lookup(root, "step", where).toInt();
    ck.generator_optimizer = tensor_bytes(lookup(root, "generator_optimizer", where).toTensor());
    ck.discriminator_optimizer = tensor_bytes(lookup(root, "discriminator_optimizer", where).toTensor());
  } catch (const c10::Error&) {
    throw DataError(where + ": malformed header");
  } catch (const ValidationError& e) {
    throw DataError(where + ": stored config is invalid: " + e.what());
  }
  if (expected && !(expected->net == ck.config.net)) {
    throw ValidationError(where + ": network config differs from the expected one");
  }

  const auto stored = lookup(root, "params", where).toGenericDict();
  auto params = make_model(ck.config.net, 0);
  const auto slots = state_of(params);
  if (static_cast<std::size_t>(stored.size()) != slots.size()) {
    throw DataError(where + ": holds " + std::to_string(stored.size()) + " arrays, model has " +
                    std::to_string(slots.size()));
  }
  torch::NoGradGuard no_grad;
  for (const auto& [name, slot] : slots) {
    auto it = stored.find(name);
    if (it == stored.end() || !it->value().isTensor()) throw DataError(where + ": missing array " + name);
    const auto t = it->value().toTensor();
    if (t.sizes() != slot.sizes() || t.scalar_type() != slot.scalar_type()) {
      throw DataError(where + ": array " + name + " has the wrong shape or dtype");
    }
    slot.copy_(t);
  }
  ck.params = params;
  return ck;
}

std::string parameter_fingerprint(const ModelParams& params) {
  Fnv1a h;
  for (const auto& [name, t] : state_of(params)) {
    h.update(name);
    for (auto s : t.sizes()) h.update(&s, sizeof(s));
    const auto c = t.detach().contiguous();
    h.update(c.data_ptr(), static_cast<std::size_t>(c.nbytes()));
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h.digest();
  return out.str();
}

}  // namespace proca
