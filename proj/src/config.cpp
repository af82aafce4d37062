#include "proca/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <vector>

#include "proca/errors.hpp"

namespace proca {

namespace {

struct Field {
  std::string key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

int64_t parse_int(const std::string& key, const std::string& s) {
  std::size_t used = 0;
  int64_t v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw ValidationError("config: '" + key + "' expects an integer, got '" + s + "'");
  return v;
}

double parse_double(const std::string& key, const std::string& s) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw ValidationError("config: '" + key + "' expects a number, got '" + s + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ValidationError("config: '" + key + "' expects true/false, got '" + s + "'");
}

template <class M>
Field int_field(std::string key, M member) {
  return {key, [member](const TrainConfig& c) { return std::to_string(std::invoke(member, c)); },
          [member, key](TrainConfig& c, const std::string& s) {
            std::invoke(member, c) = static_cast<std::remove_reference_t<decltype(std::invoke(member, c))>>(
                parse_int(key, s));
          }};
}

template <class M>
Field double_field(std::string key, M member) {
  return {key, [member](const TrainConfig& c) { return fmt_double(std::invoke(member, c)); },
          [member, key](TrainConfig& c, const std::string& s) { std::invoke(member, c) = parse_double(key, s); }};
}

template <class M>
Field bool_field(std::string key, M member) {
  return {key, [member](const TrainConfig& c) { return std::string(std::invoke(member, c) ? "true" : "false"); },
          [member, key](TrainConfig& c, const std::string& s) { std::invoke(member, c) = parse_bool(key, s); }};
}

#define NET(name) [](auto& c) -> auto& { return c.net.name; }
#define W(name) [](auto& c) -> auto& { return c.weights.name; }
#define TOP(name) [](auto& c) -> auto& { return c.name; }

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      int_field("image_size", TOP(image_size)),
      int_field("crop_size", NET(crop_size)),
      int_field("base_width", NET(base_width)),
      int_field("place_channels", NET(place_channels)),
      int_field("occlusion_channels", NET(occlusion_channels)),
      int_field("appearance_dim", NET(appearance_dim)),
      int_field("domain_count", NET(domain_count)),
      int_field("encoder_res_blocks", NET(encoder_res_blocks)),
      int_field("generator_res_blocks", NET(generator_res_blocks)),
      int_field("appearance_width", NET(appearance_width)),
      int_field("critic_width", NET(critic_width)),
      int_field("place_critic_width", NET(place_critic_width)),
      int_field("mlp_width", NET(mlp_width)),
      double_field("weight_cc", W(cc)),
      double_field("weight_gc", W(gc)),
      double_field("weight_cgc", W(cgc)),
      double_field("weight_recon", W(recon)),
      double_field("weight_adv_app", W(adv_app)),
      double_field("weight_adv_occ", W(adv_occ)),
      double_field("weight_adv_place", W(adv_place)),
      double_field("weight_lat_app", W(lat_app)),
      double_field("weight_lat_place", W(lat_place)),
      double_field("weight_kl", W(kl)),
      double_field("weight_cls", W(cls)),
      double_field("lr_generator", TOP(lr_generator)),
      double_field("lr_discriminator", TOP(lr_discriminator)),
      double_field("beta1", TOP(beta1)),
      double_field("beta2", TOP(beta2)),
      int_field("total_steps", TOP(total_steps)),
      int_field("batch_size", TOP(batch_size)),
      int_field("seed", TOP(seed)),
      int_field("checkpoint_every", TOP(checkpoint_every)),
      int_field("quarter_turns", TOP(quarter_turns)),
      bool_field("resample_transform", TOP(resample_transform)),
      bool_field("deterministic_appearance", TOP(deterministic_appearance)),
      bool_field("anti_occlusion_enabled", TOP(anti_occlusion_enabled)),
      bool_field("appearance_enabled", TOP(appearance_enabled)),
      bool_field("multidomain", TOP(multidomain)),
  };
  return all;
}

#undef NET
#undef W
#undef TOP

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void TrainConfig::validate() const {
  if (net.crop_size <= 0 || net.crop_size % 4 != 0) {
    throw ValidationError("config: crop_size must be a positive multiple of 4");
  }
  if (net.crop_size > image_size) throw ValidationError("config: crop_size must not exceed image_size");
  if (net.domain_count < 2) throw ValidationError("config: domain_count must be >= 2");
  for (auto v : {net.base_width, net.place_channels, net.occlusion_channels, net.appearance_dim,
                 net.appearance_width, net.critic_width, net.place_critic_width, net.mlp_width}) {
    if (v <= 0) throw ValidationError("config: channel widths must be positive");
  }
  if (net.encoder_res_blocks < 0 || net.generator_res_blocks < 0) {
    throw ValidationError("config: residual block counts must be >= 0");
  }
  if (batch_size <= 0) throw ValidationError("config: batch_size must be positive");
  if (total_steps < 0) throw ValidationError("config: total_steps must be >= 0");
  if (lr_generator < 0 || lr_discriminator < 0) throw ValidationError("config: learning rates must be >= 0");
  if (quarter_turns < 0 || quarter_turns > 3) throw ValidationError("config: quarter_turns must be in 0..3");
  weights.validate();
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  std::map<std::string, std::string> m;
  for (const auto& f : fields()) m[f.key] = f.get(*this);
  return m;
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  for (const auto& f : fields()) os << f.key << " = " << f.get(*this) << '\n';
  return os.str();
}

TrainConfig TrainConfig::from_map(const std::map<std::string, std::string>& kv, TrainConfig base) {
  const auto& fs = fields();
  for (const auto& [key, value] : kv) {
    auto it = std::find_if(fs.begin(), fs.end(), [&](const Field& f) { return f.key == key; });
    if (it == fs.end()) throw ValidationError("config: unknown key '" + key + "'");
    it->set(base, value);
  }
  return base;
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

TrainConfig TrainConfig::from_text(const std::string& text, TrainConfig base) {
  return from_map(parse_key_values(text), std::move(base));
}

TrainConfig TrainConfig::from_file(const std::filesystem::path& file, TrainConfig base) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open config file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str(), std::move(base));
}

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

TrainConfig TrainConfig::paper() {
  TrainConfig c;
  c.image_size = 256;
  c.net.crop_size = 216;
  c.net.base_width = 64;
  c.net.place_channels = 256;
  c.net.occlusion_channels = 64;
  c.net.appearance_dim = 8;
  c.net.encoder_res_blocks = 3;
  c.net.generator_res_blocks = 3;
  c.net.appearance_width = 64;
  c.net.critic_width = 64;
  c.net.place_critic_width = 256;
  c.net.mlp_width = 256;
  c.batch_size = 1;
  return c;
}

}  // namespace proca
