#include "flowsync/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "flowsync/error.hpp"
#include "flowsync/io.hpp"

namespace flowsync::cli {
namespace {

enum class Kind { kReal, kInt, kCount, kU64, kBool, kText, kList };

struct KeySpec {
  const char* key;
  Kind kind;
  const char* fallback;
  std::vector<std::string> choices = {};
};

const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> s = {
      {"data.frame_h", Kind::kCount, "32"},
      {"data.frame_w", Kind::kCount, "32"},
      {"data.clip_len", Kind::kCount, "8"},
      {"data.pose_max", Kind::kCount, "4"},
      {"data.mouth_x", Kind::kReal, "16"},
      {"data.mouth_y", Kind::kReal, "22"},
      {"data.mouth_rx", Kind::kReal, "6"},
      {"data.mouth_ry", Kind::kReal, "4"},
      {"data.audio_noise", Kind::kReal, "0.02"},
      {"data.n_pseudo", Kind::kCount, "8"},
      {"data.n_arbitrary", Kind::kCount, "8"},
      {"data.seed", Kind::kU64, "0"},
      {"model.hidden", Kind::kList, "1024"},
      {"train.threshold", Kind::kReal, "0.85"},
      {"train.lr", Kind::kReal, "0.001"},
      {"train.batch", Kind::kCount, "64"},
      {"train.steps", Kind::kCount, "2000"},
      {"train.dropout", Kind::kReal, "0.1"},
      {"train.seed", Kind::kU64, "0"},
      {"train.ckpt_every", Kind::kCount, "500"},
      {"train.pool_mode", Kind::kText, "timestep", {"timestep", "single"}},
      {"train.data", Kind::kText, ""},
      {"sample.tau_start", Kind::kReal, "0.92"},
      {"sample.steps", Kind::kCount, "50"},
      {"sample.seed", Kind::kU64, "0"},
      {"sample.trace", Kind::kBool, "true"},
      {"guidance.mode", Kind::kText, "dscfg", {"dscfg", "static", "off"}},
      {"guidance.omega_peak", Kind::kReal, "3"},
      {"guidance.gamma", Kind::kReal, "1.5"},
      {"guidance.sigma", Kind::kReal, "0"},
      {"guidance.s_base", Kind::kReal, "0.1"},
      {"guidance.static_scale", Kind::kReal, "1"},
      {"ablate.n_clips", Kind::kCount, "24"},
      {"ablate.clip_len", Kind::kCount, "16"},
      {"ablate.seed", Kind::kU64, "1000"},
      {"ablate.low_scale", Kind::kReal, "1"},
      {"ablate.high_scale", Kind::kReal, "6"},
      {"ablate.bootstrap", Kind::kCount, "2000"},
  };
  return s;
}

const KeySpec& spec_for(const std::string& key) {
  for (const auto& k : schema()) {
    if (key == k.key) return k;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
bool parse_int(const std::string& s, T& out) {
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

bool parse_real(const std::string& s, double& out) {
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size() && std::isfinite(out);
}

// Canonical text for a value so that parse -> serialize -> parse is a fixed point.
std::string canonical(const KeySpec& k, const std::string& value) {
  const std::string v = trim(value);
  auto bad = [&](const char* what) {
    return ConfigError("config key '" + std::string(k.key) + "': expected " + what + ", got '" + v + "'");
  };
  switch (k.kind) {
    case Kind::kReal: {
      double d = 0.0;
      if (!parse_real(v, d)) throw bad("a finite number");
      return format_double(d);
    }
    case Kind::kInt: {
      std::int64_t i = 0;
      if (!parse_int(v, i)) throw bad("an integer");
      return std::to_string(i);
    }
    case Kind::kCount: {
      std::int64_t i = 0;
      if (!parse_int(v, i) || i < 0) throw bad("a non-negative integer");
      return std::to_string(i);
    }
    case Kind::kU64: {
      std::uint64_t u = 0;
      if (!parse_int(v, u)) throw bad("an unsigned 64-bit integer");
      return std::to_string(u);
    }
    case Kind::kBool:
      if (v == "true" || v == "1" || v == "yes" || v == "on") return "true";
      if (v == "false" || v == "0" || v == "no" || v == "off") return "false";
      throw bad("true or false");
    case Kind::kText:
      if (!k.choices.empty() && std::find(k.choices.begin(), k.choices.end(), v) == k.choices.end()) {
        std::string list;
        for (const auto& c : k.choices) list += (list.empty() ? "" : "|") + c;
        throw bad(list.c_str());
      }
      return v;
    case Kind::kList: {
      std::string out;
      std::stringstream ss(v);
      for (std::string tok; std::getline(ss, tok, ',');) {
        std::uint64_t u = 0;
        if (!parse_int(trim(tok), u) || u == 0) throw bad("a comma list of positive integers");
        out += (out.empty() ? "" : ",") + std::to_string(u);
      }
      if (out.empty()) throw bad("a comma list of positive integers");
      return out;
    }
  }
  return v;
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& k : schema()) values_[k.key] = canonical(k, k.fallback);
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& s : schema()) out.emplace_back(s.key);
    return out;
  }();
  return k;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const KeySpec& k = spec_for(trim(key));
  values_[k.key] = canonical(k, value);
}

void RunConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(n) + ": expected 'section.key = value'");
    }
    c.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) { return parse(read_text_file(path)); }

const std::string& RunConfig::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::number(const std::string& key) const {
  double d = 0.0;
  parse_real(raw(key), d);
  return d;
}

std::int64_t RunConfig::integer(const std::string& key) const {
  std::int64_t i = 0;
  parse_int(raw(key), i);
  return i;
}

std::uint64_t RunConfig::u64(const std::string& key) const {
  std::uint64_t u = 0;
  parse_int(raw(key), u);
  return u;
}

std::size_t RunConfig::count(const std::string& key) const {
  return static_cast<std::size_t>(integer(key));
}

bool RunConfig::flag(const std::string& key) const { return raw(key) == "true"; }

std::string RunConfig::serialize() const {
  std::string out;
  for (const auto& k : schema()) out += std::string(k.key) + " = " + values_.at(k.key) + "\n";
  return out;
}

FacegenConfig facegen_config(const RunConfig& c) {
  FacegenConfig f;
  f.frame = {c.count("data.frame_h"), c.count("data.frame_w")};
  f.pose_max = static_cast<int>(c.count("data.pose_max"));
  f.mouth_center = {c.number("data.mouth_x"), c.number("data.mouth_y")};
  f.mouth_radii = {c.number("data.mouth_rx"), c.number("data.mouth_ry")};
  f.audio_noise_std = c.number("data.audio_noise");
  if (f.audio_noise_std < 0.0) throw ConfigError("data.audio_noise must be >= 0");
  // Geometry check against the extreme poses.
  FaceSpec probe;
  probe.mouth_center = f.mouth_center;
  probe.mouth_radii = f.mouth_radii;
  probe.frame = f.frame;
  probe.pose_max = f.pose_max;
  for (int dx : {-f.pose_max, f.pose_max}) {
    for (int dy : {-f.pose_max, f.pose_max}) {
      probe.pose = {dx, dy};
      probe.validate();
    }
  }
  return f;
}

TrainConfig train_config(const RunConfig& c) {
  TrainConfig t;
  t.tau_threshold = c.number("train.threshold");
  t.learning_rate = c.number("train.lr");
  t.batch_size = c.count("train.batch");
  t.n_steps = c.count("train.steps");
  t.audio_dropout_p = c.number("train.dropout");
  t.seed = c.u64("train.seed");
  t.ckpt_every = c.count("train.ckpt_every");
  t.pool_mode = parse_pool_mode(c.raw("train.pool_mode"));
  t.hidden.clear();
  std::stringstream ss(c.raw("model.hidden"));
  for (std::string tok; std::getline(ss, tok, ',');) t.hidden.push_back(std::stoul(tok));
  t.validate();
  return t;
}

SamplerConfig sampler_config(const RunConfig& c, const FaceSpec& spec) {
  SamplerConfig s;
  s.tau_start = c.number("sample.tau_start");
  s.n_steps = c.count("sample.steps");
  s.seed = c.u64("sample.seed");
  s.keep_trace = c.flag("sample.trace");
  const double sigma_cfg = c.number("guidance.sigma");
  const double sigma =
      sigma_cfg > 0.0 ? sigma_cfg : 1.5 * std::max(spec.mouth_radii.rx, spec.mouth_radii.ry);
  if (sigma_cfg < 0.0) throw ConfigError("guidance.sigma must be positive (0 selects the default)");
  s.guidance.mode = parse_guidance_mode(c.raw("guidance.mode"));
  s.guidance.omega_peak = c.number("guidance.omega_peak");
  s.guidance.gamma = c.number("guidance.gamma");
  s.guidance.static_scale = c.number("guidance.static_scale");
  s.guidance.spatial =
      spatial_profile(spec.mouth_center_in_frame(), sigma, c.number("guidance.s_base"), spec.frame);
  s.validate();
  return s;
}

}  // namespace flowsync::cli
