#include "moemo/config.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "moemo/errors.hpp"
#include "moemo/formats.hpp"

namespace moemo {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string bad_value(std::string_view key, std::string_view value) {
  return "invalid value '" + std::string(value) + "' for key '" + std::string(key) + "'";
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(bad_value(key, v));
  return out;
}

std::size_t to_size(std::string_view key, std::string_view v) { return static_cast<std::size_t>(to_u64(key, v)); }

double to_double(std::string_view key, std::string_view v) {
  std::string s(v);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError(bad_value(key, v));
  }
  if (used != s.size()) throw ConfigError(bad_value(key, v));
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(bad_value(key, v));
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void apply_model(ModelConfig& m, std::string_view key, std::string_view v) {
  if (key == "d_model") m.d_model = to_size(key, v);
  else if (key == "n_blocks") m.n_blocks = to_size(key, v);
  else if (key == "n_heads") m.n_heads = to_size(key, v);
  else if (key == "mlp_ratio") m.mlp_ratio = to_double(key, v);
  else if (key == "n_classes") m.n_classes = static_cast<int>(to_size(key, v));
  else if (key == "variant") m.variant = parse_variant(v);
  else if (key == "max_positions") m.max_positions = to_size(key, v);
  else if (key == "context_rows") m.context_rows = to_size(key, v);
  else if (key == "context_cols") m.context_cols = to_size(key, v);
  else if (key == "context_hidden") m.context_hidden = to_size(key, v);
  else if (key == "aggregation") m.aggregation = parse_aggregation(v);
  else if (key == "norm_eps") m.norm_eps = to_double(key, v);
  else throw ConfigError("unknown key 'model." + std::string(key) + "'");
}

void model_lines(std::ostringstream& os, const ModelConfig& m) {
  os << "model.d_model = " << m.d_model << '\n'
     << "model.n_blocks = " << m.n_blocks << '\n'
     << "model.n_heads = " << m.n_heads << '\n'
     << "model.mlp_ratio = " << num(m.mlp_ratio) << '\n'
     << "model.n_classes = " << m.n_classes << '\n'
     << "model.variant = " << variant_name(m.variant) << '\n'
     << "model.max_positions = " << m.max_positions << '\n'
     << "model.context_rows = " << m.context_rows << '\n'
     << "model.context_cols = " << m.context_cols << '\n'
     << "model.context_hidden = " << m.context_hidden << '\n'
     << "model.aggregation = " << aggregation_name(m.aggregation) << '\n'
     << "model.norm_eps = " << num(m.norm_eps) << '\n';
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  synth.validate();
  if (!(pipeline.target_hz > 0.0)) throw ConfigError("pipeline.target_hz must be positive");
  if (pipeline.max_frames < 2) throw ConfigError("pipeline.max_frames must be at least 2");
  if (pipeline.max_frames - 1 > model.max_positions) {
    throw ConfigError("pipeline.max_frames - 1 exceeds model.max_positions");
  }
}

RunConfig ablation_preset() {
  RunConfig cfg;
  cfg.model.d_model = 32;
  cfg.model.n_blocks = 2;
  cfg.model.n_heads = 4;
  cfg.model.mlp_ratio = 2.0;
  cfg.model.context_hidden = 16;
  cfg.train.epochs = 12;
  cfg.train.batch_size = 16;
  cfg.train.learning_rate = 2e-3;
  return cfg;
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  if (key == "seed") {
    set_seed(cfg, to_u64(key, value));
    return;
  }
  const auto dot = key.find('.');
  if (dot == std::string_view::npos) throw ConfigError("unknown key '" + std::string(key) + "'");
  const auto section = key.substr(0, dot);
  const auto name = key.substr(dot + 1);
  if (section == "model") {
    apply_model(cfg.model, name, value);
  } else if (section == "train") {
    auto& t = cfg.train;
    if (name == "epochs") t.epochs = to_size(key, value);
    else if (name == "batch_size") t.batch_size = to_size(key, value);
    else if (name == "learning_rate") t.learning_rate = to_double(key, value);
    else if (name == "optimizer") t.optimizer = parse_optimizer(value);
    else if (name == "beta1") t.beta1 = to_double(key, value);
    else if (name == "beta2") t.beta2 = to_double(key, value);
    else if (name == "epsilon") t.epsilon = to_double(key, value);
    else if (name == "seed") t.seed = to_u64(key, value);
    else if (name == "split_fraction") t.split_fraction = to_double(key, value);
    else if (name == "f1_average") t.f1_average = parse_f1_average(value);
    else throw ConfigError("unknown key '" + std::string(key) + "'");
  } else if (section == "synth") {
    auto& s = cfg.synth;
    if (name == "n_clips") s.n_clips = to_size(key, value);
    else if (name == "frames") s.frames = to_size(key, value);
    else if (name == "source_fps") s.source_fps = to_double(key, value);
    else if (name == "noise_sigma") s.noise_sigma = to_double(key, value);
    else if (name == "interaction_fraction") s.interaction_fraction = to_double(key, value);
    else if (name == "seed") s.seed = to_u64(key, value);
    else if (name == "context_rows") s.context_rows = to_size(key, value);
    else if (name == "context_cols") s.context_cols = to_size(key, value);
    else throw ConfigError("unknown key '" + std::string(key) + "'");
  } else if (section == "pipeline") {
    auto& p = cfg.pipeline;
    if (name == "target_hz") p.target_hz = to_double(key, value);
    else if (name == "max_frames") p.max_frames = to_size(key, value);
    else if (name == "root_center") p.root_center = to_bool(key, value);
    else throw ConfigError("unknown key '" + std::string(key) + "'");
  } else {
    throw ConfigError("unknown key '" + std::string(key) + "'");
  }
}

void apply_config_text(RunConfig& cfg, std::string_view text) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  apply_config_text(cfg, text);
}

void set_seed(RunConfig& cfg, std::uint64_t seed) {
  cfg.train.seed = seed;
  cfg.synth.seed = seed;
}

std::string config_text(const RunConfig& cfg) {
  std::ostringstream os;
  model_lines(os, cfg.model);
  const auto& t = cfg.train;
  os << "train.epochs = " << t.epochs << '\n'
     << "train.batch_size = " << t.batch_size << '\n'
     << "train.learning_rate = " << num(t.learning_rate) << '\n'
     << "train.optimizer = " << optimizer_name(t.optimizer) << '\n'
     << "train.beta1 = " << num(t.beta1) << '\n'
     << "train.beta2 = " << num(t.beta2) << '\n'
     << "train.epsilon = " << num(t.epsilon) << '\n'
     << "train.seed = " << t.seed << '\n'
     << "train.split_fraction = " << num(t.split_fraction) << '\n'
     << "train.f1_average = " << f1_average_name(t.f1_average) << '\n';
  const auto& s = cfg.synth;
  os << "synth.n_clips = " << s.n_clips << '\n'
     << "synth.frames = " << s.frames << '\n'
     << "synth.source_fps = " << num(s.source_fps) << '\n'
     << "synth.noise_sigma = " << num(s.noise_sigma) << '\n'
     << "synth.interaction_fraction = " << num(s.interaction_fraction) << '\n'
     << "synth.seed = " << s.seed << '\n'
     << "synth.context_rows = " << s.context_rows << '\n'
     << "synth.context_cols = " << s.context_cols << '\n';
  const auto& p = cfg.pipeline;
  os << "pipeline.target_hz = " << num(p.target_hz) << '\n'
     << "pipeline.max_frames = " << p.max_frames << '\n'
     << "pipeline.root_center = " << (p.root_center ? "true" : "false") << '\n';
  return os.str();
}

std::string model_config_text(const ModelConfig& cfg) {
  std::ostringstream os;
  model_lines(os, cfg);
  return os.str();
}

ModelConfig parse_model_config(std::string_view text) {
  RunConfig run;
  apply_config_text(run, text);
  run.model.validate();
  return run.model;
}

}  // namespace moemo
