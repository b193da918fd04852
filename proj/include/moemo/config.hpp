#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "moemo/model.hpp"
#include "moemo/synth.hpp"
#include "moemo/train.hpp"

namespace moemo {

/// Ingestion settings applied before movement vectors are computed.
struct PipelineConfig {
  double target_hz = 4.0;
  std::size_t max_frames = 16;
  bool root_center = false;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

/// Everything a command needs, resolved from defaults, a config file and flags.
///
/// Config files are plain text, one `key = value` per line; `#` starts a comment.
/// Keys:
///   seed                      sets train.seed and synth.seed together
///   model.d_model  model.n_blocks  model.n_heads  model.mlp_ratio  model.variant
///   model.max_positions  model.context_rows  model.context_cols  model.context_hidden
///   model.aggregation  model.norm_eps
///   train.epochs  train.batch_size  train.learning_rate  train.optimizer  train.beta1
///   train.beta2  train.epsilon  train.seed  train.split_fraction  train.f1_average
///   synth.n_clips  synth.frames  synth.source_fps  synth.noise_sigma
///   synth.interaction_fraction  synth.seed  synth.context_rows  synth.context_cols
///   pipeline.target_hz  pipeline.max_frames  pipeline.root_center
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SynthConfig synth;
  PipelineConfig pipeline;

  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Smaller network used by `ablate`: same architecture, sized so that three
/// variants x three seeds train on the default synthetic set in minutes.
RunConfig ablation_preset();

/// Throws ConfigError for unknown keys or unparsable values.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);
void apply_config_text(RunConfig& cfg, std::string_view text);
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);
void set_seed(RunConfig& cfg, std::uint64_t seed);

/// Every key with its resolved value, in the order listed above.
std::string config_text(const RunConfig& cfg);

std::string model_config_text(const ModelConfig& cfg);
ModelConfig parse_model_config(std::string_view text);

}  // namespace moemo
