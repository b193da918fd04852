#include "moemo/synth.hpp"

#include <cmath>
#include <map>
#include <numbers>

#include "moemo/errors.hpp"
#include "moemo/rng.hpp"

namespace moemo {

namespace {

// Archetype tables are fixed for every user seed.
constexpr std::uint64_t kArchetypeSeed = 0x4D6F456D6FULL;

constexpr std::array<std::array<double, kCoords>, kJoints> kRestPose = {{
    {-0.08, 1.62, 0.00},  // ear
    {-0.03, 1.65, 0.08},  // eye
    {0.03, 1.65, 0.08},   // eye
    {0.00, 1.60, 0.10},   // nose
    {0.08, 1.62, 0.00},   // ear
    {-0.45, 0.80, 0.05},  // hand
    {-0.30, 1.10, 0.00},  // elbow
    {-0.18, 1.42, 0.00},  // shoulder
    {0.18, 1.42, 0.00},   // shoulder
    {0.30, 1.10, 0.00},   // elbow
    {0.45, 0.80, 0.05},   // hand
    {-0.10, 0.08, 0.00},  // ankle
    {-0.10, 0.50, 0.02},  // knee
    {-0.42, 0.85, 0.03},  // wrist
    {0.42, 0.85, 0.03},   // wrist
    {0.10, 0.50, 0.02},   // knee
    {0.10, 0.08, 0.00},   // ankle
}};

struct MotionArchetype {
  std::array<double, kJoints * kCoords> posture;  // offset from the rest pose
  std::array<double, kJoints * kCoords> amplitude;
  std::array<double, kJoints * kCoords> phase;
};

const std::array<MotionArchetype, kMotionArchetypes>& motion_archetypes() {
  static const auto tables = [] {
    std::array<MotionArchetype, kMotionArchetypes> out{};
    Rng rng(kArchetypeSeed, "motion_archetypes");
    for (auto& a : out) {
      for (std::size_t i = 0; i < kJoints * kCoords; ++i) {
        a.posture[i] = rng.uniform(-0.15, 0.15);
        a.amplitude[i] = rng.uniform(0.02, 0.20);
        a.phase[i] = rng.uniform(0.0, 2.0 * std::numbers::pi);
      }
    }
    return out;
  }();
  return tables;
}

std::vector<float> context_template(int archetype, std::size_t size) {
  Rng rng(kArchetypeSeed + static_cast<std::uint64_t>(size), "context_template_" + std::to_string(archetype));
  std::vector<float> out(size);
  for (auto& v : out) v = static_cast<float>(rng.normal());
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_clips == 0) throw ConfigError("n_clips must be positive");
  if (frames < 2) throw ConfigError("synthetic clips need at least 2 frames");
  if (!(source_fps > 0.0)) throw ConfigError("source_fps must be positive");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("noise_sigma must be >= 0");
  if (!(interaction_fraction >= 0.0 && interaction_fraction <= 1.0)) {
    throw ConfigError("interaction_fraction must lie in [0, 1]");
  }
  if (context_rows == 0 || context_cols == 0) throw ConfigError("context dimensions must be positive");
}

std::size_t SynthConfig::interacting_clips() const {
  const double target = static_cast<double>(n_clips) * interaction_fraction / 6.0;
  const auto n = static_cast<std::size_t>(std::llround(target)) * 6;
  return std::min(n, n_clips);
}

SynthCell synth_cell(const SynthConfig& cfg, std::size_t index) {
  const std::size_t n_int = cfg.interacting_clips();
  SynthCell cell;
  cell.interacting = index < n_int;
  const std::size_t j = cell.interacting ? index : index - n_int;
  cell.motion = static_cast<int>(j % kMotionArchetypes);
  cell.context = static_cast<int>((j / kMotionArchetypes) % kContextArchetypes);
  cell.label = cell.interacting
                   ? kInteractionTable[static_cast<std::size_t>(cell.motion)][static_cast<std::size_t>(cell.context)]
                   : cell.motion;
  return cell;
}

SynthClip generate_clip(const SynthConfig& cfg, std::size_t index) {
  cfg.validate();
  if (index >= cfg.n_clips) throw ConfigError("clip index out of range");
  char id[32];
  std::snprintf(id, sizeof id, "synth_%05zu", index);
  SynthClip out;
  out.cell = synth_cell(cfg, index);
  Rng rng(cfg.seed, "synth/" + std::to_string(index));

  const auto& arch = motion_archetypes()[static_cast<std::size_t>(out.cell.motion)];
  const double cycles = out.cell.interacting ? 2.0 : 1.0;
  PersonTrack track;
  track.person_id = 0;
  track.frames = cfg.frames;
  track.joints.resize(cfg.frames * kJoints * kCoords);
  for (std::size_t t = 0; t < cfg.frames; ++t) {
    const double angle = 2.0 * std::numbers::pi * cycles * static_cast<double>(t) / static_cast<double>(cfg.frames);
    for (std::size_t j = 0; j < kJoints; ++j) {
      for (std::size_t c = 0; c < kCoords; ++c) {
        const std::size_t jc = j * kCoords + c;
        track.joints[t * kJoints * kCoords + jc] =
            kRestPose[j][c] + arch.posture[jc] + arch.amplitude[jc] * std::sin(angle + arch.phase[jc]) + cfg.noise_sigma * rng.normal();
      }
    }
  }
  out.keypoints.clip_id = id;
  out.keypoints.source_fps = cfg.source_fps;
  out.keypoints.persons.push_back(std::move(track));
  out.keypoints.label = out.cell.label;
  out.keypoints.context_ref = id;

  const std::size_t stride = cfg.context_rows * cfg.context_cols;
  static thread_local std::map<std::pair<int, std::size_t>, std::vector<float>> templates;
  auto key = std::make_pair(out.cell.context, stride);
  auto it = templates.find(key);
  if (it == templates.end()) it = templates.emplace(key, context_template(out.cell.context, stride)).first;
  const std::vector<float>& tmpl = it->second;

  out.context.clip_id = id;
  out.context.frames = cfg.frames;
  out.context.rows = cfg.context_rows;
  out.context.cols = cfg.context_cols;
  out.context.data.resize(cfg.frames * stride);
  for (std::size_t t = 0; t < cfg.frames; ++t) {
    for (std::size_t i = 0; i < stride; ++i) {
      out.context.data[t * stride + i] = static_cast<float>(tmpl[i] + cfg.noise_sigma * rng.normal());
    }
  }
  return out;
}

std::vector<SynthClip> generate(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<SynthClip> out;
  out.reserve(cfg.n_clips);
  for (std::size_t i = 0; i < cfg.n_clips; ++i) out.push_back(generate_clip(cfg, i));
  return out;
}

Dataset to_dataset(std::vector<SynthClip> clips) {
  Dataset data;
  data.reserve(clips.size());
  for (auto& clip : clips) {
    auto ctx = std::make_shared<const ContextFeatureMap>(std::move(clip.context));
    for (const auto& [pid, track] : split_persons(clip.keypoints)) {
      data.push_back(Example{clip.keypoints.clip_id, movement_vectors(track), ctx, clip.cell.label});
    }
  }
  return data;
}

BayesGap bayes_gap(const SynthConfig& cfg) {
  cfg.validate();
  // counts[observable][label]
  std::map<std::tuple<int, int, bool>, std::array<std::size_t, kNumClasses>> full;
  std::map<std::pair<int, bool>, std::array<std::size_t, kNumClasses>> motion_only;
  for (std::size_t i = 0; i < cfg.n_clips; ++i) {
    const SynthCell cell = synth_cell(cfg, i);
    const auto label = static_cast<std::size_t>(cell.label);
    ++full[{cell.motion, cell.context, cell.interacting}][label];
    ++motion_only[{cell.motion, cell.interacting}][label];
  }
  auto best = [](const auto& table) {
    std::size_t hits = 0;
    for (const auto& [key, counts] : table) hits += *std::max_element(counts.begin(), counts.end());
    return hits;
  };
  const auto n = static_cast<double>(cfg.n_clips);
  return BayesGap{static_cast<double>(best(full)) / n, static_cast<double>(best(motion_only)) / n};
}

}  // namespace moemo
