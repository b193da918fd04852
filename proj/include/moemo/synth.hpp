#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "moemo/context.hpp"
#include "moemo/motion.hpp"
#include "moemo/train.hpp"

namespace moemo {

inline constexpr int kContextArchetypes = 3;  // negative, neutral, positive
inline constexpr int kMotionArchetypes = 6;

/// Label of an interacting clip: the same motion means a different emotion in
/// each context. Row m lists motion m's emotion under contexts 0, 1, 2; every
/// row holds three distinct labels and every label occurs three times.
inline constexpr std::array<std::array<int, kContextArchetypes>, kMotionArchetypes> kInteractionTable = {{
    {0, 2, 4},
    {1, 3, 5},
    {2, 4, 0},
    {3, 5, 1},
    {4, 0, 2},
    {5, 1, 3},
}};

struct SynthConfig {
  std::size_t n_clips = 1200;
  std::size_t frames = 16;
  double source_fps = 4.0;
  double noise_sigma = 0.05;
  double interaction_fraction = 0.5;
  std::uint64_t seed = 0;
  std::size_t context_rows = 50;
  std::size_t context_cols = 768;

  void validate() const;
  /// Number of interacting clips: n_clips * interaction_fraction rounded to a multiple of 6.
  std::size_t interacting_clips() const;
  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

/// Generative cell of one clip.
struct SynthCell {
  int motion = 0;
  int context = 0;
  bool interacting = false;
  int label = 0;
};

struct SynthClip {
  KeypointClip keypoints;
  ContextFeatureMap context;
  SynthCell cell;
};

/// Cell of clip `index`. Interacting clips come first; within each group
/// consecutive runs of six clips cover all six labels, which balances classes.
SynthCell synth_cell(const SynthConfig& cfg, std::size_t index);

/// Clip `index` of the dataset, drawn from its own seeded substream.
///
/// Every joint follows rest pose + posture + amplitude * sin(2 pi cycles t / frames + phase)
/// with per-archetype posture, amplitude and phase tables, plus Gaussian noise. Interacting
/// clips move at two cycles per clip instead of one, so a motion-only model can
/// tell which rule applies but not which context is present. Each context frame is
/// a fixed random rows x cols archetype template plus Gaussian noise.
SynthClip generate_clip(const SynthConfig& cfg, std::size_t index);

std::vector<SynthClip> generate(const SynthConfig& cfg);

/// Single-person examples sharing each clip's context buffer.
Dataset to_dataset(std::vector<SynthClip> clips);

struct BayesGap {
  double acc_with_context = 0.0;
  double acc_motion_only = 0.0;
  double gap() const { return acc_with_context - acc_motion_only; }
};

/// Best achievable accuracies by exhaustive enumeration over the dataset's cells:
/// with context every cell is observable, without it only (motion, tempo) is.
BayesGap bayes_gap(const SynthConfig& cfg);

}  // namespace moemo
