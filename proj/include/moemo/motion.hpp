#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "moemo/tensor.hpp"

namespace moemo {

inline constexpr std::size_t kJoints = 17;
inline constexpr std::size_t kCoords = 3;
inline constexpr std::size_t kVectorWidth = 2 * kCoords;
/// Values per transition token: 17 joints x 6.
inline constexpr std::size_t kMotionFeatures = kJoints * kVectorWidth;
inline constexpr int kNumClasses = 6;

/// Emotion classes, index order joy, angry, disgust, fear, sadness, surprise.
std::string_view label_name(int label);
/// Parses a class name (case-sensitive, as written by label_name). Throws ValidationError.
int parse_label(std::string_view name);

/// Keypoint slot names in storage order. Slot j holds keypoint L(j+1):
/// 0 ear, 1 eye, 2 eye, 3 nose, 4 ear, 5 hand, 6 elbow, 7 shoulder, 8 shoulder,
/// 9 elbow, 10 hand, 11 ankle, 12 knee, 13 wrist, 14 wrist, 15 knee, 16 ankle.
/// The slots are opaque to the pipeline; adapters map estimator joints onto them.
std::string_view joint_slot_name(std::size_t slot);

/// 3D joint trajectory of one person, frames x 17 x 3, row-major.
struct PersonTrack {
  int person_id = 0;
  std::size_t frames = 0;
  std::vector<double> joints;

  double at(std::size_t frame, std::size_t joint, std::size_t coord) const {
    return joints[(frame * kJoints + joint) * kCoords + coord];
  }
  friend bool operator==(const PersonTrack&, const PersonTrack&) = default;
};

/// Per-clip pose output, p persons x f frames x 17 x 3.
struct KeypointClip {
  std::string clip_id;
  double source_fps = 0.0;
  std::vector<PersonTrack> persons;
  std::optional<int> label;
  std::string context_ref;

  std::size_t frame_count() const { return persons.empty() ? 0 : persons.front().frames; }
  friend bool operator==(const KeypointClip&, const KeypointClip&) = default;
};

/// Movement vectors of one person: (f-1) x 17 x 6, each entry the joint's
/// position at frame t followed by its position at frame t+1.
struct MovementVectorSeq {
  int person_id = 0;
  std::size_t transitions = 0;
  std::vector<double> vectors;

  Shape shape() const { return {transitions, kJoints, kVectorWidth}; }
  /// One flattened 102-wide row per transition.
  Tensor as_tokens() const;
  friend bool operator==(const MovementVectorSeq&, const MovementVectorSeq&) = default;
};

/// Checks frame counts, joint layout and finiteness. Throws ValidationError.
void validate_track(const PersonTrack& track);
void validate_clip(const KeypointClip& clip);

/// Source frame indices kept when resampling: floor(k * source_fps / target_hz), k = 0, 1, ...
std::vector<std::size_t> resample_indices(std::size_t source_frames, double source_fps, double target_hz,
                                          std::size_t max_frames);

/// Keeps the frames chosen by resample_indices for every person; the result
/// reports target_hz as its rate. Throws ValidationError on a rate below the
/// target or when fewer than two frames survive.
KeypointClip resample(const KeypointClip& clip, double target_hz = 4.0, std::size_t max_frames = 16);

/// One entry per person in input order.
std::vector<std::pair<int, PersonTrack>> split_persons(const KeypointClip& clip);

MovementVectorSeq movement_vectors(const PersonTrack& track);

/// Inverse of movement_vectors.
PersonTrack reconstruct_track(const MovementVectorSeq& seq);

/// Subtracts the per-frame centroid of all 17 joints.
PersonTrack root_centered(const PersonTrack& track);

}  // namespace moemo
