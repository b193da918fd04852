#include "moemo/motion.hpp"

#include <algorithm>
#include <cmath>

#include "moemo/errors.hpp"

namespace moemo {

namespace {

constexpr std::array<std::string_view, kNumClasses> kLabelNames = {
    "joy", "angry", "disgust", "fear", "sadness", "surprise"};

constexpr std::array<std::string_view, kJoints> kSlotNames = {
    "ear_1",   "eye_2",   "eye_3",   "nose_4",  "ear_5",   "hand_6",   "elbow_7",  "shoulder_8", "shoulder_9",
    "elbow_10", "hand_11", "ankle_12", "knee_13", "wrist_14", "wrist_15", "knee_16", "ankle_17"};

}  // namespace

std::string_view label_name(int label) {
  if (label < 0 || label >= kNumClasses) throw ValidationError("label index out of range");
  return kLabelNames[static_cast<std::size_t>(label)];
}

int parse_label(std::string_view name) {
  for (std::size_t i = 0; i < kLabelNames.size(); ++i) {
    if (kLabelNames[i] == name) return static_cast<int>(i);
  }
  throw ValidationError("unknown emotion label '" + std::string(name) + "'");
}

std::string_view joint_slot_name(std::size_t slot) { return kSlotNames.at(slot); }

Tensor MovementVectorSeq::as_tokens() const {
  return Tensor({transitions, kMotionFeatures}, vectors);
}

void validate_track(const PersonTrack& track) {
  if (track.frames < 2) {
    throw ValidationError("person " + std::to_string(track.person_id) + " has " +
                          std::to_string(track.frames) + " frames, need at least 2");
  }
  if (track.joints.size() != track.frames * kJoints * kCoords) {
    throw ValidationError("person " + std::to_string(track.person_id) + " joint array holds " +
                          std::to_string(track.joints.size()) + " values, expected frames x 17 x 3");
  }
  for (double v : track.joints) {
    if (!std::isfinite(v)) {
      throw ValidationError("person " + std::to_string(track.person_id) + " has a non-finite coordinate");
    }
  }
}

void validate_clip(const KeypointClip& clip) {
  if (clip.persons.empty()) throw ValidationError("clip '" + clip.clip_id + "' has no persons");
  if (!(clip.source_fps > 0.0) || !std::isfinite(clip.source_fps)) {
    throw ValidationError("clip '" + clip.clip_id + "' has a non-positive frame rate");
  }
  const std::size_t f = clip.persons.front().frames;
  for (const auto& p : clip.persons) {
    if (p.frames != f) {
      throw ValidationError("clip '" + clip.clip_id + "': persons have differing frame counts (" +
                            std::to_string(f) + " vs " + std::to_string(p.frames) + ")");
    }
    validate_track(p);
  }
  if (clip.label && (*clip.label < 0 || *clip.label >= kNumClasses)) {
    throw ValidationError("clip '" + clip.clip_id + "' has an out-of-range label");
  }
}

std::vector<std::size_t> resample_indices(std::size_t source_frames, double source_fps, double target_hz,
                                          std::size_t max_frames) {
  if (!(target_hz > 0.0)) throw ValidationError("target rate must be positive");
  if (source_fps < target_hz) {
    throw ValidationError("source rate " + std::to_string(source_fps) + " fps is below target " +
                          std::to_string(target_hz) + " Hz");
  }
  std::vector<std::size_t> out;
  for (std::size_t k = 0; out.size() < max_frames; ++k) {
    const auto idx = static_cast<std::size_t>(std::floor(static_cast<double>(k) * source_fps / target_hz));
    if (idx >= source_frames) break;
    out.push_back(idx);
  }
  return out;
}

KeypointClip resample(const KeypointClip& clip, double target_hz, std::size_t max_frames) {
  validate_clip(clip);
  const auto idx = resample_indices(clip.frame_count(), clip.source_fps, target_hz, max_frames);
  if (idx.size() < 2) {
    throw ValidationError("clip '" + clip.clip_id + "': only " + std::to_string(idx.size()) +
                          " frame(s) survive resampling, need at least 2");
  }
  KeypointClip out = clip;
  out.source_fps = target_hz;
  for (auto& person : out.persons) {
    const PersonTrack& src = clip.persons[static_cast<std::size_t>(&person - out.persons.data())];
    person.frames = idx.size();
    person.joints.resize(idx.size() * kJoints * kCoords);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      std::copy_n(src.joints.begin() + static_cast<std::ptrdiff_t>(idx[k] * kJoints * kCoords),
                  kJoints * kCoords, person.joints.begin() + static_cast<std::ptrdiff_t>(k * kJoints * kCoords));
    }
  }
  return out;
}

std::vector<std::pair<int, PersonTrack>> split_persons(const KeypointClip& clip) {
  validate_clip(clip);
  std::vector<std::pair<int, PersonTrack>> out;
  out.reserve(clip.persons.size());
  for (const auto& p : clip.persons) out.emplace_back(p.person_id, p);
  return out;
}

MovementVectorSeq movement_vectors(const PersonTrack& track) {
  validate_track(track);
  MovementVectorSeq seq;
  seq.person_id = track.person_id;
  seq.transitions = track.frames - 1;
  seq.vectors.resize(seq.transitions * kJoints * kVectorWidth);
  for (std::size_t t = 0; t < seq.transitions; ++t) {
    for (std::size_t j = 0; j < kJoints; ++j) {
      double* dst = seq.vectors.data() + (t * kJoints + j) * kVectorWidth;
      for (std::size_t c = 0; c < kCoords; ++c) {
        dst[c] = track.at(t, j, c);
        dst[kCoords + c] = track.at(t + 1, j, c);
      }
    }
  }
  return seq;
}

PersonTrack reconstruct_track(const MovementVectorSeq& seq) {
  if (seq.transitions == 0 || seq.vectors.size() != seq.transitions * kJoints * kVectorWidth) {
    throw ValidationError("movement vector sequence has an invalid shape");
  }
  PersonTrack track;
  track.person_id = seq.person_id;
  track.frames = seq.transitions + 1;
  track.joints.resize(track.frames * kJoints * kCoords);
  auto put = [&](std::size_t frame, std::size_t j, const double* src) {
    std::copy_n(src, kCoords, track.joints.data() + (frame * kJoints + j) * kCoords);
  };
  for (std::size_t t = 0; t < seq.transitions; ++t) {
    for (std::size_t j = 0; j < kJoints; ++j) put(t, j, seq.vectors.data() + (t * kJoints + j) * kVectorWidth);
  }
  const std::size_t last = seq.transitions - 1;
  for (std::size_t j = 0; j < kJoints; ++j) {
    put(seq.transitions, j, seq.vectors.data() + (last * kJoints + j) * kVectorWidth + kCoords);
  }
  return track;
}

PersonTrack root_centered(const PersonTrack& track) {
  validate_track(track);
  PersonTrack out = track;
  for (std::size_t t = 0; t < track.frames; ++t) {
    for (std::size_t c = 0; c < kCoords; ++c) {
      double centroid = 0.0;
      for (std::size_t j = 0; j < kJoints; ++j) centroid += track.at(t, j, c);
      centroid /= static_cast<double>(kJoints);
      for (std::size_t j = 0; j < kJoints; ++j) out.joints[(t * kJoints + j) * kCoords + c] -= centroid;
    }
  }
  return out;
}

}  // namespace moemo
