#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>

#include "moemo/context.hpp"
#include "moemo/model.hpp"
#include "moemo/motion.hpp"
#include "moemo/parameters.hpp"

namespace moemo {

inline constexpr std::uint32_t kKeypointVersion = 1;
inline constexpr std::uint32_t kContextVersion = 1;
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint32_t kVectorVersion = 1;

// All integers and floats are little-endian. Strings are a u32 byte length
// followed by UTF-8 bytes.
//
// Keypoints (.mokp): "MOKP", u32 version, clip_id, f64 source_fps, u32 persons,
//   u32 frames, then persons*frames*17*3 f64 in person, frame, joint, xyz order.
// Context (.mocx):   "MOCX", u32 version, clip_id, u32 frames, u32 rows, u32 cols,
//   then frames*rows*cols f32.
// Movement vectors (.momv): "MOMV", u32 version, clip_id, u32 person_id,
//   u32 transitions, then transitions*17*6 f64.
// Checkpoint:        "MOEM", u32 version, config block (string of key=value lines),
//   u32 parameter count, then per parameter: name, u32 rank, rank x u32 dims,
//   f64 values.
//
// Readers reject bad magic, unknown versions, truncated or oversized payloads and
// non-finite values with FormatError; nothing is returned on failure.

std::string encode_keypoints(const KeypointClip& clip);
/// Person ids are the storage order; label and context_ref are not stored.
KeypointClip decode_keypoints(std::string_view bytes);

std::string encode_context(const ContextFeatureMap& map);
ContextFeatureMap decode_context(std::string_view bytes);

std::string encode_movement_vectors(const std::string& clip_id, const MovementVectorSeq& seq);
std::pair<std::string, MovementVectorSeq> decode_movement_vectors(std::string_view bytes);

struct Checkpoint {
  ModelConfig config;
  ParameterStore params;
};

std::string encode_checkpoint(const ModelConfig& config, const ParameterStore& params);
Checkpoint decode_checkpoint(std::string_view bytes);

/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

void write_keypoints(const std::filesystem::path& path, const KeypointClip& clip);
KeypointClip read_keypoints(const std::filesystem::path& path);
void write_context(const std::filesystem::path& path, const ContextFeatureMap& map);
ContextFeatureMap read_context(const std::filesystem::path& path);
void write_checkpoint(const std::filesystem::path& path, const ModelConfig& config, const ParameterStore& params);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace moemo
