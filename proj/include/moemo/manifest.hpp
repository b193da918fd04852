#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "moemo/config.hpp"
#include "moemo/train.hpp"

namespace moemo {

inline constexpr int kManifestVersion = 1;

struct ManifestEntry {
  std::string clip_id;
  std::string keypoint_file;  // relative to the manifest's directory
  std::string context_file;
  std::optional<int> label;
  std::string split;  // "train", "test" or empty

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Dataset index, stored as JSON:
/// {"format_version": 1, "dataset": "...", "clips": [{"clip_id": "...",
///  "keypoint_file": "...", "context_file": "...", "label": "joy" | null,
///  "split": "train" | "test" | ""}]}
struct Manifest {
  std::string dataset;
  int format_version = kManifestVersion;
  std::vector<ManifestEntry> clips;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

std::string encode_manifest(const Manifest& m);
/// Throws FormatError on malformed JSON or schema violations (duplicate ids, bad labels).
Manifest decode_manifest(std::string_view text);
void write_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& path);

/// Checks that every referenced file exists, decodes, and matches the configured
/// context dims and the clip's frame count. Returns one message per problem.
std::vector<std::string> validate_manifest(const std::filesystem::path& path, const RunConfig& cfg);

struct LoadedData {
  Dataset examples;
  std::vector<std::string> splits;  // per example, copied from its clip entry
};

/// Reads, resamples and converts every labelled clip into per-person examples.
/// Context frames are resampled with the keypoints when they cover the source
/// frames, or used as-is when they already match the resampled count.
LoadedData load_dataset(const std::filesystem::path& manifest_path, const RunConfig& cfg);

}  // namespace moemo
