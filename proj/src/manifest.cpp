#include "moemo/manifest.hpp"

#include <json.hpp>
#include <set>

#include "moemo/errors.hpp"
#include "moemo/formats.hpp"

namespace moemo {

namespace {

using nlohmann::json;

std::filesystem::path resolve(const std::filesystem::path& manifest_path, const std::string& rel) {
  std::filesystem::path p(rel);
  return p.is_absolute() ? p : manifest_path.parent_path() / p;
}

ContextFeatureMap align_context_frames(const ContextFeatureMap& ctx, const KeypointClip& source,
                                       const KeypointClip& resampled, const RunConfig& cfg) {
  if (ctx.frames == resampled.frame_count()) return ctx;
  if (ctx.frames == source.frame_count()) {
    return select_frames(ctx, resample_indices(source.frame_count(), source.source_fps, cfg.pipeline.target_hz,
                                               cfg.pipeline.max_frames));
  }
  throw ValidationError("context for '" + source.clip_id + "' has " + std::to_string(ctx.frames) +
                        " frames; expected " + std::to_string(source.frame_count()) + " or " +
                        std::to_string(resampled.frame_count()));
}

}  // namespace

std::string encode_manifest(const Manifest& m) {
  json j;
  j["format_version"] = m.format_version;
  j["dataset"] = m.dataset;
  j["clips"] = json::array();
  for (const auto& e : m.clips) {
    json c;
    c["clip_id"] = e.clip_id;
    c["keypoint_file"] = e.keypoint_file;
    c["context_file"] = e.context_file;
    c["label"] = e.label ? json(std::string(label_name(*e.label))) : json(nullptr);
    c["split"] = e.split;
    j["clips"].push_back(std::move(c));
  }
  return j.dump(2) + "\n";
}

Manifest decode_manifest(std::string_view text) {
  try {
    const json j = json::parse(text);
    Manifest m;
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kManifestVersion) {
      throw FormatError("manifest: unsupported format_version " + std::to_string(m.format_version));
    }
    m.dataset = j.at("dataset").get<std::string>();
    std::set<std::string> seen;
    for (const auto& c : j.at("clips")) {
      ManifestEntry e;
      e.clip_id = c.at("clip_id").get<std::string>();
      e.keypoint_file = c.at("keypoint_file").get<std::string>();
      e.context_file = c.at("context_file").get<std::string>();
      if (c.contains("label") && !c.at("label").is_null()) e.label = parse_label(c.at("label").get<std::string>());
      if (c.contains("split")) e.split = c.at("split").get<std::string>();
      if (!e.split.empty() && e.split != "train" && e.split != "test") {
        throw FormatError("manifest: clip '" + e.clip_id + "' has unknown split '" + e.split + "'");
      }
      if (!seen.insert(e.clip_id).second) throw FormatError("manifest: duplicate clip_id '" + e.clip_id + "'");
      m.clips.push_back(std::move(e));
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  } catch (const FormatError&) {
    throw;
  } catch (const ValidationError& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  write_file_atomic(path, encode_manifest(m));
}

Manifest read_manifest(const std::filesystem::path& path) { return decode_manifest(read_file(path)); }

std::vector<std::string> validate_manifest(const std::filesystem::path& path, const RunConfig& cfg) {
  std::vector<std::string> problems;
  Manifest m;
  try {
    m = read_manifest(path);
  } catch (const Error& e) {
    problems.emplace_back(e.what());
    return problems;
  }
  for (const auto& e : m.clips) {
    try {
      const KeypointClip kp = read_keypoints(resolve(path, e.keypoint_file));
      if (kp.clip_id != e.clip_id) {
        throw ValidationError("keypoint file holds clip '" + kp.clip_id + "'");
      }
      const ContextFeatureMap ctx = read_context(resolve(path, e.context_file));
      validate_context(ctx, cfg.model.context_rows, cfg.model.context_cols);
      const KeypointClip rs = resample(kp, cfg.pipeline.target_hz, cfg.pipeline.max_frames);
      align_context_frames(ctx, kp, rs, cfg);
    } catch (const Error& err) {
      problems.push_back(e.clip_id + ": " + err.what());
    }
  }
  return problems;
}

LoadedData load_dataset(const std::filesystem::path& manifest_path, const RunConfig& cfg) {
  const Manifest m = read_manifest(manifest_path);
  LoadedData out;
  for (const auto& e : m.clips) {
    if (!e.label) continue;
    KeypointClip kp = read_keypoints(resolve(manifest_path, e.keypoint_file));
    const KeypointClip rs = resample(kp, cfg.pipeline.target_hz, cfg.pipeline.max_frames);
    ContextFeatureMap ctx = read_context(resolve(manifest_path, e.context_file));
    validate_context(ctx, cfg.model.context_rows, cfg.model.context_cols);
    auto shared = std::make_shared<const ContextFeatureMap>(align_context_frames(ctx, kp, rs, cfg));
    for (const auto& [pid, track] : split_persons(rs)) {
      const PersonTrack t = cfg.pipeline.root_center ? root_centered(track) : track;
      out.examples.push_back(Example{e.clip_id, movement_vectors(t), shared, *e.label});
      out.splits.push_back(e.split);
    }
  }
  if (out.examples.empty()) throw ValidationError("manifest has no labelled clips");
  return out;
}

}  // namespace moemo
