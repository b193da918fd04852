#include "moemo/formats.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "moemo/config.hpp"
#include "moemo/errors.hpp"

namespace moemo {

namespace {

class Writer {
 public:
  void magic(const char (&m)[5]) { out_.append(m, 4); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(std::string_view s) {
    u32(checked_u32(s.size()));
    out_.append(s);
  }
  static std::uint32_t checked_u32(std::size_t n) {
    if (n > UINT32_MAX) throw FormatError("value does not fit in u32");
    return static_cast<std::uint32_t>(n);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(std::string_view bytes, const char* what) : bytes_(bytes), what_(what) {}

  void magic(const char (&m)[5]) {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, m, 4) != 0) fail("bad magic, expected \"" + std::string(m) + "\"");
    pos_ += 4;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() {
    const double v = std::bit_cast<double>(u64());
    if (!std::isfinite(v)) fail("non-finite value");
    return v;
  }
  float f32() {
    const float v = std::bit_cast<float>(u32());
    if (!std::isfinite(v)) fail("non-finite value");
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  void version(std::uint32_t expected) {
    const auto v = u32();
    if (v != expected) fail("unsupported version " + std::to_string(v));
  }
  /// Fails early when a declared payload is longer than the remaining bytes.
  void expect_remaining(std::uint64_t count, std::uint64_t width) {
    if (width != 0 && count > (bytes_.size() - pos_) / width) fail("truncated payload");
  }
  void finish() {
    if (pos_ != bytes_.size()) fail("trailing bytes after payload");
  }
  [[noreturn]] void fail(const std::string& msg) const { throw FormatError(std::string(what_) + ": " + msg); }

 private:
  void need(std::size_t n) {
    if (bytes_.size() - pos_ < n) fail("truncated file");
  }
  std::string_view bytes_;
  const char* what_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_keypoints(const KeypointClip& clip) {
  validate_clip(clip);
  Writer w;
  w.magic("MOKP");
  w.u32(kKeypointVersion);
  w.str(clip.clip_id);
  w.f64(clip.source_fps);
  w.u32(Writer::checked_u32(clip.persons.size()));
  w.u32(Writer::checked_u32(clip.frame_count()));
  for (const auto& p : clip.persons)
    for (double v : p.joints) w.f64(v);
  return w.take();
}

KeypointClip decode_keypoints(std::string_view bytes) {
  Reader r(bytes, "keypoint file");
  r.magic("MOKP");
  r.version(kKeypointVersion);
  KeypointClip clip;
  clip.clip_id = r.str();
  clip.source_fps = r.f64();
  const std::uint32_t persons = r.u32();
  const std::uint32_t frames = r.u32();
  if (persons == 0) r.fail("empty persons list");
  if (frames < 2) r.fail("needs at least 2 frames, got " + std::to_string(frames));
  const std::uint64_t per_person = static_cast<std::uint64_t>(frames) * kJoints * kCoords;
  r.expect_remaining(per_person * persons, 8);
  for (std::uint32_t p = 0; p < persons; ++p) {
    PersonTrack t;
    t.person_id = static_cast<int>(p);
    t.frames = frames;
    t.joints.resize(per_person);
    for (auto& v : t.joints) v = r.f64();
    clip.persons.push_back(std::move(t));
  }
  r.finish();
  try {
    validate_clip(clip);
  } catch (const ValidationError& e) {
    r.fail(e.what());
  }
  return clip;
}

std::string encode_context(const ContextFeatureMap& map) {
  validate_context(map, map.rows, map.cols);
  Writer w;
  w.magic("MOCX");
  w.u32(kContextVersion);
  w.str(map.clip_id);
  w.u32(Writer::checked_u32(map.frames));
  w.u32(Writer::checked_u32(map.rows));
  w.u32(Writer::checked_u32(map.cols));
  for (float v : map.data) w.f32(v);
  return w.take();
}

ContextFeatureMap decode_context(std::string_view bytes) {
  Reader r(bytes, "context file");
  r.magic("MOCX");
  r.version(kContextVersion);
  ContextFeatureMap map;
  map.clip_id = r.str();
  map.frames = r.u32();
  map.rows = r.u32();
  map.cols = r.u32();
  if (map.frames == 0 || map.rows == 0 || map.cols == 0) r.fail("zero dimension");
  const std::uint64_t n = static_cast<std::uint64_t>(map.frames) * map.rows * map.cols;
  r.expect_remaining(n, 4);
  map.data.resize(n);
  for (auto& v : map.data) v = r.f32();
  r.finish();
  return map;
}

std::string encode_movement_vectors(const std::string& clip_id, const MovementVectorSeq& seq) {
  Writer w;
  w.magic("MOMV");
  w.u32(kVectorVersion);
  w.str(clip_id);
  w.u32(Writer::checked_u32(static_cast<std::size_t>(seq.person_id)));
  w.u32(Writer::checked_u32(seq.transitions));
  for (double v : seq.vectors) w.f64(v);
  return w.take();
}

std::pair<std::string, MovementVectorSeq> decode_movement_vectors(std::string_view bytes) {
  Reader r(bytes, "movement vector file");
  r.magic("MOMV");
  r.version(kVectorVersion);
  std::string clip_id = r.str();
  MovementVectorSeq seq;
  seq.person_id = static_cast<int>(r.u32());
  seq.transitions = r.u32();
  if (seq.transitions == 0) r.fail("no transitions");
  r.expect_remaining(static_cast<std::uint64_t>(seq.transitions) * kMotionFeatures, 8);
  seq.vectors.resize(seq.transitions * kMotionFeatures);
  for (auto& v : seq.vectors) v = r.f64();
  r.finish();
  return {std::move(clip_id), std::move(seq)};
}

std::string encode_checkpoint(const ModelConfig& config, const ParameterStore& params) {
  Writer w;
  w.magic("MOEM");
  w.u32(kCheckpointVersion);
  w.str(model_config_text(config));
  w.u32(Writer::checked_u32(params.size()));
  for (const auto& p : params) {
    w.str(p.name);
    w.u32(Writer::checked_u32(p.value.rank()));
    for (auto d : p.value.shape()) w.u32(Writer::checked_u32(d));
    for (double v : p.value.data()) w.f64(v);
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader r(bytes, "checkpoint");
  r.magic("MOEM");
  r.version(kCheckpointVersion);
  Checkpoint ck;
  try {
    ck.config = parse_model_config(r.str());
  } catch (const ConfigError& e) {
    r.fail(std::string("bad config block: ") + e.what());
  }
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) r.fail("parameter '" + name + "' has invalid rank");
    Shape shape(rank);
    std::uint64_t n = 1;
    for (auto& d : shape) {
      d = r.u32();
      if (d == 0) r.fail("parameter '" + name + "' has a zero dimension");
      n *= d;
      r.expect_remaining(n, 8);
    }
    std::vector<double> data(n);
    for (auto& v : data) v = r.f64();
    if (ck.params.contains(name)) r.fail("duplicate parameter '" + name + "'");
    ck.params.add(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  r.finish();
  return ck;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw FormatError("cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_keypoints(const std::filesystem::path& path, const KeypointClip& clip) {
  write_file_atomic(path, encode_keypoints(clip));
}

KeypointClip read_keypoints(const std::filesystem::path& path) { return decode_keypoints(read_file(path)); }

void write_context(const std::filesystem::path& path, const ContextFeatureMap& map) {
  write_file_atomic(path, encode_context(map));
}

ContextFeatureMap read_context(const std::filesystem::path& path) { return decode_context(read_file(path)); }

void write_checkpoint(const std::filesystem::path& path, const ModelConfig& config, const ParameterStore& params) {
  write_file_atomic(path, encode_checkpoint(config, params));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace moemo
