#include "moemo/run_record.hpp"

#include <openssl/evp.h>

#include <json.hpp>

#include "moemo/errors.hpp"
#include "moemo/formats.hpp"

namespace moemo {

namespace {

std::string sha1_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha1(), nullptr) != 1) {
    throw Error("SHA-1 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

}  // namespace

std::string git_blob_hash(std::string_view bytes) {
  std::string blob = "blob " + std::to_string(bytes.size());
  blob.push_back('\0');
  blob.append(bytes);
  return sha1_hex(blob);
}

std::string content_hash(const std::vector<std::filesystem::path>& files, const std::filesystem::path& base) {
  std::string listing;
  for (const auto& f : files) {
    listing += git_blob_hash(read_file(base / f)) + " " + f.generic_string() + "\n";
  }
  return git_blob_hash(listing);
}

RunRecord make_run_record(const RunConfig& cfg, const std::string& input_hash, const EvalReport& report,
                          const std::string& checkpoint) {
  RunRecord r;
  r.config = config_text(cfg);
  r.seed = cfg.train.seed;
  r.input_hash = input_hash;
  r.run_id = git_blob_hash(r.config + input_hash).substr(0, 12);
  r.accuracy = report.overall_accuracy;
  r.f1 = report.macro_f1;
  r.checkpoint = checkpoint;
  return r;
}

std::string encode_run_record(const RunRecord& r) {
  nlohmann::ordered_json j;
  j["run_id"] = r.run_id;
  j["seed"] = r.seed;
  j["input_hash"] = r.input_hash;
  j["config"] = r.config;
  j["metrics"] = {{"accuracy", r.accuracy}, {"f1", r.f1}};
  j["checkpoint"] = r.checkpoint;
  return j.dump(2) + "\n";
}

}  // namespace moemo
