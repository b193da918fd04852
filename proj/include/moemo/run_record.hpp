#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "moemo/config.hpp"
#include "moemo/metrics.hpp"

namespace moemo {

/// Hex SHA-1 of "blob <size>\0" + bytes, as git hashes file contents.
std::string git_blob_hash(std::string_view bytes);

/// Content hash over a set of files: the blob hash of the lines
/// "<blob hash> <name>\n" in the given order.
std::string content_hash(const std::vector<std::filesystem::path>& files, const std::filesystem::path& base);

/// Everything needed to reproduce one training run. No timestamps: the same
/// inputs give the same record, byte for byte.
struct RunRecord {
  std::string run_id;  // first 12 hex digits of the hash of config + inputs
  std::string config;  // config_text of the resolved configuration
  std::uint64_t seed = 0;
  std::string input_hash;
  double accuracy = 0.0;
  double f1 = 0.0;
  std::string checkpoint;
};

RunRecord make_run_record(const RunConfig& cfg, const std::string& input_hash, const EvalReport& report,
                          const std::string& checkpoint);
std::string encode_run_record(const RunRecord& r);

}  // namespace moemo
