#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace moemo {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line (without the program name). Returns 0 on success,
/// 1 on a validation or data error and 2 on a usage error.
///
///   moemo [--config PATH] [--seed N] [--out DIR] [--set KEY=VALUE]... <command>
///
///   synth                     write a synthetic dataset (manifest.json + clips/)
///   vectors FILE...           movement vectors of keypoint files, shapes on stdout
///   train MANIFEST            train, writing checkpoint and metrics to --out
///   eval MANIFEST --checkpoint PATH
///   ablate [MANIFEST]         three fusion variants x seeds; synthetic data by default
///   validate PATH...          format checks for any file the toolkit writes
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace moemo
