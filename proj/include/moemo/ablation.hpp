#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "moemo/config.hpp"
#include "moemo/train.hpp"

namespace moemo {

struct AblationRow {
  Variant variant = Variant::full;
  std::vector<double> accuracy;  // per seed
  std::vector<double> f1;        // per seed
  std::vector<double> final_loss;
  double mean_accuracy() const;
  double mean_f1() const;
};

struct AblationResult {
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;  // full, no_cross_attention, no_context

  const AblationRow& row(Variant v) const;
};

using AblationProgress = std::function<void(Variant, std::uint64_t seed, std::size_t epoch, double loss)>;

/// Trains and evaluates every variant for each seed. Each seed draws its own
/// stratified split (train.split_fraction) and its own initialization.
AblationResult run_ablation(const Dataset& data, const RunConfig& cfg, const std::vector<std::uint64_t>& seeds,
                            const AblationProgress& progress = {});

std::string format_ablation(const AblationResult& r);
std::string ablation_csv(const AblationResult& r);

}  // namespace moemo
