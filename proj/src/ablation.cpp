#include "moemo/ablation.hpp"

#include <cstdio>
#include <numeric>
#include <sstream>

#include "moemo/errors.hpp"

namespace moemo {

namespace {

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double AblationRow::mean_accuracy() const { return mean_of(accuracy); }
double AblationRow::mean_f1() const { return mean_of(f1); }

const AblationRow& AblationResult::row(Variant v) const {
  for (const auto& r : rows)
    if (r.variant == v) return r;
  throw Error("variant missing from ablation result");
}

AblationResult run_ablation(const Dataset& data, const RunConfig& cfg, const std::vector<std::uint64_t>& seeds,
                            const AblationProgress& progress) {
  cfg.validate();
  if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
  AblationResult result;
  result.seeds = seeds;
  for (Variant v : {Variant::full, Variant::no_cross_attention, Variant::no_context}) {
    result.rows.push_back(AblationRow{v, {}, {}, {}});
  }
  const auto labels = labels_of(data);
  for (std::uint64_t seed : seeds) {
    const SplitIndices split = stratified_split(labels, cfg.train.split_fraction, seed);
    const Dataset train_set = subset(data, split.train);
    const Dataset test_set = subset(data, split.test);
    for (auto& row : result.rows) {
      ModelConfig mc = cfg.model;
      mc.variant = row.variant;
      const MoEmoNet model(mc);
      TrainConfig tc = cfg.train;
      tc.seed = seed;
      EpochCallback cb;
      if (progress) cb = [&](std::size_t epoch, double loss) { progress(row.variant, seed, epoch, loss); };
      const TrainResult trained = train(model, train_set, tc, cb);
      const EvalReport report = evaluate(model, trained.params, test_set, tc.f1_average);
      row.accuracy.push_back(report.overall_accuracy);
      row.f1.push_back(report.macro_f1);
      row.final_loss.push_back(trained.loss_curve.empty() ? 0.0 : trained.loss_curve.back());
    }
  }
  return result;
}

std::string format_ablation(const AblationResult& r) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-20s %9s %9s  %s\n", "variant", "accuracy", "f1", "per-seed accuracy");
  os << line;
  for (const auto& row : r.rows) {
    std::string per_seed;
    for (double a : row.accuracy) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%s%.4f", per_seed.empty() ? "" : " ", a);
      per_seed += buf;
    }
    std::snprintf(line, sizeof line, "%-20s %9.4f %9.4f  %s\n", std::string(variant_name(row.variant)).c_str(),
                  row.mean_accuracy(), row.mean_f1(), per_seed.c_str());
    os << line;
  }
  return os.str();
}

std::string ablation_csv(const AblationResult& r) {
  std::ostringstream os;
  os << "variant,seed,accuracy,f1,final_loss\n";
  char buf[256];
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.accuracy.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s,%llu,%.6f,%.6f,%.6f\n", std::string(variant_name(row.variant)).c_str(),
                    static_cast<unsigned long long>(r.seeds[i]), row.accuracy[i], row.f1[i], row.final_loss[i]);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, "%s,mean,%.6f,%.6f,\n", std::string(variant_name(row.variant)).c_str(),
                  row.mean_accuracy(), row.mean_f1());
    os << buf;
  }
  return os.str();
}

}  // namespace moemo
