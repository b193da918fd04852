#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace moemo {

enum class F1Average { macro, weighted };

std::string_view f1_average_name(F1Average a);
F1Average parse_f1_average(std::string_view name);

/// Classification quality on a labelled test set.
///
/// per_class_accuracy is recall: diagonal over row sum of the confusion
/// matrix (rows are true labels). The F1 average skips classes without
/// test examples; a class with zero support reports accuracy and F1 of 0.
struct EvalReport {
  double overall_accuracy = 0.0;
  double macro_f1 = 0.0;  // averaged per `average`
  F1Average average = F1Average::macro;
  std::vector<double> per_class_accuracy;
  std::vector<double> per_class_f1;
  std::vector<std::size_t> support;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::size_t n_examples = 0;
};

EvalReport score_predictions(std::span<const int> labels, std::span<const int> predictions, int n_classes,
                             F1Average average = F1Average::macro);

/// Plain-text table, one row per class plus totals.
std::string format_report(const EvalReport& report);
/// CSV: class,support,accuracy,f1 rows followed by overall rows.
std::string report_csv(const EvalReport& report);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per-class split: floor(n * fraction) examples of each class go to training,
/// clamped so both sides keep at least one. Members are chosen by a seeded
/// shuffle ("split" substream); both lists are returned in ascending order.
/// Throws ValidationError for a class with fewer than two examples.
SplitIndices stratified_split(std::span<const int> labels, double fraction, std::uint64_t seed);

}  // namespace moemo
