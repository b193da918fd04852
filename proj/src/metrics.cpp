#include "moemo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "moemo/errors.hpp"
#include "moemo/motion.hpp"
#include "moemo/rng.hpp"

namespace moemo {

std::string_view f1_average_name(F1Average a) { return a == F1Average::macro ? "macro" : "weighted"; }

F1Average parse_f1_average(std::string_view name) {
  if (name == "macro") return F1Average::macro;
  if (name == "weighted") return F1Average::weighted;
  throw ConfigError("unknown F1 averaging '" + std::string(name) + "'");
}

EvalReport score_predictions(std::span<const int> labels, std::span<const int> predictions, int n_classes,
                             F1Average average) {
  if (labels.size() != predictions.size()) throw ValidationError("labels and predictions differ in length");
  if (n_classes < 1) throw ValidationError("n_classes must be positive");
  if (labels.empty()) throw ValidationError("cannot score an empty test set");
  const auto c = static_cast<std::size_t>(n_classes);
  EvalReport r;
  r.average = average;
  r.n_examples = labels.size();
  r.confusion.assign(c, std::vector<std::size_t>(c, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes || predictions[i] < 0 || predictions[i] >= n_classes) {
      throw ValidationError("class index out of range");
    }
    ++r.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predictions[i])];
  }
  r.support.assign(c, 0);
  r.per_class_accuracy.assign(c, 0.0);
  r.per_class_f1.assign(c, 0.0);
  std::size_t correct = 0;
  for (std::size_t k = 0; k < c; ++k) {
    std::size_t predicted = 0;
    for (std::size_t t = 0; t < c; ++t) {
      r.support[k] += r.confusion[k][t];
      predicted += r.confusion[t][k];
    }
    const std::size_t tp = r.confusion[k][k];
    correct += tp;
    const double recall = r.support[k] ? static_cast<double>(tp) / static_cast<double>(r.support[k]) : 0.0;
    const double precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    r.per_class_accuracy[k] = recall;
    r.per_class_f1[k] = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  }
  r.overall_accuracy = r.n_examples ? static_cast<double>(correct) / static_cast<double>(r.n_examples) : 0.0;

  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    if (r.support[k] == 0) continue;
    const double w = average == F1Average::macro ? 1.0 : static_cast<double>(r.support[k]);
    num += w * r.per_class_f1[k];
    den += w;
  }
  r.macro_f1 = den > 0.0 ? num / den : 0.0;
  return r;
}

namespace {

std::string class_name(std::size_t k, std::size_t n) {
  if (n == static_cast<std::size_t>(kNumClasses)) return std::string(label_name(static_cast<int>(k)));
  return "class" + std::to_string(k);
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string format_report(const EvalReport& r) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %8s %9s %8s\n", "class", "support", "accuracy", "f1");
  os << line;
  for (std::size_t k = 0; k < r.support.size(); ++k) {
    std::snprintf(line, sizeof line, "%-10s %8zu %9.4f %8.4f\n", class_name(k, r.support.size()).c_str(),
                  r.support[k], r.per_class_accuracy[k], r.per_class_f1[k]);
    os << line;
  }
  std::snprintf(line, sizeof line, "overall accuracy %.4f  %s-F1 %.4f  (n=%zu)\n", r.overall_accuracy,
                std::string(f1_average_name(r.average)).c_str(), r.macro_f1, r.n_examples);
  os << line;
  return os.str();
}

std::string report_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "class,support,accuracy,f1\n";
  for (std::size_t k = 0; k < r.support.size(); ++k) {
    os << class_name(k, r.support.size()) << ',' << r.support[k] << ',' << fixed(r.per_class_accuracy[k], 6)
       << ',' << fixed(r.per_class_f1[k], 6) << '\n';
  }
  os << "overall," << r.n_examples << ',' << fixed(r.overall_accuracy, 6) << ',' << fixed(r.macro_f1, 6)
     << '\n';
  return os.str();
}

SplitIndices stratified_split(std::span<const int> labels, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split fraction must lie in (0, 1)");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  Rng rng(seed, "split");
  SplitIndices out;
  for (auto& [label, members] : by_class) {
    const std::size_t n = members.size();
    if (n < 2) {
      throw ValidationError("class " + std::to_string(label) + " has " + std::to_string(n) +
                            " example(s); a stratified split needs at least 2");
    }
    auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    for (std::size_t i = n; i > 1; --i) std::swap(members[i - 1], members[rng.index(i)]);
    out.train.insert(out.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.insert(out.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace moemo
