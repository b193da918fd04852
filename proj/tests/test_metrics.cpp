#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "moemo/errors.hpp"
#include "moemo/metrics.hpp"
#include "moemo/rng.hpp"

using namespace moemo;

namespace {

struct Oracle {
  double accuracy;
  double macro_f1;
  std::vector<double> recall;
  std::vector<std::vector<std::size_t>> confusion;
};

/// Counts every (true, predicted) pair by scanning the lists once per cell.
Oracle brute_force(const std::vector<int>& y, const std::vector<int>& p, int k) {
  Oracle o;
  o.confusion.assign(k, std::vector<std::size_t>(k, 0));
  for (int t = 0; t < k; ++t)
    for (int q = 0; q < k; ++q)
      for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i] == t && p[i] == q) ++o.confusion[t][q];
  std::size_t correct = 0;
  for (int c = 0; c < k; ++c) correct += o.confusion[c][c];
  o.accuracy = static_cast<double>(correct) / static_cast<double>(y.size());
  double f1_sum = 0;
  int present = 0;
  for (int c = 0; c < k; ++c) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] == c && p[i] == c) ++tp;
      if (y[i] != c && p[i] == c) ++fp;
      if (y[i] == c && p[i] != c) ++fn;
    }
    const double prec = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double rec = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    o.recall.push_back(rec);
    if (tp + fn == 0) continue;
    ++present;
    f1_sum += prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
  }
  o.macro_f1 = f1_sum / present;
  return o;
}

}  // namespace

TEST_CASE("perfect predictions") {
  const std::vector<int> y{0, 1, 2, 3, 4, 5, 5};
  const EvalReport r = score_predictions(y, y, 6);
  CHECK(r.overall_accuracy == 1.0);
  CHECK(r.macro_f1 == 1.0);
  CHECK(r.n_examples == 7);
}

TEST_CASE("three-class worked example") {
  const std::vector<int> y{0, 0, 1, 1, 2, 2}, p{0, 1, 1, 1, 2, 0};
  const EvalReport r = score_predictions(y, p, 6);
  CHECK(r.overall_accuracy == doctest::Approx(4.0 / 6.0));
  CHECK(std::abs(r.macro_f1 - (0.5 + 0.8 + 2.0 / 3.0) / 3.0) < 1e-12);
  CHECK(std::abs(r.macro_f1 - 0.656) < 1e-3);
  CHECK(r.per_class_accuracy[0] == 0.5);
  CHECK(r.per_class_accuracy[1] == 1.0);
}

TEST_CASE("single-class test set") {
  const std::vector<int> y{3, 3, 3};
  const EvalReport r = score_predictions(y, y, 6);
  CHECK(r.per_class_f1[3] == 1.0);
  CHECK(r.macro_f1 == 1.0);
  CHECK(r.support[0] == 0);
  CHECK(r.per_class_f1[0] == 0.0);
}

TEST_CASE("weighted F1 weights by support") {
  const std::vector<int> y{0, 0, 0, 1}, p{0, 0, 1, 1};
  const EvalReport r = score_predictions(y, p, 2, F1Average::weighted);
  const double f0 = 2 * 1.0 * (2.0 / 3.0) / (1.0 + 2.0 / 3.0), f1 = 2 * 0.5 * 1.0 / 1.5;
  CHECK(std::abs(r.macro_f1 - (3 * f0 + f1) / 4) < 1e-12);
}

TEST_CASE("score_predictions matches a brute-force oracle") {
  Rng rng(1, "metrics");
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(60);
    std::vector<int> y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(rng.index(6));
      p[i] = rng.uniform(0, 1) < 0.4 ? y[i] : static_cast<int>(rng.index(6));
    }
    const EvalReport r = score_predictions(y, p, 6);
    const Oracle o = brute_force(y, p, 6);
    CHECK(r.confusion == o.confusion);
    CHECK(r.overall_accuracy == o.accuracy);
    CHECK(std::abs(r.macro_f1 - o.macro_f1) < 1e-15);
    for (int c = 0; c < 6; ++c) CHECK(r.per_class_accuracy[c] == o.recall[c]);
    for (int c = 0; c < 6; ++c) {
      std::size_t row = 0;
      for (auto v : r.confusion[c]) row += v;
      CHECK(row == r.support[c]);
    }
  }
}

TEST_CASE("invalid inputs") {
  const std::vector<int> y{0, 1}, p{0};
  CHECK_THROWS_AS(score_predictions(y, p, 6), ValidationError);
  const std::vector<int> bad{0, 7};
  CHECK_THROWS_AS(score_predictions(bad, bad, 6), ValidationError);
  CHECK_THROWS_AS(score_predictions(std::vector<int>{}, std::vector<int>{}, 6), ValidationError);
}

TEST_CASE("report text and csv") {
  const std::vector<int> y{0, 1}, p{0, 0};
  const EvalReport r = score_predictions(y, p, 6);
  CHECK(format_report(r).find("joy") != std::string::npos);
  CHECK(report_csv(r).rfind("class,support,accuracy,f1\n", 0) == 0);
}

namespace {

std::vector<int> labels_with_counts(const std::vector<std::size_t>& counts) {
  std::vector<int> out;
  for (std::size_t c = 0; c < counts.size(); ++c) out.insert(out.end(), counts[c], static_cast<int>(c));
  return out;
}

}  // namespace

TEST_CASE("stratified split: floor per class") {
  // Class counts of the six-emotion database in label order joy, angry, disgust, fear, sadness, surprise.
  const std::vector<std::size_t> counts{219, 255, 86, 334, 358, 260};
  const auto labels = labels_with_counts(counts);
  const SplitIndices s = stratified_split(labels, 0.9, 0);
  CHECK(s.train.size() == 1359);
  CHECK(s.test.size() == 153);
  std::vector<std::size_t> test_counts(6, 0);
  for (auto i : s.test) ++test_counts[static_cast<std::size_t>(labels[i])];
  for (std::size_t c = 0; c < 6; ++c) {
    const auto want = counts[c] - static_cast<std::size_t>(std::floor(static_cast<double>(counts[c]) * 0.9));
    CHECK(test_counts[c] == want);
  }
}

TEST_CASE("stratified split properties") {
  const auto labels = labels_with_counts({2, 2, 2, 2, 2, 2});
  const SplitIndices half = stratified_split(labels, 0.5, 3);
  CHECK(half.train.size() == 6);
  CHECK(half.test.size() == 6);

  Rng rng(4, "t");
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> counts(6);
    for (auto& c : counts) c = 2 + rng.index(40);
    const auto y = labels_with_counts(counts);
    const double f = rng.uniform(0.05, 0.95);
    const auto seed = static_cast<std::uint64_t>(trial);
    const SplitIndices a = stratified_split(y, f, seed);
    const SplitIndices b = stratified_split(y, f, seed);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    std::vector<std::size_t> all = a.train;
    all.insert(all.end(), a.test.begin(), a.test.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
    CHECK(std::is_sorted(a.train.begin(), a.train.end()));
  }
  CHECK_FALSE(stratified_split(labels_with_counts({50, 50}), 0.5, 1).test ==
              stratified_split(labels_with_counts({50, 50}), 0.5, 2).test);
  CHECK_THROWS_AS(stratified_split(labels_with_counts({1, 5}), 0.9, 0), ValidationError);
  CHECK_THROWS_AS(stratified_split(labels, 1.0, 0), ValidationError);
}
