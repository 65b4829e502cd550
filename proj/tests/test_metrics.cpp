#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "flow/error.hpp"
#include "flow/metrics.hpp"

using namespace flow;

namespace {

// Direct evaluation of sum_i w_i * 2 TP_i / (2 TP_i + FP_i + FN_i) from the
// raw prediction list, without going through the confusion matrix helpers.
double brute_force_f1(const std::vector<int>& preds, const std::vector<int>& labels, int k) {
  double total = 0.0;
  const double n = static_cast<double>(labels.size());
  for (int c = 0; c < k; ++c) {
    double tp = 0, fp = 0, fn = 0, support = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) ++support;
      if (preds[i] == c && labels[i] == c) ++tp;
      if (preds[i] == c && labels[i] != c) ++fp;
      if (preds[i] != c && labels[i] == c) ++fn;
    }
    const double denom = 2 * tp + fp + fn;
    if (denom > 0) total += (support / n) * (2 * tp / denom);
  }
  return total;
}

}  // namespace

TEST(Confusion, PerfectPredictionsAreDiagonal) {
  const std::vector<int> y{0, 1, 2, 2, 1};
  const ConfusionMatrix cm = confusion(y, y, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) EXPECT_EQ(cm(i, j), 0);
  EXPECT_EQ(cm(2, 2), 2);
  EXPECT_EQ(cm.total(), 5);
}

TEST(Confusion, SingleClassPredictionsFillOneColumn) {
  const std::vector<int> labels{0, 1, 2, 1}, preds{1, 1, 1, 1};
  const ConfusionMatrix cm = confusion(preds, labels, 3);
  EXPECT_EQ(cm.predicted(1), 4);
  EXPECT_EQ(cm.predicted(0), 0);
  EXPECT_EQ(cm.predicted(2), 0);
}

TEST(Confusion, RowSumsAreSupport) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> cls(0, 3);
  std::vector<int> p(200), y(200);
  for (int i = 0; i < 200; ++i) {
    p[i] = cls(rng);
    y[i] = cls(rng);
  }
  const ConfusionMatrix cm = confusion(p, y, 4);
  for (int c = 0; c < 4; ++c) EXPECT_EQ(cm.support(c), std::count(y.begin(), y.end(), c));
  EXPECT_EQ(cm.total(), 200);
}

TEST(Confusion, Errors) {
  const std::vector<int> a{0, 1}, b{0};
  EXPECT_THROW(confusion(a, b, 2), Error);
  const std::vector<int> out{0, 2};
  EXPECT_THROW(confusion(out, a, 2), Error);
}

TEST(Confusion, Csv) {
  const ConfusionMatrix cm = ConfusionMatrix::from_rows({{3, 1}, {2, 4}});
  EXPECT_EQ(cm.to_csv(), "true\\pred,0,1\n0,3,1\n1,2,4\n");
}

TEST(Accuracy, Examples) {
  EXPECT_EQ(accuracy(ConfusionMatrix::from_rows({{2, 0}, {0, 5}})), 1.0);
  EXPECT_EQ(accuracy(ConfusionMatrix::from_rows({{0, 2}, {5, 0}})), 0.0);
  EXPECT_NEAR(accuracy(ConfusionMatrix::from_rows({{3, 1}, {2, 4}})), 0.7, 1e-12);
  EXPECT_THROW(accuracy(ConfusionMatrix(3)), Error);
}

TEST(WeightedF1, Examples) {
  EXPECT_EQ(weighted_f1(ConfusionMatrix::from_rows({{2, 0}, {0, 5}})), 1.0);
  const double f0 = 6.0 / 9.0, f1 = 8.0 / 11.0;
  const double expected = 0.4 * f0 + 0.6 * f1;
  EXPECT_NEAR(weighted_f1(ConfusionMatrix::from_rows({{3, 1}, {2, 4}})), expected, 1e-12);
  EXPECT_NEAR(expected, 0.7030, 5e-5);
  EXPECT_EQ(weighted_f1(ConfusionMatrix::from_rows({{7}})), 1.0);
  EXPECT_THROW(weighted_f1(ConfusionMatrix(2)), Error);
}

TEST(WeightedF1, ZeroSupportClassContributesNothing) {
  // class 2 never occurs and is never predicted
  const ConfusionMatrix cm = ConfusionMatrix::from_rows({{3, 1, 0}, {2, 4, 0}, {0, 0, 0}});
  EXPECT_NEAR(weighted_f1(cm), weighted_f1(ConfusionMatrix::from_rows({{3, 1}, {2, 4}})), 1e-12);
}

TEST(WeightedF1, MatchesBruteForceOnRandomMatrices) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const int k = 2 + trial % 5;
    std::uniform_int_distribution<int> cls(0, k - 1);
    const int n = 1 + trial % 40;
    std::vector<int> p(n), y(n);
    for (int i = 0; i < n; ++i) {
      y[i] = cls(rng);
      p[i] = (rng() % 3 == 0) ? y[i] : cls(rng);
    }
    const ConfusionMatrix cm = confusion(p, y, k);
    ASSERT_NEAR(weighted_f1(cm), brute_force_f1(p, y, k), 1e-12);
    double correct = 0;
    for (int i = 0; i < n; ++i) correct += p[i] == y[i];
    ASSERT_NEAR(accuracy(cm), correct / n, 1e-12);
    ASSERT_GE(weighted_f1(cm), 0.0);
    ASSERT_LE(weighted_f1(cm), 1.0 + 1e-12);
  }
}

TEST(WeightedF1, OneOnlyForDiagonal) {
  EXPECT_LT(weighted_f1(ConfusionMatrix::from_rows({{5, 1}, {0, 5}})), 1.0);
  EXPECT_LT(accuracy(ConfusionMatrix::from_rows({{5, 1}, {0, 5}})), 1.0);
}

TEST(WeightedF1, InvariantUnderClassRelabeling) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 4;
    std::vector<std::vector<std::int64_t>> rows(k, std::vector<std::int64_t>(k));
    for (auto& r : rows)
      for (auto& v : r) v = static_cast<std::int64_t>(rng() % 6);
    rows[0][0] += 1;
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<std::int64_t>> permuted(k, std::vector<std::int64_t>(k));
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) permuted[perm[i]][perm[j]] = rows[i][j];
    const auto a = ConfusionMatrix::from_rows(rows), b = ConfusionMatrix::from_rows(permuted);
    EXPECT_NEAR(weighted_f1(a), weighted_f1(b), 1e-12);
    EXPECT_NEAR(accuracy(a), accuracy(b), 1e-12);
  }
}
