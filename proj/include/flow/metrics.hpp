#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace flow {

// k x k counts, entry (true, predicted).
struct ConfusionMatrix {
  int k = 0;
  std::vector<std::int64_t> counts;

  explicit ConfusionMatrix(int classes = 0);
  static ConfusionMatrix from_rows(const std::vector<std::vector<std::int64_t>>& rows);

  std::int64_t operator()(int truth, int pred) const { return counts[static_cast<std::size_t>(truth) * k + pred]; }
  std::int64_t& at(int truth, int pred) { return counts[static_cast<std::size_t>(truth) * k + pred]; }
  std::int64_t total() const;
  std::int64_t support(int cls) const;  // row sum
  std::int64_t predicted(int cls) const;  // column sum

  std::string to_csv() const;
};

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels, int k);

// trace / total.
double accuracy(const ConfusionMatrix& cm);

// Sum over classes of w_i * 2 TP_i / (2 TP_i + FP_i + FN_i), with w_i the
// class's share of the true labels. Classes with a zero denominator add 0.
double weighted_f1(const ConfusionMatrix& cm);

}  // namespace flow
