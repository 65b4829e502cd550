#include "flow/metrics.hpp"

#include <numeric>
#include <sstream>

#include "flow/error.hpp"

namespace flow {

ConfusionMatrix::ConfusionMatrix(int classes)
    : k(classes), counts(static_cast<std::size_t>(classes) * static_cast<std::size_t>(classes), 0) {
  if (classes < 0) fail(ErrorKind::InvalidInput, "confusion matrix: negative class count");
}

ConfusionMatrix ConfusionMatrix::from_rows(const std::vector<std::vector<std::int64_t>>& rows) {
  ConfusionMatrix cm(static_cast<int>(rows.size()));
  for (int i = 0; i < cm.k; ++i) {
    if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != cm.k)
      fail(ErrorKind::InvalidInput, "confusion matrix: rows must be square");
    for (int j = 0; j < cm.k; ++j) {
      const auto v = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (v < 0) fail(ErrorKind::InvalidInput, "confusion matrix: negative count");
      cm.at(i, j) = v;
    }
  }
  return cm;
}

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::support(int cls) const {
  std::int64_t s = 0;
  for (int j = 0; j < k; ++j) s += (*this)(cls, j);
  return s;
}

std::int64_t ConfusionMatrix::predicted(int cls) const {
  std::int64_t s = 0;
  for (int i = 0; i < k; ++i) s += (*this)(i, cls);
  return s;
}

std::string ConfusionMatrix::to_csv() const {
  std::ostringstream out;
  out << "true\\pred";
  for (int j = 0; j < k; ++j) out << ',' << j;
  out << '\n';
  for (int i = 0; i < k; ++i) {
    out << i;
    for (int j = 0; j < k; ++j) out << ',' << (*this)(i, j);
    out << '\n';
  }
  return out.str();
}

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels, int k) {
  if (preds.size() != labels.size())
    fail(ErrorKind::InvalidInput, "confusion: predictions and labels differ in length");
  if (k < 1) fail(ErrorKind::InvalidInput, "confusion: k must be >= 1");
  ConfusionMatrix cm(k);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || preds[i] >= k || labels[i] < 0 || labels[i] >= k)
      fail(ErrorKind::InvalidInput, "confusion: class index out of range");
    ++cm.at(labels[i], preds[i]);
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total <= 0) fail(ErrorKind::InvalidInput, "accuracy: empty confusion matrix");
  std::int64_t correct = 0;
  for (int i = 0; i < cm.k; ++i) correct += cm(i, i);
  return static_cast<double>(correct) / static_cast<double>(total);
}

double weighted_f1(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total <= 0) fail(ErrorKind::InvalidInput, "weighted_f1: empty confusion matrix");
  double f1 = 0.0;
  for (int i = 0; i < cm.k; ++i) {
    const auto tp = cm(i, i);
    const auto support = cm.support(i);
    const auto fn = support - tp;
    const auto fp = cm.predicted(i) - tp;
    const auto denom = 2 * tp + fp + fn;
    if (denom == 0 || support == 0) continue;
    const double w = static_cast<double>(support) / static_cast<double>(total);
    f1 += w * 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
  return f1;
}

}  // namespace flow
