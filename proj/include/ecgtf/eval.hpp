#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "ecgtf/ingest.hpp"

namespace ecgtf::eval {

/// counts[t][p]: records of true class t predicted as p, order N, A, O, ~.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kClassCount>, kClassCount> counts{};

  std::size_t total() const;
  std::size_t row_sum(int c) const;
  std::size_t column_sum(int c) const;
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const Rhythm> predictions, std::span<const Rhythm> labels);

/// Absent where the denominator is zero.
struct PrecisionRecall {
  std::array<std::optional<double>, kClassCount> precision;
  std::array<std::optional<double>, kClassCount> recall;
};

PrecisionRecall precision_recall(const ConfusionMatrix& cm);

/// F1_c = 2 cm[c][c] / (row_c + column_c); absent when both sums are zero.
/// mean3 averages Normal, AF and Other; mean4 all classes. A mean is absent
/// if any class it covers is.
struct F1Scores {
  std::array<std::optional<double>, kClassCount> per_class;
  std::optional<double> mean3;
  std::optional<double> mean4;
};

F1Scores challenge_f1(const ConfusionMatrix& cm);

struct MetricsReport {
  ConfusionMatrix confusion;
  PrecisionRecall pr;
  F1Scores f1;
};

MetricsReport report(const ConfusionMatrix& cm);

/// JSON with null for absent values.
std::string to_json(const MetricsReport& report);

/// Aligned text table, rows true class, columns predicted.
std::string format_confusion(const ConfusionMatrix& cm);

/// Per-class precision/recall table and the F1 lines, values to three decimals.
std::string format_metrics(const MetricsReport& report);

}  // namespace ecgtf::eval
