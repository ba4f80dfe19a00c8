#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "bailcnn/errors.hpp"

namespace bailcnn {

/// 2x2 confusion counts; rows are the true class, columns the predicted
/// class, in [Granted, Dismissed] order.
struct ConfusionMatrix2 {
  uint64_t counts[2][2] = {{0, 0}, {0, 0}};

  uint64_t total() const {
    return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
  }
  uint64_t trace() const { return counts[0][0] + counts[1][1]; }
  uint64_t row_sum(int r) const { return counts[r][0] + counts[r][1]; }
  uint64_t col_sum(int c) const { return counts[0][c] + counts[1][c]; }
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  ClassMetrics granted;
  ClassMetrics dismissed;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
};

/// Tallies (truth, prediction) pairs; 0 = Granted, 1 = Dismissed.
inline ConfusionMatrix2 confusion(const std::vector<uint8_t>& pred,
                                  const std::vector<uint8_t>& truth) {
  if (pred.size() != truth.size()) {
    throw DataError("confusion: prediction/truth length mismatch (" +
                    std::to_string(pred.size()) + " vs " +
                    std::to_string(truth.size()) + ")");
  }
  if (pred.empty()) throw DataError("confusion: empty input");
  ConfusionMatrix2 cm;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] > 1 || truth[i] > 1) {
      throw DataError("confusion: labels must be 0 or 1");
    }
    ++cm.counts[truth[i]][pred[i]];
  }
  return cm;
}

/// Per-class precision/recall/F1, macro-F1 and accuracy. 0/0 ratios are
/// defined as 0 (degenerate single-class predictions).
inline EvalReport compute_metrics(const ConfusionMatrix2& cm) {
  if (cm.total() == 0) throw DataError("compute_metrics: empty matrix");
  auto ratio = [](uint64_t num, uint64_t den) {
    return den == 0 ? 0.0
                    : static_cast<double>(num) / static_cast<double>(den);
  };
  auto per_class = [&](int c) {
    ClassMetrics m;
    m.precision = ratio(cm.counts[c][c], cm.col_sum(c));
    m.recall = ratio(cm.counts[c][c], cm.row_sum(c));
    m.f1 = (m.precision + m.recall) == 0.0
               ? 0.0
               : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    return m;
  };
  EvalReport report;
  report.granted = per_class(0);
  report.dismissed = per_class(1);
  report.macro_f1 = (report.granted.f1 + report.dismissed.f1) / 2.0;
  report.accuracy = static_cast<double>(cm.trace()) /
                    static_cast<double>(cm.total());
  return report;
}

/// Decimal half-up rounding, used only for table display and comparisons
/// against published two-decimal figures.
inline double round_half_up(double value, int places = 2) {
  const double scale = std::pow(10.0, places);
  return std::floor(value * scale + 0.5) / scale;
}

inline EvalReport round_report(const EvalReport& report, int places = 2) {
  EvalReport out = report;
  for (ClassMetrics* m : {&out.granted, &out.dismissed}) {
    m->precision = round_half_up(m->precision, places);
    m->recall = round_half_up(m->recall, places);
    m->f1 = round_half_up(m->f1, places);
  }
  out.macro_f1 = round_half_up(out.macro_f1, places);
  out.accuracy = round_half_up(out.accuracy, places);
  return out;
}

inline nlohmann::json to_json(const ConfusionMatrix2& cm) {
  return nlohmann::json{
      {"granted", {{"granted", cm.counts[0][0]}, {"dismissed", cm.counts[0][1]}}},
      {"dismissed",
       {{"granted", cm.counts[1][0]}, {"dismissed", cm.counts[1][1]}}}};
}

inline nlohmann::json to_json(const EvalReport& r) {
  auto cls = [](const ClassMetrics& m) {
    return nlohmann::json{
        {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
  };
  return nlohmann::json{{"granted", cls(r.granted)},
                        {"dismissed", cls(r.dismissed)},
                        {"macro_f1", r.macro_f1},
                        {"accuracy", r.accuracy}};
}

namespace detail {

inline std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", round_half_up(v, 2));
  return buf;
}

}  // namespace detail

/// Markdown table in the layout the published confusion tables use:
/// count rows, then per-class precision/recall/F1, then accuracy.
inline std::string report_markdown(const ConfusionMatrix2& cm,
                                   const EvalReport& r) {
  std::string out;
  out += "|  | Granted | Dismissed |\n";
  out += "|---|---|---|\n";
  out += "| **Granted** | " + std::to_string(cm.counts[0][0]) + " | " +
         std::to_string(cm.counts[0][1]) + " |\n";
  out += "| **Dismissed** | " + std::to_string(cm.counts[1][0]) + " | " +
         std::to_string(cm.counts[1][1]) + " |\n";
  out += "| **Precision** | " + detail::fixed2(r.granted.precision) + " | " +
         detail::fixed2(r.dismissed.precision) + " |\n";
  out += "| **Recall** | " + detail::fixed2(r.granted.recall) + " | " +
         detail::fixed2(r.dismissed.recall) + " |\n";
  out += "| **F1 Score** | " + detail::fixed2(r.granted.f1) + " | " +
         detail::fixed2(r.dismissed.f1) + " |\n";
  out += "| **Accuracy** | " + detail::fixed2(r.accuracy) + " ||\n";
  return out;
}

}  // namespace bailcnn
