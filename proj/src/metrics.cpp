#include <cmath>
#include <string>

#include "essc/error.hpp"
#include "essc/pipeline.hpp"

namespace essc::pipeline {

std::uint64_t MetricsReport::total() const {
  std::uint64_t n = 0;
  for (const auto& row : confusion) {
    for (auto c : row) n += c;
  }
  return n;
}

MetricsReport metrics_from_confusion(const Confusion& confusion) {
  MetricsReport m;
  m.confusion = confusion;
  const std::uint64_t n = m.total();
  if (n == 0) fail(ErrorKind::EmptyDataset, "no predictions to score");
  const double total = static_cast<double>(n);

  std::array<std::uint64_t, kNumStages> row{}, col{};
  std::uint64_t trace = 0;
  for (std::size_t i = 0; i < kNumStages; ++i) {
    trace += confusion[i][i];
    for (std::size_t j = 0; j < kNumStages; ++j) {
      row[i] += confusion[i][j];
      col[j] += confusion[i][j];
    }
  }

  double f1_sum = 0.0;
  std::size_t f1_classes = 0;
  for (std::size_t c = 0; c < kNumStages; ++c) {
    const std::uint64_t tp = confusion[c][c];
    const std::uint64_t fn = row[c] - tp;
    const std::uint64_t fp = col[c] - tp;
    const std::uint64_t tn = n - tp - fn - fp;
    m.per_stage_accuracy[c] = 100.0 * static_cast<double>(tp + tn) / total;
    const std::uint64_t denom = 2 * tp + fp + fn;
    if (denom > 0) {
      f1_sum += 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
      ++f1_classes;
    }
  }
  m.macro_f1 = f1_classes ? f1_sum / static_cast<double>(f1_classes) : 0.0;
  m.overall_accuracy = 100.0 * static_cast<double>(trace) / total;

  const double po = static_cast<double>(trace) / total;
  double pe = 0.0;
  for (std::size_t c = 0; c < kNumStages; ++c) pe += static_cast<double>(row[c]) * static_cast<double>(col[c]);
  pe /= total * total;
  if (pe >= 1.0) {
    m.cohen_kappa = po >= 1.0 ? 1.0 : 0.0;
  } else {
    m.cohen_kappa = (po - pe) / (1.0 - pe);
  }
  return m;
}

MetricsReport metrics_from_predictions(std::span<const SleepStage> truth, std::span<const SleepStage> predicted) {
  if (truth.size() != predicted.size()) {
    fail(ErrorKind::DimensionMismatch, std::to_string(truth.size()) + " labels vs " +
                                           std::to_string(predicted.size()) + " predictions");
  }
  if (truth.empty()) fail(ErrorKind::EmptyDataset, "no predictions to score");
  Confusion c{};
  for (std::size_t i = 0; i < truth.size(); ++i) ++c[stage_index(truth[i])][stage_index(predicted[i])];
  return metrics_from_confusion(c);
}

double mean(std::span<const double> xs) {
  if (xs.empty()) fail(ErrorKind::EmptyInput, "mean of an empty sequence");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double std_dev(std::span<const double> xs) {
  const double mu = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

}  // namespace essc::pipeline
