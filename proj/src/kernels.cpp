#include "fbdnn/kernels.hpp"

#include <algorithm>

#include <omp.h>

#include "fbdnn/error.hpp"

namespace fbdnn {

namespace {

void check_rows(const FunctionalDataset& dataset, std::span<const std::size_t> rows) {
  for (std::size_t r : rows)
    if (r >= dataset.size())
      throw ShapeError("row " + std::to_string(r) + " outside dataset of " +
                       std::to_string(dataset.size()));
}

int thread_count(int workers) {
  return workers > 0 ? workers : omp_get_max_threads();
}

}  // namespace

bool AccessLog::touched(std::size_t row) const {
  return std::find(rows.begin(), rows.end(), row) != rows.end();
}

ScoreMatrix project_rows_serial(const FunctionalDataset& dataset,
                                std::span<const std::size_t> rows,
                                const Projector& projector) {
  check_rows(dataset, rows);
  ScoreMatrix out(rows.size(), projector.total_scores());
  for (std::size_t i = 0; i < rows.size(); ++i)
    projector.project_into(dataset.samples[rows[i]], out.row(i));
  return out;
}

ScoreMatrix project_rows(const FunctionalDataset& dataset,
                         std::span<const std::size_t> rows,
                         const Projector& projector, int workers, AccessLog* log) {
  check_rows(dataset, rows);
  if (log) log->record(rows);
  ScoreMatrix out(rows.size(), projector.total_scores());
  const auto n = static_cast<std::ptrdiff_t>(rows.size());
#pragma omp parallel for schedule(static) num_threads(thread_count(workers))
  for (std::ptrdiff_t i = 0; i < n; ++i)
    projector.project_into(dataset.samples[rows[i]], out.row(static_cast<std::size_t>(i)));
  return out;
}

std::vector<double> predict_outputs_serial(const NetworkParams& params,
                                           const ScoreMatrix& scores) {
  const std::size_t width = params.arch().output_dim;
  std::vector<double> out(scores.rows * width);
  for (std::size_t i = 0; i < scores.rows; ++i) {
    const auto o = forward(params, scores.row(i));
    std::copy(o.begin(), o.end(), out.begin() + static_cast<std::ptrdiff_t>(i * width));
  }
  return out;
}

std::vector<double> predict_outputs(const NetworkParams& params,
                                    const ScoreMatrix& scores, int workers) {
  const std::size_t width = params.arch().output_dim;
  std::vector<double> out(scores.rows * width);
  const auto n = static_cast<std::ptrdiff_t>(scores.rows);
#pragma omp parallel for schedule(static) num_threads(thread_count(workers))
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto o = forward(params, scores.row(static_cast<std::size_t>(i)));
    std::copy(o.begin(), o.end(), out.begin() + i * static_cast<std::ptrdiff_t>(width));
  }
  return out;
}

std::vector<int> labels_from_outputs(std::span<const double> outputs, std::size_t width,
                                     OutputMode mode) {
  if (width == 0 || outputs.size() % width != 0)
    throw ShapeError("output table size is not a multiple of its width");
  std::vector<int> labels(outputs.size() / width);
  for (std::size_t i = 0; i < labels.size(); ++i)
    labels[i] = predict_label(outputs.subspan(i * width, width), mode);
  return labels;
}

}  // namespace fbdnn
