#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fbdnn/funcdata.hpp"
#include "fbdnn/network.hpp"

namespace fbdnn {

/// Records which dataset rows a pipeline stage read. Tests use it to check
/// that held-out rows stay untouched until they are meant to be used.
struct AccessLog {
  std::vector<std::size_t> rows;

  void record(std::span<const std::size_t> touched) {
    rows.insert(rows.end(), touched.begin(), touched.end());
  }
  bool touched(std::size_t row) const;
};

/// Scores of the listed rows, one output row per entry of `rows`.
ScoreMatrix project_rows_serial(const FunctionalDataset& dataset,
                                std::span<const std::size_t> rows,
                                const Projector& projector);
/// OpenMP version; `workers` <= 0 uses the runtime default. Bitwise equal to
/// the serial kernel.
ScoreMatrix project_rows(const FunctionalDataset& dataset,
                         std::span<const std::size_t> rows,
                         const Projector& projector, int workers = 0,
                         AccessLog* log = nullptr);

/// Eval-mode network outputs for every row of `scores`, row-major
/// rows x output_dim.
std::vector<double> predict_outputs_serial(const NetworkParams& params,
                                           const ScoreMatrix& scores);
std::vector<double> predict_outputs(const NetworkParams& params,
                                    const ScoreMatrix& scores, int workers = 0);

/// Predicted 1-based labels from a row-major output table.
std::vector<int> labels_from_outputs(std::span<const double> outputs,
                                     std::size_t width, OutputMode mode);

}  // namespace fbdnn
