#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pixtime/data.hpp"
#include "pixtime/model.hpp"

namespace pixtime {

/// Errors on the standardized scale, averaged over windows, series and
/// horizon steps; the *_by_step vectors break them down per step.
struct ForecastMetrics {
    double mse = 0.0;
    double mae = 0.0;
    std::vector<double> mse_by_step;
    std::vector<double> mae_by_step;
    std::size_t rows = 0;  // forecast rows of length `horizon` (windows x output series)
};

/// `pred` and `truth` are flat row-major blocks of rows x horizon.
ForecastMetrics compute_metrics(std::span<const double> pred, std::span<const double> truth, std::size_t horizon);

/// Test-split metrics of `model` over every window of `split`; no gradient is recorded.
ForecastMetrics evaluate(PiXTimeModel& model, const NodeDataView& data, Split split = Split::Test,
                         std::size_t batch_size = 256);

/// Repeats the last observed value of each forecast series over the horizon.
ForecastMetrics persistence_baseline(const NodeDataView& data, Split split = Split::Test,
                                     std::size_t batch_size = 256);

}  // namespace pixtime
