#include "pixtime/metrics.hpp"

#include <cmath>

#include "pixtime/errors.hpp"

namespace pixtime {

ForecastMetrics compute_metrics(std::span<const double> pred, std::span<const double> truth, std::size_t horizon) {
    if (pred.size() != truth.size()) {
        throw DimensionError("prediction has " + std::to_string(pred.size()) + " values, truth has " +
                             std::to_string(truth.size()));
    }
    if (horizon == 0 || pred.empty() || pred.size() % horizon != 0) {
        throw EvaluationError("no complete forecast rows to evaluate");
    }
    ForecastMetrics m;
    m.rows = pred.size() / horizon;
    m.mse_by_step.assign(horizon, 0.0);
    m.mae_by_step.assign(horizon, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t s = 0; s < horizon; ++s) {
            const double e = pred[r * horizon + s] - truth[r * horizon + s];
            m.mse_by_step[s] += e * e;
            m.mae_by_step[s] += std::abs(e);
        }
    }
    const double rows = static_cast<double>(m.rows);
    for (std::size_t s = 0; s < horizon; ++s) {
        m.mse += m.mse_by_step[s];
        m.mae += m.mae_by_step[s];
        m.mse_by_step[s] /= rows;
        m.mae_by_step[s] /= rows;
    }
    m.mse /= rows * static_cast<double>(horizon);
    m.mae /= rows * static_cast<double>(horizon);
    if (!std::isfinite(m.mse) || !std::isfinite(m.mae)) {
        throw EvaluationError("non-finite metrics");
    }
    return m;
}

namespace {

template <typename Predict>
ForecastMetrics collect(const NodeDataView& data, Split split, std::size_t batch_size, Predict&& predict) {
    const std::vector<std::size_t>& windows = data.windows(split);
    if (windows.empty()) {
        throw EvaluationError(std::string(split_name(split)) + " split of node " + std::to_string(data.node_id()) +
                              " has no windows");
    }
    if (batch_size == 0) {
        throw ConfigError("evaluation batch size must be positive");
    }
    std::vector<double> pred;
    std::vector<double> truth;
    for (std::size_t begin = 0; begin < windows.size(); begin += batch_size) {
        const std::size_t end = std::min(begin + batch_size, windows.size());
        const Batch batch = data.batch(std::span<const std::size_t>(windows.data() + begin, end - begin));
        const NDArray p = predict(batch);
        if (p.shape != batch.target.shape) {
            throw DimensionError("prediction shape " + shape_str(p.shape) + " does not match target " +
                                 shape_str(batch.target.shape));
        }
        pred.insert(pred.end(), p.data.begin(), p.data.end());
        truth.insert(truth.end(), batch.target.data.begin(), batch.target.data.end());
    }
    return compute_metrics(pred, truth, data.shape().horizon);
}

}  // namespace

ForecastMetrics evaluate(PiXTimeModel& model, const NodeDataView& data, Split split, std::size_t batch_size) {
    return collect(data, split, batch_size, [&](const Batch& b) { return model.predict(b); });
}

ForecastMetrics persistence_baseline(const NodeDataView& data, Split split, std::size_t batch_size) {
    const std::size_t t = data.shape().lookback;
    const std::size_t s = data.shape().horizon;
    return collect(data, split, batch_size, [&](const Batch& b) {
        NDArray p(b.target.shape);
        const std::size_t n_batch = b.batch_size();
        if (b.task == Task::M2M) {
            const std::size_t n = b.input.shape[2];
            for (std::size_t i = 0; i < n_batch; ++i) {
                for (std::size_t k = 0; k < n; ++k) {
                    const double last = b.input.data[(i * t + t - 1) * n + k];
                    for (std::size_t j = 0; j < s; ++j) {
                        p.data[(i * n + k) * s + j] = last;
                    }
                }
            }
            return p;
        }
        for (std::size_t i = 0; i < n_batch; ++i) {
            const double last = b.input.data[i * t + t - 1];
            for (std::size_t j = 0; j < s; ++j) {
                p.data[i * s + j] = last;
            }
        }
        return p;
    });
}

}  // namespace pixtime
