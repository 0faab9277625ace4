#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pixtime/model.hpp"

namespace pixtime {

/// Row-major (time x variable) matrix.
struct TimeMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    TimeMatrix() = default;
    TimeMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    std::vector<double> column(std::size_t c) const;
};

struct RawDataset {
    std::vector<std::string> column_names;  // variable-category labels, unique
    TimeMatrix values;
    double dt = 1.0;
    bool had_timestamp = false;

    std::size_t column_index(const std::string& name) const;
};

/// Reads a comma-separated file with a header row. A leading column named
/// "date" is treated as a timestamp and dropped.
RawDataset load_csv(const std::filesystem::path& path);
/// Writes values with shortest round-trip formatting, so load_csv(write_csv(d)) == d.
void write_csv(const std::filesystem::path& path, const RawDataset& data);

struct SplitSpec {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;

    void validate() const;
};

/// Chronological split borders: train [0, train_end), val [train_end, val_end),
/// test [val_end, rows).
struct SplitBounds {
    std::size_t train_end = 0;
    std::size_t val_end = 0;
    std::size_t rows = 0;
};

SplitBounds split_bounds(std::size_t rows, const SplitSpec& split);

struct ColumnStats {
    double mean = 0.0;
    double std = 1.0;
};

struct StandardizedDataset {
    RawDataset data;
    std::vector<ColumnStats> stats;
};

/// Per-column z-score with mean and (population) std of the train rows only;
/// std is floored at 1e-8.
StandardizedDataset standardize(const RawDataset& data, const SplitSpec& split);

enum class Pooling { Stride, Mean };

/// Keeps rows 0, k, 2k, ... (or block means with Pooling::Mean).
TimeMatrix downsample(const TimeMatrix& m, std::size_t stride, Pooling pooling = Pooling::Stride);
RawDataset downsample(const RawDataset& d, std::size_t stride, Pooling pooling = Pooling::Stride);

/// Start indices 0 .. length-T-S of every full (look-back, horizon) window.
std::vector<std::size_t> make_windows(std::size_t length, std::size_t lookback, std::size_t horizon);

/// Strided ownership {node_id, node_id + n_nodes, ...} of [0, n_windows).
std::vector<std::size_t> partition_windows(std::size_t n_windows, std::size_t n_nodes, std::size_t node_id);

/// Each node draws `subset_size` distinct auxiliary ids (target excluded)
/// from a generator seeded by (seed, node id).
std::vector<std::vector<std::size_t>> assign_variable_subsets(std::span<const std::size_t> all_var_ids,
                                                               std::size_t target_id, std::size_t n_nodes,
                                                               std::size_t subset_size, std::uint64_t seed);

struct SyntheticSpec {
    std::size_t n_vars = 8;  // auxiliaries + one target (the last column)
    std::size_t length = 4000;
    std::uint64_t seed = 0;
    double noise = 0.1;
    std::size_t drivers = 3;       // auxiliaries that feed the target
    double seasonal_weight = 0.5;  // weight of the target's own seasonal term
    std::size_t max_lag = 24;
    double min_period = 12.0;
    double max_period = 96.0;
};

/// Ground truth of a synthetic draw: which auxiliaries drive the target.
struct SyntheticTruth {
    std::vector<std::size_t> drivers;
    std::vector<double> weights;
    std::vector<std::size_t> lags;
    std::vector<double> periods;
};

/// Auxiliary k: sin(2 pi t / p_k + phi_k) + noise. Target: normalized weighted
/// sum of lagged drivers plus its own seasonal term plus noise.
RawDataset generate_synthetic(const SyntheticSpec& spec, SyntheticTruth* truth = nullptr);

enum class Split { Train, Val, Test };

const char* split_name(Split s);

/// A node's window view over a standardized series at the node's own
/// granularity. Train (and val) windows are strided across the `group_size`
/// nodes that share the series; test windows are never partitioned.
class NodeDataView {
public:
    NodeDataView(const RawDataset& series, NodeShapeConfig shape, Task task, const SplitSpec& split,
                 std::size_t group_rank = 0, std::size_t group_size = 1);

    const NodeShapeConfig& shape() const noexcept { return shape_; }
    Task task() const noexcept { return task_; }
    int node_id() const noexcept { return shape_.node_id; }
    const RawDataset& series() const noexcept { return series_; }

    std::size_t group_rank() const noexcept { return group_rank_; }
    std::size_t group_size() const noexcept { return group_size_; }

    const std::vector<std::size_t>& windows(Split s) const;
    /// Every train window of the split before partitioning across the group.
    const std::vector<std::size_t>& train_pool() const noexcept { return train_pool_; }
    /// Variables forecast by this node: {target} for M2U/U2U, aux + target for M2M.
    std::vector<std::size_t> output_ids() const;

    ForecastSample sample(std::size_t start) const;
    Batch batch(std::span<const std::size_t> starts) const;

private:
    RawDataset series_;
    NodeShapeConfig shape_;
    Task task_;
    std::size_t group_rank_;
    std::size_t group_size_;
    std::vector<std::size_t> train_pool_;
    std::vector<std::size_t> train_;
    std::vector<std::size_t> val_;
    std::vector<std::size_t> test_;
};

}  // namespace pixtime
