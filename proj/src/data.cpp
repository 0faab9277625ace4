#include "pixtime/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "pixtime/errors.hpp"

namespace pixtime {

std::vector<double> TimeMatrix::column(std::size_t c) const {
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        out[r] = (*this)(r, c);
    }
    return out;
}

std::size_t RawDataset::column_index(const std::string& name) const {
    auto it = std::find(column_names.begin(), column_names.end(), name);
    if (it == column_names.end()) {
        throw DataError("dataset has no column named '" + name + "'");
    }
    return static_cast<std::size_t>(it - column_names.begin());
}

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) {
        ++b;
    }
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) {
        --e;
    }
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return cells;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

RawDataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw FormatError(path.string() + ": empty file");
    }
    std::vector<std::string> header = split_line(line);
    RawDataset out;
    std::size_t first = 0;
    if (!header.empty() && lower(header[0]) == "date") {
        out.had_timestamp = true;
        first = 1;
    }
    out.column_names.assign(header.begin() + static_cast<std::ptrdiff_t>(first), header.end());
    if (out.column_names.empty()) {
        throw FormatError(path.string() + ": header has no value columns");
    }
    std::set<std::string> unique(out.column_names.begin(), out.column_names.end());
    if (unique.size() != out.column_names.size()) {
        throw FormatError(path.string() + ": duplicate column names in header");
    }

    const std::size_t cols = out.column_names.size();
    std::vector<double> values;
    std::size_t row = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size()) {
            throw FormatError(path.string() + ": line " + std::to_string(line_no) + " has " +
                              std::to_string(cells.size()) + " cells, expected " + std::to_string(header.size()));
        }
        for (std::size_t c = first; c < cells.size(); ++c) {
            const std::string& cell = cells[c];
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty() || !std::isfinite(v)) {
                throw ParseError(path.string() + ": row " + std::to_string(row + 1) + ", column " +
                                 std::to_string(c + 1) + " ('" + header[c] + "'): '" + cell + "' is not a number");
            }
            values.push_back(v);
        }
        ++row;
    }
    if (row == 0) {
        throw DataError(path.string() + ": no data rows");
    }
    out.values.rows = row;
    out.values.cols = cols;
    out.values.values = std::move(values);
    return out;
}

void write_csv(const std::filesystem::path& path, const RawDataset& data) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    for (std::size_t c = 0; c < data.column_names.size(); ++c) {
        out << (c == 0 ? "" : ",") << data.column_names[c];
    }
    out << '\n';
    char buf[64];
    for (std::size_t r = 0; r < data.values.rows; ++r) {
        for (std::size_t c = 0; c < data.values.cols; ++c) {
            const auto res = std::to_chars(buf, buf + sizeof(buf), data.values(r, c));
            if (c > 0) {
                out << ',';
            }
            out.write(buf, res.ptr - buf);
        }
        out << '\n';
    }
}

void SplitSpec::validate() const {
    if (!(train > 0.0 && val > 0.0 && test > 0.0)) {
        throw ConfigError("split fractions must all be positive");
    }
    if (std::abs(train + val + test - 1.0) > 1e-9) {
        throw ConfigError("split fractions must sum to 1");
    }
}

SplitBounds split_bounds(std::size_t rows, const SplitSpec& split) {
    split.validate();
    SplitBounds b;
    b.rows = rows;
    b.train_end = static_cast<std::size_t>(std::floor(static_cast<double>(rows) * split.train));
    b.val_end = b.train_end + static_cast<std::size_t>(std::floor(static_cast<double>(rows) * split.val));
    return b;
}

StandardizedDataset standardize(const RawDataset& data, const SplitSpec& split) {
    const SplitBounds b = split_bounds(data.values.rows, split);
    if (b.train_end == 0) {
        throw DataError("train split is empty for " + std::to_string(data.values.rows) + " rows");
    }
    StandardizedDataset out{data, {}};
    const TimeMatrix& m = data.values;
    const double n = static_cast<double>(b.train_end);
    for (std::size_t c = 0; c < m.cols; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < b.train_end; ++r) {
            mean += m(r, c);
        }
        mean /= n;
        double var = 0.0;
        for (std::size_t r = 0; r < b.train_end; ++r) {
            const double d = m(r, c) - mean;
            var += d * d;
        }
        const double sd = std::max(std::sqrt(var / n), 1e-8);
        out.stats.push_back({mean, sd});
        for (std::size_t r = 0; r < m.rows; ++r) {
            out.data.values(r, c) = (m(r, c) - mean) / sd;
        }
    }
    return out;
}

TimeMatrix downsample(const TimeMatrix& m, std::size_t stride, Pooling pooling) {
    if (stride < 1) {
        throw ConfigError("downsample stride must be >= 1");
    }
    const std::size_t rows = (m.rows + stride - 1) / stride;
    TimeMatrix out(rows, m.cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t src = r * stride;
        if (pooling == Pooling::Stride) {
            for (std::size_t c = 0; c < m.cols; ++c) {
                out(r, c) = m(src, c);
            }
        } else {
            const std::size_t end = std::min(src + stride, m.rows);
            for (std::size_t c = 0; c < m.cols; ++c) {
                double s = 0.0;
                for (std::size_t k = src; k < end; ++k) {
                    s += m(k, c);
                }
                out(r, c) = s / static_cast<double>(end - src);
            }
        }
    }
    return out;
}

RawDataset downsample(const RawDataset& d, std::size_t stride, Pooling pooling) {
    RawDataset out;
    out.column_names = d.column_names;
    out.values = downsample(d.values, stride, pooling);
    out.dt = d.dt * static_cast<double>(stride);
    out.had_timestamp = d.had_timestamp;
    return out;
}

std::vector<std::size_t> make_windows(std::size_t length, std::size_t lookback, std::size_t horizon) {
    if (length < lookback + horizon) {
        throw DataError("series of length " + std::to_string(length) + " is shorter than T+S = " +
                        std::to_string(lookback) + "+" + std::to_string(horizon));
    }
    std::vector<std::size_t> starts(length - lookback - horizon + 1);
    for (std::size_t t = 0; t < starts.size(); ++t) {
        starts[t] = t;
    }
    return starts;
}

std::vector<std::size_t> partition_windows(std::size_t n_windows, std::size_t n_nodes, std::size_t node_id) {
    if (n_nodes == 0 || node_id >= n_nodes) {
        throw ConfigError("node id " + std::to_string(node_id) + " out of range for " + std::to_string(n_nodes) +
                          " nodes");
    }
    std::vector<std::size_t> owned;
    for (std::size_t i = node_id; i < n_windows; i += n_nodes) {
        owned.push_back(i);
    }
    return owned;
}

std::vector<std::vector<std::size_t>> assign_variable_subsets(std::span<const std::size_t> all_var_ids,
                                                               std::size_t target_id, std::size_t n_nodes,
                                                               std::size_t subset_size, std::uint64_t seed) {
    std::vector<std::size_t> pool;
    for (std::size_t id : all_var_ids) {
        if (id != target_id) {
            pool.push_back(id);
        }
    }
    if (subset_size > pool.size()) {
        throw ConfigError("auxiliary subset size " + std::to_string(subset_size) + " exceeds the " +
                          std::to_string(pool.size()) + " available auxiliary variables");
    }
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t node = 0; node < n_nodes; ++node) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(node), 0x5eedu};
        std::mt19937_64 rng(seq);
        std::vector<std::size_t> ids = pool;
        for (std::size_t i = 0; i < subset_size; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, ids.size() - 1);
            std::swap(ids[i], ids[pick(rng)]);
        }
        ids.resize(subset_size);
        out.push_back(std::move(ids));
    }
    return out;
}

RawDataset generate_synthetic(const SyntheticSpec& spec, SyntheticTruth* truth) {
    if (spec.n_vars < 2 || spec.length < 1000) {
        throw ConfigError("synthetic data needs n_vars >= 2 and length >= 1000");
    }
    const std::size_t n_aux = spec.n_vars - 1;
    if (spec.drivers < 1 || spec.drivers > n_aux) {
        throw ConfigError("synthetic drivers must lie in [1, " + std::to_string(n_aux) + "]");
    }
    if (!(spec.min_period > 1.0 && spec.max_period > spec.min_period) || spec.noise < 0.0) {
        throw ConfigError("synthetic periods must satisfy 1 < min_period < max_period and noise >= 0");
    }
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> period_dist(spec.min_period, spec.max_period);
    std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> noise(0.0, 1.0);

    std::vector<double> periods;
    std::vector<double> phases;
    while (periods.size() < n_aux + 1) {
        const double p = period_dist(rng);
        const bool distinct = std::none_of(periods.begin(), periods.end(), [&](double q) { return std::abs(p - q) < 0.5; });
        if (distinct) {
            periods.push_back(p);
            phases.push_back(phase_dist(rng));
        }
    }

    std::vector<std::size_t> order(n_aux);
    for (std::size_t k = 0; k < n_aux; ++k) {
        order[k] = k;
    }
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> drivers(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(spec.drivers));
    std::uniform_real_distribution<double> weight_dist(0.5, 1.5);
    std::uniform_int_distribution<std::size_t> lag_dist(0, spec.max_lag);
    std::vector<double> weights;
    std::vector<std::size_t> lags;
    double weight_sum = 0.0;
    for (std::size_t i = 0; i < drivers.size(); ++i) {
        weights.push_back(spec.drivers == 1 ? 1.0 : weight_dist(rng));
        lags.push_back(lag_dist(rng));
        weight_sum += weights.back();
    }

    // Auxiliaries are generated from t = -max_lag so lagged drivers are defined.
    const std::size_t pad = spec.max_lag;
    const std::size_t total = spec.length + pad;
    std::vector<std::vector<double>> aux(n_aux, std::vector<double>(total));
    for (std::size_t k = 0; k < n_aux; ++k) {
        for (std::size_t i = 0; i < total; ++i) {
            const double t = static_cast<double>(i) - static_cast<double>(pad);
            aux[k][i] = std::sin(2.0 * std::numbers::pi * t / periods[k] + phases[k]) + spec.noise * noise(rng);
        }
    }

    RawDataset out;
    for (std::size_t k = 0; k < n_aux; ++k) {
        out.column_names.push_back("v" + std::to_string(k));
    }
    out.column_names.push_back("target");
    out.values = TimeMatrix(spec.length, spec.n_vars);
    const double own_period = periods[n_aux];
    const double own_phase = phases[n_aux];
    for (std::size_t r = 0; r < spec.length; ++r) {
        for (std::size_t k = 0; k < n_aux; ++k) {
            out.values(r, k) = aux[k][r + pad];
        }
        double y = 0.0;
        for (std::size_t i = 0; i < drivers.size(); ++i) {
            y += weights[i] * aux[drivers[i]][r + pad - lags[i]];
        }
        y /= weight_sum;
        y += spec.seasonal_weight * std::sin(2.0 * std::numbers::pi * static_cast<double>(r) / own_period + own_phase);
        y += spec.noise * noise(rng);
        out.values(r, n_aux) = y;
    }
    if (truth != nullptr) {
        *truth = SyntheticTruth{drivers, weights, lags, periods};
    }
    return out;
}

const char* split_name(Split s) {
    switch (s) {
        case Split::Train:
            return "train";
        case Split::Val:
            return "val";
        case Split::Test:
            return "test";
    }
    return "?";
}

namespace {

// Windows whose horizon lies in rows [lo, hi); the look-back may reach back
// into the previous segment.
std::vector<std::size_t> segment_windows(std::size_t lo, std::size_t hi, std::size_t lookback, std::size_t horizon,
                                         const char* name) {
    const std::size_t first = lo >= lookback ? lo - lookback : 0;
    if (hi < first + lookback + horizon) {
        throw DataError(std::string(name) + " split has " + std::to_string(hi - first) +
                        " usable rows, fewer than T+S = " + std::to_string(lookback) + "+" + std::to_string(horizon));
    }
    std::vector<std::size_t> starts = make_windows(hi - first, lookback, horizon);
    for (std::size_t& s : starts) {
        s += first;
    }
    return starts;
}

}  // namespace

NodeDataView::NodeDataView(const RawDataset& series, NodeShapeConfig shape, Task task, const SplitSpec& split,
                           std::size_t group_rank, std::size_t group_size)
    : series_(series), shape_(std::move(shape)), task_(task), group_rank_(group_rank), group_size_(group_size) {
    const std::size_t cols = series_.values.cols;
    if (shape_.target_id >= cols) {
        throw DataError("target column " + std::to_string(shape_.target_id) + " out of range");
    }
    for (std::size_t id : shape_.var_ids) {
        if (id >= cols) {
            throw DataError("auxiliary column " + std::to_string(id) + " out of range");
        }
    }
    if (task_ == Task::M2U && shape_.var_ids.empty()) {
        throw ConfigError("node " + std::to_string(shape_.node_id) + ": M2U forecasting needs at least one auxiliary");
    }
    const SplitBounds b = split_bounds(series_.values.rows, split);
    const std::size_t t = shape_.lookback;
    const std::size_t s = shape_.horizon;
    train_pool_ = segment_windows(0, b.train_end, t, s, "train");
    const std::vector<std::size_t>& all_train = train_pool_;
    const std::vector<std::size_t> all_val = segment_windows(b.train_end, b.val_end, t, s, "val");
    test_ = segment_windows(b.val_end, b.rows, t, s, "test");
    for (std::size_t i : partition_windows(all_train.size(), group_size, group_rank)) {
        train_.push_back(all_train[i]);
    }
    for (std::size_t i : partition_windows(all_val.size(), group_size, group_rank)) {
        val_.push_back(all_val[i]);
    }
}

const std::vector<std::size_t>& NodeDataView::windows(Split s) const {
    switch (s) {
        case Split::Train:
            return train_;
        case Split::Val:
            return val_;
        case Split::Test:
            return test_;
    }
    return test_;
}

std::vector<std::size_t> NodeDataView::output_ids() const {
    if (task_ == Task::M2M) {
        std::vector<std::size_t> ids = shape_.var_ids;
        ids.push_back(shape_.target_id);
        return ids;
    }
    return {shape_.target_id};
}

ForecastSample NodeDataView::sample(std::size_t start) const {
    const std::size_t t = shape_.lookback;
    const std::size_t s = shape_.horizon;
    const TimeMatrix& m = series_.values;
    if (start + t + s > m.rows) {
        throw DataError("window at " + std::to_string(start) + " runs past the end of the series");
    }
    ForecastSample out;
    out.var_ids = shape_.var_ids;
    out.x.resize(t);
    out.y.resize(s);
    const std::size_t c = shape_.var_ids.size();
    out.z = c > 0 ? NDArray({t, c}) : NDArray();
    for (std::size_t i = 0; i < t; ++i) {
        out.x[i] = m(start + i, shape_.target_id);
        for (std::size_t k = 0; k < c; ++k) {
            out.z.data[i * c + k] = m(start + i, shape_.var_ids[k]);
        }
    }
    for (std::size_t i = 0; i < s; ++i) {
        out.y[i] = m(start + t + i, shape_.target_id);
    }
    return out;
}

Batch NodeDataView::batch(std::span<const std::size_t> starts) const {
    if (starts.empty()) {
        throw DataError("empty batch");
    }
    const std::size_t b = starts.size();
    const std::size_t t = shape_.lookback;
    const std::size_t s = shape_.horizon;
    const TimeMatrix& m = series_.values;
    for (std::size_t st : starts) {
        if (st + t + s > m.rows) {
            throw DataError("window at " + std::to_string(st) + " runs past the end of the series");
        }
    }
    Batch out;
    out.task = task_;
    out.target_id = shape_.target_id;
    if (task_ == Task::M2M) {
        const std::vector<std::size_t> ids = output_ids();
        const std::size_t n = ids.size();
        out.var_ids = ids;
        out.input = NDArray({b, t, n});
        out.target = NDArray({b, n, s});
        for (std::size_t i = 0; i < b; ++i) {
            for (std::size_t r = 0; r < t; ++r) {
                for (std::size_t k = 0; k < n; ++k) {
                    out.input.data[(i * t + r) * n + k] = m(starts[i] + r, ids[k]);
                }
            }
            for (std::size_t k = 0; k < n; ++k) {
                for (std::size_t r = 0; r < s; ++r) {
                    out.target.data[(i * n + k) * s + r] = m(starts[i] + t + r, ids[k]);
                }
            }
        }
        return out;
    }
    out.input = NDArray({b, t});
    out.target = NDArray({b, s});
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t r = 0; r < t; ++r) {
            out.input.data[i * t + r] = m(starts[i] + r, shape_.target_id);
        }
        for (std::size_t r = 0; r < s; ++r) {
            out.target.data[i * s + r] = m(starts[i] + t + r, shape_.target_id);
        }
    }
    if (task_ == Task::U2U) {
        out.var_ids = {shape_.target_id};
        return out;
    }
    const std::size_t c = shape_.var_ids.size();
    out.var_ids = shape_.var_ids;
    out.aux = NDArray({b, t, c});
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t r = 0; r < t; ++r) {
            for (std::size_t k = 0; k < c; ++k) {
                out.aux.data[(i * t + r) * c + k] = m(starts[i] + r, shape_.var_ids[k]);
            }
        }
    }
    return out;
}

}  // namespace pixtime
