#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "pixtime/data.hpp"
#include "pixtime/errors.hpp"

using namespace pixtime;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("pixtime_data_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    fs::path file(const std::string& name, const std::string& contents) const {
        const fs::path p = path_ / name;
        std::ofstream(p) << contents;
        return p;
    }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

RawDataset ramp(std::size_t rows, std::size_t cols) {
    RawDataset d;
    d.values = TimeMatrix(rows, cols);
    for (std::size_t c = 0; c < cols; ++c) {
        d.column_names.push_back("c" + std::to_string(c));
        for (std::size_t r = 0; r < rows; ++r) {
            d.values(r, c) = static_cast<double>(r * 10 + c);
        }
    }
    return d;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(a.size());
    mb /= static_cast<double>(b.size());
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(Csv, TimestampColumnIsDropped) {
    TempDir dir;
    const RawDataset d = load_csv(dir.file("a.csv", "date,a,b\n2020-01-01,1,2\n2020-01-02,3,4\n"));
    EXPECT_EQ(d.column_names, (std::vector<std::string>{"a", "b"}));
    EXPECT_TRUE(d.had_timestamp);
    EXPECT_EQ(d.values.rows, 2u);
    EXPECT_EQ(d.values.values, (std::vector<double>{1, 2, 3, 4}));
}

TEST(Csv, SingleColumn) {
    TempDir dir;
    const RawDataset d = load_csv(dir.file("a.csv", "a\n1\n2\n3\n"));
    EXPECT_FALSE(d.had_timestamp);
    EXPECT_EQ(d.values.rows, 3u);
    EXPECT_EQ(d.values.cols, 1u);
}

TEST(Csv, ErrorsNameTheirLocation) {
    TempDir dir;
    try {
        load_csv(dir.file("bad.csv", "a,b\n1,2\n3,x\n"));
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
        EXPECT_NE(msg.find("column"), std::string::npos) << msg;
    }
    EXPECT_THROW(load_csv(dir.file("ragged.csv", "a,b\n1,2\n3\n")), FormatError);
    EXPECT_THROW(load_csv(dir.file("dup.csv", "a,a\n1,2\n")), FormatError);
    EXPECT_THROW(load_csv(dir.path() / "missing.csv"), DataError);
}

TEST(Csv, RoundTripIsBitExact) {
    TempDir dir;
    SyntheticSpec spec;
    spec.n_vars = 4;
    spec.length = 1000;
    const RawDataset d = generate_synthetic(spec);
    write_csv(dir.path() / "rt.csv", d);
    const RawDataset back = load_csv(dir.path() / "rt.csv");
    EXPECT_EQ(back.column_names, d.column_names);
    ASSERT_EQ(back.values.values.size(), d.values.values.size());
    for (std::size_t i = 0; i < d.values.values.size(); ++i) {
        ASSERT_EQ(back.values.values[i], d.values.values[i]) << i;
    }
}

TEST(Standardize, TrainStatisticsOnly) {
    RawDataset d;
    d.column_names = {"a", "k"};
    d.values = TimeMatrix(10, 2);
    const double a[] = {0, 2, 0, 2, 0, 2, 0, 100, 50, -30};
    for (std::size_t r = 0; r < 10; ++r) {
        d.values(r, 0) = a[r];
        d.values(r, 1) = 5.0;
    }
    SplitSpec split{0.6, 0.2, 0.2};
    const StandardizedDataset s = standardize(d, split);
    EXPECT_DOUBLE_EQ(s.stats[0].mean, 1.0);
    EXPECT_DOUBLE_EQ(s.stats[0].std, 1.0);
    EXPECT_EQ(s.data.values(0, 0), -1.0);
    EXPECT_EQ(s.data.values(1, 0), 1.0);
    EXPECT_EQ(s.data.values(5, 1), 0.0);
    RawDataset perturbed = d;
    perturbed.values(9, 0) = 1e6;
    perturbed.values(8, 1) = -3;
    const StandardizedDataset p = standardize(perturbed, split);
    EXPECT_EQ(p.stats[0].mean, s.stats[0].mean);
    EXPECT_EQ(p.stats[0].std, s.stats[0].std);
    EXPECT_EQ(p.stats[1].mean, s.stats[1].mean);
}

TEST(Standardize, InverseRecoversOriginal) {
    SyntheticSpec spec;
    spec.seed = 5;
    const RawDataset d = generate_synthetic(spec);
    const StandardizedDataset s = standardize(d, SplitSpec{});
    for (std::size_t r = 0; r < d.values.rows; r += 7) {
        for (std::size_t c = 0; c < d.values.cols; ++c) {
            EXPECT_NEAR(s.data.values(r, c) * s.stats[c].std + s.stats[c].mean, d.values(r, c), 1e-12);
        }
    }
}

TEST(Split, ChronologicalBorders) {
    const SplitBounds b = split_bounds(100, SplitSpec{});
    EXPECT_EQ(b.train_end, 70u);
    EXPECT_EQ(b.val_end, 80u);
    EXPECT_EQ(b.rows, 100u);
    EXPECT_THROW((SplitSpec{0.5, 0.5, 0.5}.validate()), ConfigError);
}

TEST(Downsample, StrideCases) {
    const RawDataset d = ramp(8, 1);
    EXPECT_EQ(downsample(d.values, 4).values, (std::vector<double>{0, 40}));
    EXPECT_EQ(downsample(d.values, 1).values, d.values.values);
    EXPECT_THROW(downsample(d.values, 0), ConfigError);
    const RawDataset coarse = downsample(d, 2);
    EXPECT_EQ(coarse.dt, 2.0);
    EXPECT_EQ(downsample(d.values, 4, Pooling::Mean).values, (std::vector<double>{15, 55}));
}

TEST(Downsample, LengthIsCeilingAndComposes) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::size_t> len(1, 60), stride(1, 7);
    for (int i = 0; i < 200; ++i) {
        const std::size_t n = len(rng);
        const std::size_t k = stride(rng);
        const RawDataset d = ramp(n, 2);
        std::size_t kept = 0;
        for (std::size_t r = 0; r < n; ++r) {
            kept += (r % k == 0);
        }
        EXPECT_EQ(downsample(d.values, k).rows, kept);
        const std::size_t a = stride(rng);
        EXPECT_EQ(downsample(d.values, a * k).values, downsample(downsample(d.values, a), k).values);
    }
}

TEST(Windows, CountsAndBoundaries) {
    EXPECT_EQ(make_windows(10, 4, 2).size(), 5u);
    EXPECT_EQ(make_windows(6, 4, 2), (std::vector<std::size_t>{0}));
    try {
        make_windows(5, 4, 2);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("5"), std::string::npos);
    }
    for (std::size_t len = 6; len < 40; ++len) {
        std::vector<std::size_t> scan;
        for (std::size_t t = 0; t < len; ++t) {
            if (t + 4 + 2 <= len) {
                scan.push_back(t);
            }
        }
        EXPECT_EQ(make_windows(len, 4, 2), scan);
    }
}

TEST(Partition, StridedOwnership) {
    EXPECT_EQ(partition_windows(10, 4, 1), (std::vector<std::size_t>{1, 5, 9}));
    EXPECT_EQ(partition_windows(3, 1, 0), (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_THROW(partition_windows(3, 2, 2), ConfigError);
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<std::size_t> nw(0, 100), nn(1, 12);
    for (int i = 0; i < 100; ++i) {
        const std::size_t w = nw(rng);
        const std::size_t n = nn(rng);
        std::set<std::size_t> seen;
        std::size_t total = 0;
        for (std::size_t node = 0; node < n; ++node) {
            for (std::size_t idx : partition_windows(w, n, node)) {
                EXPECT_LT(idx, w);
                seen.insert(idx);
                ++total;
            }
        }
        EXPECT_EQ(total, w);
        EXPECT_EQ(seen.size(), w);
    }
}

TEST(Subsets, PropertiesOverManySeeds) {
    const std::vector<std::size_t> all{0, 1, 2, 3, 4, 5, 6, 7};
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto subsets = assign_variable_subsets(all, 7, 8, 3, seed);
        ASSERT_EQ(subsets.size(), 8u);
        for (const auto& s : subsets) {
            EXPECT_EQ(s.size(), 3u);
            const std::set<std::size_t> uniq(s.begin(), s.end());
            EXPECT_EQ(uniq.size(), 3u);
            EXPECT_EQ(uniq.count(7), 0u);
        }
        EXPECT_EQ(subsets, assign_variable_subsets(all, 7, 8, 3, seed));
    }
    for (const auto& s : assign_variable_subsets(all, 7, 4, 7, 1)) {
        EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()), (std::set<std::size_t>{0, 1, 2, 3, 4, 5, 6}));
    }
    EXPECT_THROW(assign_variable_subsets(all, 7, 2, 8, 0), ConfigError);
    EXPECT_NE(assign_variable_subsets(all, 7, 8, 3, 1), assign_variable_subsets(all, 7, 8, 3, 2));
}

TEST(Synthetic, DeterministicAndShaped) {
    SyntheticSpec spec;
    spec.n_vars = 5;
    spec.length = 1200;
    spec.seed = 9;
    const RawDataset a = generate_synthetic(spec);
    const RawDataset b = generate_synthetic(spec);
    EXPECT_EQ(a.values.values, b.values.values);
    EXPECT_EQ(a.values.rows, 1200u);
    EXPECT_EQ(a.values.cols, 5u);
    EXPECT_EQ(a.column_names.back(), "target");
    spec.seed = 10;
    EXPECT_NE(generate_synthetic(spec).values.values, a.values.values);
    spec.length = 10;
    EXPECT_THROW(generate_synthetic(spec), ConfigError);
}

TEST(Synthetic, TargetTracksItsLaggedDriver) {
    SyntheticSpec spec;
    spec.n_vars = 4;
    spec.noise = 0.0;
    spec.drivers = 1;
    spec.seasonal_weight = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        spec.seed = seed;
        SyntheticTruth truth;
        const RawDataset d = generate_synthetic(spec, &truth);
        ASSERT_EQ(truth.drivers.size(), 1u);
        EXPECT_EQ(truth.weights[0], 1.0);
        const std::size_t lag = truth.lags[0];
        const std::vector<double> driver = d.values.column(truth.drivers[0]);
        const std::vector<double> target = d.values.column(d.values.cols - 1);
        const std::vector<double> x(driver.begin(), driver.end() - static_cast<long>(lag));
        const std::vector<double> y(target.begin() + static_cast<long>(lag), target.end());
        EXPECT_GT(pearson(x, y), 0.99) << "seed " << seed;
    }
}

TEST(NodeView, SamplesAreContiguousAndTestIsShared) {
    const RawDataset d = ramp(200, 3);
    NodeShapeConfig shape;
    shape.lookback = 8;
    shape.horizon = 4;
    shape.patch_len = 4;
    shape.var_ids = {0, 1};
    shape.target_id = 2;
    const NodeDataView a(d, shape, Task::M2U, SplitSpec{}, 0, 2);
    const NodeDataView b(d, shape, Task::M2U, SplitSpec{}, 1, 2);
    EXPECT_EQ(a.windows(Split::Test), b.windows(Split::Test));
    EXPECT_EQ(a.windows(Split::Train).size() + b.windows(Split::Train).size(), a.train_pool().size());
    for (std::size_t start : a.windows(Split::Train)) {
        EXPECT_LE(start + 12, 140u);
    }
    for (std::size_t start : a.windows(Split::Test)) {
        const ForecastSample s = a.sample(start);
        for (std::size_t i = 0; i < 8; ++i) {
            EXPECT_EQ(s.x[i], d.values(start + i, 2));
            EXPECT_EQ(s.z.data[i * 2 + 1], d.values(start + i, 1));
        }
        for (std::size_t i = 0; i < 4; ++i) {
            EXPECT_EQ(s.y[i], d.values(start + 8 + i, 2));
        }
        EXPECT_GE(start + 8, 160u);  // horizon starts inside the test rows
        EXPECT_LE(start + 12, 200u);
    }
    const std::size_t first[] = {a.windows(Split::Train)[0], a.windows(Split::Train)[1]};
    const Batch batch = a.batch(first);
    EXPECT_EQ(batch.input.shape, (Shape{2, 8}));
    EXPECT_EQ(batch.aux.shape, (Shape{2, 8, 2}));
    EXPECT_EQ(batch.target.shape, (Shape{2, 4}));
}

TEST(NodeView, M2MStacksAllVariables) {
    const RawDataset d = ramp(200, 3);
    NodeShapeConfig shape;
    shape.lookback = 8;
    shape.horizon = 4;
    shape.patch_len = 4;
    shape.var_ids = {0, 1};
    shape.target_id = 2;
    const NodeDataView v(d, shape, Task::M2M, SplitSpec{});
    EXPECT_EQ(v.output_ids(), (std::vector<std::size_t>{0, 1, 2}));
    const std::size_t starts[] = {5};
    const Batch b = v.batch(starts);
    EXPECT_EQ(b.input.shape, (Shape{1, 8, 3}));
    EXPECT_EQ(b.target.shape, (Shape{1, 3, 4}));
    EXPECT_EQ(b.target.data[4], d.values(13, 1));
}

TEST(Granularity, PairedPatchesSpanTheSamePhysicalTime) {
    const RawDataset fine = ramp(400, 2);
    const RawDataset coarse = downsample(fine, 4);
    const std::size_t t = 96, pl = 16, s = 24;
    EXPECT_EQ(static_cast<double>(pl) * fine.dt, static_cast<double>(pl / 4) * coarse.dt);
    EXPECT_EQ(static_cast<double>(t) * fine.dt, static_cast<double>(t / 4) * coarse.dt);
    EXPECT_EQ(static_cast<double>(s) * fine.dt, static_cast<double>(s / 4) * coarse.dt);
}
