#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "pixtime/errors.hpp"
#include "pixtime/harness.hpp"

using namespace pixtime;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    static int counter = 0;
    const fs::path p = fs::temp_directory_path() /
                       ("pixtime_harness_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(p);
    return p;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// A small but complete federated run: two nodes at strides 1 and 2.
json tiny_config() {
    return json::parse(R"({
        "mode": "federated",
        "seed": 4,
        "dataset": {"kind": "synthetic", "n_vars": 4, "length": 1000, "drivers": 2},
        "model": {"d_model": 8, "layers": 2, "heads": 2, "d_ff": 16},
        "window": {"lookback": 16, "horizon": 4, "patch_len": 4},
        "nodes": [{"stride": 1}, {"stride": 2, "aux_count": 2}],
        "optimizer": {"lr": 0.001, "batch_size": 64, "epochs": 2},
        "rounds": 2
    })");
}

RawDataset unit_ramp(std::size_t rows) {
    RawDataset d;
    d.column_names = {"a", "target"};
    d.values = TimeMatrix(rows, 2);
    for (std::size_t r = 0; r < rows; ++r) {
        d.values(r, 0) = std::sin(static_cast<double>(r));
        d.values(r, 1) = static_cast<double>(r);
    }
    return d;
}

NodeShapeConfig ramp_shape(std::size_t horizon) {
    NodeShapeConfig s;
    s.lookback = 4;
    s.horizon = horizon;
    s.patch_len = 2;
    s.var_ids = {0};
    s.target_id = 1;
    return s;
}

}  // namespace

TEST(Metrics, HandComputedValues) {
    const std::vector<double> pred{0, 0, 0, 1, 1, 1};
    const std::vector<double> truth{1, 2, 3, 1, 1, 3};
    const ForecastMetrics m = compute_metrics(pred, truth, 3);
    EXPECT_DOUBLE_EQ(m.mse, (1 + 4 + 9 + 0 + 0 + 4) / 6.0);
    EXPECT_DOUBLE_EQ(m.mae, (1 + 2 + 3 + 0 + 0 + 2) / 6.0);
    EXPECT_EQ(m.rows, 2u);
    EXPECT_EQ(m.mse_by_step, (std::vector<double>{0.5, 2.0, 6.5}));
    EXPECT_EQ(m.mae_by_step, (std::vector<double>{0.5, 1.0, 2.5}));
    EXPECT_THROW(compute_metrics(std::vector<double>{}, std::vector<double>{}, 3), EvaluationError);
    EXPECT_THROW(compute_metrics(pred, std::vector<double>{1}, 3), Error);
}

TEST(Metrics, PersistenceOnARampMissesByTheStepCount) {
    const NodeDataView view(unit_ramp(200), ramp_shape(2), Task::M2U, SplitSpec{});
    const ForecastMetrics m = persistence_baseline(view);
    EXPECT_DOUBLE_EQ(m.mse, 2.5);
    EXPECT_DOUBLE_EQ(m.mae, 1.5);
    EXPECT_EQ(m.rows, view.windows(Split::Test).size());
}

TEST(Metrics, EvaluateUsesTheModelPrediction) {
    const NodeDataView view(unit_ramp(200), ramp_shape(2), Task::M2U, SplitSpec{});
    ModelDims dims;
    dims.d_model = 4;
    dims.layers = 1;
    dims.heads = 1;
    dims.d_ff = 4;
    dims.n_all = 2;
    PiXTimeModel model(dims, ramp_shape(2), 1, 2);
    model.params().get("projection.weight").value.fill(0.0);
    model.params().get("projection.bias").value = NDArray({2}, {100.0, 101.0});
    const ForecastMetrics m = evaluate(model, view, Split::Test, 7);
    double se = 0.0;
    for (std::size_t start : view.windows(Split::Test)) {
        const double y0 = static_cast<double>(start + 4);
        se += (100.0 - y0) * (100.0 - y0) + (101.0 - y0 - 1) * (101.0 - y0 - 1);
    }
    EXPECT_NEAR(m.mse, se / (2.0 * static_cast<double>(view.windows(Split::Test).size())), 1e-9);
}

TEST(Config, DefaultsRoundTrip) {
    const ExperimentConfig a = ExperimentConfig::from_json(json::object());
    EXPECT_EQ(a.mode, Mode::Federated);
    EXPECT_EQ(a.optimizer.lr, 1e-4);
    EXPECT_EQ(a.optimizer.batch_size, 32u);
    EXPECT_EQ(a.optimizer.epochs, 10u);
    EXPECT_EQ(a.rounds, 10u);
    EXPECT_EQ(a.local_epochs(), 1u);
    const ExperimentConfig b = ExperimentConfig::from_json(json::parse(a.to_json().dump()));
    EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
    const ExperimentConfig c = ExperimentConfig::from_json(tiny_config());
    EXPECT_EQ(ExperimentConfig::from_json(json::parse(c.to_json().dump())).to_json().dump(), c.to_json().dump());
}

TEST(Config, ServerAdamDefaultsToItsOwnLearningRate) {
    const ExperimentConfig c =
        ExperimentConfig::from_json(json::parse(R"({"optimizer": {"server": {"kind": "adam"}}})"));
    EXPECT_EQ(c.optimizer.server.kind, ServerOptions::Kind::Adam);
    EXPECT_EQ(c.optimizer.server.lr, 0.01);
}

TEST(Config, InvalidConfigsNameTheProblem) {
    const std::vector<std::pair<std::string, std::string>> cases = {
        {R"({"mode": "train"})", "unknown mode"},
        {R"({"modle": "central"})", "modle"},
        {R"({"model": {"d_model": 30, "heads": 4}})", "divisible"},
        {R"({"window": {"lookback": 90, "patch_len": 16}})", "multiple of patch_len"},
        {R"({"nodes": [{"stride": 3}]})", "stride 3"},
        {R"({"nodes": []})", "at least one node"},
        {R"({"optimizer": {"epochs": 10}, "rounds": 3})", "multiple of rounds"},
        {R"({"optimizer": {"lr": -1}})", "optimizer.lr"},
        {R"({"optimizer": {"server": {"kind": "sgdm"}}})", "server optimizer"},
        {R"({"optimizer": {"batch_size": "big"}})", "batch_size"},
        {R"({"dataset": {"kind": "parquet"}})", "dataset.kind"},
        {R"({"dataset": {"kind": "csv"}})", "dataset.path"},
        {R"({"mode": "central", "nodes": [{}, {}]})", "exactly one node"},
        {R"({"nodes": [{"aux": ["v0"], "aux_count": 1}]})", "either aux or aux_count"},
        {R"({"pooling": "max"})", "pooling"},
        {R"({"gradcheck": {"h": 0.1}})", "gradcheck.h"},
        {R"({"task": "m2x"})", "m2u"},
        {R"({"dataset": {"length": 10}})", "length"},
    };
    for (const auto& [text, needle] : cases) {
        try {
            ExperimentConfig::from_json(json::parse(text));
            ADD_FAILURE() << "accepted " << text;
        } catch (const ConfigError& e) {
            EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << text << " -> " << e.what();
        }
    }
}

TEST(Config, DatasetDependentChecks) {
    json j = tiny_config();
    j["nodes"] = json::parse(R"([{"aux": ["v0", "nope"]}])");
    EXPECT_THROW(load_dataset(ExperimentConfig::from_json(j)), ConfigError);
    j["nodes"] = json::parse(R"([{"aux_count": 9}])");
    EXPECT_THROW(load_dataset(ExperimentConfig::from_json(j)), ConfigError);
    j["nodes"] = json::parse(R"([{"aux": ["target"]}])");
    EXPECT_THROW(load_dataset(ExperimentConfig::from_json(j)), ConfigError);
    j["nodes"] = json::parse(R"([{"stride": 16}])");
    EXPECT_THROW(load_dataset(ExperimentConfig::from_json(j)), ConfigError);
    EXPECT_THROW(ExperimentConfig::load("/nonexistent/config.json"), ConfigError);
}

TEST(Seeds, DerivedSeedsAreStableAndDistinct) {
    EXPECT_EQ(derive_seed(1, "shared"), derive_seed(1, "shared"));
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 0; s < 4; ++s) {
        for (const char* purpose : {"shared", "local", "shuffle", "subsets"}) {
            for (std::uint64_t i = 0; i < 4; ++i) {
                seen.insert(derive_seed(s, purpose, i));
            }
        }
    }
    EXPECT_EQ(seen.size(), 64u);
}

TEST(Nodes, StridesScaleTheWindow) {
    const ExperimentConfig c = ExperimentConfig::from_json(tiny_config());
    const LoadedData data = load_dataset(c);
    const std::vector<ResolvedNode> nodes = resolve_nodes(c, data);
    ASSERT_EQ(nodes.size(), 2u);
    EXPECT_EQ(nodes[0].shape.lookback, 16u);
    EXPECT_EQ(nodes[1].shape.lookback, 8u);
    EXPECT_EQ(nodes[1].shape.horizon, 2u);
    EXPECT_EQ(nodes[1].shape.patch_len, 2u);
    EXPECT_EQ(nodes[1].shape.dt, 2.0);
    EXPECT_EQ(nodes[0].aux_names.size(), 3u);
    EXPECT_EQ(nodes[1].aux_names.size(), 2u);
    const std::vector<Client> clients = build_clients(c, data, nodes);
    EXPECT_NO_THROW(validate_network(clients));
}

TEST(Experiment, WritesExactlyThreeDeterministicFiles) {
    ExperimentConfig c = ExperimentConfig::from_json(tiny_config());
    c.output_dir = temp_dir("a");
    run_experiment(c);
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(c.output_dir)) {
        names.insert(e.path().filename().string());
    }
    EXPECT_EQ(names, (std::set<std::string>{"config.json", "metrics.json", "rounds.csv"}));

    const fs::path first = c.output_dir;
    c.output_dir = temp_dir("b");
    run_experiment(c);
    EXPECT_EQ(read_file(first / "metrics.json"), read_file(c.output_dir / "metrics.json"));

    const json m = json::parse(read_file(first / "metrics.json"));
    EXPECT_EQ(m["mode"], "federated");
    EXPECT_EQ(m["rounds_completed"], 2);
    EXPECT_EQ(m["nodes"].size(), 2u);
    EXPECT_LT(m["average"]["mse"].get<double>(), m["average"]["persistence_mse"].get<double>() * 10);

    std::istringstream csv(read_file(first / "rounds.csv"));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "run,round,node_id,train_loss,ve_table_norm,aux_encoder_norm,target_decoder_norm,wall_ms");
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        ++rows;
    }
    EXPECT_EQ(rows, 4u);

    const ExperimentConfig echo = ExperimentConfig::load(first / "config.json");
    EXPECT_EQ(echo.seed, 4u);
    EXPECT_EQ(echo.rounds, 2u);
    fs::remove_all(first);
    fs::remove_all(c.output_dir);
}

TEST(Experiment, ZeroRoundsEvaluatesTheInitialModels) {
    json j = tiny_config();
    j["rounds"] = 0;
    j["optimizer"]["epochs"] = 0;
    const ExperimentConfig c = ExperimentConfig::from_json(j);
    const ExperimentOutput out = run_experiment(c, false);
    EXPECT_EQ(out.log.size(), 0u);
    EXPECT_TRUE(out.metrics["nodes"][0]["final_train_loss"].is_null());

    const LoadedData data = load_dataset(c);
    std::vector<Client> clients = build_clients(c, data, resolve_nodes(c, data));
    const ForecastMetrics m = evaluate(clients[0].model(), clients[0].data());
    EXPECT_EQ(out.metrics["nodes"][0]["test"]["mse"].get<double>(), m.mse);
}

TEST(Experiment, CentralModeLogsOneRowPerEpoch) {
    json j = tiny_config();
    j["mode"] = "central";
    j["nodes"] = json::parse(R"([{"stride": 1}])");
    j["optimizer"]["epochs"] = 3;
    j["rounds"] = 1;
    const ExperimentOutput out = run_experiment(ExperimentConfig::from_json(j), false);
    EXPECT_EQ(out.log.size(), 3u);
    EXPECT_EQ(out.metrics["mode"], "central");
}

TEST(Experiment, CsvDatasetWithNamedTarget) {
    const fs::path dir = temp_dir("csv");
    fs::create_directories(dir);
    SyntheticSpec spec;
    spec.n_vars = 3;
    spec.length = 1000;
    spec.drivers = 2;
    RawDataset d = generate_synthetic(spec);
    d.column_names = {"load", "temp", "price"};
    write_csv(dir / "data.csv", d);
    json j = tiny_config();
    j["dataset"] = {{"kind", "csv"}, {"path", (dir / "data.csv").string()}, {"target", "load"}};
    j["nodes"] = json::parse(R"([{"aux": ["price"]}])");
    j["task"] = "M2U";
    const ExperimentConfig c = ExperimentConfig::from_json(j);
    const LoadedData data = load_dataset(c);
    EXPECT_EQ(data.target_id, 0u);
    const ExperimentOutput out = run_experiment(c, false);
    EXPECT_EQ(out.metrics["nodes"][0]["aux"].dump(), R"(["price"])");
    fs::remove_all(dir);
}

TEST(Experiment, OtherTasksRun) {
    for (const char* task : {"M2M", "U2U"}) {
        json j = tiny_config();
        j["task"] = task;
        j["rounds"] = 1;
        j["optimizer"]["epochs"] = 1;
        const ExperimentOutput out = run_experiment(ExperimentConfig::from_json(j), false);
        EXPECT_TRUE(std::isfinite(out.metrics["average"]["mse"].get<double>())) << task;
    }
}

TEST(Experiment, GradCheckModePasses) {
    json j = json::object();
    j["mode"] = "gradcheck";
    j["gradcheck"] = {{"layers", 2}};
    const ExperimentOutput out = run_experiment(ExperimentConfig::from_json(j), false);
    EXPECT_TRUE(out.metrics["passed"].get<bool>()) << out.metrics.dump(2);
    EXPECT_EQ(out.metrics["results"].size(), 3u);
}
