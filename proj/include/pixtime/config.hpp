#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include "pixtime/data.hpp"
#include "pixtime/federation.hpp"
#include "pixtime/model.hpp"

namespace pixtime {

enum class Mode { Central, Federated, GradCheck, AblateGranularity, AblateVe };

const char* mode_name(Mode m);
Mode parse_mode(const std::string& s);

struct DatasetConfig {
    std::string kind = "synthetic";  // "synthetic" | "csv"
    std::filesystem::path path;      // csv only
    std::string target;              // column name; empty means the last column
    SyntheticSpec synthetic;
    bool synthetic_seed_set = false; // otherwise the experiment seed is used
};

/// Fine-granularity window; a node with stride k uses T/k, S/k, PL/k.
struct WindowConfig {
    std::size_t lookback = 96;
    std::size_t horizon = 24;
    std::size_t patch_len = 16;
};

struct NodeConfig {
    std::size_t stride = 1;
    std::optional<std::vector<std::string>> aux;  // explicit auxiliary column names
    std::optional<std::size_t> aux_count;         // random subset of this size
};

struct OptimizerConfig {
    double lr = 1e-4;
    std::size_t batch_size = 32;
    std::size_t epochs = 10;  // total local epochs; each round runs epochs / rounds
    bool shuffle = true;
    bool reshuffle_partition = false;
    bool reset_adam = false;
    ServerOptions server;
};

struct GradCheckConfig {
    ModelDims dims{8, 1, 2, 16, 3};
    std::size_t lookback = 8;
    std::size_t horizon = 4;
    std::size_t patch_len = 4;
    std::size_t aux_count = 2;
    std::size_t batch = 2;
    double h = 1e-5;
    double tol = 1e-4;
    std::vector<Task> tasks{Task::M2U, Task::M2M, Task::U2U};
};

struct AblationConfig {
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::size_t coarse_stride = 4;
    std::size_t ve_nodes = 8;
    std::vector<std::size_t> subset_sizes{3};
};

struct ExperimentConfig {
    Mode mode = Mode::Federated;
    Task task = Task::M2U;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "runs/out";

    DatasetConfig dataset;
    SplitSpec split;
    Pooling pooling = Pooling::Stride;

    ModelDims dims;  // n_all is taken from the dataset
    ModelOptions model;
    WindowConfig window;
    std::vector<NodeConfig> nodes{NodeConfig{}};
    std::optional<std::size_t> subset_size;  // default aux_count for every node

    OptimizerConfig optimizer;
    std::size_t rounds = 10;
    bool parallel_clients = false;
    std::size_t eval_batch = 256;

    GradCheckConfig gradcheck;
    AblationConfig ablation;

    /// Parses and validates; unknown keys and bad values raise ConfigError
    /// with the offending JSON path.
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::filesystem::path& path);
    /// Every field, defaults included, in a stable order.
    nlohmann::ordered_json to_json() const;

    /// Checks everything that does not need the dataset.
    void validate() const;
    /// Checks that depend on the dataset: column names, subset sizes, lengths.
    void validate_against(const RawDataset& data) const;

    std::size_t local_epochs() const { return rounds == 0 ? 0 : optimizer.epochs / rounds; }
};

/// Deterministic sub-seed for a named purpose (splitmix64 of the inputs).
std::uint64_t derive_seed(std::uint64_t seed, const std::string& purpose, std::uint64_t index = 0);

}  // namespace pixtime
