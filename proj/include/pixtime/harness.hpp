#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include "pixtime/config.hpp"
#include "pixtime/federation.hpp"
#include "pixtime/gradcheck.hpp"
#include "pixtime/metrics.hpp"

namespace pixtime {

const char* build_id();

/// The configured dataset, standardized at base granularity with train-split
/// statistics.
struct LoadedData {
    StandardizedDataset standardized;
    std::size_t target_id = 0;
};

LoadedData load_dataset(const ExperimentConfig& config);

/// A node after applying strides, window pairing and auxiliary assignment.
struct ResolvedNode {
    NodeShapeConfig shape;
    std::size_t stride = 1;
    std::vector<std::string> aux_names;
    std::size_t group_rank = 0;  // among nodes with the same stride
    std::size_t group_size = 1;
};

std::vector<ResolvedNode> resolve_nodes(const ExperimentConfig& config, const LoadedData& data);

/// Builds each node's model and data view. Shared parameters start from one
/// network-wide seed; local parameters and shuffling use per-node seeds.
std::vector<Client> build_clients(const ExperimentConfig& config, const LoadedData& data,
                                  const std::vector<ResolvedNode>& nodes);

/// CSV round log: run,round,node_id,train_loss,ve_table_norm,aux_encoder_norm,target_decoder_norm,wall_ms
class RoundLog {
public:
    void add(const std::string& run, const RoundRecord& record);
    std::string csv() const;
    std::size_t size() const noexcept { return rows_.size(); }

private:
    std::vector<std::string> rows_;
};

struct NodeResult {
    ResolvedNode node;
    std::size_t train_windows = 0;
    ForecastMetrics test;
    ForecastMetrics persistence;
    double final_train_loss = 0.0;
};

struct RunResult {
    std::vector<NodeResult> nodes;
    std::vector<RoundRecord> rounds;
    double mse = 0.0;  // arithmetic mean of per-node values
    double mae = 0.0;
    double persistence_mse = 0.0;
    double persistence_mae = 0.0;
};

/// Central (single node, `epochs` local epochs) or federated (`rounds` rounds
/// of epochs/rounds local epochs each) training followed by test evaluation.
RunResult run_training(const ExperimentConfig& config, const LoadedData& data, RoundLog* log = nullptr,
                       const std::string& run_label = "main");
/// Same, with an explicit node list (used by the ablations).
RunResult run_training(const ExperimentConfig& config, const LoadedData& data, const std::vector<ResolvedNode>& nodes,
                       RoundLog* log = nullptr, const std::string& run_label = "main");

struct GradCheckResult {
    Task task;
    GradCheckReport report;
};

/// Finite-difference check of the full loss of a tiny model on random data.
std::vector<GradCheckResult> run_gradcheck(const GradCheckConfig& config, std::uint64_t seed);

struct GranularityRun {
    std::uint64_t seed = 0;
    ForecastMetrics mix_fine;
    ForecastMetrics mix_coarse;
    ForecastMetrics fine_only;
    ForecastMetrics coarse_only;
};

struct GranularityReport {
    std::size_t coarse_stride = 4;
    std::vector<GranularityRun> runs;
    // Medians over seeds.
    double mix_fine_mse = 0.0, mix_coarse_mse = 0.0, fine_only_mse = 0.0, coarse_only_mse = 0.0;
    double mix_fine_mae = 0.0, mix_coarse_mae = 0.0, fine_only_mae = 0.0, coarse_only_mae = 0.0;

    bool coarse_improves() const { return mix_coarse_mse <= coarse_only_mse; }
    bool fine_within(double factor) const { return mix_fine_mse <= factor * fine_only_mse; }
};

/// Two-node fine + coarse federation against each node trained alone, same
/// budget, for every ablation seed.
GranularityReport ablate_granularity(const ExperimentConfig& config, RoundLog* log = nullptr);

struct VeRun {
    std::size_t subset_size = 0;
    std::uint64_t seed = 0;
    double ve_mse = 0.0, ve_mae = 0.0;
    double nove_mse = 0.0, nove_mae = 0.0;
    double ve_step0_loss = 0.0, nove_step0_loss = 0.0;
};

struct VeSweepPoint {
    std::size_t subset_size = 0;
    double ve_mse = 0.0, nove_mse = 0.0;  // medians over seeds
    double ve_mae = 0.0, nove_mae = 0.0;
    bool step0_identical = true;
};

struct VeReport {
    std::vector<VeRun> runs;
    std::vector<VeSweepPoint> sweep;
};

/// Paired runs with and without the VE-table addition over random auxiliary
/// subsets, for every subset size and seed.
VeReport ablate_ve(const ExperimentConfig& config, RoundLog* log = nullptr);

double median(std::vector<double> v);

nlohmann::ordered_json metrics_json(const ForecastMetrics& m, bool breakdown = true);

struct ExperimentOutput {
    nlohmann::ordered_json metrics;
    RoundLog log;
};

/// Dispatches on config.mode. With write_files, creates output_dir and writes
/// config.json, metrics.json and rounds.csv.
ExperimentOutput run_experiment(const ExperimentConfig& config, bool write_files = true);

}  // namespace pixtime
