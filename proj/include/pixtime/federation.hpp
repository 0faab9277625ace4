#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pixtime/adam.hpp"
#include "pixtime/data.hpp"
#include "pixtime/model.hpp"
#include "pixtime/parameters.hpp"

namespace pixtime {

enum class Scope { Shared, Local };

/// Prefix rules that decide which parameters leave a node.
struct ParameterPartition {
    static const std::vector<std::string>& shared_prefixes();
    static const std::vector<std::string>& local_prefixes();
    /// Throws PartitionError for a name matching neither list.
    static Scope classify(const std::string& name);
};

struct PartitionedValues {
    ValueMap shared;
    ValueMap local;
};

PartitionedValues partition(const ParameterStore& params);
ValueMap shared_values(const ParameterStore& params);
/// Name -> shape of the shared subset.
std::map<std::string, Shape> shared_shapes(const ParameterStore& params);

/// One node's contribution to a round.
struct ClientDelta {
    int node_id = 0;
    ValueMap deltas;  // trained shared value minus the received global value
    ValueMap values;  // trained shared values
    double weight = 0.0;
    std::vector<bool> ve_usage;  // length n_all
};

struct ClientOptions {
    double lr = 1e-4;
    std::size_t batch_size = 32;
    std::size_t local_epochs = 1;
    bool shuffle = true;              // permute the node's windows every epoch
    bool reshuffle_partition = false; // re-deal the group's windows every epoch
    std::uint64_t partition_seed = 0; // must agree within a group
    bool reset_adam = false;          // clear Adam moments at the start of each round
};

struct EpochStats {
    double mean_loss = 0.0;
    std::size_t samples = 0;
    std::size_t steps = 0;
};

/// A node: its model (shared + local parameters), its data view and its
/// optimizer state. Local parameters and Adam moments persist across rounds.
class Client {
public:
    Client(PiXTimeModel model, NodeDataView data, ClientOptions options, std::uint64_t seed);

    int node_id() const noexcept { return model_.shape().node_id; }
    PiXTimeModel& model() noexcept { return model_; }
    const PiXTimeModel& model() const noexcept { return model_; }
    const NodeDataView& data() const noexcept { return data_; }
    const ClientOptions& options() const noexcept { return options_; }
    ClientOptions& options() noexcept { return options_; }
    const AdamState& adam() const noexcept { return adam_; }
    std::uint64_t steps_taken() const noexcept { return step_; }

    /// Categories whose VE-table rows this node holds: var_ids plus the target.
    std::vector<bool> ve_usage() const;

    /// One pass of mini-batch Adam over the node's train windows.
    EpochStats train_epoch();
    /// One Adam step on an explicit batch; returns the pre-step loss.
    double train_step(const Batch& batch);

    /// Loads `global_shared`, runs the configured local epochs and reports the
    /// change of every shared parameter.
    ClientDelta update(const ValueMap& global_shared, EpochStats* stats = nullptr);

private:
    std::vector<std::size_t> epoch_windows();

    PiXTimeModel model_;
    NodeDataView data_;
    ClientOptions options_;
    std::uint64_t seed_;
    AdamState adam_;
    std::mt19937_64 rng_;
    std::uint64_t step_ = 0;
    std::uint64_t epoch_ = 0;
};

/// Weighted mean of deltas, reduced in ascending node_id order. VE-table row
/// r is averaged only over clients whose ve_usage[r] is set; a row nobody
/// used gets a zero pseudo-gradient.
ValueMap aggregate(std::span<const ClientDelta> deltas);

/// The same weighting applied to the trained values. Entries with no
/// contributing weight keep their `global` value. Equals global + aggregate()
/// in exact arithmetic; used for the default server step.
ValueMap average_models(std::span<const ClientDelta> deltas, const ValueMap& global);

struct ServerOptions {
    enum class Kind { Sgd, Adam };
    Kind kind = Kind::Sgd;
    double lr = 1.0;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double eps = 1e-3;
};

const char* server_kind_name(ServerOptions::Kind k);
ServerOptions::Kind parse_server_kind(const std::string& s);

/// Applies a pseudo-gradient to the global shared values. Sgd: global + lr g.
/// Adam: global + lr m_hat / (sqrt(v_hat) + eps).
class ServerOptimizer {
public:
    explicit ServerOptimizer(ServerOptions options = {}) : options_(options) {}

    ValueMap step(const ValueMap& global, const ValueMap& pseudo_gradient);
    std::uint64_t step_count() const noexcept { return t_; }

private:
    ServerOptions options_;
    std::uint64_t t_ = 0;
    ValueMap m_;
    ValueMap v_;
};

struct NodeLoss {
    int node_id = 0;
    double train_loss = 0.0;
    std::size_t samples = 0;
};

struct RoundRecord {
    std::size_t round = 0;
    std::vector<NodeLoss> nodes;
    std::map<std::string, double> update_norms;  // L2 norm of the applied change per shared parameter
    double wall_ms = 0.0;

    /// L2 norm of the update restricted to names starting with `prefix`.
    double group_norm(const std::string& prefix) const;
};

struct FederationOptions {
    std::size_t rounds = 10;
    ServerOptions server;
    bool parallel_clients = false;
};

struct FederationResult {
    std::vector<RoundRecord> rounds;
    ValueMap global;
};

/// Checks that the clients can form one network: equal ModelDims, identical
/// shared name/shape maps, and equal physical spans PL dt, T dt, S dt.
void validate_network(std::span<const Client> clients);

using RoundCallback = std::function<void(const RoundRecord&, std::span<const ClientDelta>)>;

/// R rounds of broadcast, local update, aggregation and server step. All
/// clients hold the final global shared values on return.
FederationResult run_federation(std::vector<Client>& clients, const FederationOptions& options,
                                const RoundCallback& on_round = {});

}  // namespace pixtime
