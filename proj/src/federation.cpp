#include "pixtime/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <thread>

#include "pixtime/errors.hpp"

namespace pixtime {

namespace {

bool has_prefix(const std::string& name, const std::string& prefix) {
    if (name.compare(0, prefix.size(), prefix) != 0) {
        return false;
    }
    // "ve_table" must not swallow a hypothetical "ve_table_extra".
    return name.size() == prefix.size() || prefix.back() == '.' || name[prefix.size()] == '.';
}

}  // namespace

const std::vector<std::string>& ParameterPartition::shared_prefixes() {
    static const std::vector<std::string> p{"ve_table", "aux_encoder.", "target_decoder."};
    return p;
}

const std::vector<std::string>& ParameterPartition::local_prefixes() {
    static const std::vector<std::string> p{"patch_linear", "abstract_token", "ve_linear", "projection",
                                            "pos_embed"};
    return p;
}

Scope ParameterPartition::classify(const std::string& name) {
    for (const auto& p : shared_prefixes()) {
        if (has_prefix(name, p)) {
            return Scope::Shared;
        }
    }
    for (const auto& p : local_prefixes()) {
        if (has_prefix(name, p)) {
            return Scope::Local;
        }
    }
    throw PartitionError("parameter '" + name + "' is neither shared nor local");
}

PartitionedValues partition(const ParameterStore& params) {
    PartitionedValues out;
    for (const Parameter& p : params) {
        (ParameterPartition::classify(p.name) == Scope::Shared ? out.shared : out.local).emplace(p.name, p.value);
    }
    return out;
}

ValueMap shared_values(const ParameterStore& params) { return partition(params).shared; }

std::map<std::string, Shape> shared_shapes(const ParameterStore& params) {
    std::map<std::string, Shape> out;
    for (const Parameter& p : params) {
        if (ParameterPartition::classify(p.name) == Scope::Shared) {
            out.emplace(p.name, p.value.shape);
        }
    }
    return out;
}

Client::Client(PiXTimeModel model, NodeDataView data, ClientOptions options, std::uint64_t seed)
    : model_(std::move(model)), data_(std::move(data)), options_(options), seed_(seed), rng_(seed) {
    if (model_.shape().node_id != data_.node_id()) {
        throw ConfigError("model node id " + std::to_string(model_.shape().node_id) + " does not match data node id " +
                          std::to_string(data_.node_id()));
    }
    if (options_.batch_size == 0) {
        throw ConfigError("batch size must be positive");
    }
    if (!(options_.lr > 0.0)) {
        throw ConfigError("client learning rate must be positive");
    }
}

std::vector<bool> Client::ve_usage() const {
    std::vector<bool> used(model_.dims().n_all, false);
    for (std::size_t id : model_.shape().var_ids) {
        used.at(id) = true;
    }
    used.at(model_.shape().target_id) = true;
    return used;
}

std::vector<std::size_t> Client::epoch_windows() {
    std::vector<std::size_t> windows;
    if (options_.reshuffle_partition && data_.group_size() > 1) {
        std::vector<std::size_t> pool = data_.train_pool();
        std::mt19937_64 deal(options_.partition_seed ^ (0x9e3779b97f4a7c15ULL * (epoch_ + 1)));
        std::shuffle(pool.begin(), pool.end(), deal);
        for (std::size_t i : partition_windows(pool.size(), data_.group_size(), data_.group_rank())) {
            windows.push_back(pool[i]);
        }
    } else {
        windows = data_.windows(Split::Train);
    }
    if (options_.shuffle) {
        std::shuffle(windows.begin(), windows.end(), rng_);
    }
    return windows;
}

double Client::train_step(const Batch& batch) {
    ParameterStore& params = model_.params();
    params.zero_grad();
    double loss_value = 0.0;
    try {
        Tape tape;
        const Var loss = model_.loss(tape, batch);
        loss_value = loss.value().data[0];
        tape.backward(loss);
    } catch (const NumericError& e) {
        throw DivergenceError(node_id(), static_cast<long>(step_), e.what());
    }
    if (!std::isfinite(loss_value)) {
        throw DivergenceError(node_id(), static_cast<long>(step_), "non-finite training loss");
    }
    const std::vector<Parameter*> ptrs = params.pointers();
    adam_step(ptrs, adam_, options_.lr);
    ++step_;
    return loss_value;
}

EpochStats Client::train_epoch() {
    const std::vector<std::size_t> windows = epoch_windows();
    ++epoch_;
    EpochStats stats;
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < windows.size(); begin += options_.batch_size) {
        const std::size_t end = std::min(begin + options_.batch_size, windows.size());
        const std::span<const std::size_t> starts(windows.data() + begin, end - begin);
        const double loss = train_step(data_.batch(starts));
        loss_sum += loss * static_cast<double>(starts.size());
        stats.samples += starts.size();
        ++stats.steps;
    }
    stats.mean_loss = stats.samples > 0 ? loss_sum / static_cast<double>(stats.samples) : 0.0;
    return stats;
}

ClientDelta Client::update(const ValueMap& global_shared, EpochStats* stats) {
    model_.params().load(global_shared);
    if (options_.reset_adam) {
        adam_.reset();
    }
    EpochStats total;
    double loss_sum = 0.0;
    for (std::size_t e = 0; e < options_.local_epochs; ++e) {
        const EpochStats s = train_epoch();
        loss_sum += s.mean_loss * static_cast<double>(s.samples);
        total.samples += s.samples;
        total.steps += s.steps;
    }
    total.mean_loss = total.samples > 0 ? loss_sum / static_cast<double>(total.samples) : 0.0;
    if (stats != nullptr) {
        *stats = total;
    }

    ClientDelta delta;
    delta.node_id = node_id();
    delta.weight = static_cast<double>(total.samples);
    delta.ve_usage = ve_usage();
    for (const auto& [name, global] : global_shared) {
        const NDArray& trained = model_.params().get(name).value;
        NDArray d(global.shape);
        for (std::size_t i = 0; i < d.size(); ++i) {
            d.data[i] = trained.data[i] - global.data[i];
        }
        delta.deltas.emplace(name, std::move(d));
        delta.values.emplace(name, trained);
    }
    return delta;
}

namespace {

std::vector<const ClientDelta*> checked_order(std::span<const ClientDelta> deltas, bool need_values) {
    if (deltas.empty()) {
        throw AggregationError("cannot aggregate an empty delta list");
    }
    std::vector<const ClientDelta*> order;
    for (const ClientDelta& d : deltas) {
        order.push_back(&d);
    }
    std::sort(order.begin(), order.end(),
              [](const ClientDelta* a, const ClientDelta* b) { return a->node_id < b->node_id; });
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (order[i]->node_id == order[i - 1]->node_id) {
            throw AggregationError("duplicate delta from node " + std::to_string(order[i]->node_id));
        }
    }

    const ClientDelta& first = *order.front();
    for (const ClientDelta* d : order) {
        if (d->deltas.size() != first.deltas.size()) {
            throw AggregationError("node " + std::to_string(d->node_id) + " sent " +
                                   std::to_string(d->deltas.size()) + " parameters, expected " +
                                   std::to_string(first.deltas.size()));
        }
        if (!(d->weight >= 0.0) || !std::isfinite(d->weight)) {
            throw AggregationError("node " + std::to_string(d->node_id) + " has an invalid weight");
        }
        if (need_values && d->values.size() != d->deltas.size()) {
            throw AggregationError("node " + std::to_string(d->node_id) + " did not report trained values");
        }
        for (const auto& [name, value] : first.deltas) {
            auto it = d->deltas.find(name);
            if (it == d->deltas.end()) {
                throw AggregationError("node " + std::to_string(d->node_id) + " is missing '" + name + "'");
            }
            if (it->second.shape != value.shape) {
                throw AggregationError("shape mismatch for '" + name + "': " + shape_str(value.shape) + " vs " +
                                       shape_str(it->second.shape) + " from node " + std::to_string(d->node_id));
            }
            if (need_values) {
                auto vit = d->values.find(name);
                if (vit == d->values.end() || vit->second.shape != value.shape) {
                    throw AggregationError("node " + std::to_string(d->node_id) + " reported no value for '" +
                                           name + "'");
                }
            }
        }
        if (first.deltas.count("ve_table") != 0 &&
            d->ve_usage.size() != first.deltas.at("ve_table").shape.at(0)) {
            throw AggregationError("node " + std::to_string(d->node_id) + " ve_usage has " +
                                   std::to_string(d->ve_usage.size()) + " entries, table has " +
                                   std::to_string(first.deltas.at("ve_table").shape.at(0)) + " rows");
        }
    }
    return order;
}

// Weighted mean of one member map (deltas or values) across clients. Entries
// with no contributing weight come from `fallback`, or are zero without one.
ValueMap weighted_mean(const std::vector<const ClientDelta*>& order, ValueMap ClientDelta::*member,
                       const ValueMap* fallback) {
    double total = 0.0;
    for (const ClientDelta* d : order) {
        total += d->weight;
    }

    ValueMap out;
    for (const auto& [name, shape_ref] : order.front()->deltas) {
        NDArray g(shape_ref.shape);
        const NDArray* keep = fallback != nullptr ? &fallback->at(name) : nullptr;
        if (name != "ve_table") {
            if (total > 0.0) {
                for (const ClientDelta* d : order) {
                    const double w = d->weight / total;
                    const NDArray& v = (d->*member).at(name);
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        g.data[i] += w * v.data[i];
                    }
                }
            } else if (keep != nullptr) {
                g = *keep;
            }
            out.emplace(name, std::move(g));
            continue;
        }
        if (g.rank() != 2) {
            throw AggregationError("ve_table delta must be 2-D, got " + shape_str(g.shape));
        }
        const std::size_t rows = g.shape[0];
        const std::size_t cols = g.shape[1];
        for (std::size_t r = 0; r < rows; ++r) {
            double row_total = 0.0;
            for (const ClientDelta* d : order) {
                if (d->ve_usage[r]) {
                    row_total += d->weight;
                }
            }
            if (row_total <= 0.0) {
                if (keep != nullptr) {
                    std::copy_n(keep->data.begin() + static_cast<std::ptrdiff_t>(r * cols), cols,
                                g.data.begin() + static_cast<std::ptrdiff_t>(r * cols));
                }
                continue;
            }
            for (const ClientDelta* d : order) {
                if (!d->ve_usage[r]) {
                    continue;
                }
                const double w = d->weight / row_total;
                const NDArray& v = (d->*member).at(name);
                for (std::size_t c = 0; c < cols; ++c) {
                    g.data[r * cols + c] += w * v.data[r * cols + c];
                }
            }
        }
        out.emplace(name, std::move(g));
    }
    return out;
}

}  // namespace

ValueMap aggregate(std::span<const ClientDelta> deltas) {
    return weighted_mean(checked_order(deltas, false), &ClientDelta::deltas, nullptr);
}

ValueMap average_models(std::span<const ClientDelta> deltas, const ValueMap& global) {
    return weighted_mean(checked_order(deltas, true), &ClientDelta::values, &global);
}

const char* server_kind_name(ServerOptions::Kind k) { return k == ServerOptions::Kind::Adam ? "adam" : "sgd"; }

ServerOptions::Kind parse_server_kind(const std::string& s) {
    if (s == "sgd") {
        return ServerOptions::Kind::Sgd;
    }
    if (s == "adam") {
        return ServerOptions::Kind::Adam;
    }
    throw ConfigError("unknown server optimizer '" + s + "' (expected sgd or adam)");
}

ValueMap ServerOptimizer::step(const ValueMap& global, const ValueMap& pseudo_gradient) {
    ++t_;
    ValueMap out = global;
    const bool adam = options_.kind == ServerOptions::Kind::Adam;
    const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
    for (auto& [name, value] : out) {
        auto git = pseudo_gradient.find(name);
        if (git == pseudo_gradient.end()) {
            throw AggregationError("pseudo-gradient is missing '" + name + "'");
        }
        const NDArray& g = git->second;
        if (g.shape != value.shape) {
            throw AggregationError("pseudo-gradient shape mismatch for '" + name + "'");
        }
        if (!adam) {
            for (std::size_t i = 0; i < value.size(); ++i) {
                value.data[i] += options_.lr * g.data[i];
            }
            continue;
        }
        NDArray& m = m_.try_emplace(name, NDArray(value.shape)).first->second;
        NDArray& v = v_.try_emplace(name, NDArray(value.shape)).first->second;
        for (std::size_t i = 0; i < value.size(); ++i) {
            m.data[i] = options_.beta1 * m.data[i] + (1.0 - options_.beta1) * g.data[i];
            v.data[i] = options_.beta2 * v.data[i] + (1.0 - options_.beta2) * g.data[i] * g.data[i];
            value.data[i] += options_.lr * (m.data[i] / bc1) / (std::sqrt(v.data[i] / bc2) + options_.eps);
        }
    }
    return out;
}

double RoundRecord::group_norm(const std::string& prefix) const {
    double sq = 0.0;
    for (const auto& [name, n] : update_norms) {
        if (name.compare(0, prefix.size(), prefix) == 0) {
            sq += n * n;
        }
    }
    return std::sqrt(sq);
}

void validate_network(std::span<const Client> clients) {
    if (clients.empty()) {
        throw ConfigError("a federation needs at least one node");
    }
    const PiXTimeModel& ref = clients.front().model();
    const auto ref_shapes = shared_shapes(ref.params());
    const NodeShapeConfig& rs = ref.shape();
    std::vector<int> ids;
    for (const Client& c : clients) {
        const PiXTimeModel& m = c.model();
        ids.push_back(c.node_id());
        if (!(m.dims() == ref.dims())) {
            throw ConfigError("node " + std::to_string(c.node_id()) + " has model dimensions different from node " +
                              std::to_string(clients.front().node_id()));
        }
        if (shared_shapes(m.params()) != ref_shapes) {
            throw ConfigError("node " + std::to_string(c.node_id()) + " has a different shared parameter set");
        }
        const NodeShapeConfig& s = m.shape();
        auto same = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b)); };
        if (!same(static_cast<double>(s.patch_len) * s.dt, static_cast<double>(rs.patch_len) * rs.dt) ||
            !same(static_cast<double>(s.lookback) * s.dt, static_cast<double>(rs.lookback) * rs.dt) ||
            !same(static_cast<double>(s.horizon) * s.dt, static_cast<double>(rs.horizon) * rs.dt)) {
            throw ConfigError("node " + std::to_string(c.node_id()) +
                              " covers a different physical span (PL*dt, T*dt or S*dt) than node " +
                              std::to_string(clients.front().node_id()));
        }
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        throw ConfigError("node ids must be unique");
    }
}

FederationResult run_federation(std::vector<Client>& clients, const FederationOptions& options,
                                const RoundCallback& on_round) {
    validate_network(clients);
    FederationResult result;
    result.global = shared_values(clients.front().model().params());
    ServerOptimizer server(options.server);

    for (std::size_t round = 0; round < options.rounds; ++round) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<ClientDelta> deltas(clients.size());
        std::vector<EpochStats> stats(clients.size());

        if (options.parallel_clients && clients.size() > 1) {
            std::vector<std::exception_ptr> errors(clients.size());
            std::vector<std::thread> workers;
            for (std::size_t i = 0; i < clients.size(); ++i) {
                workers.emplace_back([&, i] {
                    try {
                        deltas[i] = clients[i].update(result.global, &stats[i]);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                });
            }
            for (auto& w : workers) {
                w.join();
            }
            for (auto& e : errors) {
                if (e) {
                    std::rethrow_exception(e);
                }
            }
        } else {
            for (std::size_t i = 0; i < clients.size(); ++i) {
                deltas[i] = clients[i].update(result.global, &stats[i]);
            }
        }

        for (const ClientDelta& d : deltas) {
            for (const auto& [name, value] : d.deltas) {
                if (ParameterPartition::classify(name) != Scope::Shared) {
                    throw AggregationError("node " + std::to_string(d.node_id) + " tried to send local parameter '" +
                                           name + "'");
                }
            }
        }

        // Plain FedAvg is applied as the weighted model average, which equals
        // global + pseudo-gradient without the rounding of the detour.
        const bool fedavg = options.server.kind == ServerOptions::Kind::Sgd && options.server.lr == 1.0;
        ValueMap next = fedavg ? average_models(deltas, result.global) : server.step(result.global, aggregate(deltas));

        RoundRecord record;
        record.round = round;
        for (std::size_t i = 0; i < clients.size(); ++i) {
            record.nodes.push_back({clients[i].node_id(), stats[i].mean_loss, stats[i].samples});
        }
        std::sort(record.nodes.begin(), record.nodes.end(),
                  [](const NodeLoss& a, const NodeLoss& b) { return a.node_id < b.node_id; });
        for (const auto& [name, value] : next) {
            const NDArray& before = result.global.at(name);
            double sq = 0.0;
            for (std::size_t i = 0; i < value.size(); ++i) {
                const double d = value.data[i] - before.data[i];
                sq += d * d;
            }
            record.update_norms.emplace(name, std::sqrt(sq));
        }
        result.global = std::move(next);
        for (Client& c : clients) {
            c.model().params().load(result.global);
        }
        record.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        if (on_round) {
            on_round(record, deltas);
        }
        result.rounds.push_back(std::move(record));
    }
    return result;
}

}  // namespace pixtime
