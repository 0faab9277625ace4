#include "pixtime/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "pixtime/errors.hpp"

#ifndef PIXTIME_BUILD_ID
#define PIXTIME_BUILD_ID "unknown"
#endif

namespace pixtime {

using nlohmann::ordered_json;

const char* build_id() { return PIXTIME_BUILD_ID; }

namespace {

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string fmt_fixed(double v, int digits) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, digits);
    return std::string(buf, res.ptr);
}

ExperimentConfig with_seed(const ExperimentConfig& config, std::uint64_t seed) {
    ExperimentConfig c = config;
    c.seed = seed;
    if (!c.dataset.synthetic_seed_set) {
        c.dataset.synthetic.seed = seed;
    }
    return c;
}

}  // namespace

LoadedData load_dataset(const ExperimentConfig& config) {
    RawDataset raw = config.dataset.kind == "csv" ? load_csv(config.dataset.path)
                                                  : generate_synthetic(config.dataset.synthetic);
    config.validate_against(raw);
    LoadedData out;
    out.target_id = config.dataset.target.empty() ? raw.values.cols - 1 : raw.column_index(config.dataset.target);
    out.standardized = standardize(raw, config.split);
    return out;
}

std::vector<ResolvedNode> resolve_nodes(const ExperimentConfig& config, const LoadedData& data) {
    const RawDataset& series = data.standardized.data;
    const std::size_t cols = series.values.cols;
    std::vector<std::size_t> all_ids(cols);
    for (std::size_t i = 0; i < cols; ++i) {
        all_ids[i] = i;
    }
    const std::size_t n_nodes = config.nodes.size();
    std::map<std::size_t, std::size_t> group_count;
    for (const NodeConfig& n : config.nodes) {
        ++group_count[n.stride];
    }
    std::map<std::size_t, std::size_t> next_rank;

    std::vector<ResolvedNode> out;
    for (std::size_t i = 0; i < n_nodes; ++i) {
        const NodeConfig& nc = config.nodes[i];
        ResolvedNode r;
        r.stride = nc.stride;
        r.group_size = group_count[nc.stride];
        r.group_rank = next_rank[nc.stride]++;
        NodeShapeConfig& s = r.shape;
        s.node_id = static_cast<int>(i);
        s.lookback = config.window.lookback / nc.stride;
        s.horizon = config.window.horizon / nc.stride;
        s.patch_len = config.window.patch_len / nc.stride;
        s.target_id = data.target_id;
        s.dt = series.dt * static_cast<double>(nc.stride);
        if (config.task != Task::U2U) {
            if (nc.aux) {
                for (const std::string& name : *nc.aux) {
                    s.var_ids.push_back(series.column_index(name));
                }
            } else if (nc.aux_count || config.subset_size) {
                const std::size_t count = nc.aux_count.value_or(config.subset_size.value_or(0));
                s.var_ids = assign_variable_subsets(all_ids, data.target_id, n_nodes, count,
                                                    derive_seed(config.seed, "subsets"))[i];
            } else {
                for (std::size_t id : all_ids) {
                    if (id != data.target_id) {
                        s.var_ids.push_back(id);
                    }
                }
            }
        }
        for (std::size_t id : s.var_ids) {
            r.aux_names.push_back(series.column_names[id]);
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<Client> build_clients(const ExperimentConfig& config, const LoadedData& data,
                                  const std::vector<ResolvedNode>& nodes) {
    ModelDims dims = config.dims;
    dims.n_all = data.standardized.data.values.cols;
    std::map<std::size_t, RawDataset> by_stride;
    std::vector<Client> clients;
    clients.reserve(nodes.size());
    for (const ResolvedNode& n : nodes) {
        auto it = by_stride.find(n.stride);
        if (it == by_stride.end()) {
            it = by_stride.emplace(n.stride, downsample(data.standardized.data, n.stride, config.pooling)).first;
        }
        const int id = n.shape.node_id;
        NodeDataView view(it->second, n.shape, config.task, config.split, n.group_rank, n.group_size);
        PiXTimeModel model(dims, n.shape, derive_seed(config.seed, "shared"),
                           derive_seed(config.seed, "local", static_cast<std::uint64_t>(id)), config.model);
        ClientOptions opts;
        opts.lr = config.optimizer.lr;
        opts.batch_size = config.optimizer.batch_size;
        opts.local_epochs = config.mode == Mode::Central ? config.optimizer.epochs : config.local_epochs();
        opts.shuffle = config.optimizer.shuffle;
        opts.reshuffle_partition = config.optimizer.reshuffle_partition;
        opts.partition_seed = derive_seed(config.seed, "partition", n.stride);
        opts.reset_adam = config.optimizer.reset_adam;
        clients.emplace_back(std::move(model), std::move(view), opts,
                             derive_seed(config.seed, "shuffle", static_cast<std::uint64_t>(id)));
    }
    return clients;
}

void RoundLog::add(const std::string& run, const RoundRecord& record) {
    for (const NodeLoss& n : record.nodes) {
        std::string row = run + "," + std::to_string(record.round) + "," + std::to_string(n.node_id) + "," +
                          fmt(n.train_loss) + "," + fmt(record.group_norm("ve_table")) + "," +
                          fmt(record.group_norm("aux_encoder.")) + "," + fmt(record.group_norm("target_decoder.")) +
                          "," + fmt_fixed(record.wall_ms, 3);
        rows_.push_back(std::move(row));
    }
}

std::string RoundLog::csv() const {
    std::string out = "run,round,node_id,train_loss,ve_table_norm,aux_encoder_norm,target_decoder_norm,wall_ms\n";
    for (const std::string& r : rows_) {
        out += r;
        out += '\n';
    }
    return out;
}

RunResult run_training(const ExperimentConfig& config, const LoadedData& data, RoundLog* log,
                       const std::string& run_label) {
    return run_training(config, data, resolve_nodes(config, data), log, run_label);
}

RunResult run_training(const ExperimentConfig& config, const LoadedData& data, const std::vector<ResolvedNode>& nodes,
                       RoundLog* log, const std::string& run_label) {
    std::vector<Client> clients = build_clients(config, data, nodes);
    RunResult result;

    if (config.mode == Mode::Central) {
        if (clients.size() != 1) {
            throw ConfigError("central training needs exactly one node");
        }
        Client& c = clients.front();
        for (std::size_t e = 0; e < config.optimizer.epochs; ++e) {
            const ValueMap before = shared_values(c.model().params());
            const auto t0 = std::chrono::steady_clock::now();
            const EpochStats s = c.train_epoch();
            RoundRecord rec;
            rec.round = e;
            rec.nodes.push_back({c.node_id(), s.mean_loss, s.samples});
            for (const auto& [name, value] : shared_values(c.model().params())) {
                const NDArray& b = before.at(name);
                double sq = 0.0;
                for (std::size_t i = 0; i < value.size(); ++i) {
                    const double d = value.data[i] - b.data[i];
                    sq += d * d;
                }
                rec.update_norms.emplace(name, std::sqrt(sq));
            }
            rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            result.rounds.push_back(std::move(rec));
        }
    } else {
        FederationOptions fo;
        fo.rounds = config.rounds;
        fo.server = config.optimizer.server;
        fo.parallel_clients = config.parallel_clients;
        result.rounds = run_federation(clients, fo).rounds;
    }
    if (log != nullptr) {
        for (const RoundRecord& r : result.rounds) {
            log->add(run_label, r);
        }
    }

    for (std::size_t i = 0; i < clients.size(); ++i) {
        Client& c = clients[i];
        NodeResult nr;
        nr.node = nodes[i];
        nr.train_windows = c.data().windows(Split::Train).size();
        nr.test = evaluate(c.model(), c.data(), Split::Test, config.eval_batch);
        nr.persistence = persistence_baseline(c.data(), Split::Test, config.eval_batch);
        if (!result.rounds.empty()) {
            for (const NodeLoss& nl : result.rounds.back().nodes) {
                if (nl.node_id == c.node_id()) {
                    nr.final_train_loss = nl.train_loss;
                }
            }
        }
        result.nodes.push_back(std::move(nr));
    }
    const double n = static_cast<double>(result.nodes.size());
    for (const NodeResult& nr : result.nodes) {
        result.mse += nr.test.mse;
        result.mae += nr.test.mae;
        result.persistence_mse += nr.persistence.mse;
        result.persistence_mae += nr.persistence.mae;
    }
    result.mse /= n;
    result.mae /= n;
    result.persistence_mse /= n;
    result.persistence_mae /= n;
    return result;
}

std::vector<GradCheckResult> run_gradcheck(const GradCheckConfig& config, std::uint64_t seed) {
    std::vector<GradCheckResult> out;
    for (Task task : config.tasks) {
        ModelDims dims = config.dims;
        dims.n_all = config.aux_count + 1;
        NodeShapeConfig shape;
        shape.lookback = config.lookback;
        shape.horizon = config.horizon;
        shape.patch_len = config.patch_len;
        shape.target_id = config.aux_count;
        for (std::size_t i = 0; i < config.aux_count; ++i) {
            shape.var_ids.push_back(i);
        }
        PiXTimeModel model(dims, shape, derive_seed(seed, "shared"), derive_seed(seed, "local"));

        // Move every parameter to a generic point: zero biases and a zero VE
        // table would leave some terms of the chain rule untested.
        std::mt19937_64 rng(derive_seed(seed, "gradcheck", static_cast<std::uint64_t>(task)));
        std::normal_distribution<double> jitter(0.0, 0.1);
        for (Parameter& p : model.params()) {
            for (double& v : p.value.data) {
                v += jitter(rng);
            }
        }

        std::normal_distribution<double> unit(0.0, 1.0);
        auto random = [&](Shape s) {
            NDArray a(std::move(s));
            for (double& v : a.data) {
                v = unit(rng);
            }
            return a;
        };
        const std::size_t b = config.batch;
        const std::size_t t = config.lookback;
        const std::size_t s = config.horizon;
        Batch batch;
        batch.task = task;
        batch.target_id = shape.target_id;
        if (task == Task::M2M) {
            const std::size_t n = config.aux_count + 1;
            batch.input = random({b, t, n});
            batch.target = random({b, n, s});
            for (std::size_t i = 0; i < n; ++i) {
                batch.var_ids.push_back(i);
            }
        } else {
            batch.input = random({b, t});
            batch.target = random({b, s});
            if (task == Task::M2U) {
                batch.aux = random({b, t, config.aux_count});
                batch.var_ids = shape.var_ids;
            } else {
                batch.var_ids = {shape.target_id};
            }
        }
        const std::vector<Parameter*> params = model.params().pointers();
        GradCheckReport report =
            grad_check([&](Tape& tape) { return model.loss(tape, batch); }, params, config.h, config.tol);
        out.push_back({task, std::move(report)});
    }
    return out;
}

double median(std::vector<double> v) {
    if (v.empty()) {
        throw EvaluationError("median of an empty list");
    }
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

GranularityReport ablate_granularity(const ExperimentConfig& config, RoundLog* log) {
    GranularityReport report;
    report.coarse_stride = config.ablation.coarse_stride;
    for (std::uint64_t seed : config.ablation.seeds) {
        ExperimentConfig c = with_seed(config, seed);
        c.mode = Mode::Federated;
        NodeConfig fine = config.nodes.front();
        fine.stride = 1;
        NodeConfig coarse = fine;
        coarse.stride = config.ablation.coarse_stride;
        c.nodes = {fine, coarse};
        const LoadedData data = load_dataset(c);
        const std::vector<ResolvedNode> both = resolve_nodes(c, data);
        const std::string tag = "seed" + std::to_string(seed);

        GranularityRun run;
        run.seed = seed;
        const RunResult mix = run_training(c, data, both, log, "mix/" + tag);
        run.mix_fine = mix.nodes[0].test;
        run.mix_coarse = mix.nodes[1].test;
        run.fine_only = run_training(c, data, {both[0]}, log, "m/" + tag).nodes[0].test;
        run.coarse_only = run_training(c, data, {both[1]}, log, "h/" + tag).nodes[0].test;
        report.runs.push_back(std::move(run));
    }
    auto med = [&](auto get) {
        std::vector<double> v;
        for (const GranularityRun& r : report.runs) {
            v.push_back(get(r));
        }
        return median(v);
    };
    report.mix_fine_mse = med([](const GranularityRun& r) { return r.mix_fine.mse; });
    report.mix_coarse_mse = med([](const GranularityRun& r) { return r.mix_coarse.mse; });
    report.fine_only_mse = med([](const GranularityRun& r) { return r.fine_only.mse; });
    report.coarse_only_mse = med([](const GranularityRun& r) { return r.coarse_only.mse; });
    report.mix_fine_mae = med([](const GranularityRun& r) { return r.mix_fine.mae; });
    report.mix_coarse_mae = med([](const GranularityRun& r) { return r.mix_coarse.mae; });
    report.fine_only_mae = med([](const GranularityRun& r) { return r.fine_only.mae; });
    report.coarse_only_mae = med([](const GranularityRun& r) { return r.coarse_only.mae; });
    return report;
}

namespace {

double step0_loss(Client& client, std::size_t batch_size) {
    const std::vector<std::size_t>& w = client.data().windows(Split::Train);
    const std::size_t n = std::min(batch_size, w.size());
    const Batch batch = client.data().batch(std::span<const std::size_t>(w.data(), n));
    Tape tape;
    tape.set_grad_enabled(false);
    return client.model().loss(tape, batch).value().data[0];
}

}  // namespace

VeReport ablate_ve(const ExperimentConfig& config, RoundLog* log) {
    VeReport report;
    for (std::size_t subset : config.ablation.subset_sizes) {
        VeSweepPoint point;
        point.subset_size = subset;
        std::vector<double> ve_mse, nove_mse, ve_mae, nove_mae;
        for (std::uint64_t seed : config.ablation.seeds) {
            ExperimentConfig c = with_seed(config, seed);
            c.mode = Mode::Federated;
            NodeConfig node;
            node.stride = 1;
            node.aux_count = subset;
            c.nodes.assign(config.ablation.ve_nodes, node);
            c.subset_size.reset();
            const LoadedData data = load_dataset(c);
            const std::vector<ResolvedNode> nodes = resolve_nodes(c, data);
            const std::string tag = "k" + std::to_string(subset) + "/seed" + std::to_string(seed);

            VeRun run;
            run.subset_size = subset;
            run.seed = seed;
            ExperimentConfig with = c;
            with.model.use_ve_table = true;
            ExperimentConfig without = c;
            without.model.use_ve_table = false;
            {
                std::vector<Client> a = build_clients(with, data, nodes);
                std::vector<Client> b = build_clients(without, data, nodes);
                run.ve_step0_loss = step0_loss(a.front(), c.optimizer.batch_size);
                run.nove_step0_loss = step0_loss(b.front(), c.optimizer.batch_size);
            }
            const RunResult rv = run_training(with, data, nodes, log, "VE/" + tag);
            const RunResult rn = run_training(without, data, nodes, log, "NoVE/" + tag);
            run.ve_mse = rv.mse;
            run.ve_mae = rv.mae;
            run.nove_mse = rn.mse;
            run.nove_mae = rn.mae;
            point.step0_identical = point.step0_identical &&
                                    std::memcmp(&run.ve_step0_loss, &run.nove_step0_loss, sizeof(double)) == 0;
            ve_mse.push_back(run.ve_mse);
            nove_mse.push_back(run.nove_mse);
            ve_mae.push_back(run.ve_mae);
            nove_mae.push_back(run.nove_mae);
            report.runs.push_back(run);
        }
        point.ve_mse = median(ve_mse);
        point.nove_mse = median(nove_mse);
        point.ve_mae = median(ve_mae);
        point.nove_mae = median(nove_mae);
        report.sweep.push_back(point);
    }
    return report;
}

ordered_json metrics_json(const ForecastMetrics& m, bool breakdown) {
    ordered_json j;
    j["mse"] = m.mse;
    j["mae"] = m.mae;
    if (breakdown) {
        j["mse_by_step"] = m.mse_by_step;
        j["mae_by_step"] = m.mae_by_step;
    }
    return j;
}

namespace {

ordered_json header(const ExperimentConfig& config) {
    ordered_json j;
    j["mode"] = mode_name(config.mode);
    j["task"] = task_name(config.task);
    j["seed"] = config.seed;
    j["build_id"] = build_id();
    return j;
}

ordered_json run_json(const ExperimentConfig& config, const RunResult& r) {
    ordered_json j = header(config);
    j["rounds_completed"] = r.rounds.size();
    ordered_json nodes = ordered_json::array();
    for (const NodeResult& n : r.nodes) {
        ordered_json e;
        e["node_id"] = n.node.shape.node_id;
        e["stride"] = n.node.stride;
        e["lookback"] = n.node.shape.lookback;
        e["horizon"] = n.node.shape.horizon;
        e["patch_len"] = n.node.shape.patch_len;
        e["aux"] = n.node.aux_names;
        e["train_windows"] = n.train_windows;
        e["test_windows"] = n.test.rows;
        if (r.rounds.empty()) {
            e["final_train_loss"] = nullptr;
        } else {
            e["final_train_loss"] = n.final_train_loss;
        }
        e["test"] = metrics_json(n.test);
        e["persistence"] = metrics_json(n.persistence, false);
        nodes.push_back(e);
    }
    j["nodes"] = nodes;
    ordered_json avg;
    avg["mse"] = r.mse;
    avg["mae"] = r.mae;
    avg["persistence_mse"] = r.persistence_mse;
    avg["persistence_mae"] = r.persistence_mae;
    j["average"] = avg;
    return j;
}

ordered_json gradcheck_json(const ExperimentConfig& config, const std::vector<GradCheckResult>& results) {
    ordered_json j = header(config);
    ordered_json list = ordered_json::array();
    bool all = true;
    for (const GradCheckResult& r : results) {
        ordered_json e;
        e["task"] = task_name(r.task);
        e["max_rel_error"] = r.report.max_rel_error;
        e["worst_param"] = r.report.worst_param;
        e["coords"] = r.report.coords;
        e["passed"] = r.report.passed;
        ordered_json params = ordered_json::object();
        for (const ParamGradError& p : r.report.params) {
            params[p.name] = p.max_rel_error;
        }
        e["params"] = params;
        list.push_back(e);
        all = all && r.report.passed;
    }
    j["h"] = config.gradcheck.h;
    j["tol"] = config.gradcheck.tol;
    j["results"] = list;
    j["passed"] = all;
    return j;
}

ordered_json granularity_json(const ExperimentConfig& config, const GranularityReport& g) {
    ordered_json j = header(config);
    j["coarse_stride"] = g.coarse_stride;
    ordered_json runs = ordered_json::array();
    for (const GranularityRun& r : g.runs) {
        ordered_json e;
        e["seed"] = r.seed;
        e["mix_fine"] = metrics_json(r.mix_fine, false);
        e["mix_coarse"] = metrics_json(r.mix_coarse, false);
        e["fine_only"] = metrics_json(r.fine_only, false);
        e["coarse_only"] = metrics_json(r.coarse_only, false);
        runs.push_back(e);
    }
    j["runs"] = runs;
    ordered_json med;
    med["mix_fine"] = {{"mse", g.mix_fine_mse}, {"mae", g.mix_fine_mae}};
    med["mix_coarse"] = {{"mse", g.mix_coarse_mse}, {"mae", g.mix_coarse_mae}};
    med["fine_only"] = {{"mse", g.fine_only_mse}, {"mae", g.fine_only_mae}};
    med["coarse_only"] = {{"mse", g.coarse_only_mse}, {"mae", g.coarse_only_mae}};
    j["median"] = med;
    // Columns as in the granularity study: mix averages both nodes, h is the
    // coarse node alone, m the fine node alone.
    ordered_json table;
    table["MSE"] = {{"mix", 0.5 * (g.mix_fine_mse + g.mix_coarse_mse)}, {"h", g.coarse_only_mse}, {"m", g.fine_only_mse}};
    table["MAE"] = {{"mix", 0.5 * (g.mix_fine_mae + g.mix_coarse_mae)}, {"h", g.coarse_only_mae}, {"m", g.fine_only_mae}};
    j["table"] = table;
    j["coarse_mix_le_coarse_only"] = g.coarse_improves();
    j["fine_mix_le_1_05_fine_only"] = g.fine_within(1.05);
    return j;
}

ordered_json ve_json(const ExperimentConfig& config, const VeReport& v) {
    ordered_json j = header(config);
    j["nodes"] = config.ablation.ve_nodes;
    ordered_json runs = ordered_json::array();
    for (const VeRun& r : v.runs) {
        ordered_json e;
        e["subset_size"] = r.subset_size;
        e["seed"] = r.seed;
        e["VE"] = {{"mse", r.ve_mse}, {"mae", r.ve_mae}, {"step0_loss", r.ve_step0_loss}};
        e["NoVE"] = {{"mse", r.nove_mse}, {"mae", r.nove_mae}, {"step0_loss", r.nove_step0_loss}};
        runs.push_back(e);
    }
    j["runs"] = runs;
    ordered_json sweep = ordered_json::array();
    for (const VeSweepPoint& p : v.sweep) {
        ordered_json e;
        e["subset_size"] = p.subset_size;
        e["VE"] = {{"mse", p.ve_mse}, {"mae", p.ve_mae}};
        e["NoVE"] = {{"mse", p.nove_mse}, {"mae", p.nove_mae}};
        e["mse_ratio"] = p.ve_mse / p.nove_mse;
        e["step0_identical"] = p.step0_identical;
        sweep.push_back(e);
    }
    j["sweep"] = sweep;
    return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << text;
}

}  // namespace

ExperimentOutput run_experiment(const ExperimentConfig& config, bool write_files) {
    config.validate();
    ExperimentOutput out;
    switch (config.mode) {
        case Mode::Central:
        case Mode::Federated: {
            const LoadedData data = load_dataset(config);
            out.metrics = run_json(config, run_training(config, data, &out.log, mode_name(config.mode)));
            break;
        }
        case Mode::GradCheck:
            out.metrics = gradcheck_json(config, run_gradcheck(config.gradcheck, config.seed));
            break;
        case Mode::AblateGranularity:
            out.metrics = granularity_json(config, ablate_granularity(config, &out.log));
            break;
        case Mode::AblateVe:
            out.metrics = ve_json(config, ablate_ve(config, &out.log));
            break;
    }
    if (write_files) {
        std::filesystem::create_directories(config.output_dir);
        write_text(config.output_dir / "config.json", config.to_json().dump(2) + "\n");
        write_text(config.output_dir / "metrics.json", out.metrics.dump(2) + "\n");
        write_text(config.output_dir / "rounds.csv", out.log.csv());
    }
    return out;
}

}  // namespace pixtime
