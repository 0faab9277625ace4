#include "pixtime/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "pixtime/errors.hpp"

namespace pixtime {

using nlohmann::json;
using nlohmann::ordered_json;

const char* mode_name(Mode m) {
    switch (m) {
        case Mode::Central:
            return "central";
        case Mode::Federated:
            return "federated";
        case Mode::GradCheck:
            return "gradcheck";
        case Mode::AblateGranularity:
            return "ablate-granularity";
        case Mode::AblateVe:
            return "ablate-ve";
    }
    return "?";
}

Mode parse_mode(const std::string& s) {
    for (Mode m : {Mode::Central, Mode::Federated, Mode::GradCheck, Mode::AblateGranularity, Mode::AblateVe}) {
        if (s == mode_name(m)) {
            return m;
        }
    }
    throw ConfigError("unknown mode '" + s + "' (expected central, federated, gradcheck, ablate-granularity or ablate-ve)");
}

std::uint64_t derive_seed(std::uint64_t seed, const std::string& purpose, std::uint64_t index) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::uint64_t h = mix(seed);
    for (char c : purpose) {
        h = mix(h ^ static_cast<unsigned char>(c));
    }
    return mix(h ^ mix(index));
}

namespace {

// Reads one JSON object, remembering which keys were consumed so that
// leftovers (typos) can be reported.
bool non_negative_integer(const json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) {
            throw ConfigError(where() + " must be a JSON object");
        }
    }

    bool has(const char* key) const { return j_.contains(key); }

    const json* child(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    std::string at(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    bool get(const char* key, std::size_t& out) {
        const json* v = child(key);
        if (v == nullptr) {
            return false;
        }
        out = to_size(*v, at(key));
        return true;
    }

    bool get(const char* key, std::uint64_t& out, int) {
        const json* v = child(key);
        if (v == nullptr) {
            return false;
        }
        if (!non_negative_integer(*v)) {
            throw ConfigError(at(key) + " must be a non-negative integer");
        }
        out = v->get<std::uint64_t>();
        return true;
    }

    bool get(const char* key, double& out) {
        const json* v = child(key);
        if (v == nullptr) {
            return false;
        }
        if (!v->is_number()) {
            throw ConfigError(at(key) + " must be a number");
        }
        out = v->get<double>();
        return true;
    }

    bool get(const char* key, bool& out) {
        const json* v = child(key);
        if (v == nullptr) {
            return false;
        }
        if (!v->is_boolean()) {
            throw ConfigError(at(key) + " must be true or false");
        }
        out = v->get<bool>();
        return true;
    }

    bool get(const char* key, std::string& out) {
        const json* v = child(key);
        if (v == nullptr) {
            return false;
        }
        if (!v->is_string()) {
            throw ConfigError(at(key) + " must be a string");
        }
        out = v->get<std::string>();
        return true;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (seen_.count(it.key()) == 0) {
                std::string allowed;
                for (const auto& k : seen_) {
                    allowed += (allowed.empty() ? "" : ", ") + k;
                }
                throw ConfigError(at(it.key().c_str()) + ": unknown key (allowed here: " + allowed + ")");
            }
        }
    }

    static std::size_t to_size(const json& v, const std::string& where) {
        if (!non_negative_integer(v)) {
            throw ConfigError(where + " must be a non-negative integer");
        }
        return v.get<std::size_t>();
    }

private:
    std::string where() const { return path_.empty() ? "config" : path_; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

template <typename T, typename F>
std::vector<T> read_list(const json& v, const std::string& where, F&& item) {
    if (!v.is_array()) {
        throw ConfigError(where + " must be an array");
    }
    std::vector<T> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(item(v[i], where + "[" + std::to_string(i) + "]"));
    }
    return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    Reader r(j, "");
    std::string s;
    if (r.get("mode", s)) {
        c.mode = parse_mode(s);
    }
    if (r.get("task", s)) {
        c.task = parse_task(s);
    }
    r.get("seed", c.seed, 0);
    if (r.get("output_dir", s)) {
        c.output_dir = s;
    }

    if (const json* d = r.child("dataset")) {
        Reader rd(*d, "dataset");
        rd.get("kind", c.dataset.kind);
        if (rd.get("path", s)) {
            c.dataset.path = s;
        }
        rd.get("target", c.dataset.target);
        SyntheticSpec& sp = c.dataset.synthetic;
        rd.get("n_vars", sp.n_vars);
        rd.get("length", sp.length);
        c.dataset.synthetic_seed_set = rd.get("seed", sp.seed, 0);
        rd.get("noise", sp.noise);
        rd.get("drivers", sp.drivers);
        rd.get("seasonal_weight", sp.seasonal_weight);
        rd.get("max_lag", sp.max_lag);
        rd.get("min_period", sp.min_period);
        rd.get("max_period", sp.max_period);
        rd.finish();
    }
    if (const json* d = r.child("split")) {
        Reader rs(*d, "split");
        rs.get("train", c.split.train);
        rs.get("val", c.split.val);
        rs.get("test", c.split.test);
        rs.finish();
    }
    if (r.get("pooling", s)) {
        if (s == "stride") {
            c.pooling = Pooling::Stride;
        } else if (s == "mean") {
            c.pooling = Pooling::Mean;
        } else {
            throw ConfigError("pooling must be \"stride\" or \"mean\", got '" + s + "'");
        }
    }
    if (const json* d = r.child("model")) {
        Reader rm(*d, "model");
        rm.get("d_model", c.dims.d_model);
        rm.get("layers", c.dims.layers);
        rm.get("heads", c.dims.heads);
        rm.get("d_ff", c.dims.d_ff);
        rm.get("pos_embed", c.model.pos_embed);
        rm.get("use_ve_table", c.model.use_ve_table);
        rm.get("ln_eps", c.model.ln_eps);
        rm.finish();
    }
    if (const json* d = r.child("window")) {
        Reader rw(*d, "window");
        rw.get("lookback", c.window.lookback);
        rw.get("horizon", c.window.horizon);
        rw.get("patch_len", c.window.patch_len);
        rw.finish();
    }
    if (const json* d = r.child("nodes")) {
        c.nodes = read_list<NodeConfig>(*d, "nodes", [](const json& v, const std::string& where) {
            NodeConfig n;
            Reader rn(v, where);
            rn.get("stride", n.stride);
            if (const json* a = rn.child("aux")) {
                n.aux = read_list<std::string>(*a, where + ".aux", [](const json& x, const std::string& w) {
                    if (!x.is_string()) {
                        throw ConfigError(w + " must be a column name");
                    }
                    return x.get<std::string>();
                });
            }
            std::size_t count = 0;
            if (rn.get("aux_count", count)) {
                n.aux_count = count;
            }
            rn.finish();
            return n;
        });
    }
    std::size_t subset = 0;
    if (r.get("subset_size", subset)) {
        c.subset_size = subset;
    }

    if (const json* d = r.child("optimizer")) {
        Reader ro(*d, "optimizer");
        ro.get("lr", c.optimizer.lr);
        ro.get("batch_size", c.optimizer.batch_size);
        ro.get("epochs", c.optimizer.epochs);
        ro.get("shuffle", c.optimizer.shuffle);
        ro.get("reshuffle_partition", c.optimizer.reshuffle_partition);
        ro.get("reset_adam", c.optimizer.reset_adam);
        if (const json* sv = ro.child("server")) {
            Reader rs(*sv, "optimizer.server");
            ServerOptions& so = c.optimizer.server;
            if (rs.get("kind", s)) {
                so.kind = parse_server_kind(s);
            }
            if (!rs.get("lr", so.lr) && so.kind == ServerOptions::Kind::Adam) {
                so.lr = 0.01;
            }
            rs.get("beta1", so.beta1);
            rs.get("beta2", so.beta2);
            rs.get("eps", so.eps);
            rs.finish();
        }
        ro.finish();
    }
    r.get("rounds", c.rounds);
    r.get("parallel_clients", c.parallel_clients);
    r.get("eval_batch", c.eval_batch);

    if (const json* d = r.child("gradcheck")) {
        Reader rg(*d, "gradcheck");
        GradCheckConfig& g = c.gradcheck;
        rg.get("d_model", g.dims.d_model);
        rg.get("layers", g.dims.layers);
        rg.get("heads", g.dims.heads);
        rg.get("d_ff", g.dims.d_ff);
        rg.get("lookback", g.lookback);
        rg.get("horizon", g.horizon);
        rg.get("patch_len", g.patch_len);
        rg.get("aux_count", g.aux_count);
        rg.get("batch", g.batch);
        rg.get("h", g.h);
        rg.get("tol", g.tol);
        if (const json* t = rg.child("tasks")) {
            g.tasks = read_list<Task>(*t, "gradcheck.tasks", [](const json& x, const std::string& w) {
                if (!x.is_string()) {
                    throw ConfigError(w + " must be \"M2U\", \"M2M\" or \"U2U\"");
                }
                return parse_task(x.get<std::string>());
            });
        }
        rg.finish();
        g.dims.n_all = g.aux_count + 1;
    }
    if (const json* d = r.child("ablation")) {
        Reader ra(*d, "ablation");
        AblationConfig& a = c.ablation;
        if (const json* sd = ra.child("seeds")) {
            a.seeds = read_list<std::uint64_t>(*sd, "ablation.seeds", [](const json& x, const std::string& w) {
                if (!non_negative_integer(x)) {
                    throw ConfigError(w + " must be a non-negative integer");
                }
                return x.get<std::uint64_t>();
            });
        }
        ra.get("coarse_stride", a.coarse_stride);
        ra.get("ve_nodes", a.ve_nodes);
        if (const json* ss = ra.child("subset_sizes")) {
            a.subset_sizes = read_list<std::size_t>(*ss, "ablation.subset_sizes", Reader::to_size);
        }
        ra.finish();
    }
    r.finish();
    if (!c.dataset.synthetic_seed_set) {
        c.dataset.synthetic.seed = c.seed;
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }
    return from_json(j);
}

ordered_json ExperimentConfig::to_json() const {
    ordered_json j;
    j["mode"] = mode_name(mode);
    j["task"] = task_name(task);
    j["seed"] = seed;
    j["output_dir"] = output_dir.string();

    ordered_json d;
    d["kind"] = dataset.kind;
    if (dataset.kind == "csv") {
        d["path"] = dataset.path.string();
    } else {
        const SyntheticSpec& sp = dataset.synthetic;
        d["n_vars"] = sp.n_vars;
        d["length"] = sp.length;
        d["seed"] = sp.seed;
        d["noise"] = sp.noise;
        d["drivers"] = sp.drivers;
        d["seasonal_weight"] = sp.seasonal_weight;
        d["max_lag"] = sp.max_lag;
        d["min_period"] = sp.min_period;
        d["max_period"] = sp.max_period;
    }
    d["target"] = dataset.target;
    j["dataset"] = d;
    j["split"] = {{"train", split.train}, {"val", split.val}, {"test", split.test}};
    j["pooling"] = pooling == Pooling::Mean ? "mean" : "stride";
    ordered_json m;
    m["d_model"] = dims.d_model;
    m["layers"] = dims.layers;
    m["heads"] = dims.heads;
    m["d_ff"] = dims.d_ff;
    m["pos_embed"] = model.pos_embed;
    m["use_ve_table"] = model.use_ve_table;
    m["ln_eps"] = model.ln_eps;
    j["model"] = m;
    ordered_json w;
    w["lookback"] = window.lookback;
    w["horizon"] = window.horizon;
    w["patch_len"] = window.patch_len;
    j["window"] = w;
    ordered_json ns = ordered_json::array();
    for (const NodeConfig& n : nodes) {
        ordered_json e;
        e["stride"] = n.stride;
        if (n.aux) {
            e["aux"] = *n.aux;
        }
        if (n.aux_count) {
            e["aux_count"] = *n.aux_count;
        }
        ns.push_back(e);
    }
    j["nodes"] = ns;
    if (subset_size) {
        j["subset_size"] = *subset_size;
    }
    ordered_json o;
    o["lr"] = optimizer.lr;
    o["batch_size"] = optimizer.batch_size;
    o["epochs"] = optimizer.epochs;
    o["shuffle"] = optimizer.shuffle;
    o["reshuffle_partition"] = optimizer.reshuffle_partition;
    o["reset_adam"] = optimizer.reset_adam;
    ordered_json sv;
    sv["kind"] = server_kind_name(optimizer.server.kind);
    sv["lr"] = optimizer.server.lr;
    sv["beta1"] = optimizer.server.beta1;
    sv["beta2"] = optimizer.server.beta2;
    sv["eps"] = optimizer.server.eps;
    o["server"] = sv;
    j["optimizer"] = o;
    j["rounds"] = rounds;
    j["parallel_clients"] = parallel_clients;
    j["eval_batch"] = eval_batch;
    if (mode == Mode::GradCheck) {
        ordered_json g;
        g["d_model"] = gradcheck.dims.d_model;
        g["layers"] = gradcheck.dims.layers;
        g["heads"] = gradcheck.dims.heads;
        g["d_ff"] = gradcheck.dims.d_ff;
        g["lookback"] = gradcheck.lookback;
        g["horizon"] = gradcheck.horizon;
        g["patch_len"] = gradcheck.patch_len;
        g["aux_count"] = gradcheck.aux_count;
        g["batch"] = gradcheck.batch;
        g["h"] = gradcheck.h;
        g["tol"] = gradcheck.tol;
        ordered_json ts = ordered_json::array();
        for (Task t : gradcheck.tasks) {
            ts.push_back(task_name(t));
        }
        g["tasks"] = ts;
        j["gradcheck"] = g;
    }
    if (mode == Mode::AblateGranularity || mode == Mode::AblateVe) {
        ordered_json a;
        a["seeds"] = ablation.seeds;
        a["coarse_stride"] = ablation.coarse_stride;
        a["ve_nodes"] = ablation.ve_nodes;
        a["subset_sizes"] = ablation.subset_sizes;
        j["ablation"] = a;
    }
    return j;
}

namespace {

void check_stride(const WindowConfig& w, std::size_t k, const std::string& where) {
    if (k < 1) {
        throw ConfigError(where + ": stride must be >= 1");
    }
    if (w.lookback % k != 0 || w.horizon % k != 0 || w.patch_len % k != 0) {
        throw ConfigError(where + ": stride " + std::to_string(k) + " must divide lookback " +
                          std::to_string(w.lookback) + ", horizon " + std::to_string(w.horizon) + " and patch_len " +
                          std::to_string(w.patch_len));
    }
}

}  // namespace

void ExperimentConfig::validate() const {
    if (dataset.kind != "synthetic" && dataset.kind != "csv") {
        throw ConfigError("dataset.kind must be \"synthetic\" or \"csv\", got '" + dataset.kind + "'");
    }
    if (dataset.kind == "csv" && dataset.path.empty()) {
        throw ConfigError("dataset.path is required for csv datasets");
    }
    if (dataset.kind == "synthetic") {
        const SyntheticSpec& sp = dataset.synthetic;
        if (sp.n_vars < 2 || sp.length < 1000) {
            throw ConfigError("dataset: synthetic data needs n_vars >= 2 and length >= 1000");
        }
        if (sp.drivers < 1 || sp.drivers > sp.n_vars - 1) {
            throw ConfigError("dataset.drivers must lie in [1, n_vars - 1]");
        }
        if (sp.noise < 0.0 || !(sp.min_period > 1.0 && sp.max_period > sp.min_period)) {
            throw ConfigError("dataset: need noise >= 0 and 1 < min_period < max_period");
        }
    }
    split.validate();

    ModelDims d = dims;
    d.n_all = std::max<std::size_t>(d.n_all, 1);
    if (d.d_model == 0 || d.layers == 0 || d.heads == 0 || d.d_ff == 0) {
        throw ConfigError("model: d_model, layers, heads and d_ff must all be positive");
    }
    if (d.d_model % d.heads != 0) {
        throw ConfigError("model: d_model " + std::to_string(d.d_model) + " is not divisible by heads " +
                          std::to_string(d.heads));
    }
    if (!(model.ln_eps > 0.0)) {
        throw ConfigError("model.ln_eps must be positive");
    }

    if (window.lookback == 0 || window.horizon == 0 || window.patch_len == 0) {
        throw ConfigError("window: lookback, horizon and patch_len must be positive");
    }
    if (window.lookback % window.patch_len != 0) {
        throw ConfigError("window: lookback " + std::to_string(window.lookback) + " is not a multiple of patch_len " +
                          std::to_string(window.patch_len));
    }
    if (nodes.empty() && mode != Mode::GradCheck) {
        throw ConfigError("nodes: at least one node is required");
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const std::string where = "nodes[" + std::to_string(i) + "]";
        check_stride(window, nodes[i].stride, where);
        if (nodes[i].aux && nodes[i].aux_count) {
            throw ConfigError(where + ": give either aux or aux_count, not both");
        }
        if (nodes[i].aux) {
            std::set<std::string> u(nodes[i].aux->begin(), nodes[i].aux->end());
            if (u.size() != nodes[i].aux->size()) {
                throw ConfigError(where + ".aux lists a column twice");
            }
        }
    }
    if (mode == Mode::Central && nodes.size() != 1) {
        throw ConfigError("central mode trains exactly one node, got " + std::to_string(nodes.size()));
    }
    if (task == Task::M2U) {
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const bool empty = (nodes[i].aux && nodes[i].aux->empty()) || (nodes[i].aux_count && *nodes[i].aux_count == 0) ||
                               (!nodes[i].aux && !nodes[i].aux_count && subset_size && *subset_size == 0);
            if (empty) {
                throw ConfigError("nodes[" + std::to_string(i) + "]: M2U needs at least one auxiliary variable");
            }
        }
    }

    if (!(optimizer.lr > 0.0) || !std::isfinite(optimizer.lr)) {
        throw ConfigError("optimizer.lr must be positive");
    }
    if (optimizer.batch_size == 0) {
        throw ConfigError("optimizer.batch_size must be positive");
    }
    if (rounds > 0 && optimizer.epochs % rounds != 0) {
        throw ConfigError("optimizer.epochs (" + std::to_string(optimizer.epochs) + ") must be a multiple of rounds (" +
                          std::to_string(rounds) + ")");
    }
    const ServerOptions& so = optimizer.server;
    if (!(so.lr > 0.0)) {
        throw ConfigError("optimizer.server.lr must be positive");
    }
    if (!(so.beta1 >= 0.0 && so.beta1 < 1.0 && so.beta2 >= 0.0 && so.beta2 < 1.0)) {
        throw ConfigError("optimizer.server betas must lie in [0, 1)");
    }
    if (!(so.eps > 0.0)) {
        throw ConfigError("optimizer.server.eps must be positive");
    }
    if (eval_batch == 0) {
        throw ConfigError("eval_batch must be positive");
    }

    {
        const GradCheckConfig& g = gradcheck;
        ModelDims gd = g.dims;
        if (gd.d_model == 0 || gd.layers == 0 || gd.heads == 0 || gd.d_ff == 0 || gd.d_model % gd.heads != 0) {
            throw ConfigError("gradcheck: need positive sizes and d_model divisible by heads");
        }
        if (g.patch_len == 0 || g.horizon == 0 || g.lookback == 0 || g.lookback % g.patch_len != 0) {
            throw ConfigError("gradcheck: lookback must be a positive multiple of patch_len");
        }
        if (g.aux_count == 0 || g.batch == 0) {
            throw ConfigError("gradcheck: aux_count and batch must be positive");
        }
        if (!(g.h > 0.0 && g.h <= 1e-3)) {
            throw ConfigError("gradcheck.h must lie in (0, 1e-3]");
        }
        if (!(g.tol > 0.0) || g.tasks.empty()) {
            throw ConfigError("gradcheck: tol must be positive and tasks non-empty");
        }
    }
    if (mode == Mode::AblateGranularity || mode == Mode::AblateVe) {
        if (ablation.seeds.empty()) {
            throw ConfigError("ablation.seeds must not be empty");
        }
    }
    if (mode == Mode::AblateGranularity) {
        if (ablation.coarse_stride < 2) {
            throw ConfigError("ablation.coarse_stride must be >= 2");
        }
        check_stride(window, ablation.coarse_stride, "ablation.coarse_stride");
    }
    if (mode == Mode::AblateVe) {
        if (ablation.ve_nodes == 0 || ablation.subset_sizes.empty()) {
            throw ConfigError("ablation: ve_nodes must be positive and subset_sizes non-empty");
        }
        for (std::size_t s : ablation.subset_sizes) {
            if (s == 0 && task == Task::M2U) {
                throw ConfigError("ablation.subset_sizes: M2U needs subsets of at least one auxiliary");
            }
        }
    }
}

void ExperimentConfig::validate_against(const RawDataset& data) const {
    const std::size_t cols = data.values.cols;
    if (cols < 1) {
        throw ConfigError("dataset has no columns");
    }
    const std::string target = dataset.target.empty() ? data.column_names.back() : dataset.target;
    auto find = [&](const std::string& name, const std::string& where) {
        auto it = std::find(data.column_names.begin(), data.column_names.end(), name);
        if (it == data.column_names.end()) {
            throw ConfigError(where + ": dataset has no column '" + name + "'");
        }
    };
    find(target, "dataset.target");
    const std::size_t n_aux = cols - 1;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const std::string where = "nodes[" + std::to_string(i) + "]";
        if (nodes[i].aux) {
            for (const std::string& a : *nodes[i].aux) {
                find(a, where + ".aux");
                if (a == target) {
                    throw ConfigError(where + ".aux contains the target column '" + target + "'");
                }
            }
        }
        const std::size_t count = nodes[i].aux_count.value_or(subset_size.value_or(0));
        if (count > n_aux) {
            throw ConfigError(where + ": auxiliary subset size " + std::to_string(count) + " exceeds the " +
                              std::to_string(n_aux) + " available auxiliary columns");
        }
        if (task == Task::M2U && !nodes[i].aux && !nodes[i].aux_count && !subset_size && n_aux == 0) {
            throw ConfigError(where + ": M2U needs at least one auxiliary column");
        }
    }
    if (mode == Mode::AblateVe) {
        for (std::size_t s : ablation.subset_sizes) {
            if (s > n_aux) {
                throw ConfigError("ablation.subset_sizes: " + std::to_string(s) + " exceeds the " +
                                  std::to_string(n_aux) + " available auxiliary columns");
            }
        }
    }

    // Every node (and the coarse ablation node) needs at least one window per split.
    std::vector<std::size_t> strides;
    for (const NodeConfig& n : nodes) {
        strides.push_back(n.stride);
    }
    if (mode == Mode::AblateGranularity) {
        strides = {1, ablation.coarse_stride};
    }
    for (std::size_t k : strides) {
        const std::size_t rows = (data.values.rows + k - 1) / k;
        const SplitBounds b = split_bounds(rows, split);
        const std::size_t need = window.lookback / k + window.horizon / k;
        const std::size_t test_rows = b.rows - b.val_end + std::min(b.val_end, window.lookback / k);
        const std::size_t val_rows = b.val_end - b.train_end + std::min(b.train_end, window.lookback / k);
        if (b.train_end < need || val_rows < need || test_rows < need) {
            throw ConfigError("dataset: at stride " + std::to_string(k) + " the series has " + std::to_string(rows) +
                              " rows, too few for lookback+horizon " + std::to_string(need) +
                              " in every split");
        }
    }
}

}  // namespace pixtime
