#include "pixtime/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "pixtime/errors.hpp"
#include "pixtime/ops.hpp"

namespace pixtime {

void ModelDims::validate() const {
    if (d_model == 0 || layers == 0 || heads == 0 || d_ff == 0 || n_all == 0) {
        throw ConfigError("model dimensions must all be positive (d_model, layers, heads, d_ff, n_all)");
    }
    if (d_model % heads != 0) {
        throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by heads " +
                          std::to_string(heads));
    }
}

void NodeShapeConfig::validate(const ModelDims& dims) const {
    const std::string who = "node " + std::to_string(node_id) + ": ";
    if (lookback == 0 || horizon == 0 || patch_len == 0) {
        throw ConfigError(who + "lookback, horizon and patch_len must be positive");
    }
    if (lookback % patch_len != 0) {
        throw ConfigError(who + "lookback T=" + std::to_string(lookback) + " is not divisible by patch_len PL=" +
                          std::to_string(patch_len));
    }
    if (target_id >= dims.n_all) {
        throw CategoryError(who + "target id " + std::to_string(target_id) + " >= n_all " +
                            std::to_string(dims.n_all));
    }
    std::set<std::size_t> seen;
    for (std::size_t id : var_ids) {
        if (id >= dims.n_all) {
            throw CategoryError(who + "variable id " + std::to_string(id) + " >= n_all " +
                                std::to_string(dims.n_all));
        }
        if (!seen.insert(id).second) {
            throw ConfigError(who + "duplicate variable id " + std::to_string(id));
        }
    }
    if (!(dt > 0.0)) {
        throw ConfigError(who + "sampling interval dt must be positive");
    }
}

const char* task_name(Task t) {
    switch (t) {
        case Task::M2U:
            return "m2u";
        case Task::M2M:
            return "m2m";
        case Task::U2U:
            return "u2u";
    }
    return "?";
}

Task parse_task(const std::string& name) {
    std::string s = name;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "m2u") {
        return Task::M2U;
    }
    if (s == "m2m") {
        return Task::M2M;
    }
    if (s == "u2u") {
        return Task::U2U;
    }
    throw ConfigError("unknown task '" + name + "' (expected m2u, m2m or u2u)");
}

Batch stack_samples(std::span<const ForecastSample> samples) {
    if (samples.empty()) {
        throw DataError("cannot stack an empty sample list");
    }
    const ForecastSample& first = samples[0];
    const std::size_t b = samples.size();
    const std::size_t t = first.x.size();
    const std::size_t s = first.y.size();
    const std::size_t c = first.var_ids.size();
    Batch batch;
    batch.task = Task::M2U;
    batch.var_ids = first.var_ids;
    batch.input = NDArray({b, t});
    batch.aux = NDArray({b, t, c});
    batch.target = NDArray({b, s});
    for (std::size_t i = 0; i < b; ++i) {
        const ForecastSample& smp = samples[i];
        if (smp.x.size() != t || smp.y.size() != s || smp.z.shape != Shape{t, c} || smp.var_ids != first.var_ids) {
            throw DimensionError("samples in one batch must share shapes and variable ids");
        }
        std::copy(smp.x.begin(), smp.x.end(), batch.input.data.begin() + static_cast<std::ptrdiff_t>(i * t));
        std::copy(smp.z.data.begin(), smp.z.data.end(), batch.aux.data.begin() + static_cast<std::ptrdiff_t>(i * t * c));
        std::copy(smp.y.begin(), smp.y.end(), batch.target.data.begin() + static_cast<std::ptrdiff_t>(i * s));
    }
    return batch;
}

std::vector<std::vector<double>> patch_split(std::span<const double> x, std::size_t patch_len) {
    if (patch_len == 0 || x.empty() || x.size() % patch_len != 0) {
        throw PatchError("series length T=" + std::to_string(x.size()) + " is not divisible by patch length PL=" +
                         std::to_string(patch_len));
    }
    std::vector<std::vector<double>> patches;
    for (std::size_t start = 0; start < x.size(); start += patch_len) {
        patches.emplace_back(x.begin() + static_cast<std::ptrdiff_t>(start),
                             x.begin() + static_cast<std::ptrdiff_t>(start + patch_len));
    }
    return patches;
}

namespace {

NDArray xavier(std::mt19937_64& rng, std::size_t fan_in, std::size_t fan_out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    NDArray w({fan_in, fan_out});
    for (double& v : w.data) {
        v = dist(rng);
    }
    return w;
}

NDArray normal(std::mt19937_64& rng, Shape shape, double sigma) {
    std::normal_distribution<double> dist(0.0, sigma);
    NDArray a(std::move(shape));
    for (double& v : a.data) {
        v = dist(rng);
    }
    return a;
}

void add_attention(ParameterStore& ps, std::mt19937_64& rng, const std::string& prefix, std::size_t d) {
    ps.add(prefix + ".w_q", xavier(rng, d, d));
    ps.add(prefix + ".b_q", NDArray({d}));
    ps.add(prefix + ".w_k", xavier(rng, d, d));
    ps.add(prefix + ".w_v", xavier(rng, d, d));
    ps.add(prefix + ".b_v", NDArray({d}));
    ps.add(prefix + ".w_o", xavier(rng, d, d));
    ps.add(prefix + ".b_o", NDArray({d}));
}

void add_ffn(ParameterStore& ps, std::mt19937_64& rng, const std::string& prefix, std::size_t d, std::size_t d_ff) {
    ps.add(prefix + ".w1", xavier(rng, d, d_ff));
    ps.add(prefix + ".b1", NDArray({d_ff}));
    ps.add(prefix + ".w2", xavier(rng, d_ff, d));
    ps.add(prefix + ".b2", NDArray({d}));
}

void add_norm(ParameterStore& ps, const std::string& prefix, std::size_t d) {
    ps.add(prefix + ".gain", NDArray::filled({d}, 1.0));
    ps.add(prefix + ".bias", NDArray({d}));
}

}  // namespace

PiXTimeModel::PiXTimeModel(ModelDims dims, NodeShapeConfig shape, std::uint64_t shared_seed,
                           std::uint64_t local_seed, ModelOptions options)
    : dims_(dims), shape_(std::move(shape)), options_(options) {
    dims_.validate();
    shape_.validate(dims_);
    const std::size_t d = dims_.d_model;
    const std::size_t m = shape_.patch_count();

    // Two independent streams: shared modules must initialize identically on
    // every node whatever its local shapes are.
    std::mt19937_64 local_rng(local_seed);
    std::mt19937_64 shared_rng(shared_seed);

    params_.add("patch_linear.weight", xavier(local_rng, shape_.patch_len, d));
    params_.add("patch_linear.bias", NDArray({d}));
    params_.add("abstract_token", normal(local_rng, {d}, 0.02));
    if (options_.pos_embed) {
        params_.add("pos_embed", normal(local_rng, {m, d}, 0.02));
    }
    params_.add("ve_linear.weight", xavier(local_rng, shape_.lookback, d));
    params_.add("ve_linear.bias", NDArray({d}));

    params_.add("ve_table", NDArray({dims_.n_all, d}));
    for (std::size_t l = 0; l < dims_.layers; ++l) {
        const std::string p = "aux_encoder.layer" + std::to_string(l);
        add_attention(params_, shared_rng, p + ".self_att", d);
        add_ffn(params_, shared_rng, p + ".ffn", d, dims_.d_ff);
        add_norm(params_, p + ".norm1", d);
        add_norm(params_, p + ".norm2", d);
    }
    for (std::size_t l = 0; l < dims_.layers; ++l) {
        const std::string p = "target_decoder.layer" + std::to_string(l);
        add_attention(params_, shared_rng, p + ".self_att", d);
        add_attention(params_, shared_rng, p + ".cross_att", d);
        add_ffn(params_, shared_rng, p + ".ffn", d, dims_.d_ff);
        add_norm(params_, p + ".norm1", d);
        add_norm(params_, p + ".norm2", d);
        add_norm(params_, p + ".norm3", d);
    }

    params_.add("projection.weight", xavier(local_rng, m * d, shape_.horizon));
    params_.add("projection.bias", NDArray({shape_.horizon}));
}

Var PiXTimeModel::param(Tape& tape, const std::string& name) { return tape.param(params_.get(name)); }

AttentionWeights PiXTimeModel::attention(Tape& tape, const std::string& prefix) {
    return AttentionWeights{param(tape, prefix + ".w_q"), param(tape, prefix + ".b_q"),
                            param(tape, prefix + ".w_k"), param(tape, prefix + ".w_v"),
                            param(tape, prefix + ".b_v"), param(tape, prefix + ".w_o"),
                            param(tape, prefix + ".b_o")};
}

FfnWeights PiXTimeModel::feed_forward(Tape& tape, const std::string& prefix) {
    return FfnWeights{param(tape, prefix + ".w1"), param(tape, prefix + ".b1"), param(tape, prefix + ".w2"),
                      param(tape, prefix + ".b2")};
}

Var PiXTimeModel::norm(Tape& tape, const std::string& prefix, const Var& x) {
    return ops::layer_norm(x, param(tape, prefix + ".gain"), param(tape, prefix + ".bias"), options_.ln_eps);
}

Var PiXTimeModel::patch_embed(Tape& tape, const Var& x) {
    const Shape& s = x.shape();
    if (s.size() != 2) {
        throw DimensionError("patch_embed expects [B,T], got " + shape_str(s));
    }
    const std::size_t b = s[0];
    const std::size_t t = s[1];
    const std::size_t pl = shape_.patch_len;
    if (t % pl != 0) {
        throw PatchError("series length T=" + std::to_string(t) + " is not divisible by patch length PL=" +
                         std::to_string(pl));
    }
    if (t != shape_.lookback) {
        throw DimensionError("patch_embed expects T=" + std::to_string(shape_.lookback) + ", got " +
                             std::to_string(t));
    }
    const std::size_t m = t / pl;
    const std::size_t d = dims_.d_model;
    Var patches = ops::reshape(x, {b, m, pl});
    Var tokens = ops::linear(patches, param(tape, "patch_linear.weight"), param(tape, "patch_linear.bias"));
    if (options_.pos_embed) {
        tokens = ops::add(tokens, param(tape, "pos_embed"));
    }
    const Var abstract = ops::expand_leading(ops::reshape(param(tape, "abstract_token"), {1, d}), b);
    const Var parts[] = {abstract, tokens};
    return ops::concat(parts, 1);
}

Var PiXTimeModel::variable_embed(Tape& tape, const Var& z, std::span<const std::size_t> var_ids) {
    const Shape& s = z.shape();
    if (s.size() != 3 || s[2] != var_ids.size() || var_ids.empty()) {
        throw DimensionError("variable_embed expects [B,T,C] with C == " + std::to_string(var_ids.size()) +
                             " >= 1, got " + shape_str(s));
    }
    for (std::size_t id : var_ids) {
        if (id >= dims_.n_all) {
            throw CategoryError("variable category id " + std::to_string(id) + " >= n_all " +
                                std::to_string(dims_.n_all));
        }
    }
    const Var columns = ops::transpose_last2(z);  // [B,C,T]
    Var tokens = ops::linear(columns, param(tape, "ve_linear.weight"), param(tape, "ve_linear.bias"));
    if (options_.use_ve_table) {
        tokens = ops::add(tokens, ops::gather_rows(param(tape, "ve_table"), var_ids));
    }
    return tokens;
}

Var PiXTimeModel::aux_encoder(Tape& tape, const Var& v_aux) {
    Var x = v_aux;
    for (std::size_t l = 0; l < dims_.layers; ++l) {
        const std::string p = "aux_encoder.layer" + std::to_string(l);
        const Var sa = multi_head_attention(x, x, x, attention(tape, p + ".self_att"), dims_.heads);
        x = norm(tape, p + ".norm1", ops::add(x, sa));
        x = norm(tape, p + ".norm2", ops::add(x, ffn(x, feed_forward(tape, p + ".ffn"))));
    }
    return x;
}

Var PiXTimeModel::decoder_layer(Tape& tape, std::size_t layer, const Var& tokens, const Var& encoded,
                                DecoderTrace* trace) {
    const std::string p = "target_decoder.layer" + std::to_string(layer);
    const std::size_t rows = tokens.shape().at(1);

    const Var sa = multi_head_attention(tokens, tokens, tokens, attention(tape, p + ".self_att"), dims_.heads);
    const Var mixed = norm(tape, p + ".norm1", ops::add(tokens, sa));

    // Only the abstract token queries the encoded auxiliaries.
    const Var abstract = ops::slice(mixed, 1, 0, 1);
    const Var ca = multi_head_attention(abstract, encoded, encoded, attention(tape, p + ".cross_att"), dims_.heads,
                                        trace != nullptr ? &trace->cross_weights : nullptr);
    const Var abstract_cross = norm(tape, p + ".norm2", ops::add(abstract, ca));
    Var crossed = abstract_cross;
    if (rows > 1) {
        const Var parts[] = {abstract_cross, ops::slice(mixed, 1, 1, rows)};
        crossed = ops::concat(parts, 1);
    }

    const Var out = norm(tape, p + ".norm3", ops::add(crossed, ffn(crossed, feed_forward(tape, p + ".ffn"))));
    if (trace != nullptr) {
        trace->after_self = mixed;
        trace->after_cross = crossed;
    }
    return out;
}

Var PiXTimeModel::projection(Tape& tape, const Var& tokens) {
    const Shape& s = tokens.shape();
    if (s.size() != 3 || s[1] < 2) {
        throw DimensionError("projection expects [B,M+1,D] with M >= 1, got " + shape_str(s));
    }
    const std::size_t b = s[0];
    const std::size_t m = s[1] - 1;
    const Var patches = ops::slice(tokens, 1, 1, m + 1);
    const Var flat = ops::reshape(patches, {b, m * s[2]});
    return ops::linear(flat, param(tape, "projection.weight"), param(tape, "projection.bias"));
}

Var PiXTimeModel::forward(Tape& tape, const Var& x, const Var& z, std::span<const std::size_t> var_ids) {
    const Var encoded = aux_encoder(tape, variable_embed(tape, z, var_ids));
    Var tokens = patch_embed(tape, x);
    for (std::size_t l = 0; l < dims_.layers; ++l) {
        tokens = decoder_layer(tape, l, tokens, encoded);
    }
    return projection(tape, tokens);
}

Var PiXTimeModel::m2m_forward(Tape& tape, const Var& series, std::span<const std::size_t> var_ids) {
    const Shape& s = series.shape();
    if (s.size() != 3 || s[2] != var_ids.size()) {
        throw DimensionError("m2m_forward expects [B,T,n] with n == " + std::to_string(var_ids.size()) + ", got " +
                             shape_str(s));
    }
    if (var_ids.empty()) {
        throw ConfigError("m2m_forward needs at least one variable");
    }
    const std::size_t b = s[0];
    const std::size_t t = s[1];
    const std::size_t n = s[2];
    Var encoded = aux_encoder(tape, variable_embed(tape, series, var_ids));  // [B,n,D]
    if (b > 1) {
        encoded = ops::repeat_interleave(encoded, n);  // [B*n,n,D]
    }
    const Var targets = ops::reshape(ops::transpose_last2(series), {b * n, t});
    Var tokens = patch_embed(tape, targets);  // [B*n,M+1,D]
    for (std::size_t l = 0; l < dims_.layers; ++l) {
        tokens = decoder_layer(tape, l, tokens, encoded);
    }
    return ops::reshape(projection(tape, tokens), {b, n, shape_.horizon});
}

Var PiXTimeModel::u2u_forward(Tape& tape, const Var& x, std::size_t target_id) {
    const Shape& s = x.shape();
    if (s.size() != 2) {
        throw DimensionError("u2u_forward expects [B,T], got " + shape_str(s));
    }
    const Var z = ops::reshape(x, {s[0], s[1], 1});
    const std::size_t ids[] = {target_id};
    return forward(tape, x, z, ids);
}

Var PiXTimeModel::predict(Tape& tape, const Batch& batch) {
    const Var input = tape.constant(batch.input);
    switch (batch.task) {
        case Task::M2U:
            return forward(tape, input, tape.constant(batch.aux), batch.var_ids);
        case Task::M2M:
            return m2m_forward(tape, input, batch.var_ids);
        case Task::U2U:
            return u2u_forward(tape, input, batch.target_id);
    }
    throw ConfigError("unknown task");
}

Var PiXTimeModel::loss(Tape& tape, const Batch& batch) {
    const Var pred = predict(tape, batch);
    return ops::mse(pred, tape.constant(batch.target));
}

NDArray PiXTimeModel::predict(const Batch& batch) {
    Tape tape;
    tape.set_grad_enabled(false);
    return predict(tape, batch).value();
}

}  // namespace pixtime
