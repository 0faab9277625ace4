#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pixtime/layers.hpp"
#include "pixtime/ndarray.hpp"
#include "pixtime/parameters.hpp"
#include "pixtime/tape.hpp"

namespace pixtime {

/// Network-wide dimensions. Every node of one federation must agree on all
/// of them, otherwise the shared modules cannot be aggregated.
struct ModelDims {
    std::size_t d_model = 32;
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t d_ff = 64;
    std::size_t n_all = 1;  // variable categories known to the network

    void validate() const;
    bool operator==(const ModelDims&) const = default;
};

struct ModelOptions {
    bool pos_embed = false;     // learnable per-patch positions (local)
    bool use_ve_table = true;   // false removes the VE-table addition
    double ln_eps = 1e-5;
};

/// Per-node data geometry.
struct NodeShapeConfig {
    int node_id = 0;
    std::size_t lookback = 96;    // T
    std::size_t horizon = 24;     // S
    std::size_t patch_len = 16;   // PL
    std::vector<std::size_t> var_ids;  // auxiliary categories, C = var_ids.size()
    std::size_t target_id = 0;
    double dt = 1.0;

    std::size_t aux_count() const noexcept { return var_ids.size(); }
    std::size_t patch_count() const { return patch_len == 0 ? 0 : lookback / patch_len; }
    void validate(const ModelDims& dims) const;
};

enum class Task { M2U, M2M, U2U };

const char* task_name(Task t);
Task parse_task(const std::string& s);

/// One instance: target window x (T), auxiliary matrix z (T x C), truth y (S).
struct ForecastSample {
    std::vector<double> x;
    NDArray z;
    std::vector<double> y;
    std::vector<std::size_t> var_ids;
};

/// A stacked mini-batch.
///   M2U: input [B,T], aux [B,T,C], target [B,S]
///   U2U: input [B,T], target [B,S]
///   M2M: input [B,T,n] (every variable), target [B,n,S]
struct Batch {
    Task task = Task::M2U;
    NDArray input;
    NDArray aux;
    NDArray target;
    std::vector<std::size_t> var_ids;  // aux ids (M2U), all ids (M2M), {target} (U2U)
    std::size_t target_id = 0;

    std::size_t batch_size() const { return input.shape.at(0); }
};

Batch stack_samples(std::span<const ForecastSample> samples);

/// Splits x into len(x)/patch_len consecutive non-overlapping patches.
std::vector<std::vector<double>> patch_split(std::span<const double> x, std::size_t patch_len);

/// Intermediate decoder-layer values, exposed for inspection.
struct DecoderTrace {
    Var after_self;    // stage (i)
    Var after_cross;   // stage (ii)
    std::vector<Var> cross_weights;
};

/// One node's forecaster: patch embedding with an abstract token (local),
/// variable embedding through a shared VE table, a shared auxiliary encoder
/// and target decoder, and a local projection head.
class PiXTimeModel {
public:
    PiXTimeModel(ModelDims dims, NodeShapeConfig shape, std::uint64_t shared_seed, std::uint64_t local_seed,
                 ModelOptions options = {});

    const ModelDims& dims() const noexcept { return dims_; }
    const NodeShapeConfig& shape() const noexcept { return shape_; }
    const ModelOptions& options() const noexcept { return options_; }
    ParameterStore& params() noexcept { return params_; }
    const ParameterStore& params() const noexcept { return params_; }

    Var param(Tape& tape, const std::string& name);

    /// [B,T] -> [B,M+1,D]; row 0 is the abstract token.
    Var patch_embed(Tape& tape, const Var& x);
    /// [B,T,C] -> [B,C,D]
    Var variable_embed(Tape& tape, const Var& z, std::span<const std::size_t> var_ids);
    /// [B,C,D] -> [B,C,D]
    Var aux_encoder(Tape& tape, const Var& v_aux);
    /// tokens [B,M+1,D], encoded auxiliaries [B or 1, C, D] -> [B,M+1,D]
    Var decoder_layer(Tape& tape, std::size_t layer, const Var& tokens, const Var& encoded,
                      DecoderTrace* trace = nullptr);
    /// [B,M+1,D] -> [B,S]; the abstract-token row is dropped.
    Var projection(Tape& tape, const Var& tokens);

    /// Multivariate-to-univariate: x [B,T], z [B,T,C] -> [B,S]
    Var forward(Tape& tape, const Var& x, const Var& z, std::span<const std::size_t> var_ids);
    /// All variables as targets and auxiliaries: [B,T,n] -> [B,n,S]
    Var m2m_forward(Tape& tape, const Var& series, std::span<const std::size_t> var_ids);
    /// The target doubles as the single auxiliary: x [B,T] -> [B,S]
    Var u2u_forward(Tape& tape, const Var& x, std::size_t target_id);

    Var predict(Tape& tape, const Batch& batch);
    Var loss(Tape& tape, const Batch& batch);
    /// Forward pass without gradient recording.
    NDArray predict(const Batch& batch);

private:
    AttentionWeights attention(Tape& tape, const std::string& prefix);
    FfnWeights feed_forward(Tape& tape, const std::string& prefix);
    Var norm(Tape& tape, const std::string& prefix, const Var& x);

    ModelDims dims_;
    NodeShapeConfig shape_;
    ModelOptions options_;
    ParameterStore params_;
};

}  // namespace pixtime
