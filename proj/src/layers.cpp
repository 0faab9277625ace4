#include "pixtime/layers.hpp"

#include <cmath>
#include <string>

#include "pixtime/errors.hpp"
#include "pixtime/ops.hpp"

namespace pixtime {

Var multi_head_attention(const Var& q_tokens, const Var& k_tokens, const Var& v_tokens, const AttentionWeights& w,
                         std::size_t n_heads, std::vector<Var>* weights_out) {
    const Shape& ks = k_tokens.shape();
    const Shape& vs = v_tokens.shape();
    if (ks.size() < 2 || vs.size() < 2 || ks[ks.size() - 2] != vs[vs.size() - 2]) {
        throw DimensionError("attention key/value token counts differ: " + shape_str(ks) + " vs " + shape_str(vs));
    }
    const std::size_t d = w.w_q.shape().at(1);
    if (n_heads == 0 || d % n_heads != 0) {
        throw ConfigError("model dimension " + std::to_string(d) + " not divisible by " + std::to_string(n_heads) +
                          " heads");
    }
    const std::size_t dh = d / n_heads;
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    const Var q = ops::linear(q_tokens, w.w_q, w.b_q);
    const Var k = ops::linear(k_tokens, w.w_k, Var{});
    const Var v = ops::linear(v_tokens, w.w_v, w.b_v);
    const std::size_t last = q.shape().size() - 1;

    std::vector<Var> heads;
    heads.reserve(n_heads);
    for (std::size_t h = 0; h < n_heads; ++h) {
        const Var qh = ops::slice(q, last, h * dh, (h + 1) * dh);
        const Var kh = ops::slice(k, k.shape().size() - 1, h * dh, (h + 1) * dh);
        const Var vh = ops::slice(v, v.shape().size() - 1, h * dh, (h + 1) * dh);
        const Var logits = ops::scale(ops::matmul(qh, ops::transpose_last2(kh)), inv_scale);
        const Var attn = ops::softmax(logits, logits.shape().size() - 1);
        if (weights_out != nullptr) {
            weights_out->push_back(attn);
        }
        heads.push_back(ops::matmul(attn, vh));
    }
    const Var merged = n_heads == 1 ? heads[0] : ops::concat(heads, heads[0].shape().size() - 1);
    return ops::linear(merged, w.w_o, w.b_o);
}

Var ffn(const Var& x, const FfnWeights& w) {
    return ops::linear(ops::gelu(ops::linear(x, w.w1, w.b1)), w.w2, w.b2);
}

}  // namespace pixtime
