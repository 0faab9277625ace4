#pragma once

#include <cstddef>
#include <vector>

#include "pixtime/tape.hpp"

namespace pixtime {

/// Projections of one attention block. The key projection carries no bias:
/// a key bias shifts every logit of a query by the same amount and cancels in
/// the softmax.
struct AttentionWeights {
    Var w_q, b_q;
    Var w_k;
    Var w_v, b_v;
    Var w_o, b_o;
};

struct FfnWeights {
    Var w1, b1;
    Var w2, b2;
};

/// Scaled dot-product attention with `n_heads` heads over the last axis.
/// Queries are [..., Nq, D], keys/values [..., Nk, D]; leading axes follow
/// ops::matmul broadcasting. Per head h: softmax(Q_h K_h^T / sqrt(D/H)) V_h,
/// heads concatenated and output-projected.
///
/// When `weights_out` is non-null it receives one [..., Nq, Nk] attention
/// matrix per head.
Var multi_head_attention(const Var& q_tokens, const Var& k_tokens, const Var& v_tokens, const AttentionWeights& w,
                         std::size_t n_heads, std::vector<Var>* weights_out = nullptr);

/// Token-wise linear -> GELU -> linear.
Var ffn(const Var& x, const FfnWeights& w);

}  // namespace pixtime
