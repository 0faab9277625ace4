#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pixtime/tape.hpp"

namespace pixtime::ops {

// Raw kernels on contiguous row-major blocks. All accumulate into C.
void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m);
void gemm_nt(const double* g, const double* b, double* c, std::size_t n, std::size_t m, std::size_t k);
void gemm_tn(const double* a, const double* g, double* c, std::size_t n, std::size_t k, std::size_t m);

/// Matrix product over the last two axes. Leading (batch) axes must agree,
/// or one operand's leading axes must have unit product and are broadcast.
Var matmul(const Var& a, const Var& b);

/// x[..., in] * w[in, out] + b[out]. `b` may be an unbound Var for no bias.
Var linear(const Var& x, const Var& w, const Var& b);

/// Elementwise sum. The smaller operand's shape must equal a suffix of the
/// larger one's and is broadcast over the remaining leading axes.
Var add(const Var& a, const Var& b);

Var scale(const Var& a, double factor);
Var transpose_last2(const Var& a);
Var reshape(const Var& a, Shape shape);
Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end);
Var concat(std::span<const Var> parts, std::size_t axis);

/// Numerically stable softmax along `axis` (max subtraction).
Var softmax(const Var& x, std::size_t axis);

/// Standardize over the last axis with the biased (1/n) variance, then apply
/// gain and bias.
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps);

/// Exact GELU: x * Phi(x).
Var gelu(const Var& x);

/// Row lookup table[ids[c]] -> [ids.size(), D].
Var gather_rows(const Var& table, std::span<const std::size_t> ids);

/// [B, ...] -> [B * times, ...] with each batch entry repeated `times` times
/// consecutively.
Var repeat_interleave(const Var& x, std::size_t times);

/// [...] -> [count, ...]
Var expand_leading(const Var& x, std::size_t count);

/// Mean of squared differences over all elements; returns a scalar.
Var mse(const Var& pred, const Var& target);

}  // namespace pixtime::ops
