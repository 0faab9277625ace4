#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pixtime/tape.hpp"

namespace pixtime {

/// Moment estimates for a fixed, ordered parameter list. The first step sizes
/// m and v from the parameters it is given.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step_count = 0;
    std::vector<NDArray> m;
    std::vector<NDArray> v;

    void reset() {
        step_count = 0;
        m.clear();
        v.clear();
    }
};

/// One bias-corrected Adam update using each parameter's accumulated grad:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,
///   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(std::span<Parameter* const> params, AdamState& state, double lr);

}  // namespace pixtime
