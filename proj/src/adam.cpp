#include "pixtime/adam.hpp"

#include <cmath>

#include "pixtime/errors.hpp"

namespace pixtime {

void adam_step(std::span<Parameter* const> params, AdamState& state, double lr) {
    if (state.m.empty() && state.step_count == 0) {
        for (const Parameter* p : params) {
            state.m.emplace_back(p->value.shape);
            state.v.emplace_back(p->value.shape);
        }
    }
    if (state.m.size() != params.size()) {
        throw DimensionError("Adam state tracks " + std::to_string(state.m.size()) + " tensors but " +
                             std::to_string(params.size()) + " parameters were given");
    }
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);

    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        NDArray& m = state.m[i];
        NDArray& v = state.v[i];
        if (m.shape != p.value.shape || p.grad.shape != p.value.shape) {
            throw DimensionError("Adam state shape mismatch for " + p.name);
        }
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            const double g = p.grad.data[j];
            m.data[j] = state.beta1 * m.data[j] + (1.0 - state.beta1) * g;
            v.data[j] = state.beta2 * v.data[j] + (1.0 - state.beta2) * g * g;
            const double m_hat = m.data[j] / correction1;
            const double v_hat = v.data[j] / correction2;
            p.value.data[j] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

}  // namespace pixtime
