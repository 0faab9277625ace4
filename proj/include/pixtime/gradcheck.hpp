#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pixtime/tape.hpp"

namespace pixtime {

struct ParamGradError {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t coords = 0;
};

struct GradCheckReport {
    std::vector<ParamGradError> params;
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t coords = 0;
    bool passed = false;
};

/// Builds a scalar loss on the tape it is given. Must bind parameters with
/// Tape::param so that perturbations of Parameter::value are seen.
using LossFn = std::function<Var(Tape&)>;

/// Compares reverse-mode gradients against central differences of step `h`
/// for every coordinate of every parameter. Per coordinate the relative
/// error is |g_ad - g_fd| / max(|g_ad|, |g_fd|, 1e-8).
///
/// Throws DeterminismError if two evaluations at the same point disagree,
/// ConfigError if h is outside (0, 1e-3].
GradCheckReport grad_check(const LossFn& f, std::span<Parameter* const> params, double h = 1e-5,
                           double tol = 1e-4);

}  // namespace pixtime
