#include "pixtime/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "pixtime/errors.hpp"

namespace pixtime {

namespace {

double evaluate(const LossFn& f) {
    Tape tape;
    tape.set_grad_enabled(false);
    return f(tape).value().data.at(0);
}

}  // namespace

GradCheckReport grad_check(const LossFn& f, std::span<Parameter* const> params, double h, double tol) {
    if (!(h > 0.0 && h <= 1e-3)) {
        throw ConfigError("finite-difference step must lie in (0, 1e-3], got " + std::to_string(h));
    }
    const double first = evaluate(f);
    const double second = evaluate(f);
    if (std::memcmp(&first, &second, sizeof(double)) != 0) {
        throw DeterminismError("loss function is not deterministic: two evaluations gave different values");
    }

    for (Parameter* p : params) {
        p->zero_grad();
    }
    {
        Tape tape;
        tape.backward(f(tape));
    }

    GradCheckReport report;
    for (Parameter* p : params) {
        ParamGradError entry{p->name, 0.0, p->value.size()};
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double original = p->value.data[i];
            p->value.data[i] = original + h;
            const double up = evaluate(f);
            p->value.data[i] = original - h;
            const double down = evaluate(f);
            p->value.data[i] = original;

            const double fd = (up - down) / (2.0 * h);
            const double ad = p->grad.data[i];
            const double denom = std::max({std::abs(ad), std::abs(fd), 1e-8});
            entry.max_rel_error = std::max(entry.max_rel_error, std::abs(ad - fd) / denom);
        }
        report.coords += entry.coords;
        if (entry.max_rel_error >= report.max_rel_error) {
            if (entry.max_rel_error > report.max_rel_error || report.worst_param.empty()) {
                report.worst_param = entry.name;
            }
            report.max_rel_error = entry.max_rel_error;
        }
        report.params.push_back(std::move(entry));
    }
    report.passed = report.max_rel_error < tol;
    return report;
}

}  // namespace pixtime
