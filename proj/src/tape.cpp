#include "pixtime/tape.hpp"

#include "pixtime/errors.hpp"

namespace pixtime {

const NDArray& Var::value() const {
    if (tape_ == nullptr) {
        throw TapeError("access through an unbound Var");
    }
    return tape_->value(id_);
}

bool Var::requires_grad() const { return tape_ != nullptr && tape_->requires_grad(id_); }

Var Tape::constant(NDArray value) {
    if (!value.all_finite()) {
        throw NumericError("non-finite constant of shape " + shape_str(value.shape));
    }
    Node node;
    node.value = std::move(value);
    nodes_.push_back(std::move(node));
    return {this, nodes_.size() - 1};
}

Var Tape::param(Parameter& p) {
    if (auto it = param_ids_.find(&p); it != param_ids_.end()) {
        return {this, it->second};
    }
    if (!p.value.all_finite()) {
        throw NumericError("parameter " + p.name + " holds non-finite values");
    }
    Node node;
    node.external = &p.value;
    node.param = &p;
    node.requires_grad = grad_enabled_;
    nodes_.push_back(std::move(node));
    param_ids_.emplace(&p, nodes_.size() - 1);
    return {this, nodes_.size() - 1};
}

Var Tape::record(const char* op, NDArray value, std::span<const Var> inputs, Backprop backprop) {
    if (!value.all_finite()) {
        throw NumericError(std::string("non-finite output from ") + op + " with shape " + shape_str(value.shape));
    }
    bool needs = false;
    if (grad_enabled_) {
        for (const Var& in : inputs) {
            if (&in.tape() != this) {
                throw TapeError(std::string(op) + ": input recorded on a different tape");
            }
            needs = needs || in.requires_grad();
        }
    }
    Node node;
    node.value = std::move(value);
    node.requires_grad = needs;
    if (needs) {
        node.backprop = std::move(backprop);
    }
    nodes_.push_back(std::move(node));
    return {this, nodes_.size() - 1};
}

const NDArray& Tape::value(std::size_t id) const {
    const Node& n = nodes_.at(id);
    return n.external != nullptr ? *n.external : n.value;
}

NDArray& Tape::grad_slot(std::size_t id) {
    Node& n = nodes_.at(id);
    if (!n.has_grad) {
        n.grad = NDArray(value(id).shape);
        n.has_grad = true;
    }
    return n.grad;
}

void Tape::accumulate(std::size_t id, const NDArray& delta) {
    if (!nodes_.at(id).requires_grad) {
        return;
    }
    NDArray& g = grad_slot(id);
    if (g.shape != delta.shape) {
        throw DimensionError("gradient shape " + shape_str(delta.shape) + " does not match value shape " +
                             shape_str(g.shape));
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
        g.data[i] += delta.data[i];
    }
}

void Tape::backward(const Var& loss) {
    if (!loss.valid() || &loss.tape() != this) {
        throw TapeError("backward called with a value from another tape");
    }
    if (!loss.requires_grad()) {
        throw TapeError("backward called on a detached value (no recorded parameter dependency)");
    }
    if (loss.value().size() != 1) {
        throw TapeError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
    }
    for (Node& n : nodes_) {
        n.has_grad = false;
    }
    grad_slot(loss.id()).data[0] = 1.0;

    for (std::size_t id = loss.id() + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (n.has_grad && n.backprop) {
            n.backprop(*this, value(id), n.grad);
        }
    }
    for (Node& n : nodes_) {
        if (n.param != nullptr && n.has_grad) {
            NDArray& dst = n.param->grad;
            for (std::size_t i = 0; i < dst.size(); ++i) {
                dst.data[i] += n.grad.data[i];
            }
        }
    }
}

}  // namespace pixtime
