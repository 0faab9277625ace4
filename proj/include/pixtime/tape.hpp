#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pixtime/ndarray.hpp"

namespace pixtime {

/// A named trainable tensor with its gradient accumulator.
struct Parameter {
    std::string name;
    NDArray value;
    NDArray grad;

    Parameter(std::string n, NDArray v) : name(std::move(n)), value(std::move(v)), grad(value.shape) {}

    void zero_grad() { grad.fill(0.0); }
};

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape& tape() const { return *tape_; }
    std::size_t id() const noexcept { return id_; }
    const NDArray& value() const;
    const Shape& shape() const { return value().shape; }
    bool requires_grad() const;
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Reverse-mode tape over composite tensor ops.
///
/// Nodes are appended in evaluation order, so reverse id order is a valid
/// topological order for the backward sweep. Parameter leaves refer to the
/// Parameter's storage directly; the parameter must outlive the tape and must
/// not be resized while the tape is alive.
class Tape {
public:
    using Backprop = std::function<void(Tape&, const NDArray& out_value, const NDArray& out_grad)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Detached value; backward never reaches it.
    Var constant(NDArray value);

    /// Leaf bound to `p`. Gradients flow into p.grad on backward() when
    /// gradient recording is enabled. Repeated calls return the same leaf.
    Var param(Parameter& p);

    /// Used by ops: stores `value` and, if any input requires grad, the
    /// closure that distributes the output gradient to the inputs.
    Var record(const char* op, NDArray value, std::span<const Var> inputs, Backprop backprop);
    Var record(const char* op, NDArray value, std::initializer_list<Var> inputs, Backprop backprop) {
        return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backprop));
    }

    /// Populates the gradients of every reachable Parameter. Calling twice
    /// without zeroing accumulates into Parameter::grad.
    void backward(const Var& loss);

    const NDArray& value(std::size_t id) const;
    bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

    /// Adds `delta` into the gradient slot of node `id` (no-op for detached nodes).
    void accumulate(std::size_t id, const NDArray& delta);
    /// Direct mutable access to the gradient slot, allocated on first use.
    NDArray& grad_slot(std::size_t id);

    void set_grad_enabled(bool enabled) noexcept { grad_enabled_ = enabled; }
    bool grad_enabled() const noexcept { return grad_enabled_; }

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        NDArray value;
        const NDArray* external = nullptr;
        Parameter* param = nullptr;
        bool requires_grad = false;
        Backprop backprop;
        NDArray grad;
        bool has_grad = false;
    };

    std::deque<Node> nodes_;
    std::unordered_map<const Parameter*, std::size_t> param_ids_;
    bool grad_enabled_ = true;
};

}  // namespace pixtime
