#pragma once

#include <deque>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "pixtime/tape.hpp"

namespace pixtime {

/// Name -> value snapshot, ordered by name.
using ValueMap = std::map<std::string, NDArray>;

/// Owns a model's parameters in registration order; addresses are stable.
class ParameterStore {
public:
    ParameterStore() = default;
    ParameterStore(const ParameterStore& other);
    ParameterStore& operator=(const ParameterStore& other);
    ParameterStore(ParameterStore&&) noexcept = default;
    ParameterStore& operator=(ParameterStore&&) noexcept = default;

    Parameter& add(std::string name, NDArray value);

    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    std::size_t size() const noexcept { return params_.size(); }
    std::size_t element_count() const noexcept;

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    std::vector<Parameter*> pointers();
    void zero_grad();

    ValueMap values() const;
    /// Copies every entry of `values` into the matching parameter; shapes must agree.
    void load(const ValueMap& values);

private:
    std::deque<Parameter> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace pixtime
