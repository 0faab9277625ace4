#include "pixtime/parameters.hpp"

#include "pixtime/errors.hpp"

namespace pixtime {

ParameterStore::ParameterStore(const ParameterStore& other) : params_(other.params_), index_(other.index_) {}

ParameterStore& ParameterStore::operator=(const ParameterStore& other) {
    if (this != &other) {
        params_ = other.params_;
        index_ = other.index_;
    }
    return *this;
}

Parameter& ParameterStore::add(std::string name, NDArray value) {
    if (index_.count(name) != 0) {
        throw ConfigError("duplicate parameter name " + name);
    }
    index_.emplace(name, params_.size());
    params_.emplace_back(std::move(name), std::move(value));
    return params_.back();
}

Parameter& ParameterStore::get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw ConfigError("unknown parameter " + name);
    }
    return params_[it->second];
}

const Parameter& ParameterStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw ConfigError("unknown parameter " + name);
    }
    return params_[it->second];
}

std::size_t ParameterStore::element_count() const noexcept {
    std::size_t n = 0;
    for (const Parameter& p : params_) {
        n += p.value.size();
    }
    return n;
}

std::vector<Parameter*> ParameterStore::pointers() {
    std::vector<Parameter*> out;
    out.reserve(params_.size());
    for (Parameter& p : params_) {
        out.push_back(&p);
    }
    return out;
}

void ParameterStore::zero_grad() {
    for (Parameter& p : params_) {
        p.zero_grad();
    }
}

ValueMap ParameterStore::values() const {
    ValueMap out;
    for (const Parameter& p : params_) {
        out.emplace(p.name, p.value);
    }
    return out;
}

void ParameterStore::load(const ValueMap& values) {
    for (const auto& [name, value] : values) {
        Parameter& p = get(name);
        if (p.value.shape != value.shape) {
            throw DimensionError("cannot load " + name + ": shape " + shape_str(value.shape) + " vs " +
                                 shape_str(p.value.shape));
        }
        p.value.data = value.data;
    }
}

}  // namespace pixtime
