#include "pixtime/ndarray.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "pixtime/errors.hpp"

namespace pixtime {

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) {
            os << ", ";
        }
        os << shape[i];
    }
    os << ']';
    return os.str();
}

NDArray::NDArray(Shape s) : shape(std::move(s)), data(shape_size(shape), 0.0) {
    for (std::size_t d : shape) {
        if (d == 0) {
            throw DimensionError("zero-sized dimension in shape " + shape_str(shape));
        }
    }
}

NDArray::NDArray(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != shape_size(shape)) {
        throw DimensionError("data length " + std::to_string(data.size()) + " does not match shape " +
                             shape_str(shape));
    }
}

NDArray NDArray::filled(Shape s, double v) {
    NDArray out(std::move(s));
    out.fill(v);
    return out;
}

namespace {

std::size_t flat_index(const Shape& shape, std::initializer_list<std::size_t> index) {
    if (index.size() != shape.size()) {
        throw DimensionError("index rank " + std::to_string(index.size()) + " does not match shape " +
                             shape_str(shape));
    }
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (std::size_t i : index) {
        if (i >= shape[axis]) {
            throw DimensionError("index out of range on axis " + std::to_string(axis) + " of shape " +
                                 shape_str(shape));
        }
        flat = flat * shape[axis] + i;
        ++axis;
    }
    return flat;
}

}  // namespace

double& NDArray::at(std::initializer_list<std::size_t> index) { return data[flat_index(shape, index)]; }

double NDArray::at(std::initializer_list<std::size_t> index) const { return data[flat_index(shape, index)]; }

bool NDArray::all_finite() const noexcept {
    for (double v : data) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

void NDArray::fill(double v) {
    for (double& x : data) {
        x = v;
    }
}

bool bit_equal(const NDArray& a, const NDArray& b) noexcept {
    return a.shape == b.shape &&
           (a.data.empty() || std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0);
}

double max_abs_diff(const NDArray& a, const NDArray& b) {
    if (a.shape != b.shape) {
        throw DimensionError("max_abs_diff shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    }
    return m;
}

double l2_norm(const NDArray& a) noexcept {
    double s = 0.0;
    for (double v : a.data) {
        s += v * v;
    }
    return std::sqrt(s);
}

}  // namespace pixtime
