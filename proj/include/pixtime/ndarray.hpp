#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace pixtime {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles. A scalar has the empty shape.
struct NDArray {
    Shape shape;
    std::vector<double> data;

    NDArray() = default;
    explicit NDArray(Shape s);
    NDArray(Shape s, std::vector<double> values);

    static NDArray zeros(Shape s) { return NDArray(std::move(s)); }
    static NDArray scalar(double v) { return NDArray(Shape{}, {v}); }
    static NDArray filled(Shape s, double v);

    std::size_t size() const noexcept { return data.size(); }
    std::size_t rank() const noexcept { return shape.size(); }
    std::size_t dim(std::size_t axis) const { return shape.at(axis); }

    double& operator[](std::size_t i) noexcept { return data[i]; }
    double operator[](std::size_t i) const noexcept { return data[i]; }

    double& at(std::initializer_list<std::size_t> index);
    double at(std::initializer_list<std::size_t> index) const;

    std::span<double> span() noexcept { return data; }
    std::span<const double> span() const noexcept { return data; }

    bool all_finite() const noexcept;
    void fill(double v);
};

bool bit_equal(const NDArray& a, const NDArray& b) noexcept;
double max_abs_diff(const NDArray& a, const NDArray& b);
double l2_norm(const NDArray& a) noexcept;

}  // namespace pixtime
