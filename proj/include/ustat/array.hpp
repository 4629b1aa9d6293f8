#pragma once

#include "ustat/error.hpp"
#include "ustat/index.hpp"

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ustat {

/// Dense real d-indexed array, row-major. Axes may differ in size.
class MultiIndexArray {
public:
    MultiIndexArray(std::vector<std::size_t> shape, std::vector<double> values)
        : shape_(std::move(shape)), values_(std::move(values)) {
        if (shape_.empty()) {
            throw ShapeError("array order must be at least 1");
        }
        for (auto s : shape_) {
            if (s == 0) {
                throw ShapeError("array axis sizes must be positive");
            }
        }
        if (product(shape_) != values_.size()) {
            throw ShapeError("array has " + std::to_string(values_.size()) +
                             " values but its shape requires " + std::to_string(product(shape_)));
        }
        for (double v : values_) {
            if (!std::isfinite(v)) {
                throw DomainError("array entries must be finite");
            }
        }
    }

    static MultiIndexArray zeros(std::vector<std::size_t> shape) {
        const auto n = product(shape);
        return {std::move(shape), std::vector<double>(n, 0.0)};
    }

    [[nodiscard]] std::size_t order() const { return shape_.size(); }
    [[nodiscard]] const std::vector<std::size_t>& shape() const { return shape_; }
    [[nodiscard]] std::size_t size() const { return values_.size(); }
    [[nodiscard]] std::span<const double> values() const { return values_; }
    [[nodiscard]] double operator[](std::size_t flat) const { return values_[flat]; }

    [[nodiscard]] std::size_t flat_index(std::span<const std::size_t> index) const {
        if (index.size() != shape_.size()) {
            throw ShapeError("index length does not match array order");
        }
        std::size_t flat = 0;
        for (std::size_t k = 0; k < index.size(); ++k) {
            if (index[k] >= shape_[k]) {
                throw ShapeError("index out of range");
            }
            flat = flat * shape_[k] + index[k];
        }
        return flat;
    }

    [[nodiscard]] double at(std::span<const std::size_t> index) const {
        return values_[flat_index(index)];
    }

    [[nodiscard]] MultiIndexArray scaled(double c) const {
        auto v = values_;
        for (auto& x : v) {
            x *= c;
        }
        return {shape_, std::move(v)};
    }

    [[nodiscard]] double frobenius_norm() const {
        double s = 0.0;
        for (double v : values_) {
            s += v * v;
        }
        return std::sqrt(s);
    }

    [[nodiscard]] bool is_zero() const {
        for (double v : values_) {
            if (v != 0.0) {
                return false;
            }
        }
        return true;
    }

    friend bool operator==(const MultiIndexArray&, const MultiIndexArray&) = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> values_;
};

} // namespace ustat
