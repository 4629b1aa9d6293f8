#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace ustat {

inline std::size_t product(std::span<const std::size_t> xs) {
    std::size_t p = 1;
    for (auto x : xs) {
        p *= x;
    }
    return p;
}

inline std::vector<std::size_t> row_major_strides(std::span<const std::size_t> shape) {
    std::vector<std::size_t> strides(shape.size(), 1);
    for (std::size_t k = shape.size(); k > 1; --k) {
        strides[k - 2] = strides[k - 1] * shape[k - 1];
    }
    return strides;
}

/// Odometer over a mixed-radix index space; the last digit runs fastest,
/// which matches row-major flattening. An empty radix list has exactly one
/// tuple (the empty one).
class MixedRadix {
public:
    explicit MixedRadix(std::vector<std::size_t> radices)
        : radices_(std::move(radices)), digits_(radices_.size(), 0) {}

    [[nodiscard]] const std::vector<std::size_t>& digits() const { return digits_; }
    [[nodiscard]] std::size_t operator[](std::size_t k) const { return digits_[k]; }
    [[nodiscard]] std::size_t total() const { return product(radices_); }

    /// Advance to the next tuple; returns false after wrapping past the last.
    bool next() {
        for (std::size_t k = digits_.size(); k > 0; --k) {
            if (++digits_[k - 1] < radices_[k - 1]) {
                return true;
            }
            digits_[k - 1] = 0;
        }
        return false;
    }

private:
    std::vector<std::size_t> radices_;
    std::vector<std::size_t> digits_;
};

} // namespace ustat
