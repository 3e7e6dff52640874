#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "error.hpp"

namespace relemb {

/// Sparse real vector: strictly ascending indices, no stored zeros.
struct SparseVector {
    std::vector<std::uint32_t> indices;
    std::vector<double> values;

    [[nodiscard]] std::size_t nnz() const { return indices.size(); }
    [[nodiscard]] bool empty() const { return indices.empty(); }

    void push_back(std::uint32_t index, double value) {
        if (!indices.empty() && index <= indices.back()) {
            throw Error("SparseVector indices must be strictly ascending");
        }
        if (value != 0.0) {
            indices.push_back(index);
            values.push_back(value);
        }
    }

    [[nodiscard]] double at(std::uint32_t index) const {
        auto it = std::lower_bound(indices.begin(), indices.end(), index);
        if (it == indices.end() || *it != index) {
            return 0.0;
        }
        return values[static_cast<std::size_t>(it - indices.begin())];
    }

    [[nodiscard]] double squared_norm() const {
        double s = 0.0;
        for (double v : values) {
            s += v * v;
        }
        return s;
    }

    [[nodiscard]] double norm() const { return std::sqrt(squared_norm()); }

    bool operator==(SparseVector const&) const = default;
};

}  // namespace relemb
