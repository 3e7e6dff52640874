#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace relemb {

/// Row-major dense matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return std::span<double>(data).subspan(i * cols, cols); }
    [[nodiscard]] std::span<double const> row(std::size_t i) const {
        return std::span<double const>(data).subspan(i * cols, cols);
    }

    void zero() { std::fill(data.begin(), data.end(), 0.0); }
};

inline double squared_distance(std::span<double const> a, std::span<double const> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double distance(std::span<double const> a, std::span<double const> b) {
    return std::sqrt(squared_distance(a, b));
}

}  // namespace relemb
