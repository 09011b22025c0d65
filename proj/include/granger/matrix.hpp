#ifndef GRANGER_MATRIX_HPP
#define GRANGER_MATRIX_HPP

#include <cstddef>
#include <vector>

namespace granger {

/// Plain row-major matrix of doubles for data and scores (no autodiff).
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> data)
        : rows(r), cols(c), v(std::move(data)) {}

    double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
    const double* row_ptr(std::size_t r) const { return v.data() + r * cols; }
    std::size_t numel() const { return v.size(); }
};

} // namespace granger

#endif
