#ifndef GRANGER_TENSOR_HPP
#define GRANGER_TENSOR_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace granger::ad {

/// Dense real tensor participating in a differentiable computation.
///
/// Values are 64-bit reals in a flat row-major array; `grad`, when present,
/// has the same length as `values`. Committed tensors hold only finite
/// values -- the tape rejects any primitive whose output would be non-finite.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;
    bool requires_grad = false;
    std::optional<std::vector<double>> grad;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> v);

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor full(std::vector<std::size_t> shape, double value);
    static Tensor scalar(double value);
    static Tensor vec(std::vector<double> v);                          // shape [n]
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v);
    static Tensor identity(std::size_t n);

    std::size_t numel() const { return values.size(); }
    bool is_scalar() const { return values.size() == 1; }
    bool is_matrix() const { return shape.size() == 2; }
    std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? (shape.empty() ? 1 : shape[0]) : shape[1]; }

    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

    /// Allocates a zero gradient buffer if absent.
    void ensure_grad();
    void zero_grad();
    bool all_finite() const;

    std::string shape_string() const;
};

std::string shape_string(const std::vector<std::size_t>& shape);

} // namespace granger::ad

#endif
