#ifndef GRANGER_GRAD_CHECK_HPP
#define GRANGER_GRAD_CHECK_HPP

#include "granger/tape.hpp"

#include <functional>
#include <vector>

namespace granger::ad {

/// A scalar-valued differentiable function of one tensor, expressed as a
/// graph builder: given a tape and the registered input, return the output.
using ScalarFn = std::function<Var(Tape&, Var)>;

/// Central-difference validation of the tape's backward pass.
///
/// Returns max over coordinates of |analytic - (f(x+he) - f(x-he))/2h|
/// normalized by max(1, |analytic|). Throws NumericError if the function
/// value is non-finite anywhere in the probe region.
double grad_check(const ScalarFn& fn, const Tensor& point, double step);

/// Same validation for a scalar function of several parameter tensors
/// (a model loss). `build` must evaluate the function from the tensors'
/// current values; the tensors are perturbed in place and restored.
double grad_check_params(const std::function<Var(Tape&)>& build,
                         const std::vector<Tensor*>& params, double step);

} // namespace granger::ad

#endif
