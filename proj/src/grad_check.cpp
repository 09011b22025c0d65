#include "granger/grad_check.hpp"

#include "granger/errors.hpp"

#include <cmath>

namespace granger::ad {

namespace {

double eval_scalar(const ScalarFn& fn, const Tensor& point) {
    Tape tape;
    Tensor probe = point;
    probe.requires_grad = false;
    probe.grad.reset();
    Var x = tape.leaf(probe);
    Var y = fn(tape, x);
    double v = tape.scalar_value(y);
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite function value in probe region");
    return v;
}

} // namespace

double grad_check(const ScalarFn& fn, const Tensor& point, double step) {
    if (step <= 0.0) throw UsageError("grad_check: step must be positive");

    Tensor at = point;
    at.requires_grad = true;
    at.grad.reset();
    {
        Tape tape;
        Var x = tape.leaf(at);
        Var y = fn(tape, x);
        tape.backward(y);
    }
    const std::vector<double>& analytic = *at.grad;

    double max_err = 0.0;
    Tensor probe = point;
    for (std::size_t i = 0; i < probe.numel(); ++i) {
        const double saved = probe.values[i];
        probe.values[i] = saved + step;
        double fp = eval_scalar(fn, probe);
        probe.values[i] = saved - step;
        double fm = eval_scalar(fn, probe);
        probe.values[i] = saved;
        double numeric = (fp - fm) / (2.0 * step);
        double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
        max_err = std::max(max_err, err);
    }
    return max_err;
}

double grad_check_params(const std::function<Var(Tape&)>& build,
                         const std::vector<Tensor*>& params, double step) {
    if (step <= 0.0) throw UsageError("grad_check: step must be positive");

    for (Tensor* p : params) {
        p->requires_grad = true;
        p->grad.reset();
    }
    {
        Tape tape;
        Var y = build(tape);
        tape.backward(y);
    }

    auto eval = [&]() {
        Tape tape;
        double v = tape.scalar_value(build(tape));
        if (!std::isfinite(v)) throw NumericError("grad_check: non-finite function value in probe region");
        return v;
    };

    double max_err = 0.0;
    for (Tensor* p : params) {
        const std::vector<double> analytic = p->grad ? *p->grad
                                                     : std::vector<double>(p->numel(), 0.0);
        for (std::size_t i = 0; i < p->numel(); ++i) {
            const double saved = p->values[i];
            p->values[i] = saved + step;
            double fp = eval();
            p->values[i] = saved - step;
            double fm = eval();
            p->values[i] = saved;
            double numeric = (fp - fm) / (2.0 * step);
            double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
            max_err = std::max(max_err, err);
        }
        p->grad.reset();
    }
    return max_err;
}

} // namespace granger::ad
