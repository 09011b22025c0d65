#include "granger/tape.hpp"

#include "granger/errors.hpp"

#include <cmath>
#include <string>

namespace granger::ad {

namespace {

enum class BroadcastMode { none, scalar, row };

// Only the second operand of a binary elementwise op may broadcast:
// it is either a scalar or a [1 x M] row repeated over the rows of a.
BroadcastMode broadcast_mode(const Tensor& a, const Tensor& b, Prim p) {
    if (a.shape == b.shape) return BroadcastMode::none;
    if (b.numel() == 1) return BroadcastMode::scalar;
    if (a.shape.size() == 2 && b.shape.size() == 2 && b.shape[0] == 1 && b.shape[1] == a.shape[1]) {
        return BroadcastMode::row;
    }
    throw DimensionError(std::string(prim_name(p)) + ": incompatible shapes " + a.shape_string() +
                         " and " + b.shape_string());
}

} // namespace

const char* prim_name(Prim p) {
    switch (p) {
        case Prim::leaf: return "leaf";
        case Prim::add: return "add";
        case Prim::sub: return "subtract";
        case Prim::mul: return "elementwise-multiply";
        case Prim::div: return "elementwise-divide";
        case Prim::scalar_mul: return "scalar-multiply";
        case Prim::matmul: return "matrix-multiply";
        case Prim::sigmoid: return "sigmoid";
        case Prim::tanh: return "tanh";
        case Prim::group_norm: return "L2-norm-of-group";
        case Prim::mse: return "squared-error-mean";
        case Prim::concat: return "concatenate";
        case Prim::slice: return "slice";
        case Prim::slice_cols: return "slice-columns";
        case Prim::reshape: return "reshape";
    }
    return "?";
}

void Tape::check_finite(const Tensor& t, Prim p) const {
    if (!t.all_finite()) {
        throw NumericError(std::string("non-finite output from primitive ") + prim_name(p));
    }
}

Tape::Var Tape::push(Node n) {
    if (nodes_.size() >= UINT32_MAX) throw UsageError("tape overflow");
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::leaf(Tensor& t) {
    auto it = leaf_ids_.find(&t);
    if (it != leaf_ids_.end()) return Var{it->second};
    if (!t.all_finite()) throw NumericError("leaf tensor holds non-finite values");
    Node n;
    n.kind = Prim::leaf;
    n.out = t;  // snapshot; backward never mutates values
    n.external = &t;
    n.needs_grad = t.requires_grad;
    Var v = push(std::move(n));
    leaf_ids_.emplace(&t, v.id);
    return v;
}

Var Tape::constant(Tensor t) {
    check_finite(t, Prim::leaf);
    Node n;
    n.kind = Prim::leaf;
    n.out = std::move(t);
    n.needs_grad = false;
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    BroadcastMode mode = broadcast_mode(ta, tb, Prim::add);
    Node n;
    n.kind = Prim::add;
    n.in = {a.id, b.id};
    n.arity = 2;
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    n.out.shape = ta.shape;
    n.out.values.resize(ta.numel());
    const std::size_t cols = ta.cols();
    for (std::size_t i = 0; i < ta.numel(); ++i) {
        double bv = mode == BroadcastMode::none     ? tb.values[i]
                    : mode == BroadcastMode::scalar ? tb.values[0]
                                                    : tb.values[i % cols];
        n.out.values[i] = ta.values[i] + bv;
    }
    check_finite(n.out, Prim::add);
    return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    BroadcastMode mode = broadcast_mode(ta, tb, Prim::sub);
    Node n;
    n.kind = Prim::sub;
    n.in = {a.id, b.id};
    n.arity = 2;
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    n.out.shape = ta.shape;
    n.out.values.resize(ta.numel());
    const std::size_t cols = ta.cols();
    for (std::size_t i = 0; i < ta.numel(); ++i) {
        double bv = mode == BroadcastMode::none     ? tb.values[i]
                    : mode == BroadcastMode::scalar ? tb.values[0]
                                                    : tb.values[i % cols];
        n.out.values[i] = ta.values[i] - bv;
    }
    check_finite(n.out, Prim::sub);
    return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    BroadcastMode mode = broadcast_mode(ta, tb, Prim::mul);
    Node n;
    n.kind = Prim::mul;
    n.in = {a.id, b.id};
    n.arity = 2;
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    n.out.shape = ta.shape;
    n.out.values.resize(ta.numel());
    const std::size_t cols = ta.cols();
    for (std::size_t i = 0; i < ta.numel(); ++i) {
        double bv = mode == BroadcastMode::none     ? tb.values[i]
                    : mode == BroadcastMode::scalar ? tb.values[0]
                                                    : tb.values[i % cols];
        n.out.values[i] = ta.values[i] * bv;
    }
    check_finite(n.out, Prim::mul);
    return push(std::move(n));
}

Var Tape::div(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    BroadcastMode mode = broadcast_mode(ta, tb, Prim::div);
    Node n;
    n.kind = Prim::div;
    n.in = {a.id, b.id};
    n.arity = 2;
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    n.out.shape = ta.shape;
    n.out.values.resize(ta.numel());
    const std::size_t cols = ta.cols();
    for (std::size_t i = 0; i < ta.numel(); ++i) {
        double bv = mode == BroadcastMode::none     ? tb.values[i]
                    : mode == BroadcastMode::scalar ? tb.values[0]
                                                    : tb.values[i % cols];
        n.out.values[i] = ta.values[i] / bv;
    }
    check_finite(n.out, Prim::div);
    return push(std::move(n));
}

Var Tape::scalar_mul(Var a, double c) {
    const Tensor& ta = value(a);
    Node n;
    n.kind = Prim::scalar_mul;
    n.in = {a.id, 0};
    n.arity = 1;
    n.c = c;
    n.needs_grad = node(a).needs_grad;
    n.out.shape = ta.shape;
    n.out.values.resize(ta.numel());
    for (std::size_t i = 0; i < ta.numel(); ++i) n.out.values[i] = c * ta.values[i];
    check_finite(n.out, Prim::scalar_mul);
    return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.is_matrix() || !tb.is_matrix() || ta.shape[1] != tb.shape[0]) {
        throw DimensionError(std::string(prim_name(Prim::matmul)) + ": incompatible shapes " +
                             ta.shape_string() + " and " + tb.shape_string());
    }
    const std::size_t rows = ta.shape[0], inner = ta.shape[1], cols = tb.shape[1];
    Node n;
    n.kind = Prim::matmul;
    n.in = {a.id, b.id};
    n.arity = 2;
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    n.out.shape = {rows, cols};
    n.out.values.assign(rows * cols, 0.0);
    const double* A = ta.values.data();
    const double* B = tb.values.data();
    double* C = n.out.values.data();
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t k = 0; k < inner; ++k) {
            const double aik = A[i * inner + k];
            const double* brow = B + k * cols;
            double* crow = C + i * cols;
            for (std::size_t j = 0; j < cols; ++j) crow[j] += aik * brow[j];
        }
    }
    check_finite(n.out, Prim::matmul);
    return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
    const Tensor& ta = value(a);
    Node n;
    n.kind = Prim::sigmoid;
    n.in = {a.id, 0};
    n.arity = 1;
    n.needs_grad = node(a).needs_grad;
    n.out.shape = ta.shape;
    n.out.values.resize(ta.numel());
    for (std::size_t i = 0; i < ta.numel(); ++i) n.out.values[i] = 1.0 / (1.0 + std::exp(-ta.values[i]));
    check_finite(n.out, Prim::sigmoid);
    return push(std::move(n));
}

Var Tape::tanh(Var a) {
    const Tensor& ta = value(a);
    Node n;
    n.kind = Prim::tanh;
    n.in = {a.id, 0};
    n.arity = 1;
    n.needs_grad = node(a).needs_grad;
    n.out.shape = ta.shape;
    n.out.values.resize(ta.numel());
    for (std::size_t i = 0; i < ta.numel(); ++i) n.out.values[i] = std::tanh(ta.values[i]);
    check_finite(n.out, Prim::tanh);
    return push(std::move(n));
}

Var Tape::group_norm(Var a) {
    const Tensor& ta = value(a);
    Node n;
    n.kind = Prim::group_norm;
    n.in = {a.id, 0};
    n.arity = 1;
    n.needs_grad = node(a).needs_grad;
    double ss = 0.0;
    for (double v : ta.values) ss += v * v;
    n.out = Tensor::scalar(std::sqrt(ss));
    check_finite(n.out, Prim::group_norm);
    return push(std::move(n));
}

Var Tape::mse(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.shape != tb.shape) {
        throw DimensionError(std::string(prim_name(Prim::mse)) + ": incompatible shapes " +
                             ta.shape_string() + " and " + tb.shape_string());
    }
    Node n;
    n.kind = Prim::mse;
    n.in = {a.id, b.id};
    n.arity = 2;
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    double ss = 0.0;
    for (std::size_t i = 0; i < ta.numel(); ++i) {
        double d = ta.values[i] - tb.values[i];
        ss += d * d;
    }
    n.out = Tensor::scalar(ss / static_cast<double>(ta.numel()));
    check_finite(n.out, Prim::mse);
    return push(std::move(n));
}

Var Tape::concat(std::span<const Var> parts) {
    if (parts.empty()) throw UsageError("concatenate: no inputs");
    Node n;
    n.kind = Prim::concat;
    std::size_t total = 0;
    for (Var p : parts) {
        total += value(p).numel();
        n.needs_grad = n.needs_grad || node(p).needs_grad;
        n.more_in.push_back(p.id);
    }
    n.out.shape = {total};
    n.out.values.reserve(total);
    for (Var p : parts) {
        const auto& vals = value(p).values;
        n.out.values.insert(n.out.values.end(), vals.begin(), vals.end());
    }
    check_finite(n.out, Prim::concat);
    return push(std::move(n));
}

Var Tape::slice(Var a, std::size_t offset, std::size_t len) {
    const Tensor& ta = value(a);
    if (len == 0 || offset + len > ta.numel()) {
        throw DimensionError(std::string(prim_name(Prim::slice)) + ": range [" + std::to_string(offset) +
                             ", " + std::to_string(offset + len) + ") outside tensor " + ta.shape_string());
    }
    Node n;
    n.kind = Prim::slice;
    n.in = {a.id, 0};
    n.arity = 1;
    n.arg0 = offset;
    n.arg1 = len;
    n.needs_grad = node(a).needs_grad;
    n.out.shape = {len};
    n.out.values.assign(ta.values.begin() + static_cast<std::ptrdiff_t>(offset),
                        ta.values.begin() + static_cast<std::ptrdiff_t>(offset + len));
    return push(std::move(n));
}

Var Tape::slice_cols(Var a, std::size_t col0, std::size_t ncols) {
    const Tensor& ta = value(a);
    if (!ta.is_matrix() || ncols == 0 || col0 + ncols > ta.shape[1]) {
        throw DimensionError(std::string(prim_name(Prim::slice_cols)) + ": columns [" +
                             std::to_string(col0) + ", " + std::to_string(col0 + ncols) +
                             ") outside tensor " + ta.shape_string());
    }
    const std::size_t rows = ta.shape[0], cols = ta.shape[1];
    Node n;
    n.kind = Prim::slice_cols;
    n.in = {a.id, 0};
    n.arity = 1;
    n.arg0 = col0;
    n.arg1 = ncols;
    n.needs_grad = node(a).needs_grad;
    n.out.shape = {rows, ncols};
    n.out.values.resize(rows * ncols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < ncols; ++c) {
            n.out.values[r * ncols + c] = ta.values[r * cols + col0 + c];
        }
    }
    return push(std::move(n));
}

Var Tape::reshape(Var a, std::vector<std::size_t> shape) {
    const Tensor& ta = value(a);
    std::size_t n_elems = 1;
    for (std::size_t d : shape) n_elems *= d;
    if (n_elems != ta.numel()) {
        throw DimensionError(std::string(prim_name(Prim::reshape)) + ": cannot reshape " +
                             ta.shape_string() + " to " + shape_string(shape));
    }
    Node n;
    n.kind = Prim::reshape;
    n.in = {a.id, 0};
    n.arity = 1;
    n.needs_grad = node(a).needs_grad;
    n.out.shape = std::move(shape);
    n.out.values = ta.values;
    return push(std::move(n));
}

double Tape::scalar_value(Var v) const {
    const Tensor& t = value(v);
    if (!t.is_scalar()) throw UsageError("scalar_value on tensor of shape " + t.shape_string());
    return t.values[0];
}

std::vector<double>& Tape::grad_buffer(std::uint32_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.out.numel(), 0.0);
    return n.grad;
}

std::span<const double> Tape::node_grad(Var v) const {
    return {nodes_[v.id].grad.data(), nodes_[v.id].grad.size()};
}

void Tape::backward(Var loss) {
    if (nodes_.empty() || loss.id >= nodes_.size()) {
        throw UsageError("backward called before any forward computation");
    }
    if (!value(loss).is_scalar()) {
        throw UsageError("backward requires a scalar loss, got shape " + value(loss).shape_string());
    }
    grad_buffer(loss.id)[0] = 1.0;

    for (std::uint32_t id = loss.id + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.needs_grad || n.grad.empty()) continue;
        const std::vector<double>& g = n.grad;

        auto scatter_to = [&](std::uint32_t input, auto&& fn) {
            if (!nodes_[input].needs_grad) return;
            fn(grad_buffer(input));
        };

        switch (n.kind) {
            case Prim::leaf:
                break;
            case Prim::add:
            case Prim::sub: {
                const Tensor& ta = nodes_[n.in[0]].out;
                const Tensor& tb = nodes_[n.in[1]].out;
                BroadcastMode mode = broadcast_mode(ta, tb, n.kind);
                const double sgn = n.kind == Prim::add ? 1.0 : -1.0;
                scatter_to(n.in[0], [&](std::vector<double>& ga) {
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                });
                scatter_to(n.in[1], [&](std::vector<double>& gb) {
                    const std::size_t cols = ta.cols();
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        std::size_t j = mode == BroadcastMode::none     ? i
                                        : mode == BroadcastMode::scalar ? 0
                                                                        : i % cols;
                        gb[j] += sgn * g[i];
                    }
                });
                break;
            }
            case Prim::mul: {
                const Tensor& ta = nodes_[n.in[0]].out;
                const Tensor& tb = nodes_[n.in[1]].out;
                BroadcastMode mode = broadcast_mode(ta, tb, n.kind);
                const std::size_t cols = ta.cols();
                auto bval = [&](std::size_t i) {
                    return mode == BroadcastMode::none     ? tb.values[i]
                           : mode == BroadcastMode::scalar ? tb.values[0]
                                                           : tb.values[i % cols];
                };
                scatter_to(n.in[0], [&](std::vector<double>& ga) {
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bval(i);
                });
                scatter_to(n.in[1], [&](std::vector<double>& gb) {
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        std::size_t j = mode == BroadcastMode::none     ? i
                                        : mode == BroadcastMode::scalar ? 0
                                                                        : i % cols;
                        gb[j] += g[i] * ta.values[i];
                    }
                });
                break;
            }
            case Prim::div: {
                const Tensor& ta = nodes_[n.in[0]].out;
                const Tensor& tb = nodes_[n.in[1]].out;
                BroadcastMode mode = broadcast_mode(ta, tb, n.kind);
                const std::size_t cols = ta.cols();
                auto bval = [&](std::size_t i) {
                    return mode == BroadcastMode::none     ? tb.values[i]
                           : mode == BroadcastMode::scalar ? tb.values[0]
                                                           : tb.values[i % cols];
                };
                scatter_to(n.in[0], [&](std::vector<double>& ga) {
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / bval(i);
                });
                scatter_to(n.in[1], [&](std::vector<double>& gb) {
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        std::size_t j = mode == BroadcastMode::none     ? i
                                        : mode == BroadcastMode::scalar ? 0
                                                                        : i % cols;
                        double b = bval(i);
                        gb[j] -= g[i] * ta.values[i] / (b * b);
                    }
                });
                break;
            }
            case Prim::scalar_mul:
                scatter_to(n.in[0], [&](std::vector<double>& ga) {
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.c * g[i];
                });
                break;
            case Prim::matmul: {
                const Tensor& ta = nodes_[n.in[0]].out;
                const Tensor& tb = nodes_[n.in[1]].out;
                const std::size_t rows = ta.shape[0], inner = ta.shape[1], cols = tb.shape[1];
                scatter_to(n.in[0], [&](std::vector<double>& ga) {
                    // dA = G * B^T
                    for (std::size_t i = 0; i < rows; ++i) {
                        for (std::size_t k = 0; k < inner; ++k) {
                            double acc = 0.0;
                            const double* grow = g.data() + i * cols;
                            const double* brow = tb.values.data() + k * cols;
                            for (std::size_t j = 0; j < cols; ++j) acc += grow[j] * brow[j];
                            ga[i * inner + k] += acc;
                        }
                    }
                });
                scatter_to(n.in[1], [&](std::vector<double>& gb) {
                    // dB = A^T * G
                    for (std::size_t i = 0; i < rows; ++i) {
                        const double* arow = ta.values.data() + i * inner;
                        const double* grow = g.data() + i * cols;
                        for (std::size_t k = 0; k < inner; ++k) {
                            const double aik = arow[k];
                            double* gbrow = gb.data() + k * cols;
                            for (std::size_t j = 0; j < cols; ++j) gbrow[j] += aik * grow[j];
                        }
                    }
                });
                break;
            }
            case Prim::sigmoid:
                scatter_to(n.in[0], [&](std::vector<double>& ga) {
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        double s = n.out.values[i];
                        ga[i] += g[i] * s * (1.0 - s);
                    }
                });
                break;
            case Prim::tanh:
                scatter_to(n.in[0], [&](std::vector<double>& ga) {
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        double t = n.out.values[i];
                        ga[i] += g[i] * (1.0 - t * t);
                    }
                });
                break;
            case Prim::group_norm: {
                // subgradient at the origin: the zero vector
                const double norm = n.out.values[0];
                if (norm > 0.0) {
                    const Tensor& ta = nodes_[n.in[0]].out;
                    scatter_to(n.in[0], [&](std::vector<double>& ga) {
                        for (std::size_t i = 0; i < ga.size(); ++i) {
                            ga[i] += g[0] * ta.values[i] / norm;
                        }
                    });
                }
                break;
            }
            case Prim::mse: {
                const Tensor& ta = nodes_[n.in[0]].out;
                const Tensor& tb = nodes_[n.in[1]].out;
                const double scale = 2.0 * g[0] / static_cast<double>(ta.numel());
                scatter_to(n.in[0], [&](std::vector<double>& ga) {
                    for (std::size_t i = 0; i < ga.size(); ++i) {
                        ga[i] += scale * (ta.values[i] - tb.values[i]);
                    }
                });
                scatter_to(n.in[1], [&](std::vector<double>& gb) {
                    for (std::size_t i = 0; i < gb.size(); ++i) {
                        gb[i] -= scale * (ta.values[i] - tb.values[i]);
                    }
                });
                break;
            }
            case Prim::concat: {
                std::size_t offset = 0;
                for (std::uint32_t input : n.more_in) {
                    const std::size_t len = nodes_[input].out.numel();
                    scatter_to(input, [&](std::vector<double>& gi) {
                        for (std::size_t i = 0; i < len; ++i) gi[i] += g[offset + i];
                    });
                    offset += len;
                }
                break;
            }
            case Prim::slice:
                scatter_to(n.in[0], [&](std::vector<double>& ga) {
                    for (std::size_t i = 0; i < n.arg1; ++i) ga[n.arg0 + i] += g[i];
                });
                break;
            case Prim::slice_cols: {
                const Tensor& ta = nodes_[n.in[0]].out;
                const std::size_t rows = ta.shape[0], cols = ta.shape[1];
                scatter_to(n.in[0], [&](std::vector<double>& ga) {
                    for (std::size_t r = 0; r < rows; ++r) {
                        for (std::size_t c = 0; c < n.arg1; ++c) {
                            ga[r * cols + n.arg0 + c] += g[r * n.arg1 + c];
                        }
                    }
                });
                break;
            }
            case Prim::reshape:
                scatter_to(n.in[0], [&](std::vector<double>& ga) {
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                });
                break;
        }
    }

    // deliver leaf gradients to their external tensors; leaves the loss does
    // not reach still get a (zero) gradient buffer
    for (Node& n : nodes_) {
        if (n.kind != Prim::leaf || n.external == nullptr || !n.external->requires_grad) continue;
        n.external->ensure_grad();
        if (n.grad.empty()) continue;
        auto& dst = *n.external->grad;
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += n.grad[i];
    }
}

} // namespace granger::ad
