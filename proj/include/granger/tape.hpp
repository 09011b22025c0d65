#ifndef GRANGER_TAPE_HPP
#define GRANGER_TAPE_HPP

#include "granger/tensor.hpp"

#include <array>
#include <cstdint>
#include <deque>
#include <span>
#include <unordered_map>
#include <vector>

namespace granger::ad {

/// Primitive operations recorded on the tape. The set is closed: the models
/// are expressed entirely in these primitives, so the backward rules below
/// are the complete derivative surface of the library.
enum class Prim : std::uint8_t {
    leaf,
    add,
    sub,
    mul,
    div,
    scalar_mul,
    matmul,
    sigmoid,
    tanh,
    group_norm,  // L2 norm of all entries -> scalar
    mse,         // mean squared error -> scalar
    concat,      // flatten-and-concatenate -> 1-D
    slice,       // contiguous range of the flat value array -> 1-D
    slice_cols,  // contiguous column block of a matrix -> matrix
    reshape,
};

const char* prim_name(Prim p);

/// Reverse-mode tape over dense tensors.
///
/// Nodes are appended in evaluation order, which is a topological order by
/// construction; backward() walks them in exact reverse. A tape and the
/// tensors it references are confined to a single thread; independent tapes
/// may run concurrently.
class Tape {
  public:
    struct Var {
        std::uint32_t id = 0;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) = default;
    Tape& operator=(Tape&&) = default;

    /// Registers an external tensor (parameter or input) as a graph leaf.
    /// Values are snapshotted; after backward(), d(loss)/d(tensor) is
    /// accumulated into tensor.grad when tensor.requires_grad. Repeated
    /// registration of the same tensor returns the same node.
    Var leaf(Tensor& t);

    /// Tape-owned constant (never differentiated).
    Var constant(Tensor t);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var div(Var a, Var b);
    Var scalar_mul(Var a, double c);
    Var matmul(Var a, Var b);
    Var sigmoid(Var a);
    Var tanh(Var a);
    Var group_norm(Var a);
    Var mse(Var a, Var b);
    Var concat(std::span<const Var> parts);
    Var slice(Var a, std::size_t offset, std::size_t len);
    Var slice_cols(Var a, std::size_t col0, std::size_t ncols);
    Var reshape(Var a, std::vector<std::size_t> shape);

    const Tensor& value(Var v) const { return nodes_[v.id].out; }
    double scalar_value(Var v) const;

    /// Fills gradients: every registered leaf whose tensor has
    /// requires_grad receives (additively) d(loss)/d(values).
    void backward(Var loss);

    /// Node-local gradient after backward (diagnostics and tests).
    std::span<const double> node_grad(Var v) const;

    std::size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Prim kind = Prim::leaf;
        std::array<std::uint32_t, 2> in{0, 0};
        std::uint8_t arity = 0;
        std::vector<std::uint32_t> more_in;  // concat inputs beyond the array
        Tensor out;
        Tensor* external = nullptr;  // leaf backing store
        std::vector<double> grad;    // lazily allocated, same length as out.values
        bool needs_grad = false;
        double c = 0.0;           // scalar_mul constant
        std::size_t arg0 = 0;     // slice offset / column start
        std::size_t arg1 = 0;     // slice length / column count
    };

    Var push(Node n);
    Node& node(Var v) { return nodes_[v.id]; }
    std::vector<double>& grad_buffer(std::uint32_t id);
    void check_finite(const Tensor& t, Prim p) const;

    // deque: recorded nodes keep stable addresses, so value() references
    // stay valid while further nodes are appended
    std::deque<Node> nodes_;
    std::unordered_map<const Tensor*, std::uint32_t> leaf_ids_;
};

using Var = Tape::Var;

} // namespace granger::ad

#endif
