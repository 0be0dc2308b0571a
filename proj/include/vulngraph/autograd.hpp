#ifndef VULNGRAPH_AUTOGRAD_HPP
#define VULNGRAPH_AUTOGRAD_HPP

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "vulngraph/tensor.hpp"

/// Minimal reverse-mode differentiation over dense Eigen matrices.
///
/// A Tape owns every intermediate value of one forward pass. Operations
/// append a node holding the result and a closure that scatters the output
/// gradient into the operands. Parameters enter as leaves bound to an
/// external gradient buffer; Tape::backward adds into those buffers, so
/// several tapes (one per graph of a minibatch) can share the same sinks.
///
/// A tape built with record=false keeps values only and is the inference path.
namespace vulngraph::ad {

class Tape;

class Var {
public:
    Var() = default;

    [[nodiscard]] const Matrix& value() const;
    [[nodiscard]] Eigen::Index rows() const { return value().rows(); }
    [[nodiscard]] Eigen::Index cols() const { return value().cols(); }
    [[nodiscard]] bool valid() const { return tape_ != nullptr; }
    [[nodiscard]] Tape& tape() const { return *tape_; }
    [[nodiscard]] int id() const { return id_; }

private:
    friend class Tape;
    Var(Tape* tape, int id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    int id_ = -1;
};

class Tape {
public:
    using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

    explicit Tape(bool record = true) : record_(record) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    [[nodiscard]] bool recording() const { return record_; }

    Var constant(Matrix value);
    /// Leaf whose gradient is added into `grad_sink` (same shape) on backward.
    Var parameter(const Matrix& value, Matrix* grad_sink);
    /// Leaf that keeps its own gradient, readable through grad().
    Var variable(Matrix value);

    /// Appends an op result. `requires_grad` should be the OR over operands.
    Var record(Matrix value, bool requires_grad, BackwardFn backward);

    [[nodiscard]] const Matrix& value(Var v) const { return nodes_[v.id_].value; }
    [[nodiscard]] bool requires_grad(Var v) const { return nodes_[v.id_].requires_grad; }
    /// Gradient after backward(); empty when nothing flowed into `v`.
    [[nodiscard]] const Matrix& grad(Var v) const { return nodes_[v.id_].grad; }

    void accumulate(Var v, const Matrix& g);

    /// Reverse sweep from a 1x1 output.
    void backward(Var output, double seed = 1.0);

    [[nodiscard]] std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool requires_grad = false;
        Matrix* sink = nullptr;
        BackwardFn backward;
    };

    bool record_;
    std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(*this); }

using SharedSparse = std::shared_ptr<const SparseMatrix>;

Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
Var spmm(const SharedSparse& s, Var x);
Var add(Var a, Var b);
Var scale(Var a, double s);
Var relu(Var a);
Var sigmoid(Var a);
Var hadamard(Var a, Var b);
/// out(i, j) = x(i, j) * s(i); s is N x 1.
Var row_scale(Var x, Var s);
Var gather_rows(Var x, std::span<const int> idx);
/// h / ||h||_2 for a column vector; throws NumericalError on a zero vector.
Var normalize(Var h);
Var softmax_rows(Var a);
/// Per-row layer normalization with affine gamma/beta given as 1 x C rows.
Var layer_norm_rows(Var x, Var gamma, Var beta, double eps);
/// 1 x C column means.
Var mean_rows(Var x);
Var concat_cols(std::span<const Var> parts);
/// Inverted dropout; identity when rate == 0.
Var dropout(Var x, double rate, Rng& rng);
/// Personalized-propagation recurrence X_t = (1-alpha) S X_{t-1} + alpha X_0,
/// run `steps` times. S must be symmetric.
Var appnp(Var x0, const SharedSparse& s, int steps, double alpha);
/// Binary cross-entropy of a 1x1 probability against label y, with p clamped
/// to [eps, 1 - eps].
Var bce(Var p, double y, double eps = 1e-7);

} // namespace vulngraph::ad

#endif // VULNGRAPH_AUTOGRAD_HPP
