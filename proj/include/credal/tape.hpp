#pragma once

#include "credal/types.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace credal::autodiff {

/// A named trainable matrix.
struct Parameter {
    std::string name;
    Matrix value;
};

using ParameterSet = std::vector<Parameter>;

std::size_t parameter_count(const ParameterSet& params);
/// Index of the parameter called `name`; throws std::out_of_range.
std::size_t find_parameter(const ParameterSet& params, const std::string& name);

/// Handle to a node recorded on a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

class Tape;

/// Per-node adjoint accumulator used while walking the tape backwards.
class Adjoints {
public:
    explicit Adjoints(std::size_t size) : grads_(size) {}

    template <typename Expr>
    void add(Var v, const Eigen::MatrixBase<Expr>& g)
    {
        auto& slot = grads_[static_cast<std::size_t>(v.id)];
        if (slot.size() == 0)
            slot = g;
        else
            slot += g;
    }
    /// Empty matrix when nothing flowed into `v`.
    const Matrix& get(Var v) const { return grads_[static_cast<std::size_t>(v.id)]; }
    Matrix take(Var v) { return std::move(grads_[static_cast<std::size_t>(v.id)]); }

private:
    std::vector<Matrix> grads_;
};

/// Result of Tape::backward.
struct Gradients {
    /// One entry per parameter of the bound ParameterSet, zero-filled when untouched.
    std::vector<Matrix> params;
    /// Adjoint of every tape node (empty matrices for nodes without gradient).
    Adjoints nodes{0};

    /// Gradient with respect to an input leaf created with Tape::input.
    Matrix wrt(const Tape& tape, Var v) const;
};

/// Records a forward computation over dense matrices and replays it in
/// reverse to obtain exact gradients. Only the primitives below are
/// supported; each has a hand-written adjoint.
///
/// The tape never owns sparse operators: any SparseOperator passed to spmm
/// must outlive the tape.
class Tape {
public:
    /// `params` may be null for tapes without trainable parameters.
    explicit Tape(const ParameterSet* params = nullptr);

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaves
    Var constant(Matrix value);
    /// Differentiable leaf that is not a parameter (e.g. input features for ODIN).
    Var input(Matrix value);
    Var param(std::size_t index);
    Var param(const std::string& name);

    // Primitives
    Var matmul(Var a, Var b);
    Var spmm(const SparseOperator& op, Var x);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var scale(Var x, double factor);
    Var add_bias(Var x, Var bias);
    Var relu(Var x);
    Var softplus(Var x);
    Var mul_const(Var x, Matrix mask);
    Var concat_cols(std::span<const Var> parts);
    Var gather_rows(Var x, std::span<const int> rows);
    Var sum(Var x);
    Var weighted_sum(std::span<const Var> scalars, std::span<const double> weights);

    // Composites with fused adjoints
    Var interval_softmax_lower(Var a_lower, Var a_upper);
    Var interval_softmax_upper(Var a_lower, Var a_upper);
    /// weight * sum_r -log(clamp(q[rows[r], labels[r]], 1e-12, 1)).
    Var weighted_nll(Var probs, std::span<const int> rows, std::span<const int> labels,
                     double weight);
    /// weight * sum_r -log softmax(logits[rows[r]])[labels[r]].
    Var softmax_cross_entropy(Var logits, std::span<const int> rows,
                              std::span<const int> labels, double weight);

    const Matrix& value(Var v) const { return node(v).value; }
    double scalar(Var v) const;
    std::size_t size() const { return nodes_.size(); }
    const ParameterSet* parameters() const { return params_; }

    /// Reverse sweep from a 1x1 node.
    Gradients backward(Var loss) const;

private:
    using BackwardFn = std::function<void(const Tape&, const Matrix& grad_out, Adjoints&)>;

    struct Node {
        Matrix value;
        BackwardFn backward;
        bool needs_grad = false;
        int param = -1;
    };

    const Node& node(Var v) const;
    Var push(Matrix value, bool needs_grad, BackwardFn backward, const char* op);
    bool needs(Var v) const { return node(v).needs_grad; }

    const ParameterSet* params_;
    std::vector<Node> nodes_;
};

/// Row-wise interval softmax on plain matrices (no tape).
void interval_softmax(const Matrix& a_lower, const Matrix& a_upper, Matrix& q_lower,
                      Matrix& q_upper);

double softplus(double x);

} // namespace credal::autodiff
