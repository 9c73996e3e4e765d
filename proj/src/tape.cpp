#include "credal/tape.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

namespace credal::autodiff {

namespace {

constexpr double kProbFloor = 1e-12;

void require(bool ok, const char* op, const std::string& what)
{
    if (!ok)
        throw std::invalid_argument(std::string(op) + ": " + what);
}

std::string shape(const Matrix& m)
{
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

/// out[i] = sum_{k != i} x[k] without the cancellation of total - x[i].
template <typename Row>
RowVector exclusive_sums(const Row& x)
{
    const auto n = x.size();
    RowVector out(n);
    double prefix = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        out[i] = prefix;
        prefix += x[i];
    }
    double suffix = 0.0;
    for (Eigen::Index i = n - 1; i >= 0; --i) {
        out[i] += suffix;
        suffix += x[i];
    }
    return out;
}

/// Shifted exponentials of an interval-logit pair; the common per-row shift
/// cancels in every ratio the interval softmax uses.
void shifted_exp(const Matrix& a_lower, const Matrix& a_upper, Matrix& e_lower, Matrix& e_upper)
{
    const Eigen::VectorXd shift = a_upper.rowwise().maxCoeff();
    e_lower = (a_lower.colwise() - shift).array().exp().matrix();
    e_upper = (a_upper.colwise() - shift).array().exp().matrix();
}

/// q_i = e_self_i / (e_self_i + sum_{k != i} e_other_k); also returns the denominators.
void bound_probabilities(const Matrix& e_self, const Matrix& e_other, Matrix& q, Matrix& denom)
{
    q.resize(e_self.rows(), e_self.cols());
    denom.resize(e_self.rows(), e_self.cols());
    for (Eigen::Index r = 0; r < e_self.rows(); ++r) {
        denom.row(r) = e_self.row(r) + exclusive_sums(e_other.row(r));
        q.row(r) = e_self.row(r).cwiseQuotient(denom.row(r));
    }
}

/// Adjoint of bound_probabilities with respect to the "self" and "other" logits.
void bound_adjoint(const Matrix& g, const Matrix& q, const Matrix& denom, const Matrix& e_other,
                   Matrix& grad_self, Matrix& grad_other)
{
    grad_self = g.cwiseProduct(q).cwiseProduct((1.0 - q.array()).matrix());
    grad_other.resize(g.rows(), g.cols());
    const Matrix t = g.cwiseProduct(q).cwiseQuotient(denom);
    for (Eigen::Index r = 0; r < g.rows(); ++r)
        grad_other.row(r) = -e_other.row(r).cwiseProduct(exclusive_sums(t.row(r)));
}

} // namespace

double softplus(double x)
{
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

std::size_t parameter_count(const ParameterSet& params)
{
    std::size_t n = 0;
    for (const auto& p : params)
        n += static_cast<std::size_t>(p.value.size());
    return n;
}

std::size_t find_parameter(const ParameterSet& params, const std::string& name)
{
    for (std::size_t i = 0; i < params.size(); ++i)
        if (params[i].name == name)
            return i;
    throw std::out_of_range("no parameter named '" + name + "'");
}

Matrix Gradients::wrt(const Tape& tape, Var v) const
{
    const auto& g = nodes.get(v);
    if (g.size() == 0)
        return Matrix::Zero(tape.value(v).rows(), tape.value(v).cols());
    return g;
}

Tape::Tape(const ParameterSet* params) : params_(params) {}

const Tape::Node& Tape::node(Var v) const
{
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
        throw std::invalid_argument("variable does not belong to this tape");
    return nodes_[static_cast<std::size_t>(v.id)];
}

Var Tape::push(Matrix value, bool needs_grad, BackwardFn backward, const char* op)
{
    if (!value.allFinite())
        throw NumericError(std::string(op) + ": non-finite output");
    nodes_.push_back(Node{std::move(value), needs_grad ? std::move(backward) : BackwardFn{},
                          needs_grad, -1});
    return Var{static_cast<int>(nodes_.size()) - 1};
}

double Tape::scalar(Var v) const
{
    const auto& m = value(v);
    if (m.rows() != 1 || m.cols() != 1)
        throw std::invalid_argument("not a scalar node: " + shape(m));
    return m(0, 0);
}

Var Tape::constant(Matrix value)
{
    return push(std::move(value), false, {}, "constant");
}

Var Tape::input(Matrix value)
{
    return push(std::move(value), true, [](const Tape&, const Matrix&, Adjoints&) {}, "input");
}

Var Tape::param(std::size_t index)
{
    if (params_ == nullptr || index >= params_->size())
        throw std::out_of_range("parameter index out of range");
    auto v = push((*params_)[index].value, true, [](const Tape&, const Matrix&, Adjoints&) {},
                  "param");
    nodes_.back().param = static_cast<int>(index);
    return v;
}

Var Tape::param(const std::string& name)
{
    if (params_ == nullptr)
        throw std::out_of_range("tape has no parameters");
    return param(find_parameter(*params_, name));
}

Var Tape::matmul(Var a, Var b)
{
    const auto& A = value(a);
    const auto& B = value(b);
    require(A.cols() == B.rows(), "matmul", shape(A) + " * " + shape(B));
    Matrix out = A * B;
    return push(std::move(out), needs(a) || needs(b),
                [a, b](const Tape& t, const Matrix& g, Adjoints& adj) {
                    if (t.needs(a))
                        adj.add(a, g * t.value(b).transpose());
                    if (t.needs(b))
                        adj.add(b, t.value(a).transpose() * g);
                },
                "matmul");
}

Var Tape::spmm(const SparseOperator& op, Var x)
{
    const auto& X = value(x);
    require(op.cols() == X.rows(), "spmm", std::to_string(op.rows()) + "x" +
                                               std::to_string(op.cols()) + " * " + shape(X));
    Matrix out = op * X;
    const SparseOperator* opp = &op;
    return push(std::move(out), needs(x),
                [x, opp](const Tape&, const Matrix& g, Adjoints& adj) {
                    adj.add(x, Matrix(opp->transpose() * g));
                },
                "spmm");
}

Var Tape::add(Var a, Var b)
{
    const auto& A = value(a);
    const auto& B = value(b);
    require(A.rows() == B.rows() && A.cols() == B.cols(), "add", shape(A) + " + " + shape(B));
    return push(A + B, needs(a) || needs(b),
                [a, b](const Tape& t, const Matrix& g, Adjoints& adj) {
                    if (t.needs(a))
                        adj.add(a, g);
                    if (t.needs(b))
                        adj.add(b, g);
                },
                "add");
}

Var Tape::sub(Var a, Var b)
{
    const auto& A = value(a);
    const auto& B = value(b);
    require(A.rows() == B.rows() && A.cols() == B.cols(), "sub", shape(A) + " - " + shape(B));
    return push(A - B, needs(a) || needs(b),
                [a, b](const Tape& t, const Matrix& g, Adjoints& adj) {
                    if (t.needs(a))
                        adj.add(a, g);
                    if (t.needs(b))
                        adj.add(b, -g);
                },
                "sub");
}

Var Tape::scale(Var x, double factor)
{
    return push(value(x) * factor, needs(x),
                [x, factor](const Tape&, const Matrix& g, Adjoints& adj) { adj.add(x, g * factor); },
                "scale");
}

Var Tape::add_bias(Var x, Var bias)
{
    const auto& X = value(x);
    const auto& b = value(bias);
    require(b.rows() == 1 && b.cols() == X.cols(), "add_bias", shape(X) + " + " + shape(b));
    Matrix out = X.rowwise() + b.row(0);
    return push(std::move(out), needs(x) || needs(bias),
                [x, bias](const Tape& t, const Matrix& g, Adjoints& adj) {
                    if (t.needs(x))
                        adj.add(x, g);
                    if (t.needs(bias))
                        adj.add(bias, g.colwise().sum());
                },
                "add_bias");
}

Var Tape::relu(Var x)
{
    return push(value(x).cwiseMax(0.0), needs(x),
                [x](const Tape& t, const Matrix& g, Adjoints& adj) {
                    // Subgradient 0 at exactly 0.
                    adj.add(x, (t.value(x).array() > 0.0).select(g, 0.0).matrix());
                },
                "relu");
}

Var Tape::softplus(Var x)
{
    Matrix out = value(x).unaryExpr([](double v) { return autodiff::softplus(v); });
    return push(std::move(out), needs(x),
                [x](const Tape& t, const Matrix& g, Adjoints& adj) {
                    const Matrix sig = t.value(x).unaryExpr(
                        [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
                    adj.add(x, g.cwiseProduct(sig));
                },
                "softplus");
}

Var Tape::mul_const(Var x, Matrix mask)
{
    const auto& X = value(x);
    require(X.rows() == mask.rows() && X.cols() == mask.cols(), "mul_const",
            shape(X) + " .* " + shape(mask));
    Matrix out = X.cwiseProduct(mask);
    return push(std::move(out), needs(x),
                [x, mask = std::move(mask)](const Tape&, const Matrix& g, Adjoints& adj) {
                    adj.add(x, g.cwiseProduct(mask));
                },
                "mul_const");
}

Var Tape::concat_cols(std::span<const Var> parts)
{
    require(!parts.empty(), "concat_cols", "no inputs");
    const auto rows = value(parts.front()).rows();
    Eigen::Index cols = 0;
    bool grad = false;
    for (Var p : parts) {
        require(value(p).rows() == rows, "concat_cols", "row count mismatch");
        cols += value(p).cols();
        grad = grad || needs(p);
    }
    Matrix out(rows, cols);
    std::vector<Var> inputs(parts.begin(), parts.end());
    Eigen::Index offset = 0;
    for (Var p : inputs) {
        out.middleCols(offset, value(p).cols()) = value(p);
        offset += value(p).cols();
    }
    return push(std::move(out), grad,
                [inputs](const Tape& t, const Matrix& g, Adjoints& adj) {
                    Eigen::Index off = 0;
                    for (Var p : inputs) {
                        const auto w = t.value(p).cols();
                        if (t.needs(p))
                            adj.add(p, g.middleCols(off, w));
                        off += w;
                    }
                },
                "concat_cols");
}

Var Tape::gather_rows(Var x, std::span<const int> rows)
{
    const auto& X = value(x);
    Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i] >= 0 && rows[i] < X.rows(), "gather_rows", "row index out of range");
        out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
    }
    std::vector<int> idx(rows.begin(), rows.end());
    return push(std::move(out), needs(x),
                [x, idx = std::move(idx)](const Tape& t, const Matrix& g, Adjoints& adj) {
                    Matrix gx = Matrix::Zero(t.value(x).rows(), t.value(x).cols());
                    for (std::size_t i = 0; i < idx.size(); ++i)
                        gx.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
                    adj.add(x, gx);
                },
                "gather_rows");
}

Var Tape::sum(Var x)
{
    Matrix out(1, 1);
    out(0, 0) = value(x).sum();
    return push(std::move(out), needs(x),
                [x](const Tape& t, const Matrix& g, Adjoints& adj) {
                    adj.add(x, Matrix::Constant(t.value(x).rows(), t.value(x).cols(), g(0, 0)));
                },
                "sum");
}

Var Tape::weighted_sum(std::span<const Var> scalars, std::span<const double> weights)
{
    require(scalars.size() == weights.size(), "weighted_sum", "weight count mismatch");
    Matrix out = Matrix::Zero(1, 1);
    bool grad = false;
    for (std::size_t i = 0; i < scalars.size(); ++i) {
        out(0, 0) += weights[i] * scalar(scalars[i]);
        grad = grad || needs(scalars[i]);
    }
    std::vector<Var> s(scalars.begin(), scalars.end());
    std::vector<double> w(weights.begin(), weights.end());
    return push(std::move(out), grad,
                [s, w](const Tape& t, const Matrix& g, Adjoints& adj) {
                    for (std::size_t i = 0; i < s.size(); ++i)
                        if (t.needs(s[i]))
                            adj.add(s[i], g * w[i]);
                },
                "weighted_sum");
}

Var Tape::interval_softmax_lower(Var a_lower, Var a_upper)
{
    const auto& AL = value(a_lower);
    const auto& AU = value(a_upper);
    require(AL.rows() == AU.rows() && AL.cols() == AU.cols(), "interval_softmax",
            shape(AL) + " vs " + shape(AU));
    Matrix eL, eU, q, denom;
    shifted_exp(AL, AU, eL, eU);
    bound_probabilities(eL, eU, q, denom);
    Matrix out = q;
    return push(std::move(out), needs(a_lower) || needs(a_upper),
                [a_lower, a_upper, q = std::move(q), denom = std::move(denom),
                 eU = std::move(eU)](const Tape& t, const Matrix& g, Adjoints& adj) {
                    Matrix g_self, g_other;
                    bound_adjoint(g, q, denom, eU, g_self, g_other);
                    if (t.needs(a_lower))
                        adj.add(a_lower, g_self);
                    if (t.needs(a_upper))
                        adj.add(a_upper, g_other);
                },
                "interval_softmax_lower");
}

Var Tape::interval_softmax_upper(Var a_lower, Var a_upper)
{
    const auto& AL = value(a_lower);
    const auto& AU = value(a_upper);
    require(AL.rows() == AU.rows() && AL.cols() == AU.cols(), "interval_softmax",
            shape(AL) + " vs " + shape(AU));
    Matrix eL, eU, q, denom;
    shifted_exp(AL, AU, eL, eU);
    bound_probabilities(eU, eL, q, denom);
    Matrix out = q;
    return push(std::move(out), needs(a_lower) || needs(a_upper),
                [a_lower, a_upper, q = std::move(q), denom = std::move(denom),
                 eL = std::move(eL)](const Tape& t, const Matrix& g, Adjoints& adj) {
                    Matrix g_self, g_other;
                    bound_adjoint(g, q, denom, eL, g_self, g_other);
                    if (t.needs(a_upper))
                        adj.add(a_upper, g_self);
                    if (t.needs(a_lower))
                        adj.add(a_lower, g_other);
                },
                "interval_softmax_upper");
}

Var Tape::weighted_nll(Var probs, std::span<const int> rows, std::span<const int> labels,
                       double weight)
{
    const auto& Q = value(probs);
    require(rows.size() == labels.size(), "weighted_nll", "rows/labels length mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i] >= 0 && rows[i] < Q.rows(), "weighted_nll", "row out of range");
        require(labels[i] >= 0 && labels[i] < Q.cols(), "weighted_nll", "label out of range");
        total -= std::log(std::clamp(Q(rows[i], labels[i]), kProbFloor, 1.0));
    }
    Matrix out(1, 1);
    out(0, 0) = weight * total;
    std::vector<int> r(rows.begin(), rows.end());
    std::vector<int> y(labels.begin(), labels.end());
    return push(std::move(out), needs(probs),
                [probs, r = std::move(r), y = std::move(y), weight](const Tape& t, const Matrix& g,
                                                                  Adjoints& adj) {
                    const auto& Q = t.value(probs);
                    Matrix gq = Matrix::Zero(Q.rows(), Q.cols());
                    for (std::size_t i = 0; i < r.size(); ++i) {
                        const double q = Q(r[i], y[i]);
                        if (q > kProbFloor && q < 1.0)
                            gq(r[i], y[i]) -= g(0, 0) * weight / q;
                    }
                    adj.add(probs, gq);
                },
                "weighted_nll");
}

Var Tape::softmax_cross_entropy(Var logits, std::span<const int> rows,
                                std::span<const int> labels, double weight)
{
    const auto& Z = value(logits);
    require(rows.size() == labels.size(), "softmax_cross_entropy", "rows/labels length mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i] >= 0 && rows[i] < Z.rows(), "softmax_cross_entropy", "row out of range");
        require(labels[i] >= 0 && labels[i] < Z.cols(), "softmax_cross_entropy",
                "label out of range");
        const auto z = Z.row(rows[i]);
        const double m = z.maxCoeff();
        const double lse = m + std::log((z.array() - m).exp().sum());
        total += lse - z(labels[i]);
    }
    Matrix out(1, 1);
    out(0, 0) = weight * total;
    std::vector<int> r(rows.begin(), rows.end());
    std::vector<int> y(labels.begin(), labels.end());
    return push(std::move(out), needs(logits),
                [logits, r = std::move(r), y = std::move(y), weight](const Tape& t, const Matrix& g,
                                                                   Adjoints& adj) {
                    const auto& Z = t.value(logits);
                    Matrix gz = Matrix::Zero(Z.rows(), Z.cols());
                    const double s = g(0, 0) * weight;
                    for (std::size_t i = 0; i < r.size(); ++i) {
                        const auto z = Z.row(r[i]);
                        RowVector p = (z.array() - z.maxCoeff()).exp().matrix();
                        p /= p.sum();
                        p(y[i]) -= 1.0;
                        gz.row(r[i]) += s * p;
                    }
                    adj.add(logits, gz);
                },
                "softmax_cross_entropy");
}

Gradients Tape::backward(Var loss) const
{
    const auto& L = value(loss);
    if (L.rows() != 1 || L.cols() != 1)
        throw std::invalid_argument("backward: loss must be 1x1, got " + shape(L));

    Gradients out;
    out.nodes = Adjoints(nodes_.size());
    if (needs(loss))
        out.nodes.add(loss, Matrix::Ones(1, 1));
    for (int id = loss.id; id >= 0; --id) {
        const auto& n = nodes_[static_cast<std::size_t>(id)];
        const auto& g = out.nodes.get(Var{id});
        if (!n.needs_grad || g.size() == 0 || !n.backward)
            continue;
        n.backward(*this, g, out.nodes);
    }

    if (params_ != nullptr) {
        out.params.reserve(params_->size());
        for (const auto& p : *params_)
            out.params.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
        for (std::size_t id = 0; id < nodes_.size(); ++id) {
            const auto& n = nodes_[id];
            if (n.param < 0)
                continue;
            const auto& g = out.nodes.get(Var{static_cast<int>(id)});
            if (g.size() != 0)
                out.params[static_cast<std::size_t>(n.param)] += g;
        }
    }
    return out;
}

void interval_softmax(const Matrix& a_lower, const Matrix& a_upper, Matrix& q_lower,
                      Matrix& q_upper)
{
    if (a_lower.rows() != a_upper.rows() || a_lower.cols() != a_upper.cols())
        throw std::invalid_argument("interval_softmax: shape mismatch");
    if (!a_lower.allFinite() || !a_upper.allFinite())
        throw NumericError("interval_softmax: non-finite input");
    Matrix eL, eU, denom;
    shifted_exp(a_lower, a_upper, eL, eU);
    bound_probabilities(eL, eU, q_lower, denom);
    bound_probabilities(eU, eL, q_upper, denom);
}

} // namespace credal::autodiff
