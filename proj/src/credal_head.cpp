#include "credal/credal_head.hpp"

#include <stdexcept>

namespace credal::head {

void append_credal_params(int input_dim, int num_classes, autodiff::Rng& rng,
                          autodiff::ParameterSet& params, const std::string& prefix)
{
    params.push_back({prefix + ".mid_weight", autodiff::glorot_init(input_dim, num_classes, rng)});
    params.push_back({prefix + ".mid_bias", Matrix::Zero(1, num_classes)});
    params.push_back({prefix + ".half_weight", autodiff::glorot_init(input_dim, num_classes, rng)});
    params.push_back({prefix + ".half_bias", Matrix::Zero(1, num_classes)});
}

IntervalLogits credal_layer_forward(Tape& tape, Var z, Var mid_weight, Var mid_bias,
                                    Var half_weight, Var half_bias)
{
    auto mid = tape.add_bias(tape.matmul(z, mid_weight), mid_bias);
    auto half = tape.softplus(tape.add_bias(tape.matmul(z, half_weight), half_bias));
    return {tape.sub(mid, half), tape.add(mid, half)};
}

void CredalPrediction::validate(double tol) const
{
    if (q_lower.rows() != q_upper.rows() || q_lower.cols() != q_upper.cols())
        throw std::domain_error("credal prediction: bound shapes differ");
    for (Eigen::Index r = 0; r < q_lower.rows(); ++r) {
        const auto lo = q_lower.row(r);
        const auto hi = q_upper.row(r);
        if ((lo.array() < -tol).any() || (hi.array() > 1.0 + tol).any() ||
            ((lo - hi).array() > tol).any())
            throw std::domain_error("credal prediction: invalid bounds at node " +
                                    std::to_string(r));
        if (lo.sum() > 1.0 + tol || hi.sum() < 1.0 - tol)
            throw std::domain_error("credal prediction: empty credal set at node " +
                                    std::to_string(r));
    }
}

CredalPrediction interval_softmax(const Matrix& a_lower, const Matrix& a_upper)
{
    if (((a_lower - a_upper).array() > 0.0).any())
        throw std::invalid_argument("interval_softmax: a_lower > a_upper");
    CredalPrediction pred;
    autodiff::interval_softmax(a_lower, a_upper, pred.q_lower, pred.q_upper);
    return pred;
}

std::vector<int> point_prediction(const CredalPrediction& pred, Bound which)
{
    const Matrix& q = which == Bound::Lower ? pred.q_lower : pred.q_upper;
    std::vector<int> out(static_cast<std::size_t>(q.rows()));
    for (Eigen::Index r = 0; r < q.rows(); ++r) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < q.cols(); ++c)
            if (q(r, c) > q(r, best))
                best = c;
        out[static_cast<std::size_t>(r)] = static_cast<int>(best);
    }
    return out;
}

} // namespace credal::head
