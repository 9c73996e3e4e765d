#pragma once

#include "credal/optim.hpp"
#include "credal/tape.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace credal::head {

using autodiff::Tape;
using autodiff::Var;

/// Interval logits [m - h, m + h] as tape variables.
struct IntervalLogits {
    Var lower;
    Var upper;
};

/// Appends `<prefix>.{mid_weight, mid_bias, half_weight, half_bias}`.
void append_credal_params(int input_dim, int num_classes, autodiff::Rng& rng,
                          autodiff::ParameterSet& params, const std::string& prefix = "credal");

/// m = z W + b, h = softplus(z W2 + b2) >= 0, returns (m - h, m + h).
IntervalLogits credal_layer_forward(Tape& tape, Var z, Var mid_weight, Var mid_bias,
                                    Var half_weight, Var half_bias);

/// Per-node probability intervals [q_lower, q_upper] defining the credal set
/// { q : q_lower <= q <= q_upper, sum q = 1 }.
struct CredalPrediction {
    Matrix q_lower;
    Matrix q_upper;

    Eigen::Index num_nodes() const { return q_lower.rows(); }
    Eigen::Index num_classes() const { return q_lower.cols(); }
    /// Throws std::domain_error if any row is not a non-empty interval credal set.
    void validate(double tol = 1e-9) const;
};

/// Interval SoftMax applied row-wise to plain interval logits.
CredalPrediction interval_softmax(const Matrix& a_lower, const Matrix& a_upper);

enum class Bound { Lower, Upper };

/// Row-wise argmax of the chosen bound; ties go to the lowest class index.
std::vector<int> point_prediction(const CredalPrediction& pred, Bound which);

} // namespace credal::head
