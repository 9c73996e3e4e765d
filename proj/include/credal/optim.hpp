#pragma once

#include "credal/tape.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <span>

namespace credal::autodiff {

using Rng = std::mt19937_64;

/// Uniform in +-sqrt(6 / (rows + cols)).
Matrix glorot_init(int rows, int cols, Rng& rng);

struct AdamOptions {
    double lr = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

struct AdamState {
    AdamOptions options;
    std::vector<Matrix> first_moment;
    std::vector<Matrix> second_moment;
    long step = 0;

    AdamState(const ParameterSet& params, AdamOptions opts);
};

/// One Adam update with bias correction and decoupled weight decay
/// (p <- p * (1 - lr * wd) before the moment step).
void adam_step(ParameterSet& params, std::span<const Matrix> grads, AdamState& state);

/// Builds a scalar loss on a tape bound to the parameters being checked.
using LossBuilder = std::function<Var(Tape&)>;

struct GradCheckReport {
    double max_relative_error = 0.0;
    int probes = 0;
};

/// Compares tape gradients with central differences at `probe_count`
/// uniformly drawn parameter coordinates. Relative error uses the
/// denominator max(|analytic|, |numeric|, 1e-8).
GradCheckReport grad_check(const LossBuilder& loss, ParameterSet& params, int probe_count,
                           double fd_step, std::uint64_t seed);

} // namespace credal::autodiff
