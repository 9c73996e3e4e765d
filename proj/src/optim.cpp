#include "credal/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace credal::autodiff {

Matrix glorot_init(int rows, int cols, Rng& rng)
{
    if (rows < 1 || cols < 1)
        throw std::invalid_argument("glorot_init: dimensions must be positive");
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = dist(rng);
    return m;
}

AdamState::AdamState(const ParameterSet& params, AdamOptions opts) : options(opts)
{
    for (const auto& p : params) {
        first_moment.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
        second_moment.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    }
}

void adam_step(ParameterSet& params, std::span<const Matrix> grads, AdamState& state)
{
    if (grads.size() != params.size() || state.first_moment.size() != params.size())
        throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].rows() != params[i].value.rows() || grads[i].cols() != params[i].value.cols())
            throw std::invalid_argument("adam_step: gradient shape mismatch for " + params[i].name);
        if (!grads[i].allFinite())
            throw NumericError("adam_step: non-finite gradient for " + params[i].name);
    }

    const auto& o = state.options;
    ++state.step;
    const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        const auto& g = grads[i];
        m = o.beta1 * m + (1.0 - o.beta1) * g;
        v = o.beta2 * v + (1.0 - o.beta2) * g.cwiseAbs2();
        auto& p = params[i].value;
        if (o.weight_decay != 0.0)
            p *= 1.0 - o.lr * o.weight_decay;
        p.array() -= o.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + o.eps);
    }
}

GradCheckReport grad_check(const LossBuilder& loss, ParameterSet& params, int probe_count,
                           double fd_step, std::uint64_t seed)
{
    if (!(fd_step > 0.0))
        throw std::invalid_argument("grad_check: fd_step must be positive");
    GradCheckReport report;
    const auto total = parameter_count(params);
    if (total == 0 || probe_count <= 0)
        return report;

    std::vector<Matrix> analytic;
    {
        Tape tape(&params);
        auto l = loss(tape);
        analytic = tape.backward(l).params;
    }
    auto evaluate = [&]() {
        Tape tape(&params);
        const double v = tape.scalar(loss(tape));
        if (!std::isfinite(v))
            throw NumericError("grad_check: non-finite loss while probing");
        return v;
    };

    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    for (int k = 0; k < probe_count; ++k) {
        auto flat = pick(rng);
        std::size_t pi = 0;
        while (flat >= static_cast<std::size_t>(params[pi].value.size())) {
            flat -= static_cast<std::size_t>(params[pi].value.size());
            ++pi;
        }
        double& x = params[pi].value.data()[flat];
        const double saved = x;
        x = saved + fd_step;
        const double up = evaluate();
        x = saved - fd_step;
        const double down = evaluate();
        x = saved;
        const double numeric = (up - down) / (2.0 * fd_step);
        const double a = analytic[pi].data()[flat];
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
        report.max_relative_error = std::max(report.max_relative_error, std::abs(a - numeric) / denom);
        ++report.probes;
    }
    return report;
}

} // namespace credal::autodiff
