#pragma once

// Entropy extremes over probability-interval credal sets
//   P = { p : lower <= p <= upper, sum(p) = 1 }.
// Entropies are in bits. All solvers are templated on the scalar type and
// accept any Eigen vector expression.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace credal::entropy {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

class InfeasibleBounds : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

template <typename Scalar>
struct Extremum {
    Vec<Scalar> p;
    Scalar entropy{0};
    /// Set when the result comes from a heuristic rather than an exact solve.
    bool approximate = false;
};

/// Bound sums may miss the simplex by this much before the solvers give up.
inline constexpr double kFeasibilityTolerance = 1e-9;
/// Largest class count for which min entropy is solved by vertex enumeration.
inline constexpr int kMaxExactMinEntropyClasses = 15;

/// Shannon entropy in bits with 0 log 0 = 0.
template <typename Derived>
typename Derived::Scalar shannon_bits(const Eigen::MatrixBase<Derived>& p)
{
    using Scalar = typename Derived::Scalar;
    Scalar h(0);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const Scalar x = p(i);
        if (x > Scalar(0))
            h -= x * std::log2(x);
    }
    return h;
}

namespace detail {

/// Validates bounds and, within tolerance, rescales them onto the simplex.
template <typename Scalar>
void prepare_bounds(Vec<Scalar>& lower, Vec<Scalar>& upper)
{
    const Scalar tol(kFeasibilityTolerance);
    if (lower.size() != upper.size() || lower.size() == 0)
        throw std::invalid_argument("entropy bounds: size mismatch or empty");
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
        if (!(std::isfinite(double(lower(i))) && std::isfinite(double(upper(i)))))
            throw InfeasibleBounds("entropy bounds: non-finite bound");
        if (lower(i) > upper(i) + tol)
            throw InfeasibleBounds("entropy bounds: lower > upper at class " + std::to_string(i));
        lower(i) = std::max(lower(i), Scalar(0));
        upper(i) = std::max(upper(i), lower(i));
    }
    const Scalar lo = lower.sum();
    const Scalar hi = upper.sum();
    if (lo > Scalar(1) + tol)
        throw InfeasibleBounds("entropy bounds: sum of lower bounds exceeds 1");
    if (hi < Scalar(1) - tol)
        throw InfeasibleBounds("entropy bounds: sum of upper bounds below 1");
    if (lo > Scalar(1))
        lower /= lo;
    if (hi < Scalar(1))
        upper /= hi;
    upper = upper.cwiseMax(lower);
}

} // namespace detail

/// Maximum entropy by water-filling: p_i = clamp(level, lower_i, upper_i)
/// with the level found by bisection so that sum(p) = 1.
template <typename DL, typename DU>
Extremum<typename DL::Scalar> max_entropy_interval(const Eigen::MatrixBase<DL>& lower_in,
                                                   const Eigen::MatrixBase<DU>& upper_in)
{
    using Scalar = typename DL::Scalar;
    Vec<Scalar> lower = lower_in;
    Vec<Scalar> upper = upper_in;
    detail::prepare_bounds(lower, upper);

    auto fill = [&](Scalar level) { return lower.cwiseMax(upper.cwiseMin(Vec<Scalar>::Constant(lower.size(), level))); };
    Scalar lo = lower.minCoeff();
    Scalar hi = upper.maxCoeff();
    for (int it = 0; it < 200 && hi - lo > Scalar(1e-12); ++it) {
        const Scalar mid = (lo + hi) / Scalar(2);
        if (fill(mid).sum() < Scalar(1))
            lo = mid;
        else
            hi = mid;
    }
    Extremum<Scalar> out;
    out.p = fill((lo + hi) / Scalar(2));
    out.entropy = shannon_bits(out.p);
    return out;
}

/// Minimum entropy. H is concave, so the minimum sits at a vertex of the
/// box-simplex polytope, and each vertex has at most one coordinate strictly
/// inside its bounds. Up to kMaxExactMinEntropyClasses classes every
/// (upper-set, free coordinate) pair is enumerated; beyond that a greedy
/// mass-pouring heuristic is used and the result is flagged approximate.
template <typename DL, typename DU>
Extremum<typename DL::Scalar> min_entropy_interval(const Eigen::MatrixBase<DL>& lower_in,
                                                   const Eigen::MatrixBase<DU>& upper_in)
{
    using Scalar = typename DL::Scalar;
    Vec<Scalar> lower = lower_in;
    Vec<Scalar> upper = upper_in;
    detail::prepare_bounds(lower, upper);
    const auto n = static_cast<int>(lower.size());
    const Scalar tol(kFeasibilityTolerance);

    Extremum<Scalar> best;
    best.entropy = std::numeric_limits<Scalar>::infinity();

    if (n <= kMaxExactMinEntropyClasses) {
        Vec<Scalar> p(n);
        for (int free = 0; free < n; ++free) {
            const std::uint32_t others = n - 1;
            for (std::uint32_t mask = 0; mask < (1u << others); ++mask) {
                Scalar rest(0);
                for (int i = 0, bit = 0; i < n; ++i) {
                    if (i == free)
                        continue;
                    p(i) = (mask >> bit++) & 1u ? upper(i) : lower(i);
                    rest += p(i);
                }
                const Scalar x = Scalar(1) - rest;
                if (x < lower(free) - tol || x > upper(free) + tol)
                    continue;
                p(free) = std::clamp(x, lower(free), upper(free));
                const Scalar h = shannon_bits(p);
                if (h < best.entropy) {
                    best.entropy = h;
                    best.p = p;
                }
            }
        }
        if (best.p.size() == 0)
            throw InfeasibleBounds("min entropy: no feasible vertex");
        return best;
    }

    // Greedy: pour remaining mass into the currently largest coordinate with slack.
    Vec<Scalar> p = lower;
    Scalar remaining = Scalar(1) - p.sum();
    while (remaining > Scalar(0)) {
        int pick = -1;
        for (int i = 0; i < n; ++i)
            if (upper(i) - p(i) > Scalar(0) && (pick < 0 || p(i) > p(pick)))
                pick = i;
        if (pick < 0)
            break;
        const Scalar pour = std::min(remaining, upper(pick) - p(pick));
        p(pick) += pour;
        remaining -= pour;
    }
    best.p = p;
    best.entropy = shannon_bits(p);
    best.approximate = true;
    return best;
}

/// Brute-force grid search for (max entropy, min entropy) over the credal
/// set; a test oracle for the solvers above. Each coordinate except one
/// dependent coordinate is gridded at `resolution` (endpoints included), the
/// dependent coordinate takes the remaining mass, and every choice of
/// dependent coordinate is tried. The best point is then refined on a grid
/// twenty times finer in its neighbourhood. Limited to four classes.
template <typename DL, typename DU>
std::pair<typename DL::Scalar, typename DL::Scalar>
entropy_bounds_oracle(const Eigen::MatrixBase<DL>& lower_in, const Eigen::MatrixBase<DU>& upper_in,
                      double resolution)
{
    using Scalar = typename DL::Scalar;
    if (lower_in.size() > 4)
        throw std::invalid_argument("entropy_bounds_oracle: at most 4 classes");
    if (!(resolution >= 1e-3))
        throw std::invalid_argument("entropy_bounds_oracle: resolution must be >= 1e-3");
    Vec<Scalar> lower = lower_in;
    Vec<Scalar> upper = upper_in;
    detail::prepare_bounds(lower, upper);
    const int n = static_cast<int>(lower.size());
    const Scalar tol(1e-12);

    Scalar h_max = -std::numeric_limits<Scalar>::infinity();
    Scalar h_min = std::numeric_limits<Scalar>::infinity();
    Vec<Scalar> arg_max, arg_min;

    // Grid search over coordinates != dep inside the box [lo, hi].
    auto search = [&](int dep, const Vec<Scalar>& lo, const Vec<Scalar>& hi, Scalar step) {
        Vec<Scalar> p(n);
        auto recurse = [&](auto&& self, int i, Scalar partial) -> void {
            if (i == n) {
                const Scalar x = Scalar(1) - partial;
                if (x < lower(dep) - tol || x > upper(dep) + tol)
                    return;
                p(dep) = std::clamp(x, lower(dep), upper(dep));
                const Scalar h = shannon_bits(p);
                if (h > h_max) {
                    h_max = h;
                    arg_max = p;
                }
                if (h < h_min) {
                    h_min = h;
                    arg_min = p;
                }
                return;
            }
            if (i == dep) {
                self(self, i + 1, partial);
                return;
            }
            const auto steps = static_cast<long>(std::floor((hi(i) - lo(i)) / step));
            for (long k = 0; k <= steps + 1; ++k) {
                const Scalar x = k <= steps ? lo(i) + Scalar(k) * step : hi(i);
                if (partial + x > Scalar(1) + tol)
                    break;
                p(i) = x;
                self(self, i + 1, partial + x);
            }
        };
        recurse(recurse, 0, Scalar(0));
    };

    const Scalar step(resolution);
    for (int dep = 0; dep < n; ++dep)
        search(dep, lower, upper, step);

    const Scalar fine = step / Scalar(20);
    for (const Vec<Scalar> centre : {arg_max, arg_min}) {
        const Vec<Scalar> lo = lower.cwiseMax((centre.array() - Scalar(2) * step).matrix());
        const Vec<Scalar> hi = upper.cwiseMin((centre.array() + Scalar(2) * step).matrix());
        for (int dep = 0; dep < n; ++dep)
            search(dep, lo, hi, fine);
    }
    return {h_max, h_min};
}

} // namespace credal::entropy
