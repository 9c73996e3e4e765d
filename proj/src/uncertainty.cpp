#include "credal/uncertainty.hpp"

#include "credal/entropy.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace credal::uncertainty {

UncertaintyScores interval_uncertainty(const head::CredalPrediction& pred)
{
    const auto n = pred.num_nodes();
    UncertaintyScores s{Vector(n), Vector(n), Vector(n)};
    for (Eigen::Index r = 0; r < n; ++r) {
        const Vector lo = pred.q_lower.row(r).transpose();
        const Vector hi = pred.q_upper.row(r).transpose();
        const double tu = entropy::max_entropy_interval(lo, hi).entropy;
        const double au = entropy::min_entropy_interval(lo, hi).entropy;
        s.tu[r] = tu;
        s.au[r] = std::min(au, tu);
        s.eu[r] = tu - s.au[r];
    }
    return s;
}

namespace {

constexpr double kLogFloor = 1e-300;

/// Derivative of gamma -> H(q + gamma * dir) in bits; dir sums to zero.
double directional_derivative(const RowVector& q, const RowVector& dir, double gamma)
{
    double d = 0.0;
    for (Eigen::Index k = 0; k < q.size(); ++k) {
        if (dir[k] == 0.0)
            continue;
        const double r = std::max(q[k] + gamma * dir[k], kLogFloor);
        d -= dir[k] * std::log2(r);
    }
    return d;
}

/// Maximizer of a concave 1-D function on [0, gamma_max] from its derivative.
double line_search(const RowVector& q, const RowVector& dir, double gamma_max)
{
    if (directional_derivative(q, dir, gamma_max) >= 0.0)
        return gamma_max;
    double lo = 0.0;
    double hi = gamma_max;
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (directional_derivative(q, dir, mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

HullUncertainty hull_uncertainty(const Matrix& members, HullMode mode)
{
    const auto m = members.rows();
    if (m == 0)
        throw std::invalid_argument("hull_uncertainty: empty member list");

    HullUncertainty out;
    Vector member_h(m);
    for (Eigen::Index i = 0; i < m; ++i)
        member_h[i] = entropy::shannon_bits(members.row(i));
    Eigen::Index best_member = 0;
    member_h.maxCoeff(&best_member);
    out.au = member_h.minCoeff();

    if (mode == HullMode::MembersOnly || m == 1) {
        out.tu = member_h[best_member];
        out.eu = out.tu - out.au;
        out.weights = Vector::Zero(m);
        out.weights[best_member] = 1.0;
        return out;
    }

    Vector w = Vector::Constant(m, 1.0 / static_cast<double>(m));
    if (entropy::shannon_bits((w.transpose() * members).transpose()) < member_h[best_member]) {
        w.setZero();
        w[best_member] = 1.0;
    }

    constexpr double kGapTolerance = 1e-8;
    constexpr int kMaxIterations = 10000;
    int it = 0;
    for (; it < kMaxIterations; ++it) {
        const RowVector q = w.transpose() * members;
        // Gradient of H(w^T P) up to a constant shared by every coordinate.
        const RowVector neg_log = q.unaryExpr([](double x) { return -std::log2(std::max(x, kLogFloor)); });
        const Vector grad = members * neg_log.transpose();
        const double current = grad.dot(w);

        Eigen::Index fw = 0;
        grad.maxCoeff(&fw);
        const double gap = grad[fw] - current;
        if (gap < kGapTolerance)
            break;

        Eigen::Index away = -1;
        for (Eigen::Index i = 0; i < m; ++i)
            if (w[i] > 0.0 && (away < 0 || grad[i] < grad[away]))
                away = i;
        const double away_gain = current - grad[away];

        RowVector dir;
        double gamma_max = 1.0;
        bool toward = true;
        if (gap >= away_gain || w[away] >= 1.0) {
            dir = members.row(fw) - q;
        } else {
            toward = false;
            dir = q - members.row(away);
            gamma_max = w[away] / (1.0 - w[away]);
        }
        const double gamma = line_search(q, dir, gamma_max);
        if (toward) {
            w *= 1.0 - gamma;
            w[fw] += gamma;
        } else {
            w *= 1.0 + gamma;
            w[away] -= gamma;
            if (gamma == gamma_max)
                w[away] = 0.0;
        }
        w = w.cwiseMax(0.0);
        w /= w.sum();
    }
    out.iterations = it;
    out.weights = w;
    out.tu = std::max(entropy::shannon_bits((w.transpose() * members).transpose()),
                      member_h[best_member]);
    out.eu = out.tu - out.au;
    return out;
}

UncertaintyScores ensemble_entropy_decompose(std::span<const Matrix> members)
{
    if (members.empty())
        throw std::invalid_argument("ensemble_entropy_decompose: no members");
    const auto n = members.front().rows();
    const auto c = members.front().cols();
    Matrix mean = Matrix::Zero(n, c);
    Vector mean_h = Vector::Zero(n);
    for (const auto& p : members) {
        if (p.rows() != n || p.cols() != c)
            throw std::invalid_argument("ensemble_entropy_decompose: member shape mismatch");
        mean += p;
        for (Eigen::Index r = 0; r < n; ++r)
            mean_h[r] += entropy::shannon_bits(p.row(r));
    }
    const double inv = 1.0 / static_cast<double>(members.size());
    mean *= inv;
    mean_h *= inv;

    UncertaintyScores s{Vector(n), mean_h, Vector(n)};
    for (Eigen::Index r = 0; r < n; ++r) {
        s.tu[r] = entropy::shannon_bits(mean.row(r));
        s.eu[r] = s.tu[r] - s.au[r];
    }
    return s;
}

UncertaintyScores hull_scores(std::span<const Matrix> members, HullMode mode)
{
    if (members.empty())
        throw std::invalid_argument("hull_scores: no members");
    const auto n = members.front().rows();
    const auto c = members.front().cols();
    for (const auto& p : members)
        if (p.rows() != n || p.cols() != c)
            throw std::invalid_argument("hull_scores: member shape mismatch");
    UncertaintyScores s{Vector(n), Vector(n), Vector(n)};
    Matrix node(static_cast<Eigen::Index>(members.size()), c);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < members.size(); ++i)
            node.row(static_cast<Eigen::Index>(i)) = members[i].row(r);
        const auto h = hull_uncertainty(node, mode);
        s.tu[r] = h.tu;
        s.au[r] = h.au;
        s.eu[r] = h.eu;
    }
    return s;
}

void write_prediction_csv(std::ostream& out, const head::CredalPrediction& pred,
                          const UncertaintyScores& scores)
{
    const auto c = pred.num_classes();
    out << "node_id";
    for (Eigen::Index k = 0; k < c; ++k)
        out << ",q_lower_" << k;
    for (Eigen::Index k = 0; k < c; ++k)
        out << ",q_upper_" << k;
    out << ",tu,au,eu\n";
    const auto old = out.precision(17);
    for (Eigen::Index r = 0; r < pred.num_nodes(); ++r) {
        out << r;
        for (Eigen::Index k = 0; k < c; ++k)
            out << ',' << pred.q_lower(r, k);
        for (Eigen::Index k = 0; k < c; ++k)
            out << ',' << pred.q_upper(r, k);
        out << ',' << scores.tu[r] << ',' << scores.au[r] << ',' << scores.eu[r] << '\n';
    }
    out.precision(old);
}

} // namespace credal::uncertainty
