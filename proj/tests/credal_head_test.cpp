#include "credal/credal_head.hpp"
#include "credal/entropy.hpp"
#include "credal/uncertainty.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace credal {
namespace {

using credal::testing::random_matrix;
using Vec3 = Eigen::Vector3d;

// Unstabilized evaluation of the interval softmax; fine for moderate logits.
void direct_interval_softmax(const Matrix& lo, const Matrix& hi, Matrix& ql, Matrix& qu)
{
    ql.resize(lo.rows(), lo.cols());
    qu.resize(lo.rows(), lo.cols());
    for (Eigen::Index r = 0; r < lo.rows(); ++r)
        for (Eigen::Index i = 0; i < lo.cols(); ++i) {
            double rest_hi = 0.0;
            double rest_lo = 0.0;
            for (Eigen::Index k = 0; k < lo.cols(); ++k)
                if (k != i) {
                    rest_hi += std::exp(hi(r, k));
                    rest_lo += std::exp(lo(r, k));
                }
            ql(r, i) = std::exp(lo(r, i)) / (std::exp(lo(r, i)) + rest_hi);
            qu(r, i) = std::exp(hi(r, i)) / (std::exp(hi(r, i)) + rest_lo);
        }
}

// Independent vertex enumeration: classes in `mask` at their upper bound,
// `free` takes the remainder, everything else at its lower bound.
double enumerate_min_entropy(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi)
{
    const int c = static_cast<int>(lo.size());
    double best = std::numeric_limits<double>::infinity();
    for (unsigned mask = 0; mask < (1u << c); ++mask)
        for (int free = 0; free < c; ++free) {
            if (mask & (1u << free))
                continue;
            Eigen::VectorXd p(c);
            double used = 0.0;
            for (int i = 0; i < c; ++i)
                if (i != free) {
                    p[i] = (mask & (1u << i)) ? hi[i] : lo[i];
                    used += p[i];
                }
            p[free] = 1.0 - used;
            if (p[free] < lo[free] - 1e-12 || p[free] > hi[free] + 1e-12)
                continue;
            p[free] = std::clamp(p[free], 0.0, 1.0);
            best = std::min(best, entropy::shannon_bits(p));
        }
    return best;
}

struct RandomBounds {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
};

// Feasible bounds around a random distribution.
RandomBounds random_bounds(std::mt19937_64& rng, int c)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::VectorXd p(c);
    for (int i = 0; i < c; ++i)
        p[i] = -std::log(u(rng) + 1e-300);
    p /= p.sum();
    RandomBounds b{p, p};
    for (int i = 0; i < c; ++i) {
        b.lower[i] = std::max(0.0, p[i] - 0.4 * u(rng));
        b.upper[i] = std::min(1.0, p[i] + 0.4 * u(rng));
    }
    return b;
}

TEST(IntervalSoftmax, SymmetricLogitsGiveUniform)
{
    const auto pred = head::interval_softmax(Matrix::Zero(1, 3), Matrix::Zero(1, 3));
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(pred.q_lower(0, i), 1.0 / 3.0, 1e-15);
        EXPECT_NEAR(pred.q_upper(0, i), 1.0 / 3.0, 1e-15);
    }
}

TEST(IntervalSoftmax, TwoClassClosedForm)
{
    const auto pred = head::interval_softmax(Matrix{{0.0, 0.0}}, Matrix{{1.0, 1.0}});
    const double e = std::exp(1.0);
    for (int i = 0; i < 2; ++i) {
        EXPECT_NEAR(pred.q_lower(0, i), 1.0 / (1.0 + e), 1e-15);
        EXPECT_NEAR(pred.q_upper(0, i), e / (1.0 + e), 1e-15);
    }
    EXPECT_NEAR(pred.q_lower(0, 0), 0.2689, 5e-5);
    EXPECT_NEAR(pred.q_upper(0, 0), 0.7311, 5e-5);
}

TEST(IntervalSoftmax, MatchesDirectEvaluationAndIsValid)
{
    std::mt19937_64 rng(100);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix m = random_matrix(rng, 200, 5, 3.0);
        const Matrix h = random_matrix(rng, 200, 5).cwiseAbs();
        const auto pred = head::interval_softmax(m - h, m + h);
        Matrix ql, qu;
        direct_interval_softmax(m - h, m + h, ql, qu);
        EXPECT_LT((pred.q_lower - ql).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((pred.q_upper - qu).cwiseAbs().maxCoeff(), 1e-12);
        for (Eigen::Index r = 0; r < pred.num_nodes(); ++r) {
            ASSERT_LE(pred.q_lower.row(r).sum(), 1.0 + 1e-9);
            ASSERT_GE(pred.q_upper.row(r).sum(), 1.0 - 1e-9);
            ASSERT_TRUE(((pred.q_upper - pred.q_lower).row(r).array() >= -1e-9).all());
        }
        EXPECT_NO_THROW(pred.validate());
    }
}

TEST(IntervalSoftmax, ExtremeLogitsStayFinite)
{
    const auto pred = head::interval_softmax(Matrix{{800.0, -800.0, 0.0}}, Matrix{{801.0, -799.0, 2.0}});
    EXPECT_TRUE(pred.q_lower.allFinite());
    EXPECT_TRUE(pred.q_upper.allFinite());
    EXPECT_NEAR(pred.q_upper(0, 0), 1.0, 1e-12);
    EXPECT_NO_THROW(pred.validate());
}

TEST(IntervalSoftmax, ShiftInvariance)
{
    std::mt19937_64 rng(101);
    std::normal_distribution<double> shift(0.0, 20.0);
    for (int trial = 0; trial < 200; ++trial) {
        const Matrix m = random_matrix(rng, 4, 6, 2.0);
        const Matrix h = random_matrix(rng, 4, 6).cwiseAbs();
        const double s = shift(rng);
        const auto a = head::interval_softmax(m - h, m + h);
        const Matrix shift_m = Matrix::Constant(4, 6, s);
        const auto b = head::interval_softmax(m - h + shift_m, m + h + shift_m);
        ASSERT_LT((a.q_lower - b.q_lower).cwiseAbs().maxCoeff(), 1e-12);
        ASSERT_LT((a.q_upper - b.q_upper).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(IntervalSoftmax, DegenerateIntervalIsSoftmax)
{
    std::mt19937_64 rng(102);
    const Matrix m = random_matrix(rng, 50, 4, 2.0);
    const auto pred = head::interval_softmax(m, m);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const Eigen::RowVectorXd e = m.row(r).array().exp();
        const Eigen::RowVectorXd softmax = e / e.sum();
        EXPECT_LT((pred.q_lower.row(r) - softmax).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((pred.q_upper.row(r) - softmax).cwiseAbs().maxCoeff(), 1e-12);
    }
    const auto scores = uncertainty::interval_uncertainty(pred);
    EXPECT_LE(scores.eu.maxCoeff(), 1e-9);
}

TEST(IntervalSoftmax, RejectsInvertedAndNonFinite)
{
    EXPECT_THROW(head::interval_softmax(Matrix{{1.0, 0.0}}, Matrix{{0.0, 0.0}}), std::invalid_argument);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(head::interval_softmax(Matrix{{nan, 0.0}}, Matrix{{0.0, 0.0}}), NumericError);
    EXPECT_THROW(head::interval_softmax(Matrix{{0.0, 0.0}}, Matrix{{0.0, 0.0, 0.0}}), std::invalid_argument);
}

TEST(IntervalSoftmax, WiderIntervalsNeverLowerEpistemicUncertainty)
{
    std::mt19937_64 rng(103);
    for (int trial = 0; trial < 1000; ++trial) {
        const Matrix m = random_matrix(rng, 1, 4, 2.0);
        const Matrix h = random_matrix(rng, 1, 4).cwiseAbs();
        const Matrix wider = h + random_matrix(rng, 1, 4, 0.5).cwiseAbs();
        const auto narrow_eu = uncertainty::interval_uncertainty(head::interval_softmax(m - h, m + h)).eu[0];
        const auto wide_eu = uncertainty::interval_uncertainty(head::interval_softmax(m - wider, m + wider)).eu[0];
        ASSERT_GE(wide_eu, narrow_eu - 1e-9) << "trial " << trial;
    }
}

TEST(CredalLayer, ZeroInputUsesBiasesOnly)
{
    const autodiff::ParameterSet params{{"mw", Matrix::Constant(3, 2, 5.0)},
                                        {"mb", Matrix{{0.5, -1.0}}},
                                        {"hw", Matrix::Constant(3, 2, -4.0)},
                                        {"hb", Matrix{{0.0, 2.0}}}};
    autodiff::Tape tape(&params);
    const auto il = head::credal_layer_forward(tape, tape.constant(Matrix::Zero(2, 3)), tape.param("mw"),
                                               tape.param("mb"), tape.param("hw"), tape.param("hb"));
    const Matrix lo = tape.value(il.lower);
    const Matrix hi = tape.value(il.upper);
    for (int r = 0; r < 2; ++r) {
        EXPECT_NEAR(lo(r, 0), 0.5 - std::log(2.0), 1e-15);
        EXPECT_NEAR(hi(r, 0), 0.5 + std::log(2.0), 1e-15);
        EXPECT_NEAR(hi(r, 1) - lo(r, 1), 2.0 * std::log1p(std::exp(2.0)), 1e-14);
        EXPECT_NEAR(0.5 * (hi(r, 1) + lo(r, 1)), -1.0, 1e-14);
    }
}

TEST(CredalLayer, HalfWidthIsNonNegativeAndVanishesInTheLimit)
{
    std::mt19937_64 rng(104);
    autodiff::ParameterSet params;
    head::append_credal_params(5, 3, rng, params, "c");
    autodiff::Tape tape(&params);
    const auto il = head::credal_layer_forward(tape, tape.constant(random_matrix(rng, 30, 5, 4.0)),
                                               tape.param("c.mid_weight"), tape.param("c.mid_bias"),
                                               tape.param("c.half_weight"), tape.param("c.half_bias"));
    EXPECT_GE((tape.value(il.upper) - tape.value(il.lower)).minCoeff(), 0.0);

    params[2].value.setZero();
    params[3].value.setConstant(-60.0);
    autodiff::Tape narrow(&params);
    const auto d = head::credal_layer_forward(narrow, narrow.constant(random_matrix(rng, 30, 5)),
                                              narrow.param("c.mid_weight"), narrow.param("c.mid_bias"),
                                              narrow.param("c.half_weight"), narrow.param("c.half_bias"));
    EXPECT_LT((narrow.value(d.upper) - narrow.value(d.lower)).cwiseAbs().maxCoeff(), 1e-25);
}

TEST(PointPrediction, ArgmaxWithLowestIndexTies)
{
    head::CredalPrediction pred{Matrix{{0.1, 0.1, 0.0}, {0.6, 0.0, 0.1}, {0.5, 0.5, 0.0}},
                                Matrix{{0.7, 0.2, 0.1}, {0.8, 0.9, 0.2}, {0.5, 0.5, 0.0}}};
    EXPECT_EQ(head::point_prediction(pred, head::Bound::Upper), (std::vector<int>{0, 1, 0}));
    EXPECT_EQ(head::point_prediction(pred, head::Bound::Lower), (std::vector<int>{0, 0, 0}));
}

TEST(CredalPrediction, ValidateRejectsEmptySets)
{
    head::CredalPrediction ok{Matrix{{0.2, 0.3}}, Matrix{{0.7, 0.8}}};
    EXPECT_NO_THROW(ok.validate());
    head::CredalPrediction heavy{Matrix{{0.6, 0.5}}, Matrix{{0.7, 0.8}}};
    EXPECT_THROW(heavy.validate(), std::domain_error);
    head::CredalPrediction light{Matrix{{0.1, 0.1}}, Matrix{{0.2, 0.3}}};
    EXPECT_THROW(light.validate(), std::domain_error);
    head::CredalPrediction inverted{Matrix{{0.5, 0.3}}, Matrix{{0.4, 0.8}}};
    EXPECT_THROW(inverted.validate(), std::domain_error);
}

TEST(Entropy, WorkedExampleMaximum)
{
    const auto r = entropy::max_entropy_interval(Vec3(0.6, 0.0, 0.0), Vec3(0.8, 0.3, 0.3));
    EXPECT_NEAR(r.p[0], 0.6, 1e-10);
    EXPECT_NEAR(r.p[1], 0.2, 1e-10);
    EXPECT_NEAR(r.p[2], 0.2, 1e-10);
    // 0.6 log2(1/0.6) + 0.4 log2(5)
    const double closed = -0.6 * std::log2(0.6) + 0.4 * std::log2(5.0);
    EXPECT_NEAR(r.entropy, closed, 1e-10);
    EXPECT_NEAR(r.entropy, 1.3710, 5e-5);
    const auto oracle = entropy::entropy_bounds_oracle(Vec3(0.6, 0.0, 0.0), Vec3(0.8, 0.3, 0.3), 1e-3);
    EXPECT_NEAR(oracle.first, r.entropy, 1e-3);
}

TEST(Entropy, WorkedExampleMinimum)
{
    const auto r = entropy::min_entropy_interval(Vec3(0.6, 0.0, 0.0), Vec3(0.8, 0.3, 0.3));
    EXPECT_FALSE(r.approximate);
    EXPECT_NEAR(r.p[0], 0.8, 1e-12);
    EXPECT_NEAR(r.p[1] + r.p[2], 0.2, 1e-12);
    EXPECT_NEAR(r.p[1] * r.p[2], 0.0, 1e-12);
    const double closed = -0.8 * std::log2(0.8) - 0.2 * std::log2(0.2);
    EXPECT_NEAR(r.entropy, closed, 1e-12);
    EXPECT_NEAR(r.entropy, 0.7219, 5e-5);
    EXPECT_NEAR(r.entropy, enumerate_min_entropy(Vec3(0.6, 0.0, 0.0), Vec3(0.8, 0.3, 0.3)), 1e-12);
}

TEST(Entropy, UnconstrainedBox)
{
    const auto mx = entropy::max_entropy_interval(Vec3::Zero(), Vec3::Ones());
    EXPECT_NEAR(mx.entropy, std::log2(3.0), 1e-10);
    EXPECT_LT((mx.p - Vec3::Constant(1.0 / 3.0)).cwiseAbs().maxCoeff(), 1e-10);
    const auto mn = entropy::min_entropy_interval(Vec3::Zero(), Vec3::Ones());
    EXPECT_NEAR(mn.entropy, 0.0, 1e-15);
    EXPECT_NEAR(mn.p.maxCoeff(), 1.0, 1e-15);
}

TEST(Entropy, PointSetGivesItsOwnEntropy)
{
    const Vec3 p(0.5, 0.25, 0.25);
    EXPECT_NEAR(entropy::max_entropy_interval(p, p).entropy, 1.5, 1e-12);
    EXPECT_NEAR(entropy::min_entropy_interval(p, p).entropy, 1.5, 1e-12);
    const auto oracle = entropy::entropy_bounds_oracle(p, p, 1e-3);
    EXPECT_DOUBLE_EQ(oracle.first, entropy::shannon_bits(p));
    EXPECT_DOUBLE_EQ(oracle.second, entropy::shannon_bits(p));
}

TEST(Entropy, ShannonConventions)
{
    EXPECT_EQ(entropy::shannon_bits(Eigen::Vector2d(1.0, 0.0)), 0.0);
    EXPECT_DOUBLE_EQ(entropy::shannon_bits(Eigen::Vector2d(0.5, 0.5)), 1.0);
    EXPECT_DOUBLE_EQ(entropy::shannon_bits(Eigen::Vector4d::Constant(0.25)), 2.0);
}

TEST(Entropy, InfeasibleBoundsThrow)
{
    EXPECT_THROW(entropy::max_entropy_interval(Vec3(0.5, 0.5, 0.5), Vec3::Ones()), entropy::InfeasibleBounds);
    EXPECT_THROW(entropy::min_entropy_interval(Vec3::Zero(), Vec3::Constant(0.2)), entropy::InfeasibleBounds);
    EXPECT_THROW(entropy::max_entropy_interval(Vec3(0.5, 0.0, 0.0), Vec3(0.4, 1.0, 1.0)), entropy::InfeasibleBounds);
    EXPECT_THROW(entropy::max_entropy_interval(Eigen::Vector2d(0.0, 0.0), Vec3::Ones()), std::invalid_argument);
    EXPECT_THROW(entropy::entropy_bounds_oracle(Eigen::VectorXd::Zero(5), Eigen::VectorXd::Ones(5), 1e-2),
                 std::invalid_argument);
    EXPECT_THROW(entropy::entropy_bounds_oracle(Vec3::Zero(), Vec3::Ones(), 1e-4), std::invalid_argument);
}

TEST(Entropy, NearFeasibleBoundsAreProjected)
{
    // Lower bounds overshoot the simplex by 3e-10, within tolerance.
    const Vec3 lower(0.5, 0.3, 0.2 + 3e-10);
    const auto r = entropy::max_entropy_interval(lower, Vec3::Ones());
    EXPECT_NEAR(r.p.sum(), 1.0, 1e-12);
    EXPECT_NEAR(r.entropy, entropy::shannon_bits(Vec3(0.5, 0.3, 0.2)), 1e-8);
}

// Water-filling optimality certificate: shifting mass from j to i raises
// entropy iff p_i < p_j, so every coordinate that can still grow must be at
// least as large as every coordinate that can still shrink.
TEST(EntropyProperties, MaxEntropySatisfiesKkt)
{
    std::mt19937_64 rng(105);
    for (int trial = 0; trial < 2000; ++trial) {
        const int c = 2 + static_cast<int>(rng() % 9);
        const auto b = random_bounds(rng, c);
        const auto r = entropy::max_entropy_interval(b.lower, b.upper);
        ASSERT_NEAR(r.p.sum(), 1.0, 1e-10);
        double min_growable = 1.0;
        double max_shrinkable = 0.0;
        for (int i = 0; i < c; ++i) {
            ASSERT_GE(r.p[i], b.lower[i] - 1e-12);
            ASSERT_LE(r.p[i], b.upper[i] + 1e-12);
            if (r.p[i] < b.upper[i] - 1e-10)
                min_growable = std::min(min_growable, r.p[i]);
            if (r.p[i] > b.lower[i] + 1e-10)
                max_shrinkable = std::max(max_shrinkable, r.p[i]);
        }
        ASSERT_LE(max_shrinkable, min_growable + 1e-9) << "trial " << trial;
        ASSERT_NEAR(r.entropy, entropy::shannon_bits(r.p), 1e-12);
    }
}

TEST(EntropyProperties, MinEntropyMatchesIndependentEnumeration)
{
    std::mt19937_64 rng(106);
    for (int trial = 0; trial < 500; ++trial) {
        const int c = 2 + static_cast<int>(rng() % 9);
        const auto b = random_bounds(rng, c);
        const auto r = entropy::min_entropy_interval(b.lower, b.upper);
        ASSERT_FALSE(r.approximate);
        ASSERT_NEAR(r.entropy, enumerate_min_entropy(b.lower, b.upper), 1e-9) << "trial " << trial;
        ASSERT_NEAR(r.p.sum(), 1.0, 1e-10);
    }
}

TEST(EntropyProperties, SolversBracketRandomFeasiblePoints)
{
    std::mt19937_64 rng(107);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
        const int c = 3 + static_cast<int>(rng() % 4);
        const auto b = random_bounds(rng, c);
        const double hmax = entropy::max_entropy_interval(b.lower, b.upper).entropy;
        const double hmin = entropy::min_entropy_interval(b.lower, b.upper).entropy;
        ASSERT_LE(hmin, hmax + 1e-12);
        ASSERT_LE(hmax, std::log2(c) + 1e-9);
        // Random points of the credal set: mix lower bounds with leftover mass.
        for (int s = 0; s < 20; ++s) {
            Eigen::VectorXd p = b.lower;
            double left = 1.0 - p.sum();
            for (int pass = 0; pass < 3 && left > 1e-15; ++pass)
                for (int i = 0; i < c && left > 1e-15; ++i) {
                    const double add = std::min(left, (b.upper[i] - p[i]) * u(rng));
                    p[i] += add;
                    left -= add;
                }
            for (int i = 0; i < c && left > 1e-15; ++i) {
                const double add = std::min(left, b.upper[i] - p[i]);
                p[i] += add;
                left -= add;
            }
            const double h = entropy::shannon_bits(p);
            ASSERT_LE(h, hmax + 1e-9);
            ASSERT_GE(h, hmin - 1e-9);
        }
    }
}

TEST(EntropyProperties, AgreesWithGridOracle)
{
    std::mt19937_64 rng(108);
    for (int trial = 0; trial < 40; ++trial) {
        const int c = 2 + trial % 2;
        const auto b = random_bounds(rng, c);
        const auto oracle = entropy::entropy_bounds_oracle(b.lower, b.upper, 1e-3);
        ASSERT_NEAR(entropy::max_entropy_interval(b.lower, b.upper).entropy, oracle.first, 1e-3);
        ASSERT_NEAR(entropy::min_entropy_interval(b.lower, b.upper).entropy, oracle.second, 1e-3);
    }
}

TEST(Entropy, GreedyFallbackIsFlaggedAndFeasible)
{
    std::mt19937_64 rng(109);
    for (int trial = 0; trial < 20; ++trial) {
        const auto b = random_bounds(rng, 20);
        const auto r = entropy::min_entropy_interval(b.lower, b.upper);
        EXPECT_TRUE(r.approximate);
        EXPECT_NEAR(r.p.sum(), 1.0, 1e-10);
        EXPECT_TRUE(((r.p - b.lower).array() >= -1e-12).all());
        EXPECT_TRUE(((b.upper - r.p).array() >= -1e-12).all());
        EXPECT_LE(r.entropy, entropy::max_entropy_interval(b.lower, b.upper).entropy + 1e-12);
    }
    const auto exact = entropy::min_entropy_interval(Eigen::VectorXd::Zero(15), Eigen::VectorXd::Ones(15));
    EXPECT_FALSE(exact.approximate);
}

TEST(IntervalUncertainty, ScoresAreOrderedAndBounded)
{
    std::mt19937_64 rng(110);
    const Matrix m = random_matrix(rng, 300, 4, 2.0);
    const Matrix h = random_matrix(rng, 300, 4, 1.5).cwiseAbs();
    const auto scores = uncertainty::interval_uncertainty(head::interval_softmax(m - h, m + h));
    ASSERT_EQ(scores.tu.size(), 300);
    EXPECT_GE(scores.au.minCoeff(), 0.0);
    EXPECT_GE(scores.eu.minCoeff(), 0.0);
    EXPECT_LE(scores.tu.maxCoeff(), 2.0 + 1e-9);
    EXPECT_LT((scores.tu - scores.au - scores.eu).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(IntervalUncertainty, FullBoxApproachesLogC)
{
    const Matrix lo = Matrix::Constant(1, 4, -30.0);
    const Matrix hi = Matrix::Constant(1, 4, 30.0);
    const auto scores = uncertainty::interval_uncertainty(head::interval_softmax(lo, hi));
    EXPECT_NEAR(scores.eu[0], 2.0, 1e-6);
}

} // namespace
} // namespace credal
