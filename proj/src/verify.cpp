#include "credal/verify.hpp"

#include "credal/credal_head.hpp"
#include "credal/entropy.hpp"
#include "credal/metrics.hpp"
#include "credal/model.hpp"
#include "credal/optim.hpp"
#include "credal/tape.hpp"
#include "credal/training.hpp"
#include "credal/uncertainty.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace credal::verify {

namespace {

using autodiff::Rng;

int scaled(const VerifyOptions& opts, int full)
{
    return std::max(1, static_cast<int>(std::lround(full * opts.scale)));
}

CheckResult timed(const char* name, double tolerance, const std::function<void(CheckResult&)>& body)
{
    CheckResult r;
    r.name = name;
    r.tolerance = tolerance;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(r);
    } catch (const std::exception& e) {
        r.passed = false;
        r.measured = std::numeric_limits<double>::quiet_NaN();
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

Vector dirichlet(Rng& rng, int c)
{
    std::gamma_distribution<double> g(1.0, 1.0);
    Vector p(c);
    for (int i = 0; i < c; ++i)
        p[i] = g(rng) + 1e-12;
    return p / p.sum();
}

/// Feasible interval bounds around a random distribution.
std::pair<Vector, Vector> random_bounds(Rng& rng, int c)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Vector p = dirichlet(rng, c);
    Vector lo(c), hi(c);
    for (int i = 0; i < c; ++i) {
        lo[i] = p[i] * u(rng);
        hi[i] = p[i] + (1.0 - p[i]) * u(rng) * u(rng);
    }
    return {lo, hi};
}

double entropy_bits(const Vector& p)
{
    double h = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i)
        if (p[i] > 0.0)
            h -= p[i] * std::log2(p[i]);
    return h;
}

/// Every vertex of box ∩ simplex: one free coordinate, the rest at a bound.
double enumerate_min_entropy(const Vector& lo, const Vector& hi)
{
    const auto c = static_cast<int>(lo.size());
    double best = std::numeric_limits<double>::infinity();
    Vector p(c);
    for (int free = 0; free < c; ++free) {
        for (std::uint32_t mask = 0; mask < (1u << (c - 1)); ++mask) {
            double rest = 0.0;
            int bit = 0;
            for (int i = 0; i < c; ++i) {
                if (i == free)
                    continue;
                p[i] = (mask >> bit++) & 1u ? hi[i] : lo[i];
                rest += p[i];
            }
            p[free] = 1.0 - rest;
            if (p[free] < lo[free] - 1e-12 || p[free] > hi[free] + 1e-12)
                continue;
            p[free] = std::clamp(p[free], 0.0, 1.0);
            best = std::min(best, entropy_bits(p));
        }
    }
    return best;
}

Matrix random_logits(Rng& rng, int rows, int cols, double scale)
{
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = n(rng);
    return m;
}

} // namespace

CheckResult check_softmax_validity(const VerifyOptions& opts)
{
    return timed("interval_softmax_validity", 1e-9, [&](CheckResult& r) {
        Rng rng(opts.seed);
        std::uniform_int_distribution<int> classes(2, 10);
        const int rows = scaled(opts, 10000);
        double worst = 0.0;
        for (int i = 0; i < rows; ++i) {
            const int c = classes(rng);
            const Matrix m = random_logits(rng, 1, c, 3.0);
            const Matrix h = random_logits(rng, 1, c, 2.0).cwiseAbs();
            Matrix ql, qu;
            autodiff::interval_softmax(m - h, m + h, ql, qu);
            worst = std::max({worst, (ql - qu).maxCoeff(), ql.sum() - 1.0, 1.0 - qu.sum()});
        }
        r.measured = std::max(worst, 0.0);
        r.passed = worst <= r.tolerance;
        r.detail = std::to_string(rows) + " rows, C in [2, 10]";
    });
}

CheckResult check_degenerate_collapse(const VerifyOptions& opts)
{
    return timed("degenerate_collapse", 1e-12, [&](CheckResult& r) {
        Rng rng(opts.seed + 1);
        const int rows = scaled(opts, 1000);
        const Matrix m = random_logits(rng, rows, 5, 3.0);
        const auto pred = head::interval_softmax(m, m);
        const Matrix soft = model::softmax_rows(m);
        const double dev = std::max((pred.q_lower - soft).cwiseAbs().maxCoeff(),
                                    (pred.q_upper - soft).cwiseAbs().maxCoeff());
        const auto u = uncertainty::interval_uncertainty(pred);
        const double eu = u.eu.maxCoeff();
        r.measured = dev;
        r.passed = dev <= r.tolerance && eu <= 1e-9;
        std::ostringstream ss;
        ss << rows << " rows; max EU " << eu << " (tolerance 1e-9)";
        r.detail = ss.str();
    });
}

CheckResult check_entropy_oracle(const VerifyOptions& opts)
{
    return timed("entropy_grid_oracle", 1e-3, [&](CheckResult& r) {
        Rng rng(opts.seed + 2);
        std::uniform_int_distribution<int> classes(2, 4);
        const int instances = scaled(opts, 100);
        double worst = 0.0;
        for (int i = 0; i < instances; ++i) {
            const int c = classes(rng);
            const auto [lo, hi] = random_bounds(rng, c);
            const auto [oracle_max, oracle_min] =
                entropy::entropy_bounds_oracle(lo, hi, c == 4 ? 1e-2 : 1e-3);
            const double hmax = entropy::max_entropy_interval(lo, hi).entropy;
            const double hmin = opts.inject_min_entropy_fault
                                    ? entropy::max_entropy_interval(lo, hi).entropy
                                    : entropy::min_entropy_interval(lo, hi).entropy;
            worst = std::max({worst, std::abs(hmax - oracle_max), std::abs(hmin - oracle_min)});
        }
        r.measured = worst;
        r.passed = worst <= r.tolerance;
        r.detail = std::to_string(instances) + " instances, C in {2, 3, 4}";
        if (opts.inject_min_entropy_fault)
            r.detail += "; fault injected";
    });
}

CheckResult check_min_entropy_enumeration(const VerifyOptions& opts)
{
    return timed("min_entropy_vertex_enumeration", 1e-9, [&](CheckResult& r) {
        Rng rng(opts.seed + 3);
        std::uniform_int_distribution<int> classes(2, entropy::kMaxExactMinEntropyClasses);
        const int instances = scaled(opts, 100);
        double worst = 0.0;
        for (int i = 0; i < instances; ++i) {
            const int c = classes(rng);
            const auto [lo, hi] = random_bounds(rng, c);
            const double solver = opts.inject_min_entropy_fault
                                      ? entropy::max_entropy_interval(lo, hi).entropy
                                      : entropy::min_entropy_interval(lo, hi).entropy;
            worst = std::max(worst, std::abs(solver - enumerate_min_entropy(lo, hi)));
        }
        r.measured = worst;
        r.passed = worst <= r.tolerance;
        r.detail = std::to_string(instances) + " instances, C in [2, 15]";
    });
}

CheckResult check_hull_oracle(const VerifyOptions& opts)
{
    return timed("hull_grid_oracle", 1e-3, [&](CheckResult& r) {
        Rng rng(opts.seed + 4);
        const int instances = scaled(opts, 50);
        constexpr int steps = 1000;
        double worst = 0.0;
        bool au_exact = true;
        for (int i = 0; i < instances; ++i) {
            Matrix members(3, 3);
            for (int m = 0; m < 3; ++m)
                members.row(m) = dirichlet(rng, 3).transpose();
            const auto hull = uncertainty::hull_uncertainty(members);
            double grid = 0.0;
            for (int a = 0; a <= steps; ++a)
                for (int b = 0; a + b <= steps; ++b) {
                    const double wa = double(a) / steps, wb = double(b) / steps;
                    const Vector p = (wa * members.row(0) + wb * members.row(1) +
                                      (1.0 - wa - wb) * members.row(2))
                                         .transpose();
                    grid = std::max(grid, entropy_bits(p));
                }
            double member_min = std::numeric_limits<double>::infinity();
            for (int m = 0; m < 3; ++m)
                member_min = std::min(member_min, entropy::shannon_bits(members.row(m)));
            au_exact = au_exact && hull.au == member_min;
            worst = std::max(worst, std::abs(hull.tu - grid));
        }
        r.measured = worst;
        r.passed = worst <= r.tolerance && au_exact;
        r.detail = std::to_string(instances) + " instances, M = 3, C = 3; AU equals min member entropy: " +
                   (au_exact ? "yes" : "no");
    });
}

CheckResult check_gradient(const VerifyOptions& opts)
{
    return timed("dro_gradient_fd", 1e-4, [&](CheckResult& r) {
        graph::CsbmParams cp;
        cp.nodes_per_class = 5;
        cp.num_classes = 4;
        cp.p_in = 0.3;
        cp.p_out = 0.1;
        cp.feature_dim = 4;
        cp.seed = opts.seed;
        const auto data = graph::generate_csbm(cp);
        const auto partition = graph::ClassPartition::leave_out(4, {3});
        const auto split = graph::leave_out_class_split(data, partition, 0.5, 0.25, opts.seed);
        const auto remapped = graph::remap_id_labels(data.labels, partition);
        IndexList rows, labels;
        for (int v : graph::SplitMasks::indices(split.train)) {
            rows.push_back(v);
            labels.push_back(remapped[v]);
        }

        model::ModelConfig mc;
        mc.kind = model::ModelKind::CredalLJ;
        mc.backbone.hidden_dim = 6;
        mc.backbone.input_dim = data.feature_dim();
        mc.num_classes = partition.num_id();
        auto net = model::GnnModel::initialize(mc, opts.seed);
        const auto ops = gnn::GraphOperators::build(data);
        constexpr double delta = 0.7;

        IndexList hard;
        {
            autodiff::Tape tape(&net.params());
            auto out = net.forward(tape, tape.constant(data.features), ops);
            const Vector ce = training::cross_entropy_rows(tape.value(out.q_lower), rows, labels);
            hard = training::select_hard_set({ce.data(), static_cast<std::size_t>(ce.size())}, delta);
        }
        const autodiff::LossBuilder loss = [&](autodiff::Tape& tape) {
            auto out = net.forward(tape, tape.constant(data.features), ops);
            return training::dro_loss(tape, out.q_lower, out.q_upper, rows, labels, delta, &hard);
        };
        const int probes = scaled(opts, 200);
        const auto report = autodiff::grad_check(loss, net.params(), probes, 1e-6, opts.seed);
        r.measured = report.max_relative_error;
        r.passed = report.max_relative_error < r.tolerance;
        r.detail = std::to_string(report.probes) + " probed coordinates on a " +
                   std::to_string(data.num_nodes()) + "-node graph";
    });
}

CheckResult check_dro_reduction(const VerifyOptions& opts)
{
    return timed("dro_delta_one_reduction", 1e-12, [&](CheckResult& r) {
        Rng rng(opts.seed + 5);
        const int n = 50, c = 4;
        const Matrix m = random_logits(rng, n, c, 2.0);
        const Matrix h = random_logits(rng, n, c, 1.0).cwiseAbs();
        const auto pred = head::interval_softmax(m - h, m + h);
        IndexList rows(n), labels(n);
        std::uniform_int_distribution<int> label(0, c - 1);
        for (int i = 0; i < n; ++i) {
            rows[i] = i;
            labels[i] = label(rng);
        }
        double expected = 0.0;
        for (int i = 0; i < n; ++i)
            expected += -std::log(pred.q_upper(i, labels[i])) / n - std::log(pred.q_lower(i, labels[i])) / n;
        const double plain = training::dro_loss(pred, rows, labels, 1.0);
        autodiff::Tape tape;
        const double taped = tape.scalar(training::dro_loss(tape, tape.constant(pred.q_lower),
                                                            tape.constant(pred.q_upper), rows, labels, 1.0));
        r.measured = std::max(std::abs(plain - expected), std::abs(taped - expected));
        r.passed = r.measured <= r.tolerance;
        r.detail = "50 nodes, 4 classes";
    });
}

CheckResult check_ensemble_decomposition(const VerifyOptions& opts)
{
    return timed("ensemble_decomposition", 1e-12, [&](CheckResult& r) {
        Rng rng(opts.seed + 6);
        const int sets = scaled(opts, 1000);
        std::uniform_int_distribution<int> size(2, 8), classes(2, 6);
        double min_eu = std::numeric_limits<double>::infinity();
        double identical_eu = 0.0;
        for (int s = 0; s < sets; ++s) {
            const int m = size(rng), c = classes(rng);
            std::vector<Matrix> members;
            for (int k = 0; k < m; ++k)
                members.push_back(dirichlet(rng, c).transpose());
            min_eu = std::min(min_eu, uncertainty::ensemble_entropy_decompose(members).eu[0]);
            std::vector<Matrix> same(static_cast<std::size_t>(m), members.front());
            identical_eu = std::max(identical_eu, uncertainty::ensemble_entropy_decompose(same).eu[0]);
        }
        std::vector<Matrix> pair{Matrix{{1.0, 0.0}}, Matrix{{0.0, 1.0}}};
        const auto p = uncertainty::ensemble_entropy_decompose(pair);
        const bool pair_exact = p.tu[0] == 1.0 && p.au[0] == 0.0;
        r.measured = std::max(identical_eu, -min_eu);
        r.passed = min_eu >= 0.0 && identical_eu <= r.tolerance && pair_exact;
        std::ostringstream ss;
        ss << sets << " random member sets; min EU " << min_eu << "; identical-member EU " << identical_eu
           << "; (1,0)/(0,1) gives TU " << p.tu[0] << " AU " << p.au[0];
        r.detail = ss.str();
    });
}

CheckResult check_auroc_oracle(const VerifyOptions& opts)
{
    return timed("auroc_pairwise_oracle", 1e-12, [&](CheckResult& r) {
        Rng rng(opts.seed + 7);
        const int sets = scaled(opts, 100);
        std::uniform_int_distribution<int> count(1, 200), level(0, 20);
        std::bernoulli_distribution coarse(0.5);
        std::normal_distribution<double> noise(0.0, 1.0);
        double worst = 0.0;
        for (int s = 0; s < sets; ++s) {
            // Half the sets draw from a small lattice so ties are frequent.
            const bool ties = coarse(rng);
            auto draw = [&](double shift) { return ties ? double(level(rng)) + shift : noise(rng) + shift; };
            std::vector<double> id(static_cast<std::size_t>(count(rng))), ood(static_cast<std::size_t>(count(rng)));
            for (auto& x : id)
                x = draw(0.0);
            for (auto& x : ood)
                x = draw(ties ? 2.0 : 0.5);
            worst = std::max(worst, std::abs(eval::auroc(id, ood) - eval::auroc_pairwise(id, ood)));
        }
        r.measured = worst;
        r.passed = worst <= r.tolerance;
        r.detail = std::to_string(sets) + " score sets, half with heavy ties";
    });
}

std::vector<CheckResult> run_all(const VerifyOptions& opts)
{
    return {check_softmax_validity(opts),     check_degenerate_collapse(opts),
            check_entropy_oracle(opts),       check_min_entropy_enumeration(opts),
            check_hull_oracle(opts),          check_gradient(opts),
            check_dro_reduction(opts),        check_ensemble_decomposition(opts),
            check_auroc_oracle(opts)};
}

void print_report(std::ostream& out, const std::vector<CheckResult>& checks)
{
    for (const auto& c : checks) {
        out << (c.passed ? "PASS " : "FAIL ") << c.name << " measured=" << c.measured
            << " tolerance=" << c.tolerance << " seconds=" << c.seconds;
        if (!c.detail.empty())
            out << " (" << c.detail << ')';
        out << '\n';
    }
}

} // namespace credal::verify
