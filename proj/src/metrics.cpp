#include "credal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace credal::eval {

namespace {

void require_non_empty(std::span<const double> id, std::span<const double> ood)
{
    if (id.empty() || ood.empty())
        throw std::invalid_argument("auroc: both ID and OOD score lists must be non-empty");
}

} // namespace

double auroc(std::span<const double> scores_id, std::span<const double> scores_ood)
{
    require_non_empty(scores_id, scores_ood);
    struct Item {
        double score;
        bool ood;
    };
    std::vector<Item> all;
    all.reserve(scores_id.size() + scores_ood.size());
    for (double s : scores_id)
        all.push_back({s, false});
    for (double s : scores_ood)
        all.push_back({s, true});
    std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.score < b.score; });

    // Sum of mid-ranks (1-based) of the OOD items.
    double rank_sum = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        std::size_t ood_in_group = 0;
        while (j < all.size() && all[j].score == all[i].score) {
            ood_in_group += all[j].ood;
            ++j;
        }
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
        rank_sum += mid_rank * static_cast<double>(ood_in_group);
        i = j;
    }
    const auto n_ood = static_cast<double>(scores_ood.size());
    const auto n_id = static_cast<double>(scores_id.size());
    const double u = rank_sum - n_ood * (n_ood + 1.0) / 2.0;
    return u / (n_id * n_ood);
}

double auroc_pairwise(std::span<const double> scores_id, std::span<const double> scores_ood)
{
    require_non_empty(scores_id, scores_ood);
    double wins = 0.0;
    for (double o : scores_ood)
        for (double d : scores_id)
            wins += o > d ? 1.0 : (o == d ? 0.5 : 0.0);
    return wins / (static_cast<double>(scores_id.size()) * static_cast<double>(scores_ood.size()));
}

std::vector<RocPoint> roc_curve(std::span<const double> scores_id, std::span<const double> scores_ood)
{
    require_non_empty(scores_id, scores_ood);
    std::vector<std::pair<double, bool>> all;
    for (double s : scores_id)
        all.emplace_back(s, false);
    for (double s : scores_ood)
        all.emplace_back(s, true);
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

    const auto n_id = static_cast<double>(scores_id.size());
    const auto n_ood = static_cast<double>(scores_ood.size());
    std::vector<RocPoint> curve{{0.0, 0.0}};
    double fp = 0.0;
    double tp = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        const double threshold = all[i].first;
        while (i < all.size() && all[i].first == threshold) {
            (all[i].second ? tp : fp) += 1.0;
            ++i;
        }
        curve.push_back({fp / n_id, tp / n_ood});
    }
    return curve;
}

double macro_f1(std::span<const int> predicted, std::span<const int> truth,
                std::span<const int> classes)
{
    if (predicted.size() != truth.size())
        throw std::invalid_argument("macro_f1: prediction/truth length mismatch");
    if (truth.empty())
        throw std::invalid_argument("macro_f1: empty evaluation set");
    if (classes.empty())
        throw std::invalid_argument("macro_f1: no classes");
    double total = 0.0;
    for (int c : classes) {
        double tp = 0.0;
        double fp = 0.0;
        double fn = 0.0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            const bool p = predicted[i] == c;
            const bool t = truth[i] == c;
            tp += p && t;
            fp += p && !t;
            fn += !p && t;
        }
        total += tp > 0.0 ? 2.0 * tp / (2.0 * tp + fp + fn) : 0.0;
    }
    return total / static_cast<double>(classes.size());
}

std::pair<double, double> mean_std(std::span<const double> values)
{
    if (values.empty())
        return {0.0, 0.0};
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() == 1)
        return {mean, 0.0};
    double ss = 0.0;
    for (double v : values)
        ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

} // namespace credal::eval
