#pragma once

#include <span>
#include <utility>
#include <vector>

namespace credal::eval {

/// Probability that a random OOD score exceeds a random ID score, ties
/// counted one half. Sort plus mid-ranks, O(n log n). OOD is the positive
/// class and higher scores mean "more OOD".
double auroc(std::span<const double> scores_id, std::span<const double> scores_ood);

/// Direct O(n_id * n_ood) pair count; reference for auroc().
double auroc_pairwise(std::span<const double> scores_id, std::span<const double> scores_ood);

struct RocPoint {
    double fpr;
    double tpr;
};

/// Threshold sweep from (0, 0) to (1, 1); tied scores move together.
std::vector<RocPoint> roc_curve(std::span<const double> scores_id,
                                std::span<const double> scores_ood);

/// Unweighted mean of per-class F1 over `classes`. A class with no true
/// positives contributes 0.
double macro_f1(std::span<const int> predicted, std::span<const int> truth,
                std::span<const int> classes);

/// Sample mean and standard deviation (n - 1 denominator; 0 for n = 1).
std::pair<double, double> mean_std(std::span<const double> values);

} // namespace credal::eval
