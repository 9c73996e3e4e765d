#pragma once

#include "credal/backbone.hpp"
#include "credal/graph.hpp"
#include "credal/model.hpp"
#include "credal/training.hpp"
#include "credal/uncertainty.hpp"

#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

// Post-hoc OOD scorers and ensembles. Every scorer returns one value per node
// with the convention "higher = more OOD".
namespace credal::baselines {

/// -T * logsumexp(logits / T), max-shifted.
Vector energy_score(const Matrix& logits, double temperature = 1.0);

/// Negated maximum softmax probability.
Vector msp_score(const Matrix& logits, double temperature = 1.0);

/// Inputs are perturbed as x - eps * sign(grad_x sum_v -log max softmax(f(x)_v / T))
/// and scored by the negated max softmax of the perturbed forward pass.
Vector odin_score(const model::GnnModel& vanilla, const graph::GraphDataset& data,
                  const gnn::GraphOperators& ops, double temperature, double epsilon);

/// Class means from ID training embeddings and a shared pooled within-class
/// covariance regularized by `ridge * I`.
struct GaussianClassModel {
    Matrix means; // one row per ID class
    Matrix covariance;
    Matrix precision;

    static GaussianClassModel fit(const Matrix& embeddings, std::span<const int> rows,
                                  std::span<const int> labels, int num_classes,
                                  double ridge = 1e-6);
};

/// Minimum squared Mahalanobis distance to the class means.
Vector mahalanobis_score(const Matrix& embeddings, const GaussianClassModel& model);

/// Mean Euclidean distance to the k nearest reference rows (exact search).
Vector knn_score(const Matrix& queries, const Matrix& reference, int k);

/// knn_score in the joint latent space [Z^0 | ... | Z^L] of a trained vanilla model.
Vector knnlj_score(const model::GnnModel& vanilla, const graph::GraphDataset& data,
                   const gnn::GraphOperators& ops, std::span<const int> train_rows, int k);

/// K rounds of E <- alpha E + (1 - alpha) (row-normalized A) E.
Vector gnnsafe_score(const Vector& energy, const SparseOperator& mean_op, double alpha, int rounds);

struct EnsembleScores {
    Vector au;
    Vector eu;
    Matrix mean_probs;
};

/// Entropy decomposition of averaged member softmax outputs.
EnsembleScores classical_ensemble(std::span<const Matrix> member_probs);

/// Convex hull of member softmax outputs as the credal set.
EnsembleScores credal_ensemble(std::span<const Matrix> member_probs,
                               uncertainty::HullMode mode = uncertainty::HullMode::FullHull);

/// Per-node scores with ground truth and split membership.
struct ScoredNodes {
    std::vector<double> score;
    std::vector<bool> is_ood;
    /// "train", "val", "test" or "none".
    std::vector<std::string_view> split;
};

ScoredNodes label_scores(const Vector& scores, const graph::GraphDataset& data,
                         const graph::ClassPartition& partition, const graph::SplitMasks& split);

/// CSV with header node_id,score,is_ood,split; is_ood is 0 or 1.
void write_score_csv(std::ostream& out, const ScoredNodes& nodes);

/// Seed used for ensemble member `index` built around `base_seed`.
std::uint64_t member_seed(std::uint64_t base_seed, int index);

/// Trains `size` vanilla models that differ only in their seed.
std::vector<model::GnnModel> train_ensemble(const graph::GraphDataset& data,
                                            const graph::SplitMasks& split,
                                            const graph::ClassPartition& partition,
                                            training::TrainConfig config, int size);

} // namespace credal::baselines
