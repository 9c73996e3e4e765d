#pragma once

#include "credal/backbone.hpp"
#include "credal/credal_head.hpp"
#include "credal/graph.hpp"
#include "credal/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace credal::training {

using autodiff::Tape;
using autodiff::Var;

enum class EarlyStopMetric { ValEpistemicAuroc, ValMacroF1 };

std::string to_string(EarlyStopMetric metric);
EarlyStopMetric parse_early_stop_metric(std::string_view text);

struct TrainConfig {
    double lr = 1e-2;
    double weight_decay = 5e-4;
    int max_epochs = 200;
    int patience = 50;
    /// Fraction of hardest training nodes in the pessimistic DRO term.
    double delta = 0.8;
    std::uint64_t seed = 0;
    model::ModelKind model_kind = model::ModelKind::CredalLJ;
    gnn::BackboneConfig backbone;
    /// Defaults by model kind: epistemic AUROC for credal models, macro F1 for vanilla.
    std::optional<EarlyStopMetric> early_stop_metric;
    /// When false every `seconds` field is written as 0 so outputs are reproducible.
    bool record_timing = false;

    void validate() const;
    EarlyStopMetric resolved_metric() const;
};

struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;
    double val_metric = 0.0;
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    /// 1-based epoch whose parameters were restored.
    int best_epoch = 0;

    /// epoch,loss,val_metric,seconds
    void write_csv(std::ostream& out) const;
};

struct TrainResult {
    model::GnnModel model;
    TrainHistory history;
};

/// Non-finite loss during training; the message carries the recent epochs.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// -log(clamp(q[row, label], 1e-12, 1)) for each (rows[i], labels[i]).
Vector cross_entropy_rows(const Matrix& q, std::span<const int> rows, std::span<const int> labels);

/// Positions of the ceil(delta * N) largest entries, ties broken towards the
/// smaller position; returned in ascending position order.
IndexList select_hard_set(std::span<const double> lower_ce, double delta);

/// mean_n CE(q_upper) + 1 / (delta N) * sum_{n in H} CE(q_lower), over the
/// N training rows, with H the hard set of the lower-bound cross-entropies.
double dro_loss(const head::CredalPrediction& pred, std::span<const int> rows,
                std::span<const int> labels, double delta);

/// Tape version. The hard set is recomputed from the current q_lower unless
/// `frozen_hard_set` (positions into `rows`) is supplied; either way it is a
/// constant of the backward pass.
Var dro_loss(Tape& tape, Var q_lower, Var q_upper, std::span<const int> rows,
             std::span<const int> labels, double delta,
             const IndexList* frozen_hard_set = nullptr);

/// Full-batch Adam training with early stopping on the validation metric.
/// The best epoch's parameters are restored before returning; among tied
/// epochs the latest wins, while patience counts from the last strict gain.
TrainResult train_model(const graph::GraphDataset& data, const graph::SplitMasks& split,
                        const graph::ClassPartition& partition, const TrainConfig& config);

} // namespace credal::training
