#pragma once

#include "credal/backbone.hpp"
#include "credal/credal_head.hpp"
#include "credal/graph.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace credal::model {

using autodiff::ParameterSet;
using autodiff::Tape;
using autodiff::Var;

enum class ModelKind {
    /// Backbone + linear softmax classifier on Z^L.
    VanillaGNN,
    /// Credal head on the final embedding Z^L.
    CredalFinal,
    /// Credal head on the joint representation [Z^0 | ... | Z^L].
    CredalLJ,
};

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);
inline bool is_credal(ModelKind kind) { return kind != ModelKind::VanillaGNN; }

struct ModelConfig {
    ModelKind kind = ModelKind::CredalLJ;
    gnn::BackboneConfig backbone;
    /// Number of ID classes the head predicts.
    int num_classes = 0;

    void validate() const;
    bool operator==(const ModelConfig& other) const;
};

/// Tape variables produced by one forward pass.
struct ForwardResult {
    gnn::LayerTrace trace;
    Var head_input;
    Var logits;                    // vanilla only
    head::IntervalLogits interval; // credal only
    Var q_lower;                   // credal only
    Var q_upper;                   // credal only
};

class GnnModel {
public:
    GnnModel(ModelConfig config, ParameterSet params);

    /// Glorot-initialized parameters drawn from `seed`.
    static GnnModel initialize(const ModelConfig& config, std::uint64_t seed);

    /// `tape` must be bound to params(). A non-null `dropout_rng` enables dropout.
    ForwardResult forward(Tape& tape, Var features, const gnn::GraphOperators& ops,
                          autodiff::Rng* dropout_rng = nullptr) const;

    const ModelConfig& config() const { return config_; }
    ParameterSet& params() { return params_; }
    const ParameterSet& params() const { return params_; }

private:
    ModelConfig config_;
    ParameterSet params_;
};

/// Evaluation-mode outputs as plain matrices.
struct Predictions {
    Matrix logits;                 // vanilla only
    Matrix probs;                  // vanilla only: softmax(logits)
    head::CredalPrediction credal; // credal only
    Matrix final_embedding;        // Z^L
    Matrix joint_embedding;        // [Z^0 | ... | Z^L]
};

Predictions predict(const GnnModel& model, const graph::GraphDataset& data,
                    const gnn::GraphOperators& ops);

/// Row-wise softmax(logits / temperature).
Matrix softmax_rows(const Matrix& logits, double temperature = 1.0);

} // namespace credal::model
