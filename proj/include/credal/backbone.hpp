#pragma once

#include "credal/graph.hpp"
#include "credal/optim.hpp"
#include "credal/tape.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace credal::gnn {

using autodiff::Rng;
using autodiff::Tape;
using autodiff::Var;

enum class BackboneKind { GCN, SAGE };

std::string to_string(BackboneKind kind);
BackboneKind parse_backbone_kind(std::string_view text);

struct BackboneConfig {
    BackboneKind kind = BackboneKind::GCN;
    int num_layers = 2;
    int hidden_dim = 64;
    int input_dim = 0;
    /// Train-time dropout on each layer input; 0 disables it.
    double dropout = 0.0;

    void validate() const;
    int output_dim() const { return num_layers == 0 ? input_dim : hidden_dim; }
    /// Width of [Z^0 | Z^1 | ... | Z^L].
    int joint_dim() const { return input_dim + num_layers * hidden_dim; }
};

/// Fixed graph operators shared by every layer and every model on a dataset.
struct GraphOperators {
    SparseOperator gcn;
    SparseOperator mean;

    static GraphOperators build(const graph::GraphDataset& data);
};

/// ReLU(op * H * W + b), or the pre-activation when `activate` is false.
Var gcn_layer(Tape& tape, Var h, const SparseOperator& op, Var weight, Var bias,
              bool activate = true);

/// ReLU(H * W_self + (mean_op * H) * W_neigh + b).
Var sage_layer(Tape& tape, Var h, const SparseOperator& mean_op, Var weight_self,
               Var weight_neigh, Var bias, bool activate = true);

/// Appends Glorot-initialized layer parameters named `<prefix>.<layer>.<role>`.
void append_backbone_params(const BackboneConfig& config, Rng& rng, autodiff::ParameterSet& params,
                            const std::string& prefix = "backbone");

/// Node embeddings [Z^0, ..., Z^L] as tape variables; Z^0 is the input.
struct LayerTrace {
    std::vector<Var> layers;

    std::vector<Matrix> values(const Tape& tape) const;
    Var final_layer() const { return layers.back(); }
};

/// Passing a non-null `dropout_rng` enables train-time dropout.
LayerTrace backbone_forward(Tape& tape, Var features, const GraphOperators& ops,
                            const BackboneConfig& config, const std::string& prefix = "backbone",
                            Rng* dropout_rng = nullptr);

/// Column-wise concatenation of every layer of the trace.
Var joint_concat(Tape& tape, const LayerTrace& trace);

} // namespace credal::gnn
