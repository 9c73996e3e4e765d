#include "credal/backbone.hpp"

#include <stdexcept>

namespace credal::gnn {

std::string to_string(BackboneKind kind)
{
    return kind == BackboneKind::GCN ? "GCN" : "SAGE";
}

BackboneKind parse_backbone_kind(std::string_view text)
{
    if (text == "GCN" || text == "gcn")
        return BackboneKind::GCN;
    if (text == "SAGE" || text == "sage")
        return BackboneKind::SAGE;
    throw ConfigError("unknown backbone kind '" + std::string(text) + "'");
}

void BackboneConfig::validate() const
{
    if (num_layers < 1)
        throw ConfigError("backbone num_layers must be >= 1");
    if (hidden_dim < 1 || input_dim < 1)
        throw ConfigError("backbone dimensions must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0))
        throw ConfigError("backbone dropout must lie in [0, 1)");
}

GraphOperators GraphOperators::build(const graph::GraphDataset& data)
{
    return {graph::gcn_normalize(data), graph::row_normalize(data)};
}

Var gcn_layer(Tape& tape, Var h, const SparseOperator& op, Var weight, Var bias, bool activate)
{
    auto z = tape.add_bias(tape.spmm(op, tape.matmul(h, weight)), bias);
    return activate ? tape.relu(z) : z;
}

Var sage_layer(Tape& tape, Var h, const SparseOperator& mean_op, Var weight_self, Var weight_neigh,
               Var bias, bool activate)
{
    auto self_term = tape.matmul(h, weight_self);
    auto neigh_term = tape.matmul(tape.spmm(mean_op, h), weight_neigh);
    auto z = tape.add_bias(tape.add(self_term, neigh_term), bias);
    return activate ? tape.relu(z) : z;
}

namespace {

std::string layer_name(const std::string& prefix, int layer, const char* role)
{
    return prefix + "." + std::to_string(layer) + "." + role;
}

} // namespace

void append_backbone_params(const BackboneConfig& config, Rng& rng, autodiff::ParameterSet& params,
                            const std::string& prefix)
{
    config.validate();
    int in = config.input_dim;
    for (int l = 0; l < config.num_layers; ++l) {
        const int out = config.hidden_dim;
        if (config.kind == BackboneKind::GCN) {
            params.push_back({layer_name(prefix, l, "weight"), autodiff::glorot_init(in, out, rng)});
        } else {
            params.push_back(
                {layer_name(prefix, l, "weight_self"), autodiff::glorot_init(in, out, rng)});
            params.push_back(
                {layer_name(prefix, l, "weight_neigh"), autodiff::glorot_init(in, out, rng)});
        }
        params.push_back({layer_name(prefix, l, "bias"), Matrix::Zero(1, out)});
        in = out;
    }
}

std::vector<Matrix> LayerTrace::values(const Tape& tape) const
{
    std::vector<Matrix> out;
    out.reserve(layers.size());
    for (Var v : layers)
        out.push_back(tape.value(v));
    return out;
}

LayerTrace backbone_forward(Tape& tape, Var features, const GraphOperators& ops,
                            const BackboneConfig& config, const std::string& prefix,
                            Rng* dropout_rng)
{
    config.validate();
    if (tape.value(features).cols() != config.input_dim)
        throw std::invalid_argument("backbone_forward: feature width " +
                                    std::to_string(tape.value(features).cols()) +
                                    " != input_dim " + std::to_string(config.input_dim));
    LayerTrace trace;
    trace.layers.push_back(features);
    Var h = features;
    for (int l = 0; l < config.num_layers; ++l) {
        Var in = h;
        if (dropout_rng != nullptr && config.dropout > 0.0) {
            const auto& x = tape.value(h);
            std::bernoulli_distribution keep(1.0 - config.dropout);
            Matrix mask(x.rows(), x.cols());
            const double scale = 1.0 / (1.0 - config.dropout);
            for (Eigen::Index i = 0; i < mask.size(); ++i)
                mask.data()[i] = keep(*dropout_rng) ? scale : 0.0;
            in = tape.mul_const(h, std::move(mask));
        }
        auto bias = tape.param(layer_name(prefix, l, "bias"));
        if (config.kind == BackboneKind::GCN) {
            h = gcn_layer(tape, in, ops.gcn, tape.param(layer_name(prefix, l, "weight")), bias);
        } else {
            h = sage_layer(tape, in, ops.mean, tape.param(layer_name(prefix, l, "weight_self")),
                           tape.param(layer_name(prefix, l, "weight_neigh")), bias);
        }
        trace.layers.push_back(h);
    }
    return trace;
}

Var joint_concat(Tape& tape, const LayerTrace& trace)
{
    if (trace.layers.empty())
        throw std::invalid_argument("joint_concat: empty trace");
    if (trace.layers.size() == 1)
        return trace.layers.front();
    return tape.concat_cols(trace.layers);
}

} // namespace credal::gnn
