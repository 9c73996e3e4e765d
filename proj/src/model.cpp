#include "credal/model.hpp"

#include <stdexcept>

namespace credal::model {

std::string to_string(ModelKind kind)
{
    switch (kind) {
    case ModelKind::VanillaGNN:
        return "VanillaGNN";
    case ModelKind::CredalFinal:
        return "CredalFinal";
    case ModelKind::CredalLJ:
        return "CredalLJ";
    }
    return "?";
}

ModelKind parse_model_kind(std::string_view text)
{
    if (text == "VanillaGNN")
        return ModelKind::VanillaGNN;
    if (text == "CredalFinal")
        return ModelKind::CredalFinal;
    if (text == "CredalLJ")
        return ModelKind::CredalLJ;
    throw ConfigError("unknown model kind '" + std::string(text) + "'");
}

void ModelConfig::validate() const
{
    backbone.validate();
    if (num_classes < 2)
        throw ConfigError("model needs at least two output classes");
}

bool ModelConfig::operator==(const ModelConfig& o) const
{
    return kind == o.kind && num_classes == o.num_classes && backbone.kind == o.backbone.kind &&
           backbone.num_layers == o.backbone.num_layers &&
           backbone.hidden_dim == o.backbone.hidden_dim &&
           backbone.input_dim == o.backbone.input_dim && backbone.dropout == o.backbone.dropout;
}

GnnModel::GnnModel(ModelConfig config, ParameterSet params)
    : config_(std::move(config)), params_(std::move(params))
{
    config_.validate();
}

GnnModel GnnModel::initialize(const ModelConfig& config, std::uint64_t seed)
{
    config.validate();
    autodiff::Rng rng(seed);
    ParameterSet params;
    gnn::append_backbone_params(config.backbone, rng, params);
    if (config.kind == ModelKind::VanillaGNN) {
        params.push_back({"classifier.weight",
                          autodiff::glorot_init(config.backbone.hidden_dim, config.num_classes, rng)});
        params.push_back({"classifier.bias", Matrix::Zero(1, config.num_classes)});
    } else {
        const int in = config.kind == ModelKind::CredalLJ ? config.backbone.joint_dim()
                                                          : config.backbone.hidden_dim;
        head::append_credal_params(in, config.num_classes, rng, params);
    }
    return GnnModel(config, std::move(params));
}

ForwardResult GnnModel::forward(Tape& tape, Var features, const gnn::GraphOperators& ops,
                                autodiff::Rng* dropout_rng) const
{
    if (tape.parameters() != &params_)
        throw std::invalid_argument("GnnModel::forward: tape is not bound to this model");
    ForwardResult r;
    r.trace = gnn::backbone_forward(tape, features, ops, config_.backbone, "backbone", dropout_rng);
    if (config_.kind == ModelKind::VanillaGNN) {
        r.head_input = r.trace.final_layer();
        r.logits = tape.add_bias(tape.matmul(r.head_input, tape.param("classifier.weight")),
                                 tape.param("classifier.bias"));
        return r;
    }
    r.head_input = config_.kind == ModelKind::CredalLJ ? gnn::joint_concat(tape, r.trace)
                                                       : r.trace.final_layer();
    r.interval = head::credal_layer_forward(tape, r.head_input, tape.param("credal.mid_weight"),
                                            tape.param("credal.mid_bias"),
                                            tape.param("credal.half_weight"),
                                            tape.param("credal.half_bias"));
    r.q_lower = tape.interval_softmax_lower(r.interval.lower, r.interval.upper);
    r.q_upper = tape.interval_softmax_upper(r.interval.lower, r.interval.upper);
    return r;
}

Predictions predict(const GnnModel& model, const graph::GraphDataset& data,
                    const gnn::GraphOperators& ops)
{
    Tape tape(&model.params());
    auto x = tape.constant(data.features);
    auto r = model.forward(tape, x, ops);
    Predictions p;
    p.final_embedding = tape.value(r.trace.final_layer());
    p.joint_embedding = tape.value(gnn::joint_concat(tape, r.trace));
    if (model.config().kind == ModelKind::VanillaGNN) {
        p.logits = tape.value(r.logits);
        p.probs = softmax_rows(p.logits);
    } else {
        p.credal.q_lower = tape.value(r.q_lower);
        p.credal.q_upper = tape.value(r.q_upper);
    }
    return p;
}

Matrix softmax_rows(const Matrix& logits, double temperature)
{
    if (!(temperature > 0.0))
        throw std::invalid_argument("softmax_rows: temperature must be positive");
    Matrix z = logits / temperature;
    z.colwise() -= z.rowwise().maxCoeff();
    z = z.array().exp().matrix();
    z.array().colwise() /= z.rowwise().sum().array();
    return z;
}

} // namespace credal::model
