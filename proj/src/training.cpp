#include "credal/training.hpp"

#include "credal/metrics.hpp"
#include "credal/uncertainty.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace credal::training {

std::string to_string(EarlyStopMetric metric)
{
    return metric == EarlyStopMetric::ValEpistemicAuroc ? "val_epistemic_auroc" : "val_macro_f1";
}

EarlyStopMetric parse_early_stop_metric(std::string_view text)
{
    if (text == "val_epistemic_auroc")
        return EarlyStopMetric::ValEpistemicAuroc;
    if (text == "val_macro_f1")
        return EarlyStopMetric::ValMacroF1;
    throw ConfigError("unknown early_stop_metric '" + std::string(text) + "'");
}

void TrainConfig::validate() const
{
    if (!(lr >= 0.0) || !std::isfinite(lr))
        throw ConfigError("lr must be a finite non-negative number");
    if (!(weight_decay >= 0.0))
        throw ConfigError("weight_decay must be >= 0");
    if (max_epochs < 1)
        throw ConfigError("max_epochs must be >= 1");
    if (patience < 1)
        throw ConfigError("patience must be >= 1");
    if (!(delta > 0.0 && delta <= 1.0))
        throw ConfigError("delta must lie in (0, 1]");
    if (early_stop_metric == EarlyStopMetric::ValEpistemicAuroc && !model::is_credal(model_kind))
        throw ConfigError("val_epistemic_auroc early stopping requires a credal model");
}

EarlyStopMetric TrainConfig::resolved_metric() const
{
    if (early_stop_metric)
        return *early_stop_metric;
    return model::is_credal(model_kind) ? EarlyStopMetric::ValEpistemicAuroc
                                        : EarlyStopMetric::ValMacroF1;
}

void TrainHistory::write_csv(std::ostream& out) const
{
    const auto old = out.precision(17);
    out << "epoch,loss,val_metric,seconds\n";
    for (const auto& e : epochs)
        out << e.epoch << ',' << e.loss << ',' << e.val_metric << ',' << e.seconds << '\n';
    out.precision(old);
}

Vector cross_entropy_rows(const Matrix& q, std::span<const int> rows, std::span<const int> labels)
{
    if (rows.size() != labels.size())
        throw std::invalid_argument("cross_entropy_rows: rows/labels length mismatch");
    Vector out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= q.cols())
            throw std::out_of_range("cross_entropy_rows: label " + std::to_string(labels[i]) +
                                    " out of range");
        out[static_cast<Eigen::Index>(i)] = -std::log(std::clamp(q(rows[i], labels[i]), 1e-12, 1.0));
    }
    return out;
}

IndexList select_hard_set(std::span<const double> lower_ce, double delta)
{
    const auto n = lower_ce.size();
    if (n == 0)
        return {};
    // The small offset keeps products such as 0.7 * 10 from rounding up.
    auto k = static_cast<std::size_t>(std::ceil(delta * static_cast<double>(n) - 1e-9));
    k = std::clamp<std::size_t>(k, 1, n);
    IndexList order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return lower_ce[a] > lower_ce[b]; });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

double dro_loss(const head::CredalPrediction& pred, std::span<const int> rows,
                std::span<const int> labels, double delta)
{
    if (rows.empty())
        throw std::invalid_argument("dro_loss: empty training mask");
    const Vector upper = cross_entropy_rows(pred.q_upper, rows, labels);
    const Vector lower = cross_entropy_rows(pred.q_lower, rows, labels);
    const auto n = static_cast<double>(rows.size());
    const auto hard = select_hard_set({lower.data(), static_cast<std::size_t>(lower.size())}, delta);
    double pessimistic = 0.0;
    for (int i : hard)
        pessimistic += lower[i];
    return upper.sum() / n + pessimistic / (delta * n);
}

Var dro_loss(Tape& tape, Var q_lower, Var q_upper, std::span<const int> rows,
             std::span<const int> labels, double delta, const IndexList* frozen_hard_set)
{
    if (rows.empty())
        throw std::invalid_argument("dro_loss: empty training mask");
    const auto n = static_cast<double>(rows.size());
    IndexList hard;
    if (frozen_hard_set != nullptr) {
        hard = *frozen_hard_set;
    } else {
        const Vector lower = cross_entropy_rows(tape.value(q_lower), rows, labels);
        hard = select_hard_set({lower.data(), static_cast<std::size_t>(lower.size())}, delta);
    }
    IndexList hard_rows, hard_labels;
    for (int i : hard) {
        hard_rows.push_back(rows[i]);
        hard_labels.push_back(labels[i]);
    }
    auto optimistic = tape.weighted_nll(q_upper, rows, labels, 1.0 / n);
    auto pessimistic = tape.weighted_nll(q_lower, hard_rows, hard_labels, 1.0 / (delta * n));
    return tape.add(optimistic, pessimistic);
}

namespace {

struct EvalSets {
    IndexList val_id;
    IndexList val_ood;
    IndexList val_id_labels; // remapped
};

double validation_metric(const model::GnnModel& model, const graph::GraphDataset& data,
                         const gnn::GraphOperators& ops, const EvalSets& sets,
                         EarlyStopMetric metric, int num_id)
{
    const auto pred = model::predict(model, data, ops);
    std::vector<int> classes(static_cast<std::size_t>(num_id));
    std::iota(classes.begin(), classes.end(), 0);

    if (metric == EarlyStopMetric::ValEpistemicAuroc && !sets.val_ood.empty() &&
        !sets.val_id.empty()) {
        auto eu_of = [&](const IndexList& nodes) {
            head::CredalPrediction sub;
            sub.q_lower.resize(static_cast<Eigen::Index>(nodes.size()), pred.credal.num_classes());
            sub.q_upper.resize(sub.q_lower.rows(), sub.q_lower.cols());
            for (std::size_t i = 0; i < nodes.size(); ++i) {
                sub.q_lower.row(static_cast<Eigen::Index>(i)) = pred.credal.q_lower.row(nodes[i]);
                sub.q_upper.row(static_cast<Eigen::Index>(i)) = pred.credal.q_upper.row(nodes[i]);
            }
            const auto s = uncertainty::interval_uncertainty(sub);
            return std::vector<double>(s.eu.data(), s.eu.data() + s.eu.size());
        };
        const auto id = eu_of(sets.val_id);
        const auto ood = eu_of(sets.val_ood);
        return eval::auroc(id, ood);
    }

    if (sets.val_id.empty())
        return 0.0;
    std::vector<int> predicted;
    if (model::is_credal(model.config().kind)) {
        const auto all = head::point_prediction(pred.credal, head::Bound::Upper);
        for (int v : sets.val_id)
            predicted.push_back(all[v]);
    } else {
        for (int v : sets.val_id) {
            Eigen::Index arg = 0;
            pred.logits.row(v).maxCoeff(&arg);
            predicted.push_back(static_cast<int>(arg));
        }
    }
    return eval::macro_f1(predicted, sets.val_id_labels, classes);
}

std::string dump_history(const TrainHistory& h, int last)
{
    std::ostringstream ss;
    const auto from = h.epochs.size() > static_cast<std::size_t>(last) ? h.epochs.size() - last : 0;
    for (auto i = from; i < h.epochs.size(); ++i)
        ss << "\n  epoch " << h.epochs[i].epoch << ": loss=" << h.epochs[i].loss
           << " val=" << h.epochs[i].val_metric;
    return ss.str();
}

} // namespace

TrainResult train_model(const graph::GraphDataset& data, const graph::SplitMasks& split,
                        const graph::ClassPartition& partition, const TrainConfig& config)
{
    config.validate();
    split.check(data, partition);

    const auto remapped = graph::remap_id_labels(data.labels, partition);
    IndexList train_rows, train_labels;
    for (int v : graph::SplitMasks::indices(split.train)) {
        train_rows.push_back(v);
        train_labels.push_back(remapped[v]);
    }
    if (train_rows.empty())
        throw ConfigError("training mask is empty");
    EvalSets sets;
    for (int v : graph::SplitMasks::indices(split.val)) {
        if (remapped[v] >= 0) {
            sets.val_id.push_back(v);
            sets.val_id_labels.push_back(remapped[v]);
        } else {
            sets.val_ood.push_back(v);
        }
    }

    model::ModelConfig mc;
    mc.kind = config.model_kind;
    mc.backbone = config.backbone;
    mc.backbone.input_dim = data.feature_dim();
    mc.num_classes = partition.num_id();
    auto net = model::GnnModel::initialize(mc, config.seed);

    const auto ops = gnn::GraphOperators::build(data);
    autodiff::AdamState adam(net.params(), {config.lr, 0.9, 0.999, 1e-8, config.weight_decay});
    autodiff::Rng dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    const auto metric = config.resolved_metric();
    const double inv_n = 1.0 / static_cast<double>(train_rows.size());

    TrainHistory history;
    auto best_params = net.params();
    double best_metric = -std::numeric_limits<double>::infinity();
    int since_best = 0;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        double loss_value = 0.0;
        double val = 0.0;
        try {
            Tape tape(&net.params());
            auto x = tape.constant(data.features);
            auto out = net.forward(tape, x, ops, &dropout_rng);
            Var loss = model::is_credal(mc.kind)
                           ? dro_loss(tape, out.q_lower, out.q_upper, train_rows, train_labels,
                                      config.delta)
                           : tape.softmax_cross_entropy(out.logits, train_rows, train_labels, inv_n);
            loss_value = tape.scalar(loss);
            auto grads = tape.backward(loss);
            autodiff::adam_step(net.params(), grads.params, adam);
            val = validation_metric(net, data, ops, sets, metric, mc.num_classes);
        } catch (const NumericError& e) {
            throw TrainingError("training aborted at epoch " + std::to_string(epoch) + ": " +
                                e.what() + dump_history(history, 5));
        }
        const double seconds =
            config.record_timing
                ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
                : 0.0;
        history.epochs.push_back({epoch, loss_value, val, seconds});

        // A tie replaces the kept parameters (the later, better-fitted model)
        // but only a strict improvement resets the patience counter.
        if (val >= best_metric) {
            best_params = net.params();
            history.best_epoch = epoch;
        }
        if (val > best_metric) {
            best_metric = val;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }
    net.params() = std::move(best_params);
    return {std::move(net), std::move(history)};
}

} // namespace credal::training
