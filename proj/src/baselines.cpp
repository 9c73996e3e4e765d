#include "credal/baselines.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace credal::baselines {

Vector energy_score(const Matrix& logits, double temperature)
{
    if (!(temperature > 0.0))
        throw std::invalid_argument("energy_score: temperature must be positive");
    Vector out(logits.rows());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const RowVector z = logits.row(r) / temperature;
        const double m = z.maxCoeff();
        out[r] = -temperature * (m + std::log((z.array() - m).exp().sum()));
    }
    return out;
}

Vector msp_score(const Matrix& logits, double temperature)
{
    return -model::softmax_rows(logits, temperature).rowwise().maxCoeff();
}

Vector odin_score(const model::GnnModel& vanilla, const graph::GraphDataset& data,
                  const gnn::GraphOperators& ops, double temperature, double epsilon)
{
    if (vanilla.config().kind != model::ModelKind::VanillaGNN)
        throw std::invalid_argument("odin_score: requires a vanilla model");
    if (!(temperature > 0.0) || !(epsilon >= 0.0))
        throw std::invalid_argument("odin_score: need T > 0 and epsilon >= 0");

    Matrix features = data.features;
    if (epsilon > 0.0) {
        autodiff::Tape tape(&vanilla.params());
        auto x = tape.input(data.features);
        auto out = vanilla.forward(tape, x, ops);
        const Matrix& logits = tape.value(out.logits);
        IndexList rows(static_cast<std::size_t>(logits.rows()));
        IndexList labels(rows.size());
        for (Eigen::Index r = 0; r < logits.rows(); ++r) {
            rows[static_cast<std::size_t>(r)] = static_cast<int>(r);
            Eigen::Index arg = 0;
            logits.row(r).maxCoeff(&arg);
            labels[static_cast<std::size_t>(r)] = static_cast<int>(arg);
        }
        auto loss = tape.softmax_cross_entropy(tape.scale(out.logits, 1.0 / temperature), rows,
                                               labels, 1.0);
        const auto grads = tape.backward(loss);
        const Matrix gx = grads.wrt(tape, x);
        features -= epsilon * gx.unaryExpr([](double g) { return double((g > 0.0) - (g < 0.0)); });
    }

    autodiff::Tape tape(&vanilla.params());
    auto out = vanilla.forward(tape, tape.constant(std::move(features)), ops);
    return msp_score(tape.value(out.logits), temperature);
}

GaussianClassModel GaussianClassModel::fit(const Matrix& embeddings, std::span<const int> rows,
                                           std::span<const int> labels, int num_classes,
                                           double ridge)
{
    if (rows.empty() || rows.size() != labels.size())
        throw std::invalid_argument("GaussianClassModel::fit: empty or mismatched training rows");
    const auto d = embeddings.cols();
    GaussianClassModel m;
    m.means = Matrix::Zero(num_classes, d);
    Vector counts = Vector::Zero(num_classes);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        m.means.row(labels[i]) += embeddings.row(rows[i]);
        counts[labels[i]] += 1.0;
    }
    for (int c = 0; c < num_classes; ++c)
        if (counts[c] > 0.0)
            m.means.row(c) /= counts[c];

    m.covariance = Matrix::Zero(d, d);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const RowVector diff = embeddings.row(rows[i]) - m.means.row(labels[i]);
        m.covariance.noalias() += diff.transpose() * diff;
    }
    m.covariance /= static_cast<double>(rows.size());
    m.covariance.diagonal().array() += ridge;

    Eigen::LLT<Matrix> llt(m.covariance);
    if (llt.info() != Eigen::Success)
        throw NumericError("mahalanobis: covariance is singular despite regularization");
    m.precision = llt.solve(Matrix::Identity(d, d));
    return m;
}

Vector mahalanobis_score(const Matrix& embeddings, const GaussianClassModel& model)
{
    Vector out(embeddings.rows());
    for (Eigen::Index r = 0; r < embeddings.rows(); ++r) {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < model.means.rows(); ++c) {
            const RowVector diff = embeddings.row(r) - model.means.row(c);
            best = std::min(best, (diff * model.precision * diff.transpose())(0, 0));
        }
        out[r] = best;
    }
    return out;
}

Vector knn_score(const Matrix& queries, const Matrix& reference, int k)
{
    if (reference.rows() == 0)
        throw std::invalid_argument("knn_score: empty training set");
    if (k < 1 || k > reference.rows())
        throw std::invalid_argument("knn_score: k must lie in [1, #train]");
    if (queries.cols() != reference.cols())
        throw std::invalid_argument("knn_score: dimension mismatch");
    Vector out(queries.rows());
    std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(reference.rows()));
    for (Eigen::Index q = 0; q < queries.rows(); ++q) {
        for (Eigen::Index t = 0; t < reference.rows(); ++t)
            dist[static_cast<std::size_t>(t)] = {(queries.row(q) - reference.row(t)).norm(), t};
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        double total = 0.0;
        for (int i = 0; i < k; ++i)
            total += dist[static_cast<std::size_t>(i)].first;
        out[q] = total / k;
    }
    return out;
}

Vector knnlj_score(const model::GnnModel& vanilla, const graph::GraphDataset& data,
                   const gnn::GraphOperators& ops, std::span<const int> train_rows, int k)
{
    const auto pred = model::predict(vanilla, data, ops);
    Matrix reference(static_cast<Eigen::Index>(train_rows.size()), pred.joint_embedding.cols());
    for (std::size_t i = 0; i < train_rows.size(); ++i)
        reference.row(static_cast<Eigen::Index>(i)) = pred.joint_embedding.row(train_rows[i]);
    return knn_score(pred.joint_embedding, reference, k);
}

Vector gnnsafe_score(const Vector& energy, const SparseOperator& mean_op, double alpha, int rounds)
{
    if (!(alpha >= 0.0 && alpha <= 1.0) || rounds < 0)
        throw std::invalid_argument("gnnsafe_score: need alpha in [0, 1] and K >= 0");
    if (mean_op.rows() != energy.size())
        throw std::invalid_argument("gnnsafe_score: operator size mismatch");
    Vector e = energy;
    if (alpha == 1.0)
        return e;
    for (int k = 0; k < rounds; ++k)
        e = alpha * e + (1.0 - alpha) * (mean_op * e);
    return e;
}

EnsembleScores classical_ensemble(std::span<const Matrix> member_probs)
{
    const auto s = uncertainty::ensemble_entropy_decompose(member_probs);
    Matrix mean = Matrix::Zero(member_probs.front().rows(), member_probs.front().cols());
    for (const auto& p : member_probs)
        mean += p;
    mean /= static_cast<double>(member_probs.size());
    return {s.au, s.eu, std::move(mean)};
}

EnsembleScores credal_ensemble(std::span<const Matrix> member_probs, uncertainty::HullMode mode)
{
    const auto s = uncertainty::hull_scores(member_probs, mode);
    Matrix mean = Matrix::Zero(member_probs.front().rows(), member_probs.front().cols());
    for (const auto& p : member_probs)
        mean += p;
    mean /= static_cast<double>(member_probs.size());
    return {s.au, s.eu, std::move(mean)};
}

ScoredNodes label_scores(const Vector& scores, const graph::GraphDataset& data,
                         const graph::ClassPartition& partition, const graph::SplitMasks& split)
{
    const auto n = static_cast<std::size_t>(data.num_nodes());
    if (static_cast<std::size_t>(scores.size()) != n)
        throw std::invalid_argument("label_scores: one score per node expected");
    ScoredNodes out;
    out.score.assign(scores.data(), scores.data() + scores.size());
    out.is_ood.resize(n);
    out.split.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
        out.is_ood[v] = partition.is_ood(data.labels[v]);
        out.split[v] = split.train[v] ? "train" : split.val[v] ? "val" : split.test[v] ? "test" : "none";
    }
    return out;
}

void write_score_csv(std::ostream& out, const ScoredNodes& nodes)
{
    out << "node_id,score,is_ood,split\n";
    const auto old = out.precision(17);
    for (std::size_t v = 0; v < nodes.score.size(); ++v)
        out << v << ',' << nodes.score[v] << ',' << (nodes.is_ood[v] ? 1 : 0) << ',' << nodes.split[v] << '\n';
    out.precision(old);
}

std::uint64_t member_seed(std::uint64_t base_seed, int index)
{
    // splitmix64 of (base, index)
    std::uint64_t z = base_seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(index) + 1;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::vector<model::GnnModel> train_ensemble(const graph::GraphDataset& data,
                                            const graph::SplitMasks& split,
                                            const graph::ClassPartition& partition,
                                            training::TrainConfig config, int size)
{
    if (size < 1)
        throw ConfigError("ensemble size must be >= 1");
    config.model_kind = model::ModelKind::VanillaGNN;
    config.early_stop_metric.reset();
    const auto base = config.seed;
    std::vector<model::GnnModel> members;
    for (int m = 0; m < size; ++m) {
        config.seed = member_seed(base, m);
        members.push_back(training::train_model(data, split, partition, config).model);
    }
    return members;
}

} // namespace credal::baselines
