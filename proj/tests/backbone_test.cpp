#include "credal/backbone.hpp"
#include "credal/model.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

namespace credal::gnn {
namespace {

using autodiff::ParameterSet;
using credal::testing::make_graph;
using credal::testing::random_matrix;

Matrix run_backbone(const ParameterSet& params, const graph::GraphDataset& data,
                    const GraphOperators& ops, const BackboneConfig& config, Rng* dropout = nullptr)
{
    Tape tape(&params);
    const auto trace = backbone_forward(tape, tape.constant(data.features), ops, config, "backbone", dropout);
    return tape.value(trace.final_layer());
}

TEST(Backbone, GcnLayerOnPathMatchesHandComputation)
{
    // Path 0-1-2 with self-loops: degrees 2, 3, 2.
    auto data = make_graph(3, {{0, 1}, {1, 2}});
    data.features = Matrix{{1.0}, {2.0}, {3.0}};
    const ParameterSet params{{"backbone.0.weight", Matrix::Ones(1, 1)}, {"backbone.0.bias", Matrix::Zero(1, 1)}};
    BackboneConfig config{BackboneKind::GCN, 1, 1, 1, 0.0};
    const Matrix out = run_backbone(params, data, GraphOperators::build(data), config);
    const double s6 = std::sqrt(6.0);
    EXPECT_NEAR(out(0, 0), 1.0 / 2.0 + 2.0 / s6, 1e-14);
    EXPECT_NEAR(out(1, 0), 1.0 / s6 + 2.0 / 3.0 + 3.0 / s6, 1e-14);
    EXPECT_NEAR(out(2, 0), 2.0 / s6 + 3.0 / 2.0, 1e-14);
}

TEST(Backbone, GcnWithIdentityOperatorIsAnMlp)
{
    std::mt19937_64 rng(1);
    auto data = make_graph(5, {{0, 1}, {1, 2}, {3, 4}}, {}, 3);
    data.features = random_matrix(rng, 5, 3);
    BackboneConfig config{BackboneKind::GCN, 2, 4, 3, 0.0};
    ParameterSet params;
    append_backbone_params(config, rng, params);
    params[1].value = random_matrix(rng, 1, 4);
    GraphOperators ops = GraphOperators::build(data);
    ops.gcn = SparseOperator(5, 5);
    ops.gcn.setIdentity();

    const Matrix out = run_backbone(params, data, ops, config);
    Matrix h = data.features;
    for (int l = 0; l < 2; ++l) {
        const Matrix& w = params[autodiff::find_parameter(params, "backbone." + std::to_string(l) + ".weight")].value;
        const Matrix& b = params[autodiff::find_parameter(params, "backbone." + std::to_string(l) + ".bias")].value;
        h = ((h * w).rowwise() + b.row(0)).cwiseMax(0.0);
    }
    EXPECT_LT((out - h).cwiseAbs().maxCoeff(), 1e-14);
}

ParameterSet sage_params(double self, double neigh, double bias)
{
    return {{"backbone.0.weight_self", Matrix::Constant(1, 1, self)},
            {"backbone.0.weight_neigh", Matrix::Constant(1, 1, neigh)},
            {"backbone.0.bias", Matrix::Constant(1, 1, bias)}};
}

TEST(Backbone, SageStarAveragesLeaves)
{
    // Center 0, leaves 1..3, node 4 isolated.
    auto data = make_graph(5, {{0, 1}, {0, 2}, {0, 3}});
    data.features = Matrix{{10.0}, {1.0}, {2.0}, {6.0}, {5.0}};
    const BackboneConfig config{BackboneKind::SAGE, 1, 1, 1, 0.0};
    const Matrix out = run_backbone(sage_params(0.0, 1.0, 0.0), data, GraphOperators::build(data), config);
    EXPECT_DOUBLE_EQ(out(0, 0), 3.0);
    for (int leaf = 1; leaf <= 3; ++leaf)
        EXPECT_DOUBLE_EQ(out(leaf, 0), 10.0);
    // Isolated node: neighbor mean is defined as zero.
    EXPECT_DOUBLE_EQ(out(4, 0), 0.0);
}

TEST(Backbone, SageIsolatedNodeKeepsSelfTerm)
{
    auto data = make_graph(2, {});
    data.features = Matrix{{2.0}, {-1.0}};
    const BackboneConfig config{BackboneKind::SAGE, 1, 1, 1, 0.0};
    const Matrix out = run_backbone(sage_params(1.5, 7.0, 0.25), data, GraphOperators::build(data), config);
    EXPECT_DOUBLE_EQ(out(0, 0), 3.25);
    EXPECT_DOUBLE_EQ(out(1, 0), 0.0); // ReLU(-1.25)
}

TEST(Backbone, SageWithZeroNeighborWeightIgnoresGraph)
{
    std::mt19937_64 rng(2);
    auto dense = make_graph(6, {{0, 1}, {0, 2}, {1, 3}, {2, 4}, {4, 5}, {3, 5}}, {}, 3);
    dense.features = random_matrix(rng, 6, 3);
    auto empty = make_graph(6, {}, {}, 3);
    empty.features = dense.features;
    BackboneConfig config{BackboneKind::SAGE, 2, 5, 3, 0.0};
    ParameterSet params;
    append_backbone_params(config, rng, params);
    for (auto& p : params)
        if (p.name.ends_with("weight_neigh"))
            p.value.setZero();
    const Matrix a = run_backbone(params, dense, GraphOperators::build(dense), config);
    const Matrix b = run_backbone(params, empty, GraphOperators::build(empty), config);
    EXPECT_EQ(a, b);
}

class BackboneShapes : public ::testing::TestWithParam<BackboneKind> {};

TEST_P(BackboneShapes, TraceAndJointConcat)
{
    std::mt19937_64 rng(3);
    auto data = make_graph(7, {{0, 1}, {1, 2}, {2, 3}, {4, 5}}, {}, 8);
    data.features = random_matrix(rng, 7, 8);
    const BackboneConfig config{GetParam(), 2, 6, 8, 0.0};
    EXPECT_EQ(config.joint_dim(), 20);
    ParameterSet params;
    append_backbone_params(config, rng, params);
    Tape tape(&params);
    const auto trace = backbone_forward(tape, tape.constant(data.features), GraphOperators::build(data), config);
    ASSERT_EQ(trace.layers.size(), 3u);
    const Matrix joint = tape.value(joint_concat(tape, trace));
    EXPECT_EQ(joint.rows(), 7);
    EXPECT_EQ(joint.cols(), 20);
    EXPECT_EQ(Matrix(joint.leftCols(8)), data.features);
    EXPECT_EQ(Matrix(joint.rightCols(6)), tape.value(trace.final_layer()));
    EXPECT_EQ(trace.values(tape).front(), data.features);
    // Hidden layers are post-ReLU.
    for (std::size_t l = 1; l < trace.layers.size(); ++l)
        EXPECT_GE(tape.value(trace.layers[l]).minCoeff(), 0.0);
}

TEST_P(BackboneShapes, PermutationEquivariance)
{
    std::mt19937_64 rng(4);
    graph::CsbmParams csbm;
    csbm.nodes_per_class = 15;
    csbm.num_classes = 3;
    csbm.p_in = 0.2;
    csbm.p_out = 0.05;
    csbm.feature_dim = 4;
    csbm.seed = 11;
    const auto data = graph::generate_csbm(csbm);
    const int n = data.num_nodes();
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto permuted = graph::permute_nodes(data, perm);

    const BackboneConfig config{GetParam(), 3, 5, 4, 0.0};
    ParameterSet params;
    append_backbone_params(config, rng, params);
    const Matrix a = run_backbone(params, data, GraphOperators::build(data), config);
    const Matrix b = run_backbone(params, permuted, GraphOperators::build(permuted), config);
    double worst = 0.0;
    for (int u = 0; u < n; ++u)
        worst = std::max(worst, (a.row(u) - b.row(perm[static_cast<std::size_t>(u)])).cwiseAbs().maxCoeff());
    EXPECT_LT(worst, 1e-12);
}

TEST_P(BackboneShapes, DeterministicForwardAndDropoutOnlyWithRng)
{
    std::mt19937_64 rng(5);
    auto data = make_graph(6, {{0, 1}, {1, 2}, {3, 4}}, {}, 3);
    data.features = random_matrix(rng, 6, 3);
    const BackboneConfig config{GetParam(), 2, 8, 3, 0.5};
    ParameterSet params;
    append_backbone_params(config, rng, params);
    const auto ops = GraphOperators::build(data);
    const Matrix eval1 = run_backbone(params, data, ops, config);
    const Matrix eval2 = run_backbone(params, data, ops, config);
    EXPECT_EQ(eval1, eval2);

    Rng d1(9), d2(9);
    const Matrix train1 = run_backbone(params, data, ops, config, &d1);
    const Matrix train2 = run_backbone(params, data, ops, config, &d2);
    EXPECT_EQ(train1, train2);
    EXPECT_NE(train1, eval1);
}

INSTANTIATE_TEST_SUITE_P(Kinds, BackboneShapes, ::testing::Values(BackboneKind::GCN, BackboneKind::SAGE),
                         [](const auto& info) { return to_string(info.param); });

TEST(Backbone, ConfigValidation)
{
    EXPECT_THROW((BackboneConfig{BackboneKind::GCN, 0, 4, 3, 0.0}.validate()), ConfigError);
    EXPECT_THROW((BackboneConfig{BackboneKind::GCN, 1, 4, 3, 1.0}.validate()), ConfigError);
    EXPECT_THROW(parse_backbone_kind("gat"), ConfigError);
    EXPECT_EQ(parse_backbone_kind("sage"), BackboneKind::SAGE);
}

TEST(Backbone, FeatureWidthMismatchThrows)
{
    auto data = make_graph(2, {{0, 1}}, {}, 3);
    const BackboneConfig config{BackboneKind::GCN, 1, 2, 4, 0.0};
    std::mt19937_64 rng(6);
    ParameterSet params;
    append_backbone_params(config, rng, params);
    EXPECT_THROW(run_backbone(params, data, GraphOperators::build(data), config), std::invalid_argument);
}

TEST(Model, InitializationIsSeedDeterministic)
{
    model::ModelConfig config;
    config.kind = model::ModelKind::CredalLJ;
    config.backbone = BackboneConfig{BackboneKind::GCN, 2, 6, 8, 0.0};
    config.num_classes = 3;
    const auto a = model::GnnModel::initialize(config, 17);
    const auto b = model::GnnModel::initialize(config, 17);
    const auto c = model::GnnModel::initialize(config, 18);
    ASSERT_EQ(a.params().size(), b.params().size());
    bool any_diff = false;
    for (std::size_t i = 0; i < a.params().size(); ++i) {
        EXPECT_EQ(a.params()[i].value, b.params()[i].value);
        any_diff |= a.params()[i].value != c.params()[i].value;
    }
    EXPECT_TRUE(any_diff);
}

} // namespace
} // namespace credal::gnn
