#include "credal/baselines.hpp"
#include "credal/entropy.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

namespace credal::baselines {
namespace {

using credal::testing::make_graph;
using credal::testing::random_matrix;

std::vector<int> random_permutation(std::mt19937_64& rng, int n)
{
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    return perm;
}

// Row u of `m` goes to row perm[u].
Matrix permute_rows(const Matrix& m, const std::vector<int>& perm)
{
    Matrix out(m.rows(), m.cols());
    for (Eigen::Index u = 0; u < m.rows(); ++u)
        out.row(perm[static_cast<std::size_t>(u)]) = m.row(u);
    return out;
}

TEST(Energy, ClosedForms)
{
    EXPECT_NEAR(energy_score(Matrix{{0.0, 0.0}})[0], -std::log(2.0), 1e-15);
    const double direct = -std::log(std::exp(10.0) + 1.0);
    EXPECT_NEAR(energy_score(Matrix{{10.0, 0.0}})[0], direct, 1e-12);
    EXPECT_NEAR(energy_score(Matrix{{10.0, 0.0}})[0], -10.0000454, 1e-7);
    // T scales the logsumexp: -2 * log(2 e^{0}) for (0, 0) at T = 2.
    EXPECT_NEAR(energy_score(Matrix{{0.0, 0.0}}, 2.0)[0], -2.0 * std::log(2.0), 1e-15);
    EXPECT_TRUE(std::isfinite(energy_score(Matrix{{1000.0, -1000.0}})[0]));
    EXPECT_THROW(energy_score(Matrix{{0.0}}, 0.0), std::invalid_argument);
}

TEST(EnergyProperties, TranslationCovariance)
{
    std::mt19937_64 rng(400);
    std::uniform_int_distribution<int> shift(-64, 64);
    for (int trial = 0; trial < 200; ++trial) {
        const Matrix logits = random_matrix(rng, 8, 5, 3.0);
        // Dyadic shifts keep logits + c exact in binary, so equality is exact.
        const double c = shift(rng) / 4.0;
        const Vector a = energy_score(logits);
        const Vector b = energy_score((logits.array() + c).matrix());
        ASSERT_LT((b - (a.array() - c).matrix()).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Msp, NegatedMaxProbability)
{
    const Vector s = msp_score(Matrix{{0.0, 0.0}, {std::log(3.0), 0.0}});
    EXPECT_NEAR(s[0], -0.5, 1e-15);
    EXPECT_NEAR(s[1], -0.75, 1e-15);
}

// One isolated node (GCN operator = 1), identity layer and classifier, so
// logits = ReLU(x).
model::GnnModel toy_vanilla()
{
    model::ModelConfig config;
    config.kind = model::ModelKind::VanillaGNN;
    config.backbone = gnn::BackboneConfig{gnn::BackboneKind::GCN, 1, 2, 2, 0.0};
    config.num_classes = 2;
    autodiff::ParameterSet params{{"backbone.0.weight", Matrix::Identity(2, 2)},
                                  {"backbone.0.bias", Matrix::Zero(1, 2)},
                                  {"classifier.weight", Matrix::Identity(2, 2)},
                                  {"classifier.bias", Matrix::Zero(1, 2)}};
    return model::GnnModel(config, std::move(params));
}

TEST(Odin, HandDerivedPerturbation)
{
    auto data = make_graph(1, {}, {0}, 2);
    data.features = Matrix{{1.0, 0.5}};
    const auto ops = gnn::GraphOperators::build(data);
    const auto net = toy_vanilla();
    // Logits (1, 0.5), argmax 0. d CE / d logits = (p0 - 1, p1) has signs (-, +),
    // so x moves by (+eps, -eps) to (1.01, 0.49).
    const double expected = -1.0 / (1.0 + std::exp(-(1.01 - 0.49)));
    EXPECT_NEAR(odin_score(net, data, ops, 1.0, 0.01)[0], expected, 1e-14);
    // The perturbation can only raise the max softmax here.
    EXPECT_LT(odin_score(net, data, ops, 1.0, 0.01)[0], odin_score(net, data, ops, 1.0, 0.0)[0]);
}

TEST(Odin, ReducesToMspAndUniformLimit)
{
    std::mt19937_64 rng(401);
    graph::CsbmParams cp;
    cp.nodes_per_class = 10;
    cp.num_classes = 3;
    cp.feature_dim = 4;
    cp.seed = 401;
    const auto data = graph::generate_csbm(cp);
    const auto ops = gnn::GraphOperators::build(data);
    model::ModelConfig mc;
    mc.kind = model::ModelKind::VanillaGNN;
    mc.backbone = gnn::BackboneConfig{gnn::BackboneKind::SAGE, 2, 8, 4, 0.0};
    mc.num_classes = 3;
    const auto net = model::GnnModel::initialize(mc, 401);
    const auto pred = model::predict(net, data, ops);
    EXPECT_LT((odin_score(net, data, ops, 1.0, 0.0) - msp_score(pred.logits)).cwiseAbs().maxCoeff(), 1e-15);
    const Vector hot = odin_score(net, data, ops, 1e9, 0.0);
    EXPECT_LT((hot.array() + 1.0 / 3.0).abs().maxCoeff(), 1e-8);
    EXPECT_THROW(odin_score(net, data, ops, 0.0, 0.0), std::invalid_argument);
    EXPECT_THROW(odin_score(net, data, ops, 1.0, -1.0), std::invalid_argument);
}

TEST(Mahalanobis, TwoClassHandExample)
{
    // Class 0 around (0, 0), class 1 around (2, 0); deviations (+-2, 0) and
    // (0, +-1) in each class give pooled covariance diag(16, 4) / 8.
    const Matrix emb{{-2, 0}, {2, 0}, {0, 1}, {0, -1}, {0, 0}, {4, 0}, {2, 1}, {2, -1}, {0.5, 1.0}};
    const IndexList rows{0, 1, 2, 3, 4, 5, 6, 7};
    const IndexList labels{0, 0, 0, 0, 1, 1, 1, 1};
    const auto g = GaussianClassModel::fit(emb, rows, labels, 2);
    EXPECT_LT((g.means - Matrix{{0.0, 0.0}, {2.0, 0.0}}).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_NEAR(g.covariance(0, 0), 2.0 + 1e-6, 1e-15);
    EXPECT_NEAR(g.covariance(1, 1), 0.5 + 1e-6, 1e-15);
    EXPECT_EQ(g.covariance(0, 1), 0.0);
    const Vector s = mahalanobis_score(emb, g);
    // Query (0.5, 1): class 0 gives 0.25/2 + 1/0.5, class 1 gives 2.25/2 + 1/0.5.
    EXPECT_NEAR(s[8], 0.25 / (2.0 + 1e-6) + 1.0 / (0.5 + 1e-6), 1e-12);
    EXPECT_NEAR(s[8], 2.125, 1e-5);
}

TEST(Mahalanobis, IdentityCovarianceAndMeans)
{
    std::mt19937_64 rng(402);
    GaussianClassModel g{random_matrix(rng, 3, 4), Matrix::Identity(4, 4), Matrix::Identity(4, 4)};
    const Matrix q = random_matrix(rng, 20, 4);
    const Vector s = mahalanobis_score(q, g);
    for (Eigen::Index r = 0; r < q.rows(); ++r) {
        double best = 1e300;
        for (int c = 0; c < 3; ++c)
            best = std::min(best, (q.row(r) - g.means.row(c)).squaredNorm());
        EXPECT_NEAR(s[r], best, 1e-12);
    }
    EXPECT_NEAR(mahalanobis_score(g.means, g).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(Mahalanobis, SingularCovarianceThrows)
{
    const Matrix emb = Matrix::Ones(4, 3);
    EXPECT_THROW(GaussianClassModel::fit(emb, IndexList{0, 1, 2, 3}, IndexList{0, 0, 1, 1}, 2, 0.0), NumericError);
    EXPECT_NO_THROW(GaussianClassModel::fit(emb, IndexList{0, 1, 2, 3}, IndexList{0, 0, 1, 1}, 2));
    EXPECT_THROW(GaussianClassModel::fit(emb, IndexList{}, IndexList{}, 2), std::invalid_argument);
}

TEST(Knn, PointsOnALine)
{
    const Matrix train{{0.0}, {1.0}, {3.0}};
    EXPECT_DOUBLE_EQ(knn_score(Matrix{{2.0}}, train, 2)[0], 1.0);
    EXPECT_DOUBLE_EQ(knn_score(Matrix{{0.5}}, train, 2)[0], 0.5);
    EXPECT_DOUBLE_EQ(knn_score(Matrix{{2.0}}, train, 3)[0], 4.0 / 3.0);
    EXPECT_DOUBLE_EQ(knn_score(Matrix{{-1.0}}, train, 1)[0], 1.0);
    EXPECT_EQ(knn_score(Matrix{{3.0}}, train, 1)[0], 0.0);
}

TEST(Knn, Errors)
{
    const Matrix train{{0.0}, {1.0}};
    EXPECT_THROW(knn_score(Matrix{{0.0}}, Matrix(0, 1), 1), std::invalid_argument);
    EXPECT_THROW(knn_score(Matrix{{0.0}}, train, 0), std::invalid_argument);
    EXPECT_THROW(knn_score(Matrix{{0.0}}, train, 3), std::invalid_argument);
    EXPECT_THROW(knn_score(Matrix{{0.0, 1.0}}, train, 1), std::invalid_argument);
}

TEST(KnnProperties, NonNegativeZeroOnlyOnTrainingPointsAndPermutationInvariant)
{
    std::mt19937_64 rng(403);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix train = random_matrix(rng, 15, 3);
        Matrix queries = random_matrix(rng, 10, 3);
        queries.row(4) = train.row(7);
        const int k = 1 + static_cast<int>(rng() % 15);
        const Vector s = knn_score(queries, train, k);
        ASSERT_GE(s.minCoeff(), 0.0);
        const Vector s1 = knn_score(queries, train, 1);
        for (Eigen::Index q = 0; q < 10; ++q)
            ASSERT_EQ(s1[q] == 0.0, q == 4);
        const auto perm = random_permutation(rng, 10);
        const Vector sp = knn_score(permute_rows(queries, perm), train, k);
        const Vector st = knn_score(queries, permute_rows(train, random_permutation(rng, 15)), k);
        for (Eigen::Index q = 0; q < 10; ++q) {
            ASSERT_NEAR(sp[perm[static_cast<std::size_t>(q)]], s[q], 1e-14);
            ASSERT_NEAR(st[q], s[q], 1e-14);
        }
    }
}

struct VanillaFixture : public ::testing::Test {
    graph::GraphDataset data;
    gnn::GraphOperators ops;
    std::optional<model::GnnModel> net;
    IndexList train_rows;

    void SetUp() override
    {
        graph::CsbmParams cp;
        cp.nodes_per_class = 15;
        cp.num_classes = 3;
        cp.feature_dim = 5;
        cp.p_in = 0.2;
        cp.seed = 404;
        data = graph::generate_csbm(cp);
        ops = gnn::GraphOperators::build(data);
        model::ModelConfig mc;
        mc.kind = model::ModelKind::VanillaGNN;
        mc.backbone = gnn::BackboneConfig{gnn::BackboneKind::GCN, 2, 6, 5, 0.0};
        mc.num_classes = 2;
        net.emplace(model::GnnModel::initialize(mc, 404));
        for (int v = 0; v < data.num_nodes(); v += 3)
            train_rows.push_back(v);
    }

    Matrix rows_of(const Matrix& m) const
    {
        Matrix out(static_cast<Eigen::Index>(train_rows.size()), m.cols());
        for (std::size_t i = 0; i < train_rows.size(); ++i)
            out.row(static_cast<Eigen::Index>(i)) = m.row(train_rows[i]);
        return out;
    }
};

TEST_F(VanillaFixture, KnnljUsesTheJointSpace)
{
    const auto pred = model::predict(*net, data, ops);
    const Vector lj = knnlj_score(*net, data, ops, train_rows, 5);
    EXPECT_EQ(lj, knn_score(pred.joint_embedding, rows_of(pred.joint_embedding), 5));
    EXPECT_EQ(lj, knnlj_score(*net, data, ops, train_rows, 5));
    const Vector final_only = knn_score(pred.final_embedding, rows_of(pred.final_embedding), 5);
    EXPECT_GT((lj - final_only).cwiseAbs().maxCoeff(), 1e-6);
}

TEST_F(VanillaFixture, JointSpaceOfAnInputOnlyTraceIsTheRawFeatures)
{
    gnn::LayerTrace trace;
    autodiff::Tape tape;
    trace.layers.push_back(tape.constant(data.features));
    const Matrix joint = tape.value(gnn::joint_concat(tape, trace));
    EXPECT_EQ(knn_score(joint, rows_of(joint), 3), knn_score(data.features, rows_of(data.features), 3));
}

TEST(GnnSafe, PathGraphOneRound)
{
    const auto data = make_graph(3, {{0, 1}, {1, 2}});
    const auto op = graph::row_normalize(data);
    const Vector e = gnnsafe_score(Vector{{1.0, 0.0, 0.0}}, op, 0.5, 1);
    EXPECT_DOUBLE_EQ(e[0], 0.5);
    EXPECT_DOUBLE_EQ(e[1], 0.25);
    EXPECT_DOUBLE_EQ(e[2], 0.0);
    const Vector e2 = gnnsafe_score(Vector{{1.0, 0.0, 0.0}}, op, 0.5, 2);
    // Second round from (0.5, 0.25, 0): neighbour means (0.25, 0.25, 0.25).
    EXPECT_DOUBLE_EQ(e2[0], 0.375);
    EXPECT_DOUBLE_EQ(e2[1], 0.25);
    EXPECT_DOUBLE_EQ(e2[2], 0.125);
}

TEST(GnnSafe, IdentityCasesAndMixing)
{
    std::mt19937_64 rng(405);
    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < 6; ++u)
        for (int v = u + 1; v < 6; ++v)
            edges.emplace_back(u, v);
    const auto complete = make_graph(6, edges);
    const auto op = graph::row_normalize(complete);
    const Vector e = random_matrix(rng, 6, 1);
    EXPECT_EQ(gnnsafe_score(e, op, 1.0, 7), e);
    EXPECT_EQ(gnnsafe_score(e, op, 0.3, 0), e);
    const Vector mixed = gnnsafe_score(e, op, 0.5, 80);
    EXPECT_LT((mixed.array() - e.mean()).abs().maxCoeff(), 1e-12);
    EXPECT_THROW(gnnsafe_score(e, op, 1.5, 1), std::invalid_argument);
    EXPECT_THROW(gnnsafe_score(e, op, 0.5, -1), std::invalid_argument);
    EXPECT_THROW(gnnsafe_score(Vector::Zero(3), op, 0.5, 1), std::invalid_argument);
}

TEST(GnnSafe, PermutationEquivariance)
{
    std::mt19937_64 rng(406);
    graph::CsbmParams cp;
    cp.nodes_per_class = 12;
    cp.num_classes = 3;
    cp.p_in = 0.25;
    cp.seed = 406;
    const auto data = graph::generate_csbm(cp);
    const auto perm = random_permutation(rng, data.num_nodes());
    const auto permuted = graph::permute_nodes(data, perm);
    const Vector e = random_matrix(rng, data.num_nodes(), 1);
    const Vector pe = permute_rows(e, perm);
    const Vector a = gnnsafe_score(e, graph::row_normalize(data), 0.5, 3);
    const Vector b = gnnsafe_score(pe, graph::row_normalize(permuted), 0.5, 3);
    EXPECT_LT((permute_rows(a, perm) - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RowwiseScorers, PermutationEquivariance)
{
    std::mt19937_64 rng(407);
    const Matrix logits = random_matrix(rng, 25, 4, 2.0);
    const auto perm = random_permutation(rng, 25);
    const Matrix pl = permute_rows(logits, perm);
    EXPECT_EQ(permute_rows(energy_score(logits), perm), Matrix(energy_score(pl)));
    EXPECT_EQ(permute_rows(msp_score(logits), perm), Matrix(msp_score(pl)));
    GaussianClassModel g{random_matrix(rng, 2, 4), Matrix::Identity(4, 4), Matrix::Identity(4, 4)};
    EXPECT_EQ(permute_rows(mahalanobis_score(logits, g), perm), Matrix(mahalanobis_score(pl, g)));
}

TEST(Ensembles, ClosedFormCases)
{
    const std::vector<Matrix> opposite{Matrix{{1.0, 0.0}}, Matrix{{0.0, 1.0}}};
    const auto classical = classical_ensemble(opposite);
    EXPECT_DOUBLE_EQ(classical.eu[0], 1.0);
    EXPECT_DOUBLE_EQ(classical.au[0], 0.0);
    EXPECT_EQ(classical.mean_probs, (Matrix{{0.5, 0.5}}));
    const auto credal = credal_ensemble(opposite);
    EXPECT_NEAR(credal.eu[0], 1.0, 1e-8);
    EXPECT_EQ(credal.au[0], 0.0);

    const Matrix p{{0.6, 0.3, 0.1}};
    const auto single = credal_ensemble(std::vector<Matrix>{p});
    EXPECT_NEAR(single.au[0], entropy::shannon_bits(p.row(0).transpose()), 1e-12);
    EXPECT_NEAR(single.eu[0], 0.0, 1e-12);
}

TEST(EnsembleProperties, EpistemicIsNonNegativeAndZeroForClones)
{
    std::mt19937_64 rng(408);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<Matrix> members;
        for (int m = 0; m < 5; ++m)
            members.push_back(model::softmax_rows(random_matrix(rng, 12, 3, 2.0)));
        const auto classical = classical_ensemble(members);
        const auto credal = credal_ensemble(members);
        ASSERT_GE(classical.eu.minCoeff(), -1e-12);
        ASSERT_GE(credal.eu.minCoeff(), -1e-12);
        // The hull's TU is at least H(mean), and its AU at most the mean member entropy.
        ASSERT_TRUE(((credal.eu - classical.eu).array() >= -1e-9).all());
        const std::vector<Matrix> clones(4, members.front());
        ASSERT_LE(classical_ensemble(clones).eu.cwiseAbs().maxCoeff(), 1e-12);
        ASSERT_LE(credal_ensemble(clones).eu.cwiseAbs().maxCoeff(), 1e-9);
    }
    const std::vector<Matrix> mismatched{Matrix::Constant(2, 3, 1.0 / 3.0), Matrix::Constant(2, 2, 0.5)};
    EXPECT_THROW(classical_ensemble(mismatched), std::invalid_argument);
}

TEST(Ensembles, MemberSeedsAreDistinctAndStable)
{
    std::set<std::uint64_t> seen;
    for (int m = 0; m < 15; ++m)
        seen.insert(member_seed(7, m));
    EXPECT_EQ(seen.size(), 15u);
    EXPECT_EQ(member_seed(7, 3), member_seed(7, 3));
    EXPECT_NE(member_seed(7, 0), member_seed(8, 0));
}

TEST(Ensembles, TrainedMembersDifferOnlyBySeed)
{
    graph::CsbmParams cp;
    cp.nodes_per_class = 12;
    cp.num_classes = 3;
    cp.feature_dim = 4;
    cp.seed = 409;
    const auto data = graph::generate_csbm(cp);
    const auto partition = graph::ClassPartition::leave_out(3, {0});
    const auto split = graph::leave_out_class_split(data, partition, 0.6, 0.2, 409);
    training::TrainConfig t;
    t.max_epochs = 5;
    t.backbone = gnn::BackboneConfig{gnn::BackboneKind::GCN, 2, 8, 0, 0.0};
    t.model_kind = model::ModelKind::CredalLJ; // overridden to vanilla
    const auto members = train_ensemble(data, split, partition, t, 3);
    ASSERT_EQ(members.size(), 3u);
    for (const auto& m : members)
        EXPECT_EQ(m.config().kind, model::ModelKind::VanillaGNN);
    EXPECT_NE(members[0].params()[0].value, members[1].params()[0].value);
    EXPECT_THROW(train_ensemble(data, split, partition, t, 0), ConfigError);
}

TEST(ScoreCsv, LabelsSplitAndGroundTruth)
{
    auto data = make_graph(4, {{0, 1}}, {0, 1, 2, 1});
    const auto partition = graph::ClassPartition::leave_out(3, {2});
    graph::SplitMasks split{{true, false, false, false}, {false, true, false, false}, {false, false, true, false}};
    const auto nodes = label_scores(Vector{{0.5, -1.0, 2.0, 0.25}}, data, partition, split);
    std::ostringstream out;
    write_score_csv(out, nodes);
    EXPECT_EQ(out.str(), "node_id,score,is_ood,split\n0,0.5,0,train\n1,-1,0,val\n2,2,1,test\n3,0.25,0,none\n");
    EXPECT_THROW(label_scores(Vector::Zero(3), data, partition, split), std::invalid_argument);
}

} // namespace
} // namespace credal::baselines
