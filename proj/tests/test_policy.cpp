#include <cmath>
#include <map>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "support.hpp"

using namespace krds;

namespace {

double chi_square_p(const std::vector<double>& observed, double expected) {
    double stat = 0.0;
    for (double o : observed) stat += (o - expected) * (o - expected) / expected;
    boost::math::chi_squared dist(static_cast<double>(observed.size() - 1));
    return boost::math::cdf(boost::math::complement(dist, stat));
}

} // namespace

TEST(Sigmoid, StableAtExtremes) {
    EXPECT_EQ(sigmoid(0.0), 0.5);
    EXPECT_EQ(sigmoid(1000.0), 1.0);
    EXPECT_EQ(sigmoid(-1000.0), 0.0);
    EXPECT_NEAR(sigmoid(std::log(3.0)), 0.75, 1e-15);
}

TEST(BasicBranch, ZeroParamsGiveZero) {
    const auto p = QNetworkParams::zeros(5, 4, 3);
    EXPECT_TRUE(forward_basic(Vector::Ones(5), p).isZero(0.0));
}

TEST(BasicBranch, HandArithmetic) {
    auto p = QNetworkParams::zeros(1, 1, 1);
    p.w1(0, 0) = 1;
    p.w2(0, 0) = 2;
    p.b2(0) = 1;
    EXPECT_EQ(forward_basic(Vector::Constant(1, 3.0), p)(0), 7.0);
}

TEST(BasicBranch, ReluGate) {
    auto p = QNetworkParams::zeros(1, 1, 1);
    p.w1(0, 0) = -1;
    p.w2(0, 0) = 2;
    p.b2(0) = 0.5;
    EXPECT_EQ(forward_basic(Vector::Constant(1, 1.0), p)(0), 0.5);
}

TEST(RelationBranch, IdentityAndBasis) {
    Matrix r(3, 3);
    r << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9;
    const Vector a = Vector::LinSpaced(3, 1, 3);
    EXPECT_EQ(forward_relation(a, Matrix::Identity(3, 3)), a);
    EXPECT_EQ(forward_relation(Vector::Unit(3, 1), r), Vector(r.row(1).transpose()));
}

TEST(RelationBranch, HandMultiply) {
    Matrix r(2, 2);
    r << 0.5, 0.5, 0.25, 0.75;
    Vector a(2);
    a << 1, 2;
    const Vector f = forward_relation(a, r);
    EXPECT_DOUBLE_EQ(f(0), 1.0);
    EXPECT_DOUBLE_EQ(f(1), 2.0);
}

TEST(KnowledgeBranch, SingleNodeChain) {
    KnowledgeBranch kb{2, Matrix::Ones(1, 1), Matrix::Ones(1, 1), Vector::Zero(1)};
    const std::vector<double> s{1.0};
    Vector expect(4);
    expect << 0, 0, 1, 1;
    EXPECT_EQ(forward_knowledge(s, kb), expect);
}

TEST(KnowledgeBranch, ZeroPriorsNoObservations) {
    KnowledgeBranch kb{2, Matrix::Constant(2, 3, 0.3), Matrix::Constant(3, 2, 0.4), Vector::Zero(3)};
    EXPECT_TRUE(forward_knowledge(std::vector<double>{0, 0, 0}, kb).isZero(0.0));
}

TEST(KnowledgeBranch, MatchesLoopOracle) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        auto net = fixtures::random_network(4, 2, 2, 3, 4, Variant::full, rng);
        const Vector x = fixtures::random_features(4, 4, rng);
        const std::vector<double> status(x.data(), x.data() + 4);
        const Vector got = forward_knowledge(status, net.knowledge());
        const Vector want = fixtures::knowledge_loop(status, net.knowledge());
        EXPECT_LE((got - want).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Combine, ZeroInputsGiveOne) {
    const Vector z = Vector::Zero(4);
    EXPECT_EQ(combine(z, z, z), Vector::Ones(4));
}

TEST(Combine, Saturation) {
    EXPECT_NEAR(combine(Vector::Constant(1, 1e6), Vector::Constant(1, -1e6), Vector::Zero(1))(0), 1.0, 1e-12);
}

TEST(Combine, HandValue) {
    EXPECT_NEAR(combine(Vector::Zero(1), Vector::Constant(1, std::log(3.0)), Vector::Constant(1, 0.2))(0), 1.45,
                1e-15);
}

TEST(Combine, BoundedAboveKnowledge) {
    std::mt19937_64 rng(5);
    auto net = fixtures::random_network(10, 8, 2, 4, 6, Variant::full, rng);
    for (int i = 0; i < 1000; ++i) {
        const auto out = net.forward(fixtures::random_features(10, 6, rng) * 3.0);
        const Vector d = out.a_t - out.a_k;
        EXPECT_GT(d.minCoeff(), 0.0);
        EXPECT_LT(d.maxCoeff(), 2.0);
    }
}

TEST(Variants, QValuesFollowVariant) {
    std::mt19937_64 rng(8);
    auto net = fixtures::random_network(10, 8, 2, 4, 6, Variant::basic, rng);
    const Vector x = fixtures::random_features(10, 6, rng);
    const auto out = net.forward(x);
    EXPECT_EQ(net.q_values(x), out.a_r);
    net.flags().variant = Variant::relation;
    EXPECT_EQ(net.q_values(x), Vector(sigmoid(out.a_r) + sigmoid(out.a_f)));
    net.flags().variant = Variant::knowledge;
    EXPECT_EQ(net.q_values(x), Vector(sigmoid(out.a_r) + out.a_k));
    net.flags().variant = Variant::full;
    EXPECT_EQ(net.q_values(x), combine(out.a_r, out.a_f, out.a_k));
}

TEST(Selection, GreedyTieGoesToLowerIndex) {
    Vector q(4);
    q << 1, 3, 3, 0;
    EXPECT_EQ(masked_argmax(q, {true, true, true, true}), 1u);
    EXPECT_EQ(masked_argmax(q, {true, false, true, true}), 2u);
    std::mt19937_64 rng(1);
    for (int i = 0; i < 50; ++i) EXPECT_EQ(select_action(q, {true, true, true, true}, 0.0, rng), 1u);
}

TEST(Selection, NothingAllowedThrows) {
    EXPECT_THROW(masked_argmax(Vector::Zero(2), {false, false}), Error);
}

TEST(Selection, FullExplorationIsUniformOverAllowed) {
    std::mt19937_64 rng(99);
    const std::vector<bool> allowed{true, false, true, true, false, true, true};
    std::map<std::size_t, double> counts;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) ++counts[select_action(Vector::Zero(7), allowed, 1.0, rng)];
    EXPECT_EQ(counts.count(1), 0u);
    EXPECT_EQ(counts.count(4), 0u);
    std::vector<double> observed;
    for (auto [_, c] : counts) observed.push_back(c);
    ASSERT_EQ(observed.size(), 5u);
    EXPECT_GT(chi_square_p(observed, draws / 5.0), 0.001);
}

TEST(Gradients, FiniteDifferenceAllVariants) {
    std::mt19937_64 rng(2024);
    for (auto v : {Variant::basic, Variant::relation, Variant::knowledge, Variant::full}) {
        auto net = fixtures::random_network(10, 8, 2, 4, 6, v, rng);
        std::vector<TrainingSample> batch;
        std::uniform_int_distribution<std::size_t> a(0, 11);
        std::normal_distribution<double> t(1.0, 1.0);
        for (int i = 0; i < 6; ++i) batch.push_back({fixtures::random_features(10, 6, rng), a(rng), t(rng)});
        EXPECT_LT(fixtures::max_gradient_error(net, batch), 1e-4) << to_string(v);
    }
}

TEST(Gradients, SmallStepDescends) {
    std::mt19937_64 rng(17);
    auto net = fixtures::random_network(10, 8, 2, 4, 6, Variant::full, rng);
    std::vector<TrainingSample> batch;
    for (int i = 0; i < 8; ++i) batch.push_back({fixtures::random_features(10, 6, rng), std::size_t(i), 0.3});
    const double before = net.loss(batch);
    const double reported = net.backward_and_step(batch, 1e-3);
    EXPECT_DOUBLE_EQ(reported, before);
    EXPECT_LT(net.loss(batch), before);
}

TEST(Gradients, ExactFitIsFixedPoint) {
    std::mt19937_64 rng(23);
    auto net = fixtures::random_network(10, 8, 2, 4, 6, Variant::full, rng);
    std::vector<TrainingSample> batch;
    for (int i = 0; i < 5; ++i) {
        const Vector x = fixtures::random_features(10, 6, rng);
        batch.push_back({x, std::size_t(i * 2), net.q_values(x)(i * 2)});
    }
    const KrDqn before = net;
    net.backward_and_step(batch, 0.5);
    EXPECT_TRUE(net == before);
}

TEST(Gradients, BasicVariantLeavesRelationAlone) {
    std::mt19937_64 rng(29);
    auto net = fixtures::random_network(10, 8, 2, 4, 6, Variant::basic, rng);
    const Matrix r = net.relation();
    std::vector<TrainingSample> batch{{fixtures::random_features(10, 6, rng), 3, 5.0}};
    net.backward_and_step(batch, 0.1);
    EXPECT_EQ(net.relation(), r);
}

TEST(Gradients, NonFiniteTargetIsReported) {
    std::mt19937_64 rng(31);
    auto net = fixtures::random_network(10, 8, 2, 4, 6, Variant::full, rng);
    std::vector<TrainingSample> batch{{fixtures::random_features(10, 6, rng), 0, 1.0},
                                      {fixtures::random_features(10, 6, rng), 1, std::nan("")}};
    try {
        net.gradients(batch);
        FAIL();
    } catch (const NonFiniteLoss& e) {
        EXPECT_EQ(e.sample, 1u);
    }
}

TEST(Policy, SymptomFilterBlocksKnownSymptoms) {
    std::mt19937_64 rng(37);
    auto net = fixtures::random_network(10, 8, 2, 4, 6, Variant::full, rng);
    Vector x = Vector::Zero(10);
    x(0) = 1.0;
    x(3) = -2.0;
    const auto ok = net.allowed(x);
    EXPECT_FALSE(ok[6]);
    EXPECT_FALSE(ok[9]);
    EXPECT_EQ(std::count(ok.begin(), ok.end(), true), 10);
    net.flags().symptom_filter = false;
    const auto all = net.allowed(x);
    EXPECT_EQ(std::count(all.begin(), all.end(), true), 12);
}
