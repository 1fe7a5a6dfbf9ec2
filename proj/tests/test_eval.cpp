#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rlae/eval.hpp"
#include "test_support.hpp"

using namespace rlae;

namespace {

constexpr double kTol = 1e-12;

// Items 0..3 play a, x, b, y.
const Ranking kAxb{0, 1, 2};
const std::vector<ItemIndex> kAb{0, 2};

WeightMatrix fixture_weights() {
    WeightMatrix b{Eigen::MatrixXd(4, 4)};
    b.values << 0, 3, 2, 1,
                3, 0, 1, 2,
                2, 1, 0, 3,
                1, 2, 3, 0;
    return b;
}

// Five users: fold-in / held-out.
//   u0 {0}    / {1}
//   u1 {1}    / {2, 3}
//   u2 {0, 1} / {}
//   u3 {2}    / {0}
//   u4 {3}    / {0}
InteractionMatrix fixture_foldin() { return InteractionMatrix(4, {{0}, {1}, {0, 1}, {2}, {3}}); }
InteractionMatrix fixture_heldout() { return InteractionMatrix(4, {{1}, {2, 3}, {}, {0}, {0}}); }
const std::vector<std::int64_t> kFixturePop{10, 5, 3, 1};

// Independent scorer: full sort of (score, item) pairs.
struct Oracle {
    double recall = 0, ndcg = 0;
    bool counted = false;
};

Oracle oracle_metrics(const Eigen::MatrixXd& b, std::span<const ItemIndex> foldin, std::span<const ItemIndex> held,
                      std::size_t k) {
    Oracle o;
    if (held.empty()) return o;
    o.counted = true;
    const Eigen::Index n = b.rows();
    std::vector<std::pair<double, int>> scored;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::find(foldin.begin(), foldin.end(), i) != foldin.end()) continue;
        double s = 0;
        for (ItemIndex j : foldin) s += b(j, i);
        scored.emplace_back(-s, static_cast<int>(i));
    }
    std::sort(scored.begin(), scored.end());
    double hits = 0, dcg = 0, idcg = 0;
    for (std::size_t r = 0; r < std::min(k, scored.size()); ++r)
        if (std::find(held.begin(), held.end(), scored[r].second) != held.end()) {
            hits += 1;
            dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
        }
    for (std::size_t r = 0; r < std::min(k, held.size()); ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    o.recall = hits / static_cast<double>(std::min(k, held.size()));
    o.ndcg = dcg / idcg;
    return o;
}

}  // namespace

TEST(PredictTest, ScoresAreRowSums) {
    WeightMatrix b{Eigen::MatrixXd(2, 2)};
    b.values << 0, 1.0 / 3, 1.0 / 3, 0;
    const std::vector<ItemIndex> f{0};
    const auto s = predict_scores(f, b);
    EXPECT_EQ(s(0), 0.0);
    EXPECT_EQ(s(1), 1.0 / 3);
    EXPECT_EQ(predict_scores({}, b), Eigen::VectorXd::Zero(2));

    WeightMatrix id{Eigen::MatrixXd::Identity(4, 4)};
    const std::vector<ItemIndex> g{1, 3};
    EXPECT_EQ(predict_scores(g, id), Eigen::Vector4d(0, 1, 0, 1));
}

TEST(TopnTest, TiesMaskingAndBoundary) {
    const Eigen::Vector3d s(0.5, 0.9, 0.9);
    EXPECT_EQ(topn(s, {}, 2), (Ranking{1, 2}));
    const std::vector<ItemIndex> f{1};
    EXPECT_EQ(topn(s, f, 3), (Ranking{2, 0}));
    EXPECT_EQ(topn(s, {}, 10), (Ranking{1, 2, 0}));
}

TEST(RecallTest, HandValues) {
    EXPECT_NEAR(*recall_at_k(kAxb, kAb, 3), 1.0, kTol);
    EXPECT_EQ(*recall_at_k(Ranking{1, 3}, kAb, 2), 0.0);
    EXPECT_NEAR(*recall_at_k(kAxb, kAb, 1), 1.0, kTol);
    EXPECT_NEAR(*recall_at_k(kAxb, kAb, 1, RecallDenominator::Full), 0.5, kTol);
    EXPECT_FALSE(recall_at_k(kAxb, {}, 3).has_value());
}

TEST(NdcgTest, HandValues) {
    const double want = (1.0 + 1.0 / std::log2(4.0)) / (1.0 + 1.0 / std::log2(3.0));
    EXPECT_NEAR(*ndcg_at_k(kAxb, kAb, 3), want, kTol);
    EXPECT_NEAR(*ndcg_at_k(kAxb, kAb, 3), 0.9197, 1e-4);
    EXPECT_NEAR(*ndcg_at_k(Ranking{2, 0, 1}, kAb, 3), 1.0, kTol);
    EXPECT_FALSE(ndcg_at_k(kAxb, {}, 3).has_value());
}

TEST(PropensityTest, PowerLawWithFloor) {
    const std::vector<std::int64_t> pop{8, 2, 0};
    const auto p = PropensityModel::from_popularity(pop, 2.0);
    EXPECT_DOUBLE_EQ(p.propensity(0), 1.0);
    EXPECT_DOUBLE_EQ(p.propensity(1), std::pow(0.25, 1.5));
    EXPECT_DOUBLE_EQ(p.propensity(2), 1e-6);
}

TEST(UnbiasedTest, HandValues) {
    PropensityModel single{2.0, Eigen::Vector4d(0.5, 1, 1, 1)};
    const auto one = unbiased_metrics(Ranking{0, 1}, std::vector<ItemIndex>{0}, single, 1);
    EXPECT_NEAR(one->recall, 1.0, kTol);

    PropensityModel pair{2.0, Eigen::Vector4d(0.5, 1.0, 1, 1)};
    const auto two = unbiased_metrics(Ranking{0, 2}, std::vector<ItemIndex>{0, 1}, pair, 2);
    EXPECT_NEAR(two->recall, 2.0 / 3.0, kTol);
    EXPECT_NEAR(two->ndcg, 2.0 / (2.0 + 1.0 / std::log2(3.0)), kTol);

    // Plain IPS divides by the unweighted ideal instead.
    const auto ips = unbiased_metrics(Ranking{0, 2}, std::vector<ItemIndex>{0, 1}, pair, 2,
                                      RecallDenominator::Truncated, UnbiasedNormalization::FixedIdeal);
    EXPECT_NEAR(ips->recall, 2.0 / 2.0, kTol);

    EXPECT_FALSE(unbiased_metrics(kAxb, {}, pair, 2).has_value());
}

TEST(UnbiasedTest, UniformPropensitiesEqualAoa) {
    PropensityModel uniform{2.0, Eigen::VectorXd::Constant(4, 0.3)};
    for (std::size_t k = 1; k <= 4; ++k) {
        const auto u = unbiased_metrics(kAxb, kAb, uniform, k);
        EXPECT_NEAR(u->recall, *recall_at_k(kAxb, kAb, k), kTol);
        EXPECT_NEAR(u->ndcg, *ndcg_at_k(kAxb, kAb, k), kTol);
    }
}

TEST(GroupTest, HeadTailRestriction) {
    ItemPartition part;
    part.head = {0};
    part.tail = {1, 2, 3};
    part.is_head = {true, false, false, false};
    const auto g = group_metrics(kAxb, kAb, part, 3);
    ASSERT_TRUE(g.head && g.tail);
    EXPECT_NEAR(g.head->ndcg, 1.0, kTol);
    EXPECT_NEAR(g.tail->ndcg, 0.5, kTol);

    const auto only_head = group_metrics(kAxb, std::vector<ItemIndex>{0}, part, 3);
    EXPECT_FALSE(only_head.tail.has_value());

    ItemPartition all_tail{{}, {0, 1, 2, 3}, {false, false, false, false}};
    const auto t = group_metrics(kAxb, kAb, all_tail, 3);
    EXPECT_FALSE(t.head.has_value());
    EXPECT_NEAR(t.tail->ndcg, *ndcg_at_k(kAxb, kAb, 3), kTol);
}

TEST(EvaluateTest, FiveUserGoldenFixture) {
    EvalConfig cfg;
    cfg.ks = {1, 2};
    cfg.head_fraction = 0.25;
    const auto r = evaluate(fixture_weights(), fixture_foldin(), fixture_heldout(), kFixturePop, cfg);

    const double a = 1.0 / std::log2(3.0);
    const auto& k2 = r.at(2);
    EXPECT_EQ(k2.users_aoa, 4u);
    EXPECT_NEAR(k2.recall_aoa, 0.625, kTol);
    EXPECT_NEAR(k2.ndcg_aoa, (1.0 + a / (1.0 + a) + a) / 4.0, kTol);
    EXPECT_EQ(k2.users_head, 2u);
    EXPECT_NEAR(k2.recall_head, 0.5, kTol);
    EXPECT_NEAR(k2.ndcg_head, a / 2.0, kTol);
    EXPECT_EQ(k2.users_tail, 2u);
    EXPECT_NEAR(k2.recall_tail, 0.75, kTol);
    EXPECT_NEAR(k2.ndcg_tail, (1.0 + a / (1.0 + a)) / 2.0, kTol);

    const double w2 = std::pow(10.0 / 3.0, 1.5);
    const double w3 = std::pow(10.0, 1.5);
    EXPECT_NEAR(k2.recall_unbiased, (1.0 + w3 / (w2 + w3) + 1.0) / 4.0, kTol);
    EXPECT_NEAR(k2.ndcg_unbiased, (1.0 + w3 * a / (w3 + w2 * a) + a) / 4.0, kTol);

    // At K = 1 only u0 hits.
    const auto& k1 = r.at(1);
    EXPECT_NEAR(k1.recall_aoa, 0.25, kTol);
    EXPECT_NEAR(k1.ndcg_aoa, 0.25, kTol);
    EXPECT_THROW(r.at(5), std::out_of_range);
}

TEST(EvaluateTest, MatchesIndependentRankerOnRandomData) {
    const auto x = oracle::random_interactions(300, 40, 0.15, 12);
    const auto split = strong_split(x, 0.5, 0.7, 3);
    const auto out = solve_rlae(gram(split.train), 5.0, 0.3);
    EvalConfig cfg;
    cfg.ks = {5, 20};
    const auto r = evaluate_model(out.B, split, cfg, EvalTarget::Test);
    for (std::size_t k : cfg.ks) {
        double rs = 0, ns = 0;
        std::size_t users = 0;
        for (std::size_t u = 0; u < split.test_foldin.num_users(); ++u) {
            const auto o = oracle_metrics(out.B.values, split.test_foldin.row(u), split.test_heldout.row(u), k);
            if (!o.counted) continue;
            rs += o.recall;
            ns += o.ndcg;
            ++users;
        }
        EXPECT_EQ(r.at(k).users_aoa, users);
        EXPECT_NEAR(r.at(k).recall_aoa, rs / static_cast<double>(users), 1e-12);
        EXPECT_NEAR(r.at(k).ndcg_aoa, ns / static_cast<double>(users), 1e-12);
        for (double v : {r.at(k).recall_aoa, r.at(k).ndcg_aoa, r.at(k).recall_unbiased, r.at(k).ndcg_unbiased,
                         r.at(k).recall_tail, r.at(k).ndcg_tail}) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(EvaluateTest, IdentityWeightsRankLikeZeroWeights) {
    // Fold-in items are masked, so B = I leaves every candidate at score 0.
    const auto x = oracle::random_interactions(100, 20, 0.2, 5);
    const auto split = strong_split(x, 0.4, 0.8, 1);
    EvalConfig cfg;
    cfg.ks = {3, 10};
    const auto id = evaluate_model(WeightMatrix{Eigen::MatrixXd::Identity(20, 20)}, split, cfg);
    const auto zero = evaluate_model(WeightMatrix{Eigen::MatrixXd::Zero(20, 20)}, split, cfg);
    for (std::size_t k : cfg.ks) {
        EXPECT_EQ(id.at(k).recall_aoa, zero.at(k).recall_aoa);
        EXPECT_EQ(id.at(k).ndcg_aoa, zero.at(k).ndcg_aoa);
    }
}

TEST(EvaluateTest, WeakProtocolUsesTrainingRowsAsFoldin) {
    const auto x = oracle::random_interactions(80, 15, 0.3, 2);
    const auto w = weak_split(x, 0.2, 4);
    const auto b = solve_ease(gram(w.train), 2.0).B;
    EvalConfig cfg;
    cfg.ks = {5};
    const auto r = evaluate_model(b, w, cfg);
    const auto direct = evaluate(b, w.train, w.test, item_popularity(w.train), cfg);
    EXPECT_EQ(r.at(5).ndcg_aoa, direct.at(5).ndcg_aoa);
}

TEST(EvalConfigTest, Validation) {
    EvalConfig cfg;
    cfg.ks = {};
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg.ks = {0};
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg.ks = {10};
    cfg.head_fraction = 1.5;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}
