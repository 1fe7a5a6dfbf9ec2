#include <gtest/gtest.h>

#include "rlae/solvers.hpp"
#include "test_support.hpp"

using namespace rlae;
using oracle::max_abs;

namespace {

GramMatrix two_by_two() {
    GramMatrix g{Eigen::MatrixXd(2, 2)};
    g.values << 2, 1, 1, 2;
    return g;
}

Eigen::MatrixXd mat2(double a, double b, double c, double d) {
    Eigen::MatrixXd m(2, 2);
    m << a, b, c, d;
    return m;
}

GramMatrix random_gram(std::uint64_t seed, std::size_t m = 50, std::size_t n = 20, double density = 0.2) {
    return gram(oracle::random_interactions(m, n, density, seed));
}

}  // namespace

TEST(ModelNameTest, RoundTrip) {
    for (Model m : {Model::LAE, Model::EASE, Model::DLAE, Model::EDLAE, Model::RLAE, Model::RDLAE})
        EXPECT_EQ(parse_model(model_name(m)), m);
    EXPECT_EQ(parse_model("rdlae"), Model::RDLAE);
    EXPECT_EQ(parse_model("EASE^R"), Model::EASE);
    EXPECT_FALSE(parse_model("SLIM").has_value());
}

TEST(SolverConfigTest, Validation) {
    EXPECT_THROW((SolverConfig{Model::LAE, 0.0, 0.0, 0.0}.validate()), std::invalid_argument);
    EXPECT_THROW((SolverConfig{Model::DLAE, 1.0, 1.0, 0.0}.validate()), std::invalid_argument);
    EXPECT_THROW((SolverConfig{Model::RLAE, 1.0, 0.0, -0.5}.validate()), std::invalid_argument);
    EXPECT_NO_THROW((SolverConfig{Model::RLAE, 1.0, 0.0, 2.0}.validate()));
}

TEST(LaeTest, HandExamples) {
    GramMatrix id{Eigen::MatrixXd::Identity(3, 3)};
    EXPECT_LE(max_abs(solve_lae(id, 1.0).B.values - 0.5 * Eigen::MatrixXd::Identity(3, 3)), 1e-15);
    EXPECT_LE(max_abs(solve_lae(two_by_two(), 1.0).B.values - mat2(5, 1, 1, 5) / 8.0), 1e-15);
    EXPECT_LE(max_abs(solve_lae(random_gram(1), 1e12).B.values), 1e-9);
}

TEST(EaseTest, HandExamples) {
    const auto out = solve_ease(two_by_two(), 1.0);
    EXPECT_LE(max_abs(out.B.values - mat2(0, 1.0 / 3, 1.0 / 3, 0)), 1e-15);
    // mu_j = 1/P_jj - lambda = 8/3 - 1.
    EXPECT_NEAR(out.mu(0), 5.0 / 3.0, 1e-14);

    GramMatrix diag{Eigen::Vector3d(3, 1, 4).asDiagonal()};
    EXPECT_LE(max_abs(solve_ease(diag, 2.0).B.values), 1e-15);
}

TEST(EaseTest, ZeroDiagonalOnRandomInstances) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto out = solve_ease(random_gram(seed), 1.0 + static_cast<double>(seed));
        EXPECT_LE(out.B.values.diagonal().cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_GE(out.mu.minCoeff(), 0.0);
    }
}

TEST(DlaeTest, HandExamples) {
    GramMatrix g{2.0 * Eigen::MatrixXd::Identity(2, 2)};
    const auto reg = dropout_diagonal(g, 0.5, 1.0);
    EXPECT_LE(max_abs(solve_dlae(g, reg).B.values - 0.4 * Eigen::MatrixXd::Identity(2, 2)), 1e-15);

    const auto r = random_gram(3);
    EXPECT_LE(max_abs(solve_dlae(r, dropout_diagonal(r, 0.0, 2.0)).B.values - solve_lae(r, 2.0).B.values), 1e-12);
    EXPECT_LE(max_abs(solve_edlae(r, dropout_diagonal(r, 0.0, 2.0)).B.values - solve_ease(r, 2.0).B.values), 1e-12);
}

TEST(EdlaeTest, MatchesIterativeMinimizerOnHandCase) {
    const GramMatrix g = two_by_two();
    const auto reg = dropout_diagonal(g, 0.5, 1.0);
    const auto out = solve_edlae(g, reg);
    EXPECT_LE(out.B.values.diagonal().cwiseAbs().maxCoeff(), 1e-9);
    const auto pg = oracle::projected_gradient(g.values, reg.values, 0.0);
    EXPECT_LE(max_abs(out.B.values - pg.b), 1e-3);
}

TEST(RlaeTest, HandKktComputation) {
    const GramMatrix g = two_by_two();
    const auto out = solve_rlae(g, 1.0, 0.5);
    EXPECT_EQ(out.constrained, (std::vector<bool>{true, true}));
    EXPECT_NEAR(out.mu(0), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(out.mu(1), 1.0 / 3.0, 1e-15);
    EXPECT_LE(max_abs(out.B.values - mat2(0.5, 1.0 / 6, 1.0 / 6, 0.5)), 1e-15);

    const auto loose = solve_rlae(g, 1.0, 1.0);
    EXPECT_EQ(loose.mu, Eigen::VectorXd::Zero(2));
    EXPECT_LE(max_abs(loose.B.values - solve_lae(g, 1.0).B.values), 1e-15);
    EXPECT_NEAR(loose.B.values(0, 0), 0.625, 1e-15);

    EXPECT_LE(max_abs(solve_rlae(g, 1.0, 0.0).B.values - solve_ease(g, 1.0).B.values), 1e-15);
}

TEST(RdlaeTest, BoundaryEquivalences) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto g = random_gram(seed);
        for (double p : {0.0, 0.3, 0.7}) {
            const auto reg = dropout_diagonal(g, p, 2.0);
            const auto dlae = solve_dlae(g, reg).B.values;
            const auto edlae = solve_edlae(g, reg).B.values;
            EXPECT_LE(max_abs(solve_rdlae(g, reg, 1.0).B.values - dlae), 1e-8);
            EXPECT_LE(max_abs(solve_rdlae(g, reg, 3.0).B.values - dlae), 1e-8);
            EXPECT_LE(max_abs(solve_rdlae(g, reg, 0.0).B.values - edlae), 1e-8);
        }
    }
}

TEST(RdlaeTest, MatchesProjectedGradientOracle) {
    const auto g = gram(oracle::random_interactions(40, 8, 0.3, 17));
    const auto reg = dropout_diagonal(g, 0.3, 2.0);
    const auto out = solve_rdlae(g, reg, 0.4);
    const auto pg = oracle::projected_gradient(g.values, reg.values, 0.4);
    const double f_closed = oracle::objective(g.values, reg.values, out.B.values);
    const double f_pg = oracle::objective(g.values, reg.values, pg.b);
    EXPECT_LE(std::abs(f_closed - f_pg), 1e-6 * std::abs(f_pg));
    EXPECT_LE(max_abs(out.B.values - pg.b), 1e-3);
}

TEST(KktTest, RelaxedSolutionsSatisfyConditions) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto g = random_gram(seed);
        for (double p : {0.0, 0.5})
            for (double xi : {0.0, 0.1, 0.25, 0.5, 0.9}) {
                const auto reg = dropout_diagonal(g, p, 1.0);
                const auto out = solve_rdlae(g, reg, xi);
                const Eigen::VectorXd d = out.B.values.diagonal();
                EXPECT_LE(d.maxCoeff(), xi + 1e-9);
                EXPECT_GE(out.mu.minCoeff(), 0.0);
                for (Eigen::Index j = 0; j < d.size(); ++j) EXPECT_LE(std::abs(out.mu(j) * (d(j) - xi)), 1e-8);
                // Stationarity: (G + Lambda) B = G - diagMat(mu).
                const Eigen::MatrixXd a = g.values + Eigen::MatrixXd(reg.values.asDiagonal());
                EXPECT_LE(max_abs(a * out.B.values - g.values + Eigen::MatrixXd(out.mu.asDiagonal())), 1e-8);
            }
    }
}

TEST(ConstrainedMaskTest, BoundariesAndMonotonicity) {
    const auto hand = constrained_mask(precision(two_by_two(), ridge_diagonal(two_by_two(), 1.0)),
                                       ridge_diagonal(two_by_two(), 1.0), 0.5);
    EXPECT_EQ(hand.mask, (std::vector<bool>{true, true}));

    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto g = random_gram(seed);
        const auto reg = dropout_diagonal(g, 0.3, 1.0);
        const auto p = precision(g, reg);
        EXPECT_EQ(constrained_mask(p, reg, 0.0).fraction, 1.0);
        EXPECT_EQ(constrained_mask(p, reg, 1.0).fraction, 0.0);
        EXPECT_EQ(constrained_mask(p, reg, 1.5).fraction, 0.0);
        // Raising xi can only release constraints.
        std::vector<bool> prev = constrained_mask(p, reg, 0.0).mask;
        for (double xi = 0.05; xi <= 1.0; xi += 0.05) {
            const auto cur = constrained_mask(p, reg, xi).mask;
            for (std::size_t j = 0; j < cur.size(); ++j) EXPECT_TRUE(!cur[j] || prev[j]) << "item " << j;
            prev = cur;
        }
    }
}

TEST(ConstrainedMaskTest, ColdItemNeverConstrained) {
    GramMatrix g{Eigen::MatrixXd::Zero(2, 2)};
    g.values(0, 0) = 3.0;
    const auto reg = ridge_diagonal(g, 1.0);
    const auto mask = constrained_mask(precision(g, reg), reg, 0.0);
    EXPECT_EQ(mask.mask, (std::vector<bool>{true, false}));
}

TEST(SolveWithPrecisionTest, RejectsMismatchedRegularizer) {
    const GramMatrix g = two_by_two();
    const auto reg = ridge_diagonal(g, 1.0);
    const auto p = precision(g, reg);
    EXPECT_THROW(solve_with_precision({Model::EASE, 2.0, 0.0, 0.0}, p, reg), std::invalid_argument);
    EXPECT_THROW(solve_with_precision({Model::DLAE, 1.0, 0.5, 0.0}, p, reg), std::invalid_argument);
    // Ridge models ignore the configured dropout probability.
    EXPECT_NO_THROW(solve_with_precision({Model::RLAE, 1.0, 0.5, 0.3}, p, reg));
}

TEST(SolveTest, JointScalingInvariance) {
    // Scaling G and lambda together leaves every closed form unchanged.
    const auto g = random_gram(4);
    GramMatrix scaled{3.0 * g.values};
    for (Model m : {Model::LAE, Model::EASE, Model::DLAE, Model::EDLAE, Model::RLAE, Model::RDLAE}) {
        const auto a = solve(g, {m, 2.0, 0.3, 0.2}).B.values;
        const auto b = solve(scaled, {m, 6.0, 0.3, 0.2}).B.values;
        EXPECT_LE(max_abs(a - b), 1e-10) << model_name(m);
    }
}
