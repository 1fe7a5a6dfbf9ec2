#pragma once

// Instance generators and reference implementations shared by the unit tests
// and the acceptance binary. The references deliberately avoid the library's
// own code paths: plain loops for the gram matrix, an iterative solver for the
// constrained problems.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "rlae/gram.hpp"
#include "rlae/interactions.hpp"
#include "rlae/random.hpp"

namespace rlae::oracle {

/// Bernoulli(density) interactions. Items nobody picked get one random user,
/// so every item is warm.
inline InteractionMatrix random_interactions(std::size_t m, std::size_t n, double density, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<ItemRow> rows(m);
    std::vector<bool> warm(n, false);
    for (std::size_t u = 0; u < m; ++u)
        for (std::size_t i = 0; i < n; ++i)
            if (rng.uniform() < density) {
                rows[u].push_back(static_cast<ItemIndex>(i));
                warm[i] = true;
            }
    for (std::size_t i = 0; i < n; ++i)
        if (!warm[i]) rows[rng.below(m)].push_back(static_cast<ItemIndex>(i));
    return InteractionMatrix::from_unsorted(n, std::move(rows));
}

inline Eigen::MatrixXd dense(const InteractionMatrix& x) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.num_users()),
                                              static_cast<Eigen::Index>(x.num_items()));
    for (std::size_t u = 0; u < x.num_users(); ++u)
        for (ItemIndex i : x.row(u)) d(static_cast<Eigen::Index>(u), i) = 1.0;
    return d;
}

/// Triple loop over users and item pairs.
inline Eigen::MatrixXd naive_gram(const InteractionMatrix& x) {
    const auto n = static_cast<Eigen::Index>(x.num_items());
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t u = 0; u < x.num_users(); ++u)
        for (ItemIndex a : x.row(u))
            for (ItemIndex b : x.row(u)) g(a, b) += 1.0;
    return g;
}

/// ||X - XB||_F^2 + ||diag(reg)^{1/2} B||_F^2 written through G.
inline double objective(const Eigen::MatrixXd& g, const Eigen::VectorXd& reg, const Eigen::MatrixXd& b) {
    return g.trace() - 2.0 * (g * b).trace() + (b.transpose() * g * b).trace() +
           (b.transpose() * reg.asDiagonal() * b).trace();
}

struct PgResult {
    Eigen::MatrixXd b;
    int iterations = 0;
    double step_norm = 0.0;
};

/// Projected gradient on the objective above subject to B_jj <= xi. Columns
/// decouple, so each column is iterated separately with step 1/L, L = 2
/// lambda_max(G + diag(reg)), until the projected step is below `tol`.
inline PgResult projected_gradient(const Eigen::MatrixXd& g, const Eigen::VectorXd& reg, double xi,
                                   double tol = 1e-12, int max_iter = 5'000'000) {
    const Eigen::Index n = g.rows();
    const Eigen::MatrixXd a = g + Eigen::MatrixXd(reg.asDiagonal());
    const double l = 2.0 * Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    PgResult out;
    out.b = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
        Eigen::VectorXd y = x;
        double t = 1.0;
        int it = 0;
        double step = 0.0;
        for (; it < max_iter; ++it) {
            const Eigen::VectorXd grad = 2.0 * (a * y - g.col(j));
            Eigen::VectorXd next = y - grad / l;
            next(j) = std::min(next(j), xi);
            step = (next - x).norm();
            // Accelerated steps with a restart whenever progress reverses.
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            Eigen::VectorXd y_next = next + ((t - 1.0) / t_next) * (next - x);
            if ((y - next).dot(next - x) > 0.0) {
                y_next = next;
                t = 1.0;
            } else {
                t = t_next;
            }
            x = next;
            y = y_next;
            if (step < tol) break;
        }
        out.b.col(j) = x;
        out.iterations = std::max(out.iterations, it);
        out.step_norm = std::max(out.step_norm, step);
    }
    return out;
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace rlae::oracle
