#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

#include "rlae/interactions.hpp"

namespace rlae {

/// Dense item co-occurrence matrix X^T X. Entries are exact integer counts
/// held in doubles; the diagonal is the item popularity.
struct GramMatrix {
    Eigen::MatrixXd values;

    Eigen::Index n() const { return values.rows(); }
};

/// Per-item L2 strengths: entry j = p / (1 - p) * G_jj + lambda.
struct RegDiagonal {
    Eigen::VectorXd values;
    double lambda = 0.0;
    double dropout_p = 0.0;
};

/// P = (G + diagMat(reg))^{-1}, symmetric positive definite.
struct PrecisionMatrix {
    Eigen::MatrixXd values;

    Eigen::Index n() const { return values.rows(); }
};

class FactorizationError : public std::runtime_error {
public:
    FactorizationError(Eigen::Index pivot, double value)
        : std::runtime_error("Cholesky factorization failed: pivot " + std::to_string(pivot) +
                             " is not positive (" + std::to_string(value) + ")"),
          pivot_(pivot) {}

    Eigen::Index pivot() const { return pivot_; }

private:
    Eigen::Index pivot_;
};

GramMatrix gram(const InteractionMatrix& x);

RegDiagonal dropout_diagonal(const GramMatrix& g, double dropout_p, double lambda);

/// Plain ridge diagonal (dropout_p = 0).
inline RegDiagonal ridge_diagonal(const GramMatrix& g, double lambda) { return dropout_diagonal(g, 0.0, lambda); }

/// Inverts G + diagMat(reg) through a Cholesky factorization. Throws
/// FactorizationError naming the first non-positive pivot.
PrecisionMatrix precision(const GramMatrix& g, const RegDiagonal& reg);

/// Bytes needed to hold one dense n x n double matrix.
inline double dense_matrix_bytes(std::size_t n) { return 8.0 * static_cast<double>(n) * static_cast<double>(n); }

}  // namespace rlae
