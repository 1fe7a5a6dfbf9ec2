#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "rlae/gram.hpp"
#include "rlae/interactions.hpp"
#include "rlae/solvers.hpp"

namespace rlae {

/// Eigenpairs of the gram matrix, eigenvalues descending. Column k of
/// `eigenvectors` pairs with `eigenvalues(k)`. Roundoff-negative eigenvalues
/// are clamped to zero.
struct SpectralDecomposition {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors;
};

SpectralDecomposition eig_gram(const GramMatrix& g);

/// max |V diag(sigma^2) V^T - G|.
double reconstruction_residual(const SpectralDecomposition& d, const GramMatrix& g);

/// Per-eigenvalue factors sigma^2 / (sigma^2 + lambda) (ridge term) and
/// 1 / (sigma^2 + lambda) (diagonal-constraint term).
struct ScalingCurves {
    double lambda = 0.0;
    Eigen::VectorXd reg_curve;
    Eigen::VectorXd constraint_curve;
};

ScalingCurves scaling_curves(const Eigen::VectorXd& eigenvalues, double lambda);

struct LaeSpectrumCheck {
    /// max |B - V diag(sigma^2 / (sigma^2 + lambda)) V^T|
    double residual = 0.0;
    /// Largest off-diagonal magnitude of V^T B V.
    double off_diagonal = 0.0;
};

LaeSpectrumCheck verify_lae_spectrum(const WeightMatrix& b_lae, const SpectralDecomposition& d, double lambda);

/// max |(B_ease - B_lae) + V diag(1 / (sigma^2 + lambda)) V^T diagMat(mu)|.
double verify_constraint_term(const SolverOutput& ease, const WeightMatrix& b_lae, const SpectralDecomposition& d,
                              double lambda);

enum class PCGroup { Top, Bottom };

struct PCGroupHeatmap {
    PCGroup group = PCGroup::Top;
    std::vector<ItemIndex> items;
    Eigen::MatrixXd values;
};

/// Eigenvalue-weighted sum of v_k v_k^T over the top or bottom
/// ceil(fraction * n) components, restricted to `items` (order preserved).
PCGroupHeatmap pc_group_heatmap(const SpectralDecomposition& d, double group_fraction, PCGroup which,
                                std::span<const ItemIndex> items);

}  // namespace rlae
