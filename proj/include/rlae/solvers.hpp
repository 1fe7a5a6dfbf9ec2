#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rlae/gram.hpp"

namespace rlae {

enum class Model { LAE, EASE, DLAE, EDLAE, RLAE, RDLAE };

std::string_view model_name(Model m);
std::optional<Model> parse_model(std::string_view name);

/// True for models whose regularizer depends on the dropout probability.
bool uses_dropout(Model m);
/// True for models that read xi.
bool uses_xi(Model m);

struct SolverConfig {
    Model model = Model::EASE;
    double lambda = 1.0;
    double dropout_p = 0.0;
    double xi = 0.0;

    void validate() const;
};

struct WeightMatrix {
    Eigen::MatrixXd values;
};

/// Closed-form solution together with its KKT evidence.
///
/// Every model has the form B = I - P * diagMat(reg + mu). For LAE/DLAE mu is
/// zero; for the zero-diagonal and relaxed models mu holds the Lagrange
/// multipliers of the diagonal constraints.
struct SolverOutput {
    Model model = Model::LAE;
    WeightMatrix B;
    Eigen::VectorXd mu;
    std::vector<bool> constrained;

    double constrained_fraction() const;
};

struct ConstraintMask {
    std::vector<bool> mask;
    double fraction = 0.0;
};

/// Item j is constrained when 1 - P_jj * reg_j > xi, i.e. when the
/// unconstrained solution would put B_jj above xi.
ConstraintMask constrained_mask(const PrecisionMatrix& p, const RegDiagonal& reg, double xi);

/// Multipliers of the relaxed models: 0 for unconstrained items and
/// (1 - xi) / P_jj - reg_j otherwise.
Eigen::VectorXd relaxed_multipliers(const PrecisionMatrix& p, const RegDiagonal& reg, double xi);

// Solvers over a precomputed precision matrix. `p` must be the inverse of
// G + diagMat(reg) for the same reg.
SolverOutput solve_unconstrained(const PrecisionMatrix& p, const RegDiagonal& reg, Model tag);
SolverOutput solve_zero_diagonal(const PrecisionMatrix& p, const RegDiagonal& reg, Model tag);
SolverOutput solve_relaxed(const PrecisionMatrix& p, const RegDiagonal& reg, double xi, Model tag);

/// Dispatches on config.model; `p` and `reg` must match config.lambda and the
/// model's dropout probability.
SolverOutput solve_with_precision(const SolverConfig& config, const PrecisionMatrix& p, const RegDiagonal& reg);

SolverOutput solve_lae(const GramMatrix& g, double lambda);
SolverOutput solve_ease(const GramMatrix& g, double lambda);
SolverOutput solve_dlae(const GramMatrix& g, const RegDiagonal& reg);
SolverOutput solve_edlae(const GramMatrix& g, const RegDiagonal& reg);
SolverOutput solve_rlae(const GramMatrix& g, double lambda, double xi);
SolverOutput solve_rdlae(const GramMatrix& g, const RegDiagonal& reg, double xi);

/// Convenience entry: builds the regularizer and precision from scratch.
SolverOutput solve(const GramMatrix& g, const SolverConfig& config);

/// Regularizer used by a config (ridge when the model ignores dropout).
RegDiagonal regularizer_for(const GramMatrix& g, const SolverConfig& config);

}  // namespace rlae
