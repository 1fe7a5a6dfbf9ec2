#include "rlae/solvers.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace rlae {

namespace {

constexpr std::array<std::pair<Model, std::string_view>, 6> kModelNames{{
    {Model::LAE, "LAE"},
    {Model::EASE, "EASE"},
    {Model::DLAE, "DLAE"},
    {Model::EDLAE, "EDLAE"},
    {Model::RLAE, "RLAE"},
    {Model::RDLAE, "RDLAE"},
}};

// B = I - P * diagMat(scale), one column at a time.
Eigen::MatrixXd identity_minus_scaled(const PrecisionMatrix& p, const Eigen::VectorXd& scale) {
    Eigen::MatrixXd b = -(p.values * scale.asDiagonal());
    b.diagonal().array() += 1.0;
    return b;
}

void check_shapes(const PrecisionMatrix& p, const RegDiagonal& reg) {
    if (p.values.rows() != p.values.cols() || reg.values.size() != p.n())
        throw std::invalid_argument("precision matrix and regularizer sizes differ");
}

std::vector<bool> positive_mask(const Eigen::VectorXd& mu) {
    std::vector<bool> mask(static_cast<std::size_t>(mu.size()));
    for (Eigen::Index j = 0; j < mu.size(); ++j) mask[static_cast<std::size_t>(j)] = mu(j) > 0.0;
    return mask;
}

// Multipliers are non-negative in exact arithmetic. Roundoff near the
// activation boundary is clamped to zero; anything larger is a defect.
double checked_multiplier(double mu, double p_jj, Eigen::Index j) {
    if (mu > 0.0) return mu;
    if (mu < -1e-9 / p_jj)
        throw std::logic_error("negative Lagrange multiplier for item " + std::to_string(j) + ": " +
                               std::to_string(mu));
    return 0.0;
}

}  // namespace

std::string_view model_name(Model m) {
    for (const auto& [model, name] : kModelNames)
        if (model == m) return name;
    return "?";
}

std::optional<Model> parse_model(std::string_view name) {
    for (const auto& [model, label] : kModelNames) {
        if (label.size() != name.size()) continue;
        bool same = true;
        for (std::size_t k = 0; k < label.size(); ++k)
            same = same && std::toupper(static_cast<unsigned char>(name[k])) == label[k];
        if (same) return model;
    }
    if (name == "EASER" || name == "EASE^R" || name == "ease_r") return Model::EASE;
    return std::nullopt;
}

bool uses_dropout(Model m) { return m == Model::DLAE || m == Model::EDLAE || m == Model::RDLAE; }

bool uses_xi(Model m) { return m == Model::RLAE || m == Model::RDLAE; }

void SolverConfig::validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be positive and finite");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw std::invalid_argument("dropout probability must lie in [0, 1)");
    if (!(xi >= 0.0) || std::isnan(xi)) throw std::invalid_argument("xi must be non-negative");
}

double SolverOutput::constrained_fraction() const {
    if (constrained.empty()) return 0.0;
    std::size_t count = 0;
    for (bool c : constrained) count += c ? 1 : 0;
    return static_cast<double>(count) / static_cast<double>(constrained.size());
}

Eigen::VectorXd relaxed_multipliers(const PrecisionMatrix& p, const RegDiagonal& reg, double xi) {
    check_shapes(p, reg);
    if (!(xi >= 0.0)) throw std::invalid_argument("xi must be non-negative");
    const Eigen::Index n = p.n();
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double p_jj = p.values(j, j);
        if (1.0 - p_jj * reg.values(j) <= xi) continue;
        mu(j) = checked_multiplier((1.0 - xi) / p_jj - reg.values(j), p_jj, j);
    }
    return mu;
}

ConstraintMask constrained_mask(const PrecisionMatrix& p, const RegDiagonal& reg, double xi) {
    ConstraintMask out;
    out.mask = positive_mask(relaxed_multipliers(p, reg, xi));
    std::size_t count = 0;
    for (bool c : out.mask) count += c ? 1 : 0;
    out.fraction = out.mask.empty() ? 0.0 : static_cast<double>(count) / static_cast<double>(out.mask.size());
    return out;
}

SolverOutput solve_unconstrained(const PrecisionMatrix& p, const RegDiagonal& reg, Model tag) {
    check_shapes(p, reg);
    SolverOutput out;
    out.model = tag;
    out.B.values = identity_minus_scaled(p, reg.values);
    out.mu = Eigen::VectorXd::Zero(p.n());
    out.constrained.assign(static_cast<std::size_t>(p.n()), false);
    return out;
}

SolverOutput solve_zero_diagonal(const PrecisionMatrix& p, const RegDiagonal& reg, Model tag) {
    check_shapes(p, reg);
    const Eigen::VectorXd inv_diag = p.values.diagonal().cwiseInverse();
    SolverOutput out;
    out.model = tag;
    out.B.values = identity_minus_scaled(p, inv_diag);
    // Back-solved multipliers: reg_j + mu_j = 1 / P_jj.
    out.mu.resize(p.n());
    for (Eigen::Index j = 0; j < p.n(); ++j)
        out.mu(j) = checked_multiplier(inv_diag(j) - reg.values(j), p.values(j, j), j);
    out.constrained = positive_mask(out.mu);
    return out;
}

SolverOutput solve_relaxed(const PrecisionMatrix& p, const RegDiagonal& reg, double xi, Model tag) {
    SolverOutput out;
    out.model = tag;
    out.mu = relaxed_multipliers(p, reg, xi);
    out.B.values = identity_minus_scaled(p, reg.values + out.mu);
    out.constrained = positive_mask(out.mu);
    return out;
}

RegDiagonal regularizer_for(const GramMatrix& g, const SolverConfig& config) {
    config.validate();
    return dropout_diagonal(g, uses_dropout(config.model) ? config.dropout_p : 0.0, config.lambda);
}

SolverOutput solve_with_precision(const SolverConfig& config, const PrecisionMatrix& p, const RegDiagonal& reg) {
    config.validate();
    const double expected_p = uses_dropout(config.model) ? config.dropout_p : 0.0;
    if (reg.lambda != config.lambda || reg.dropout_p != expected_p)
        throw std::invalid_argument("regularizer does not match the solver configuration");
    switch (config.model) {
        case Model::LAE:
        case Model::DLAE:
            return solve_unconstrained(p, reg, config.model);
        case Model::EASE:
        case Model::EDLAE:
            return solve_zero_diagonal(p, reg, config.model);
        case Model::RLAE:
        case Model::RDLAE:
            return solve_relaxed(p, reg, config.xi, config.model);
    }
    throw std::invalid_argument("unknown model");
}

SolverOutput solve(const GramMatrix& g, const SolverConfig& config) {
    const RegDiagonal reg = regularizer_for(g, config);
    return solve_with_precision(config, precision(g, reg), reg);
}

SolverOutput solve_lae(const GramMatrix& g, double lambda) { return solve(g, {Model::LAE, lambda, 0.0, 0.0}); }

SolverOutput solve_ease(const GramMatrix& g, double lambda) { return solve(g, {Model::EASE, lambda, 0.0, 0.0}); }

SolverOutput solve_dlae(const GramMatrix& g, const RegDiagonal& reg) {
    return solve_unconstrained(precision(g, reg), reg, Model::DLAE);
}

SolverOutput solve_edlae(const GramMatrix& g, const RegDiagonal& reg) {
    return solve_zero_diagonal(precision(g, reg), reg, Model::EDLAE);
}

SolverOutput solve_rlae(const GramMatrix& g, double lambda, double xi) {
    return solve(g, {Model::RLAE, lambda, 0.0, xi});
}

SolverOutput solve_rdlae(const GramMatrix& g, const RegDiagonal& reg, double xi) {
    if (!(xi >= 0.0)) throw std::invalid_argument("xi must be non-negative");
    return solve_relaxed(precision(g, reg), reg, xi, Model::RDLAE);
}

}  // namespace rlae
