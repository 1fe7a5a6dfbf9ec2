#include "rlae/spectral.hpp"

#include <algorithm>
#include <stdexcept>

namespace rlae {

SpectralDecomposition eig_gram(const GramMatrix& g) {
    const Eigen::Index n = g.n();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g.values);
    if (solver.info() != Eigen::Success) throw std::runtime_error("symmetric eigensolver did not converge");

    // Eigen returns ascending order.
    SpectralDecomposition d;
    d.eigenvalues = solver.eigenvalues().reverse();
    d.eigenvectors = solver.eigenvectors().rowwise().reverse();
    const double floor = -1e-8 * std::max(1.0, n > 0 ? d.eigenvalues(0) : 0.0);
    for (Eigen::Index k = 0; k < n; ++k) {
        if (d.eigenvalues(k) < floor) throw std::invalid_argument("gram matrix is not positive semi-definite");
        d.eigenvalues(k) = std::max(0.0, d.eigenvalues(k));
    }
    return d;
}

double reconstruction_residual(const SpectralDecomposition& d, const GramMatrix& g) {
    const Eigen::MatrixXd rebuilt = d.eigenvectors * d.eigenvalues.asDiagonal() * d.eigenvectors.transpose();
    return (rebuilt - g.values).cwiseAbs().maxCoeff();
}

ScalingCurves scaling_curves(const Eigen::VectorXd& eigenvalues, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    ScalingCurves c;
    c.lambda = lambda;
    const Eigen::ArrayXd s = eigenvalues.array().max(0.0);
    c.reg_curve = (s / (s + lambda)).matrix();
    c.constraint_curve = (1.0 / (s + lambda)).matrix();
    return c;
}

LaeSpectrumCheck verify_lae_spectrum(const WeightMatrix& b_lae, const SpectralDecomposition& d, double lambda) {
    const auto curves = scaling_curves(d.eigenvalues, lambda);
    const Eigen::MatrixXd& v = d.eigenvectors;
    LaeSpectrumCheck check;
    check.residual = (b_lae.values - v * curves.reg_curve.asDiagonal() * v.transpose()).cwiseAbs().maxCoeff();
    Eigen::MatrixXd rotated = v.transpose() * b_lae.values * v;
    rotated.diagonal().setZero();
    check.off_diagonal = rotated.size() == 0 ? 0.0 : rotated.cwiseAbs().maxCoeff();
    return check;
}

double verify_constraint_term(const SolverOutput& ease, const WeightMatrix& b_lae, const SpectralDecomposition& d,
                              double lambda) {
    const auto curves = scaling_curves(d.eigenvalues, lambda);
    const Eigen::MatrixXd& v = d.eigenvectors;
    const Eigen::MatrixXd term = v * curves.constraint_curve.asDiagonal() * v.transpose() * ease.mu.asDiagonal();
    return ((ease.B.values - b_lae.values) + term).cwiseAbs().maxCoeff();
}

PCGroupHeatmap pc_group_heatmap(const SpectralDecomposition& d, double group_fraction, PCGroup which,
                                std::span<const ItemIndex> items) {
    const Eigen::Index n = d.eigenvalues.size();
    if (!(group_fraction > 0.0 && group_fraction <= 1.0)) throw std::invalid_argument("group_fraction must lie in (0, 1]");
    const auto size = static_cast<Eigen::Index>(std::min<std::size_t>(fraction_ceil(group_fraction, static_cast<std::size_t>(n)),
                                                                      static_cast<std::size_t>(n)));
    if (size == 0) throw std::invalid_argument("principal component group is empty");

    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (ItemIndex i : items) {
        if (i < 0 || i >= n) throw std::out_of_range("heatmap item " + std::to_string(i) + " out of range");
        if (seen[static_cast<std::size_t>(i)]) throw std::invalid_argument("heatmap items must be distinct");
        seen[static_cast<std::size_t>(i)] = true;
    }

    const Eigen::Index first = which == PCGroup::Top ? 0 : n - size;
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(items.size()), size);
    for (std::size_t r = 0; r < items.size(); ++r)
        rows.row(static_cast<Eigen::Index>(r)) = d.eigenvectors.row(items[r]).segment(first, size);

    PCGroupHeatmap h;
    h.group = which;
    h.items.assign(items.begin(), items.end());
    h.values = rows * d.eigenvalues.segment(first, size).asDiagonal() * rows.transpose();
    return h;
}

}  // namespace rlae
