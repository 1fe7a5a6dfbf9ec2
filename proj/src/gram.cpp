#include "rlae/gram.hpp"

#include <algorithm>
#include <cmath>

namespace rlae {

namespace {

// Users are densified in blocks so the product runs as a symmetric rank-k
// update instead of per-pair scatter.
constexpr std::size_t kUserBlock = 512;

// Unblocked Cholesky used only to locate the failing pivot.
std::pair<Eigen::Index, double> first_bad_pivot(Eigen::MatrixXd a) {
    const Eigen::Index n = a.rows();
    for (Eigen::Index k = 0; k < n; ++k) {
        double d = a(k, k) - a.row(k).head(k).squaredNorm();
        if (!(d > 0.0)) return {k, d};
        d = std::sqrt(d);
        a(k, k) = d;
        for (Eigen::Index i = k + 1; i < n; ++i)
            a(i, k) = (a(i, k) - a.row(i).head(k).dot(a.row(k).head(k))) / d;
    }
    return {-1, 0.0};
}

}  // namespace

GramMatrix gram(const InteractionMatrix& x) {
    const auto n = static_cast<Eigen::Index>(x.num_items());
    GramMatrix g{Eigen::MatrixXd::Zero(n, n)};
    if (n == 0) return g;

    Eigen::MatrixXd block;
    for (std::size_t start = 0; start < x.num_users(); start += kUserBlock) {
        const std::size_t stop = std::min(x.num_users(), start + kUserBlock);
        block.setZero(static_cast<Eigen::Index>(stop - start), n);
        for (std::size_t u = start; u < stop; ++u)
            for (ItemIndex i : x.row(u)) block(static_cast<Eigen::Index>(u - start), i) = 1.0;
        g.values.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose());
    }
    g.values.triangularView<Eigen::StrictlyUpper>() = g.values.transpose();
    return g;
}

RegDiagonal dropout_diagonal(const GramMatrix& g, double dropout_p, double lambda) {
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw std::invalid_argument("dropout probability must lie in [0, 1)");
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    RegDiagonal reg;
    reg.lambda = lambda;
    reg.dropout_p = dropout_p;
    const double scale = dropout_p / (1.0 - dropout_p);
    reg.values = (scale * g.values.diagonal()).array() + lambda;
    return reg;
}

PrecisionMatrix precision(const GramMatrix& g, const RegDiagonal& reg) {
    const Eigen::Index n = g.n();
    if (reg.values.size() != n) throw std::invalid_argument("regularization diagonal does not match the gram matrix");
    if ((reg.values.array() <= 0.0).any()) throw std::invalid_argument("regularization entries must be positive");

    Eigen::MatrixXd a = g.values;
    a.diagonal() += reg.values;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
        const auto [pivot, value] = first_bad_pivot(a);
        throw FactorizationError(pivot < 0 ? 0 : pivot, value);
    }
    PrecisionMatrix p{llt.solve(Eigen::MatrixXd::Identity(n, n))};
    // The two triangles differ by roundoff only.
    p.values = 0.5 * (p.values + p.values.transpose()).eval();
    return p;
}

}  // namespace rlae
