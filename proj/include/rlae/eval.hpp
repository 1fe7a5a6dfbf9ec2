#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rlae/interactions.hpp"
#include "rlae/solvers.hpp"

namespace rlae {

using Ranking = std::vector<ItemIndex>;

/// score_i = sum over fold-in items j of B(j, i).
Eigen::VectorXd predict_scores(std::span<const ItemIndex> foldin, const WeightMatrix& b);

/// Top-n items by descending score, ties to the lower index. Fold-in items are
/// never returned. `foldin` must be sorted.
Ranking topn(const Eigen::VectorXd& scores, std::span<const ItemIndex> foldin, std::size_t n);

enum class RecallDenominator {
    Truncated,  ///< min(K, |heldout|)
    Full,       ///< |heldout|
};

enum class UnbiasedNormalization {
    SelfNormalized,  ///< divide by the propensity-weighted ideal
    FixedIdeal,      ///< divide by the unweighted ideal (plain IPS)
};

struct MetricPair {
    double recall = 0.0;
    double ndcg = 0.0;
};

// The metric functions return nullopt when `heldout` is empty: the user does
// not count towards the average. `heldout` must be sorted.
std::optional<double> recall_at_k(std::span<const ItemIndex> ranking, std::span<const ItemIndex> heldout,
                                  std::size_t k, RecallDenominator denominator = RecallDenominator::Truncated);
std::optional<double> ndcg_at_k(std::span<const ItemIndex> ranking, std::span<const ItemIndex> heldout,
                                std::size_t k);

/// Item propensities proportional to (count / max_count)^((gamma + 1) / 2),
/// floored at 1e-6.
struct PropensityModel {
    double gamma = 2.0;
    Eigen::VectorXd propensity;

    static PropensityModel from_popularity(std::span<const std::int64_t> popularity, double gamma);
};

std::optional<MetricPair> unbiased_metrics(std::span<const ItemIndex> ranking, std::span<const ItemIndex> heldout,
                                           const PropensityModel& propensity, std::size_t k,
                                           RecallDenominator denominator = RecallDenominator::Truncated,
                                           UnbiasedNormalization normalization = UnbiasedNormalization::SelfNormalized);

struct GroupMetrics {
    std::optional<MetricPair> head;
    std::optional<MetricPair> tail;
};

/// AOA metrics with the held-out set restricted to head or tail items. The
/// ranking itself is not filtered.
GroupMetrics group_metrics(std::span<const ItemIndex> ranking, std::span<const ItemIndex> heldout,
                           const ItemPartition& partition, std::size_t k,
                           RecallDenominator denominator = RecallDenominator::Truncated);

struct EvalConfig {
    std::vector<std::size_t> ks{20, 100};
    double gamma = 2.0;
    double head_fraction = 0.2;
    RecallDenominator recall_denominator = RecallDenominator::Truncated;
    UnbiasedNormalization unbiased_normalization = UnbiasedNormalization::SelfNormalized;

    void validate() const;
};

struct MetricsAtK {
    std::size_t k = 0;
    double recall_aoa = 0.0;
    double ndcg_aoa = 0.0;
    double recall_unbiased = 0.0;
    double ndcg_unbiased = 0.0;
    double recall_head = 0.0;
    double ndcg_head = 0.0;
    double recall_tail = 0.0;
    double ndcg_tail = 0.0;
    std::size_t users_aoa = 0;
    std::size_t users_head = 0;
    std::size_t users_tail = 0;
};

struct MetricReport {
    std::vector<MetricsAtK> at_k;

    /// Throws std::out_of_range when k was not evaluated.
    const MetricsAtK& at(std::size_t k) const;
};

/// Scores every user of `foldin` and averages metrics over users with a
/// non-empty held-out row. `popularity` (training counts) drives the
/// propensities and the head/tail partition.
MetricReport evaluate(const WeightMatrix& b, const InteractionMatrix& foldin, const InteractionMatrix& heldout,
                      std::span<const std::int64_t> popularity, const EvalConfig& config);

enum class EvalTarget { Validation, Test };

MetricReport evaluate_model(const WeightMatrix& b, const StrongSplit& split, const EvalConfig& config,
                            EvalTarget target = EvalTarget::Test);

/// Weak protocol: the full training row is the fold-in.
MetricReport evaluate_model(const WeightMatrix& b, const WeakSplit& split, const EvalConfig& config);

}  // namespace rlae
