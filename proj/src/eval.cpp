#include "rlae/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rlae {

namespace {

constexpr double kPropensityFloor = 1e-6;
constexpr std::size_t kScoreBlock = 256;

double discount(std::size_t position) { return 1.0 / std::log2(static_cast<double>(position) + 1.0); }

// AOA metrics where each held-out item carries a gain weight. With unit
// weights this is the plain Recall / NDCG.
MetricPair weighted_metrics(std::span<const ItemIndex> ranking, std::span<const ItemIndex> heldout,
                            const std::vector<double>& hit_weight, const std::vector<double>& ideal_weights,
                            std::size_t k, RecallDenominator denominator) {
    const std::size_t cutoff = std::min(k, ranking.size());
    double hit_gain = 0.0;
    double dcg = 0.0;
    for (std::size_t pos = 0; pos < cutoff; ++pos) {
        const auto it = std::lower_bound(heldout.begin(), heldout.end(), ranking[pos]);
        if (it == heldout.end() || *it != ranking[pos]) continue;
        const double w = hit_weight[static_cast<std::size_t>(it - heldout.begin())];
        hit_gain += w;
        dcg += w * discount(pos + 1);
    }

    // ideal_weights is sorted descending.
    const std::size_t ideal_count = std::min(k, ideal_weights.size());
    double idcg = 0.0;
    double ideal_gain = 0.0;
    for (std::size_t pos = 0; pos < ideal_count; ++pos) {
        idcg += ideal_weights[pos] * discount(pos + 1);
        ideal_gain += ideal_weights[pos];
    }
    if (denominator == RecallDenominator::Full) {
        ideal_gain = 0.0;
        for (double w : ideal_weights) ideal_gain += w;
    }
    return {hit_gain / ideal_gain, dcg / idcg};
}

MetricPair plain_metrics(std::span<const ItemIndex> ranking, std::span<const ItemIndex> heldout, std::size_t k,
                         RecallDenominator denominator) {
    const std::vector<double> ones(heldout.size(), 1.0);
    return weighted_metrics(ranking, heldout, ones, ones, k, denominator);
}

std::vector<ItemIndex> restrict_to(std::span<const ItemIndex> heldout, const ItemPartition& partition, bool head) {
    std::vector<ItemIndex> out;
    for (ItemIndex i : heldout)
        if (partition.is_head.at(static_cast<std::size_t>(i)) == head) out.push_back(i);
    return out;
}

}  // namespace

Eigen::VectorXd predict_scores(std::span<const ItemIndex> foldin, const WeightMatrix& b) {
    const Eigen::Index n = b.values.cols();
    Eigen::VectorXd scores = Eigen::VectorXd::Zero(n);
    for (ItemIndex j : foldin) {
        if (j < 0 || j >= b.values.rows()) throw std::out_of_range("fold-in item outside the weight matrix");
        scores += b.values.row(j).transpose();
    }
    return scores;
}

Ranking topn(const Eigen::VectorXd& scores, std::span<const ItemIndex> foldin, std::size_t n) {
    const auto items = static_cast<std::size_t>(scores.size());
    std::vector<bool> masked(items, false);
    for (ItemIndex j : foldin) {
        if (j < 0 || static_cast<std::size_t>(j) >= items) throw std::out_of_range("fold-in item outside the catalog");
        masked[static_cast<std::size_t>(j)] = true;
    }
    Ranking candidates;
    candidates.reserve(items);
    for (std::size_t i = 0; i < items; ++i)
        if (!masked[i]) candidates.push_back(static_cast<ItemIndex>(i));

    const auto better = [&](ItemIndex a, ItemIndex b) {
        const double sa = scores(a);
        const double sb = scores(b);
        return sa > sb || (sa == sb && a < b);
    };
    const std::size_t keep = std::min(n, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      better);
    candidates.resize(keep);
    return candidates;
}

std::optional<double> recall_at_k(std::span<const ItemIndex> ranking, std::span<const ItemIndex> heldout,
                                  std::size_t k, RecallDenominator denominator) {
    if (heldout.empty()) return std::nullopt;
    return plain_metrics(ranking, heldout, k, denominator).recall;
}

std::optional<double> ndcg_at_k(std::span<const ItemIndex> ranking, std::span<const ItemIndex> heldout,
                                std::size_t k) {
    if (heldout.empty()) return std::nullopt;
    return plain_metrics(ranking, heldout, k, RecallDenominator::Truncated).ndcg;
}

PropensityModel PropensityModel::from_popularity(std::span<const std::int64_t> popularity, double gamma) {
    if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be non-negative");
    PropensityModel model;
    model.gamma = gamma;
    model.propensity.resize(static_cast<Eigen::Index>(popularity.size()));
    std::int64_t max_count = 0;
    for (std::int64_t c : popularity) max_count = std::max(max_count, c);
    const double exponent = (gamma + 1.0) / 2.0;
    for (std::size_t i = 0; i < popularity.size(); ++i) {
        const double rel = max_count > 0 ? static_cast<double>(popularity[i]) / static_cast<double>(max_count) : 0.0;
        model.propensity(static_cast<Eigen::Index>(i)) = std::max(kPropensityFloor, std::pow(rel, exponent));
    }
    return model;
}

std::optional<MetricPair> unbiased_metrics(std::span<const ItemIndex> ranking, std::span<const ItemIndex> heldout,
                                           const PropensityModel& propensity, std::size_t k,
                                           RecallDenominator denominator, UnbiasedNormalization normalization) {
    if (heldout.empty()) return std::nullopt;
    std::vector<double> weights(heldout.size());
    for (std::size_t t = 0; t < heldout.size(); ++t) {
        const auto i = static_cast<Eigen::Index>(heldout[t]);
        if (i < 0 || i >= propensity.propensity.size()) throw std::out_of_range("held-out item without propensity");
        weights[t] = 1.0 / std::max(kPropensityFloor, propensity.propensity(i));
    }
    if (normalization == UnbiasedNormalization::FixedIdeal) {
        const std::vector<double> ones(heldout.size(), 1.0);
        return weighted_metrics(ranking, heldout, weights, ones, k, denominator);
    }
    std::vector<double> ideal = weights;
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    return weighted_metrics(ranking, heldout, weights, ideal, k, denominator);
}

GroupMetrics group_metrics(std::span<const ItemIndex> ranking, std::span<const ItemIndex> heldout,
                           const ItemPartition& partition, std::size_t k, RecallDenominator denominator) {
    GroupMetrics out;
    const auto head = restrict_to(heldout, partition, true);
    const auto tail = restrict_to(heldout, partition, false);
    if (!head.empty()) out.head = plain_metrics(ranking, head, k, denominator);
    if (!tail.empty()) out.tail = plain_metrics(ranking, tail, k, denominator);
    return out;
}

void EvalConfig::validate() const {
    if (ks.empty()) throw std::invalid_argument("at least one cutoff K is required");
    for (std::size_t k : ks)
        if (k == 0) throw std::invalid_argument("cutoffs must be positive");
    if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be non-negative");
    if (!(head_fraction >= 0.0 && head_fraction <= 1.0)) throw std::invalid_argument("head_fraction must lie in [0, 1]");
}

const MetricsAtK& MetricReport::at(std::size_t k) const {
    for (const auto& m : at_k)
        if (m.k == k) return m;
    throw std::out_of_range("metric report has no cutoff " + std::to_string(k));
}

MetricReport evaluate(const WeightMatrix& b, const InteractionMatrix& foldin, const InteractionMatrix& heldout,
                      std::span<const std::int64_t> popularity, const EvalConfig& config) {
    config.validate();
    const auto n = static_cast<Eigen::Index>(foldin.num_items());
    if (b.values.rows() != n || b.values.cols() != n) throw std::invalid_argument("weight matrix does not match the catalog");
    if (heldout.num_users() != foldin.num_users() || heldout.num_items() != foldin.num_items())
        throw std::invalid_argument("fold-in and held-out matrices differ in shape");
    if (popularity.size() != foldin.num_items()) throw std::invalid_argument("popularity vector does not match the catalog");

    const auto propensity = PropensityModel::from_popularity(popularity, config.gamma);
    const auto partition = head_tail_partition(popularity, config.head_fraction);
    const std::size_t depth = *std::max_element(config.ks.begin(), config.ks.end());

    struct Sums {
        MetricPair aoa, unbiased, head, tail;
        std::size_t users = 0, head_users = 0, tail_users = 0;
    };
    std::vector<Sums> sums(config.ks.size());

    Eigen::MatrixXd block;
    for (std::size_t start = 0; start < foldin.num_users(); start += kScoreBlock) {
        const std::size_t stop = std::min(foldin.num_users(), start + kScoreBlock);
        block.setZero(static_cast<Eigen::Index>(stop - start), n);
        for (std::size_t u = start; u < stop; ++u)
            for (ItemIndex j : foldin.row(u)) block(static_cast<Eigen::Index>(u - start), j) = 1.0;
        const Eigen::MatrixXd scores = block * b.values;

        for (std::size_t u = start; u < stop; ++u) {
            const auto held = heldout.row(u);
            if (held.empty()) continue;
            const Ranking ranking = topn(scores.row(static_cast<Eigen::Index>(u - start)).transpose(), foldin.row(u), depth);
            for (std::size_t c = 0; c < config.ks.size(); ++c) {
                const std::size_t k = config.ks[c];
                Sums& s = sums[c];
                const MetricPair aoa = plain_metrics(ranking, held, k, config.recall_denominator);
                const MetricPair unb = *unbiased_metrics(ranking, held, propensity, k, config.recall_denominator,
                                                         config.unbiased_normalization);
                const GroupMetrics groups = group_metrics(ranking, held, partition, k, config.recall_denominator);
                s.aoa.recall += aoa.recall;
                s.aoa.ndcg += aoa.ndcg;
                s.unbiased.recall += unb.recall;
                s.unbiased.ndcg += unb.ndcg;
                ++s.users;
                if (groups.head) {
                    s.head.recall += groups.head->recall;
                    s.head.ndcg += groups.head->ndcg;
                    ++s.head_users;
                }
                if (groups.tail) {
                    s.tail.recall += groups.tail->recall;
                    s.tail.ndcg += groups.tail->ndcg;
                    ++s.tail_users;
                }
            }
        }
    }

    const auto mean = [](double total, std::size_t count) { return count > 0 ? total / static_cast<double>(count) : 0.0; };
    MetricReport report;
    for (std::size_t c = 0; c < config.ks.size(); ++c) {
        const Sums& s = sums[c];
        MetricsAtK m;
        m.k = config.ks[c];
        m.recall_aoa = mean(s.aoa.recall, s.users);
        m.ndcg_aoa = mean(s.aoa.ndcg, s.users);
        m.recall_unbiased = mean(s.unbiased.recall, s.users);
        m.ndcg_unbiased = mean(s.unbiased.ndcg, s.users);
        m.recall_head = mean(s.head.recall, s.head_users);
        m.ndcg_head = mean(s.head.ndcg, s.head_users);
        m.recall_tail = mean(s.tail.recall, s.tail_users);
        m.ndcg_tail = mean(s.tail.ndcg, s.tail_users);
        m.users_aoa = s.users;
        m.users_head = s.head_users;
        m.users_tail = s.tail_users;
        report.at_k.push_back(m);
    }
    return report;
}

MetricReport evaluate_model(const WeightMatrix& b, const StrongSplit& split, const EvalConfig& config,
                            EvalTarget target) {
    const auto popularity = item_popularity(split.train);
    if (target == EvalTarget::Validation) return evaluate(b, split.val_foldin, split.val_heldout, popularity, config);
    return evaluate(b, split.test_foldin, split.test_heldout, popularity, config);
}

MetricReport evaluate_model(const WeightMatrix& b, const WeakSplit& split, const EvalConfig& config) {
    const auto popularity = item_popularity(split.train);
    return evaluate(b, split.train, split.test, popularity, config);
}

}  // namespace rlae
