#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rlae {

using ItemIndex = std::int32_t;
using ItemRow = std::vector<ItemIndex>;

/// Binary implicit-feedback matrix stored as per-user sorted item lists.
///
/// Every row holds strictly increasing item indices in [0, num_items). The
/// constructor validates this; instances are immutable afterwards.
class InteractionMatrix {
public:
    InteractionMatrix() = default;
    InteractionMatrix(std::size_t num_items, std::vector<ItemRow> rows);

    /// Sorts and deduplicates each row before validating the range.
    static InteractionMatrix from_unsorted(std::size_t num_items, std::vector<ItemRow> rows);

    std::size_t num_users() const { return rows_.size(); }
    std::size_t num_items() const { return num_items_; }
    std::size_t nnz() const { return nnz_; }

    std::span<const ItemIndex> row(std::size_t user) const { return rows_.at(user); }
    const std::vector<ItemRow>& rows() const { return rows_; }

    bool contains(std::size_t user, ItemIndex item) const;

    friend bool operator==(const InteractionMatrix&, const InteractionMatrix&) = default;

private:
    std::size_t num_items_ = 0;
    std::size_t nnz_ = 0;
    std::vector<ItemRow> rows_;
};

enum class InputFormat { Pairs, Triples };

struct LoadOptions {
    InputFormat format = InputFormat::Pairs;
    /// Ratings strictly below the threshold are dropped (triples only).
    std::optional<double> binarize_threshold;
    /// Skip the first non-comment line (column names).
    bool has_header = false;
    /// Users with fewer distinct items are dropped after binarization; items
    /// left without interactions are removed from the catalog.
    std::size_t min_user_interactions = 0;
};

/// Parsed dataset plus the dense id remapping (first-occurrence order).
struct LoadedInteractions {
    InteractionMatrix matrix;
    std::vector<std::string> user_ids;
    std::vector<std::string> item_ids;
};

LoadedInteractions read_interactions(std::istream& in, const LoadOptions& options);
LoadedInteractions load_interactions(const std::string& path, const LoadOptions& options);

/// Users partitioned into train / validation / test. Validation and test users
/// are further split into fold-in and held-out items over the same catalog.
struct StrongSplit {
    InteractionMatrix train;
    InteractionMatrix val_foldin;
    InteractionMatrix val_heldout;
    InteractionMatrix test_foldin;
    InteractionMatrix test_heldout;
    // Original user index of each row, per part.
    std::vector<std::size_t> train_users;
    std::vector<std::size_t> val_users;
    std::vector<std::size_t> test_users;
};

struct WeakSplit {
    InteractionMatrix train;
    InteractionMatrix test;
};

StrongSplit strong_split(const InteractionMatrix& x, double heldout_user_fraction,
                         double foldin_fraction, std::uint64_t seed);

WeakSplit weak_split(const InteractionMatrix& x, double test_fraction, std::uint64_t seed);

std::vector<std::int64_t> item_popularity(const InteractionMatrix& x);

/// Gini coefficient of a popularity distribution (0 for uniform counts).
double gini_index(std::span<const std::int64_t> popularity);

struct ItemPartition {
    std::vector<ItemIndex> head;
    std::vector<ItemIndex> tail;
    std::vector<bool> is_head;
};

/// The ceil(head_fraction * n) most popular items form the head; ties go to
/// the lower index.
ItemPartition head_tail_partition(std::span<const std::int64_t> popularity, double head_fraction);

/// Item indices ordered by descending popularity, ties by lower index.
std::vector<ItemIndex> popularity_order(std::span<const std::int64_t> popularity);

struct DatasetStats {
    std::size_t num_users = 0;
    std::size_t num_items = 0;
    std::size_t num_ratings = 0;
    double density = 0.0;
    double gini_item = 0.0;
};

DatasetStats dataset_stats(const InteractionMatrix& x);

/// Synthetic implicit feedback with Zipf item popularity and clustered user
/// tastes, used for benchmarks and trend checks.
struct SyntheticConfig {
    std::size_t num_users = 2000;
    std::size_t num_items = 500;
    double mean_items_per_user = 40.0;
    double zipf_exponent = 1.2;
    std::size_t num_clusters = 10;
    /// Multiplicative boost for items of the user's own cluster.
    double cluster_affinity = 8.0;
    std::uint64_t seed = 0;
};

InteractionMatrix synthetic_zipf(const SyntheticConfig& config);

/// Writes one "user item" line per interaction using dense indices.
void write_interactions(std::ostream& out, const InteractionMatrix& x,
                        std::span<const std::size_t> user_labels = {});

/// Smallest k with k >= fraction * count, robust to representation error.
std::size_t fraction_ceil(double fraction, std::size_t count);

}  // namespace rlae
