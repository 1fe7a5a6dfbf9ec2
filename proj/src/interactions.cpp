#include "rlae/interactions.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string_view>
#include <unordered_map>

#include "rlae/random.hpp"

namespace rlae {

InteractionMatrix::InteractionMatrix(std::size_t num_items, std::vector<ItemRow> rows)
    : num_items_(num_items), rows_(std::move(rows)) {
    for (std::size_t u = 0; u < rows_.size(); ++u) {
        const ItemRow& r = rows_[u];
        for (std::size_t k = 0; k < r.size(); ++k) {
            if (r[k] < 0 || static_cast<std::size_t>(r[k]) >= num_items_)
                throw std::out_of_range("user " + std::to_string(u) + ": item index " +
                                        std::to_string(r[k]) + " outside [0, " +
                                        std::to_string(num_items_) + ")");
            if (k > 0 && r[k] <= r[k - 1])
                throw std::invalid_argument("user " + std::to_string(u) +
                                            ": item indices must be strictly increasing");
        }
        nnz_ += r.size();
    }
}

InteractionMatrix InteractionMatrix::from_unsorted(std::size_t num_items, std::vector<ItemRow> rows) {
    for (ItemRow& r : rows) {
        std::sort(r.begin(), r.end());
        r.erase(std::unique(r.begin(), r.end()), r.end());
    }
    return InteractionMatrix(num_items, std::move(rows));
}

bool InteractionMatrix::contains(std::size_t user, ItemIndex item) const {
    const ItemRow& r = rows_.at(user);
    return std::binary_search(r.begin(), r.end(), item);
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what) {}
};

enum class Separator { Comma, Tab, Whitespace };

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

Separator detect_separator(std::string_view line) {
    if (line.find(',') != std::string_view::npos) return Separator::Comma;
    if (line.find('\t') != std::string_view::npos) return Separator::Tab;
    return Separator::Whitespace;
}

std::vector<std::string_view> split_fields(std::string_view line, Separator sep) {
    std::vector<std::string_view> fields;
    if (sep == Separator::Whitespace) {
        std::size_t pos = 0;
        while (pos < line.size()) {
            const auto start = line.find_first_not_of(" \t", pos);
            if (start == std::string_view::npos) break;
            auto end = line.find_first_of(" \t", start);
            if (end == std::string_view::npos) end = line.size();
            fields.push_back(line.substr(start, end - start));
            pos = end;
        }
        return fields;
    }
    const char c = sep == Separator::Comma ? ',' : '\t';
    std::size_t start = 0;
    while (true) {
        const auto end = line.find(c, start);
        fields.push_back(trim(line.substr(start, end == std::string_view::npos ? end : end - start)));
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return fields;
}

}  // namespace

LoadedInteractions read_interactions(std::istream& in, const LoadOptions& options) {
    if (options.binarize_threshold && options.format != InputFormat::Triples)
        throw std::invalid_argument("a binarization threshold requires user-item-rating triples");

    const std::size_t min_fields = options.format == InputFormat::Triples ? 3 : 2;
    std::unordered_map<std::string, std::size_t> user_map;
    std::unordered_map<std::string, ItemIndex> item_map;
    LoadedInteractions out;
    std::vector<ItemRow> rows;
    std::optional<Separator> sep;

    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        if (!sep) {
            sep = detect_separator(line);
            if (options.has_header) continue;
        }

        const auto fields = split_fields(line, *sep);
        if (fields.size() < min_fields)
            throw ParseError(line_no, "expected at least " + std::to_string(min_fields) +
                                          " columns, found " + std::to_string(fields.size()));
        if (fields[0].empty() || fields[1].empty()) throw ParseError(line_no, "empty user or item id");

        if (options.format == InputFormat::Triples) {
            double rating = 0.0;
            const auto f = fields[2];
            const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), rating);
            if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(rating))
                throw ParseError(line_no, "invalid rating '" + std::string(f) + "'");
            if (options.binarize_threshold && rating < *options.binarize_threshold) continue;
        }

        const std::string user(fields[0]);
        const std::string item(fields[1]);
        auto [uit, new_user] = user_map.try_emplace(user, out.user_ids.size());
        if (new_user) {
            out.user_ids.push_back(user);
            rows.emplace_back();
        }
        auto [iit, new_item] = item_map.try_emplace(item, static_cast<ItemIndex>(out.item_ids.size()));
        if (new_item) out.item_ids.push_back(item);
        rows[uit->second].push_back(iit->second);
    }
    if (in.bad()) throw std::runtime_error("read error after line " + std::to_string(line_no));

    InteractionMatrix matrix = InteractionMatrix::from_unsorted(out.item_ids.size(), std::move(rows));
    if (options.min_user_interactions > 0) {
        // Keep qualifying users, then compact item ids preserving their order.
        std::vector<std::string> user_ids;
        std::vector<ItemRow> kept;
        for (std::size_t u = 0; u < matrix.num_users(); ++u) {
            if (matrix.row(u).size() < options.min_user_interactions) continue;
            user_ids.push_back(out.user_ids[u]);
            kept.emplace_back(matrix.row(u).begin(), matrix.row(u).end());
        }
        std::vector<bool> used(out.item_ids.size(), false);
        for (const ItemRow& r : kept)
            for (ItemIndex i : r) used[static_cast<std::size_t>(i)] = true;
        std::vector<ItemIndex> remap(out.item_ids.size(), -1);
        std::vector<std::string> item_ids;
        for (std::size_t i = 0; i < used.size(); ++i) {
            if (!used[i]) continue;
            remap[i] = static_cast<ItemIndex>(item_ids.size());
            item_ids.push_back(std::move(out.item_ids[i]));
        }
        for (ItemRow& r : kept)
            for (ItemIndex& i : r) i = remap[static_cast<std::size_t>(i)];
        out.user_ids = std::move(user_ids);
        out.item_ids = std::move(item_ids);
        matrix = InteractionMatrix::from_unsorted(out.item_ids.size(), std::move(kept));
    }
    if (matrix.nnz() == 0) throw std::runtime_error("dataset contains no interactions");
    out.matrix = std::move(matrix);
    return out;
}

LoadedInteractions load_interactions(const std::string& path, const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    try {
        return read_interactions(in, options);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Splits

std::size_t fraction_ceil(double fraction, std::size_t count) {
    const double exact = fraction * static_cast<double>(count);
    return static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
}

namespace {

std::size_t rounded_share(double fraction, std::size_t count) {
    return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(count)));
}

InteractionMatrix select_rows(const InteractionMatrix& x, const std::vector<std::size_t>& users) {
    std::vector<ItemRow> rows;
    rows.reserve(users.size());
    for (std::size_t u : users) {
        const auto r = x.row(u);
        rows.emplace_back(r.begin(), r.end());
    }
    return InteractionMatrix(x.num_items(), std::move(rows));
}

// Splits each user's items into fold-in / held-out parts.
void foldin_split(const InteractionMatrix& x, const std::vector<std::size_t>& users,
                  double foldin_fraction, Rng& rng, InteractionMatrix& foldin,
                  InteractionMatrix& heldout) {
    std::vector<ItemRow> in_rows;
    std::vector<ItemRow> out_rows;
    for (std::size_t u : users) {
        const auto r = x.row(u);
        ItemRow items(r.begin(), r.end());
        if (items.size() < 2) {
            in_rows.push_back(std::move(items));
            out_rows.emplace_back();
            continue;
        }
        rng.shuffle(std::span<ItemIndex>(items));
        const std::size_t keep =
            std::clamp<std::size_t>(rounded_share(foldin_fraction, items.size()), 1, items.size() - 1);
        ItemRow held(items.begin() + static_cast<std::ptrdiff_t>(keep), items.end());
        items.resize(keep);
        std::sort(items.begin(), items.end());
        std::sort(held.begin(), held.end());
        in_rows.push_back(std::move(items));
        out_rows.push_back(std::move(held));
    }
    foldin = InteractionMatrix(x.num_items(), std::move(in_rows));
    heldout = InteractionMatrix(x.num_items(), std::move(out_rows));
}

}  // namespace

StrongSplit strong_split(const InteractionMatrix& x, double heldout_user_fraction,
                         double foldin_fraction, std::uint64_t seed) {
    const std::size_t m = x.num_users();
    if (m < 5) throw std::invalid_argument("strong split needs at least 5 users");
    if (!(heldout_user_fraction > 0.0 && heldout_user_fraction < 1.0))
        throw std::invalid_argument("heldout_user_fraction must lie in (0, 1)");
    if (!(foldin_fraction > 0.0 && foldin_fraction < 1.0))
        throw std::invalid_argument("foldin_fraction must lie in (0, 1)");

    Rng rng(seed);
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));

    // At least one validation and one test user.
    const std::size_t heldout = std::clamp<std::size_t>(rounded_share(heldout_user_fraction, m), 2, m - 1);
    const std::size_t n_val = heldout / 2;
    const std::size_t n_train = m - heldout;

    StrongSplit split;
    split.train_users.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.val_users.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                           order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    split.test_users.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
    std::sort(split.train_users.begin(), split.train_users.end());
    std::sort(split.val_users.begin(), split.val_users.end());
    std::sort(split.test_users.begin(), split.test_users.end());

    split.train = select_rows(x, split.train_users);
    foldin_split(x, split.val_users, foldin_fraction, rng, split.val_foldin, split.val_heldout);
    foldin_split(x, split.test_users, foldin_fraction, rng, split.test_foldin, split.test_heldout);
    return split;
}

WeakSplit weak_split(const InteractionMatrix& x, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction >= 0.0 && test_fraction <= 1.0))
        throw std::invalid_argument("test_fraction must lie in [0, 1]");
    Rng rng(seed);
    std::vector<ItemRow> train_rows;
    std::vector<ItemRow> test_rows;
    train_rows.reserve(x.num_users());
    test_rows.reserve(x.num_users());
    for (const ItemRow& r : x.rows()) {
        ItemRow items = r;
        rng.shuffle(std::span<ItemIndex>(items));
        std::size_t n_test = std::min(rounded_share(test_fraction, items.size()), items.size());
        // Keep one training item per user unless everything is requested.
        if (test_fraction < 1.0 && n_test == items.size() && !items.empty()) n_test = items.size() - 1;
        ItemRow test(items.end() - static_cast<std::ptrdiff_t>(n_test), items.end());
        items.resize(items.size() - n_test);
        std::sort(items.begin(), items.end());
        std::sort(test.begin(), test.end());
        train_rows.push_back(std::move(items));
        test_rows.push_back(std::move(test));
    }
    return {InteractionMatrix(x.num_items(), std::move(train_rows)),
            InteractionMatrix(x.num_items(), std::move(test_rows))};
}

// ---------------------------------------------------------------------------
// Popularity

std::vector<std::int64_t> item_popularity(const InteractionMatrix& x) {
    std::vector<std::int64_t> counts(x.num_items(), 0);
    for (const ItemRow& r : x.rows())
        for (ItemIndex i : r) ++counts[static_cast<std::size_t>(i)];
    return counts;
}

double gini_index(std::span<const std::int64_t> popularity) {
    if (popularity.empty()) throw std::invalid_argument("gini_index of an empty vector");
    std::vector<std::int64_t> sorted(popularity.begin(), popularity.end());
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() < 0) throw std::invalid_argument("gini_index requires non-negative counts");
    const double total = std::accumulate(sorted.begin(), sorted.end(), 0.0,
                                         [](double acc, std::int64_t c) { return acc + static_cast<double>(c); });
    if (total <= 0.0) throw std::invalid_argument("gini_index requires at least one positive count");

    // Sum_ij |x_i - x_j| / (2 n^2 mean) evaluated on the sorted sequence.
    const double n = static_cast<double>(sorted.size());
    double weighted = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i)
        weighted += (2.0 * static_cast<double>(i + 1) - n - 1.0) * static_cast<double>(sorted[i]);
    return weighted / (n * total);
}

std::vector<ItemIndex> popularity_order(std::span<const std::int64_t> popularity) {
    std::vector<ItemIndex> order(popularity.size());
    std::iota(order.begin(), order.end(), ItemIndex{0});
    std::stable_sort(order.begin(), order.end(), [&](ItemIndex a, ItemIndex b) {
        return popularity[static_cast<std::size_t>(a)] > popularity[static_cast<std::size_t>(b)];
    });
    return order;
}

ItemPartition head_tail_partition(std::span<const std::int64_t> popularity, double head_fraction) {
    if (!(head_fraction >= 0.0 && head_fraction <= 1.0))
        throw std::invalid_argument("head_fraction must lie in [0, 1]");
    const std::size_t n = popularity.size();
    const std::size_t head_size = std::min(fraction_ceil(head_fraction, n), n);
    const auto order = popularity_order(popularity);

    ItemPartition part;
    part.is_head.assign(n, false);
    for (std::size_t k = 0; k < head_size; ++k) part.is_head[static_cast<std::size_t>(order[k])] = true;
    for (std::size_t i = 0; i < n; ++i)
        (part.is_head[i] ? part.head : part.tail).push_back(static_cast<ItemIndex>(i));
    return part;
}

DatasetStats dataset_stats(const InteractionMatrix& x) {
    DatasetStats s;
    s.num_users = x.num_users();
    s.num_items = x.num_items();
    s.num_ratings = x.nnz();
    const double cells = static_cast<double>(s.num_users) * static_cast<double>(s.num_items);
    s.density = cells > 0 ? static_cast<double>(s.num_ratings) / cells : 0.0;
    if (s.num_ratings > 0) {
        const auto pop = item_popularity(x);
        s.gini_item = gini_index(pop);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Synthetic data

InteractionMatrix synthetic_zipf(const SyntheticConfig& config) {
    const std::size_t n = config.num_items;
    if (n == 0 || config.num_users == 0) throw std::invalid_argument("synthetic data needs users and items");
    if (config.num_clusters == 0) throw std::invalid_argument("num_clusters must be positive");
    if (!(config.mean_items_per_user >= 1.0) || config.mean_items_per_user > static_cast<double>(n) / 2)
        throw std::invalid_argument("mean_items_per_user must lie in [1, num_items / 2]");

    Rng rng(config.seed);

    // Popularity rank is a random permutation so that clusters mix head and tail.
    std::vector<std::size_t> rank(n);
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(rank));
    std::vector<std::size_t> cluster(n);
    for (std::size_t i = 0; i < n; ++i) cluster[i] = rng.below(config.num_clusters);

    std::vector<std::vector<double>> cumulative(config.num_clusters, std::vector<double>(n));
    for (std::size_t c = 0; c < config.num_clusters; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double w = std::pow(static_cast<double>(rank[i] + 1), -config.zipf_exponent);
            if (cluster[i] == c) w *= config.cluster_affinity;
            acc += w;
            cumulative[c][i] = acc;
        }
    }

    std::vector<ItemRow> rows(config.num_users);
    std::vector<bool> taken(n);
    for (ItemRow& row : rows) {
        const std::size_t c = rng.below(config.num_clusters);
        // Uniform length in [mean/2, 3 mean/2], at least 2.
        const double lo = config.mean_items_per_user * 0.5;
        const auto length = std::max<std::size_t>(
            2, static_cast<std::size_t>(std::llround(lo + rng.uniform() * config.mean_items_per_user)));
        const auto& cum = cumulative[c];
        std::fill(taken.begin(), taken.end(), false);
        while (row.size() < std::min(length, n)) {
            const double target = rng.uniform() * cum.back();
            const auto it = std::upper_bound(cum.begin(), cum.end(), target);
            const auto i = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cum.begin(), static_cast<std::ptrdiff_t>(n - 1)));
            if (taken[i]) continue;
            taken[i] = true;
            row.push_back(static_cast<ItemIndex>(i));
        }
    }
    return InteractionMatrix::from_unsorted(n, std::move(rows));
}

void write_interactions(std::ostream& out, const InteractionMatrix& x, std::span<const std::size_t> user_labels) {
    if (!user_labels.empty() && user_labels.size() != x.num_users())
        throw std::invalid_argument("user label count does not match the matrix");
    for (std::size_t u = 0; u < x.num_users(); ++u) {
        const std::size_t label = user_labels.empty() ? u : user_labels[u];
        for (ItemIndex i : x.row(u)) out << label << ' ' << i << '\n';
    }
}

}  // namespace rlae
