#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlae/eval.hpp"
#include "rlae/interactions.hpp"
#include "rlae/solvers.hpp"

namespace rlae {

inline constexpr const char* kVersion = "0.3.0";

enum class Protocol { Strong, Weak };

std::string_view protocol_name(Protocol p);
std::optional<Protocol> parse_protocol(std::string_view name);

struct DataSource {
    std::string path;
    InputFormat format = InputFormat::Pairs;
    std::optional<double> binarize_threshold;
    bool has_header = false;
    std::size_t min_user_interactions = 0;

    LoadOptions load_options() const { return {format, binarize_threshold, has_header, min_user_interactions}; }
};

struct SplitConfig {
    Protocol protocol = Protocol::Strong;
    std::uint64_t seed = 0;
    double heldout_user_fraction = 0.2;
    double foldin_fraction = 0.8;
    double test_fraction = 0.2;
};

/// Either split, plus the views every protocol needs.
struct ExperimentSplit {
    Protocol protocol = Protocol::Strong;
    std::optional<StrongSplit> strong;
    std::optional<WeakSplit> weak;

    const InteractionMatrix& train() const;
    /// Set used for model selection: validation (strong) or test (weak).
    MetricReport evaluate_selection(const WeightMatrix& b, const EvalConfig& config) const;
    MetricReport evaluate_test(const WeightMatrix& b, const EvalConfig& config) const;
};

ExperimentSplit make_split(const InteractionMatrix& x, const SplitConfig& config);

/// Writes the split parts as "user item" text files plus split_manifest.json.
void write_split(const std::filesystem::path& dir, const ExperimentSplit& split, const SplitConfig& config);

std::vector<double> default_lambda_grid();
std::vector<double> default_unit_grid();

struct ExperimentConfig {
    DataSource data;
    SplitConfig split;
    std::vector<Model> models{Model::LAE, Model::EASE, Model::DLAE, Model::EDLAE, Model::RLAE, Model::RDLAE};
    std::vector<double> lambdas = default_lambda_grid();
    std::vector<double> dropout_ps = default_unit_grid();
    std::vector<double> xis = default_unit_grid();
    EvalConfig eval;
    /// Cutoff of the NDCG used for model selection; 0 picks 100 (strong) or 20 (weak).
    std::size_t selection_k = 0;
    std::filesystem::path output_dir = "runs";
    std::string run_id;
    bool save_weights = false;
    double max_memory_gb = 16.0;
    std::size_t workers = 1;

    void validate() const;
    std::size_t effective_selection_k() const;
    std::string effective_run_id() const;
};

struct GridPoint {
    SolverConfig solver;
    double constrained_fraction = 0.0;
    double seconds = 0.0;
    MetricReport selection;
    MetricReport test;
};

struct ExperimentResult {
    std::filesystem::path run_dir;
    std::vector<GridPoint> grid;
    /// Index into `grid` of the selected configuration per model, in model order.
    std::vector<std::pair<Model, std::size_t>> best;
    std::size_t factorizations = 0;
    nlohmann::json manifest;
};

/// Grid search over (lambda, p, xi) for each model. One precision matrix is
/// built per distinct (lambda, p) pair and shared by every model and xi that
/// needs it. Writes report.csv, best.csv and manifest.json under
/// output_dir / run_id.
ExperimentResult run_experiment(const ExperimentConfig& config);
ExperimentResult run_experiment(const ExperimentConfig& config, const InteractionMatrix& data);

/// Throws when G, P and B for `n` items exceed the configured budget.
void check_memory_budget(std::size_t n, double max_memory_gb, std::size_t workers);

struct SpectralConfig {
    DataSource data;
    std::vector<double> lambdas{1.0, 10.0, 100.0, 1000.0};
    double group_fraction = 0.2;
    double head_fraction = 0.2;
    std::size_t popular_samples = 20;
    std::size_t unpopular_samples = 80;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "runs";
    std::string run_id = "spectral";
    double max_memory_gb = 16.0;
};

struct SpectralExport {
    std::filesystem::path run_dir;
    std::vector<std::filesystem::path> curve_files;
    std::filesystem::path top_heatmap;
    std::filesystem::path bottom_heatmap;
    std::vector<ItemIndex> sampled_items;
};

/// Seeded sample of popular (head) then unpopular (tail) items, each group
/// ordered by descending popularity.
std::vector<ItemIndex> sample_items_by_popularity(std::span<const std::int64_t> popularity, double head_fraction,
                                                  std::size_t popular, std::size_t unpopular, std::uint64_t seed);

SpectralExport export_spectral(const SpectralConfig& config);
SpectralExport export_spectral(const SpectralConfig& config, const InteractionMatrix& data);

InteractionMatrix load_dataset(const DataSource& source);

nlohmann::json to_json(const MetricReport& report);
nlohmann::json to_json(const DatasetStats& stats);

std::string report_csv_header(const std::vector<std::size_t>& ks);
std::string report_csv_row(const SolverConfig& solver, std::string_view split, std::uint64_t seed,
                           double constrained_fraction, const MetricReport& report);

}  // namespace rlae
