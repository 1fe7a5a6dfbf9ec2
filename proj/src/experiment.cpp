#include "rlae/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <future>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "rlae/gram.hpp"
#include "rlae/matrix_io.hpp"
#include "rlae/random.hpp"
#include "rlae/spectral.hpp"

namespace rlae {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

std::string fmt_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string fmt_short(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot create " + path.string());
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    auto out = open_output(path);
    out << text;
}

nlohmann::json matrix_summary(const InteractionMatrix& x) {
    return {{"users", x.num_users()}, {"items", x.num_items()}, {"interactions", x.nnz()}};
}

bool model_selected(const ExperimentConfig& config, Model m) {
    return std::find(config.models.begin(), config.models.end(), m) != config.models.end();
}

}  // namespace

std::string_view protocol_name(Protocol p) { return p == Protocol::Strong ? "strong" : "weak"; }

std::optional<Protocol> parse_protocol(std::string_view name) {
    if (name == "strong") return Protocol::Strong;
    if (name == "weak") return Protocol::Weak;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Splits

const InteractionMatrix& ExperimentSplit::train() const { return strong ? strong->train : weak->train; }

MetricReport ExperimentSplit::evaluate_selection(const WeightMatrix& b, const EvalConfig& config) const {
    if (strong) return evaluate_model(b, *strong, config, EvalTarget::Validation);
    return evaluate_model(b, *weak, config);
}

MetricReport ExperimentSplit::evaluate_test(const WeightMatrix& b, const EvalConfig& config) const {
    if (strong) return evaluate_model(b, *strong, config, EvalTarget::Test);
    return evaluate_model(b, *weak, config);
}

ExperimentSplit make_split(const InteractionMatrix& x, const SplitConfig& config) {
    ExperimentSplit s;
    s.protocol = config.protocol;
    if (config.protocol == Protocol::Strong)
        s.strong = strong_split(x, config.heldout_user_fraction, config.foldin_fraction, config.seed);
    else
        s.weak = weak_split(x, config.test_fraction, config.seed);
    return s;
}

void write_split(const fs::path& dir, const ExperimentSplit& split, const SplitConfig& config) {
    fs::create_directories(dir);
    nlohmann::json manifest{{"protocol", protocol_name(config.protocol)}, {"seed", config.seed}};
    const auto emit = [&](const std::string& name, const InteractionMatrix& x, const std::vector<std::size_t>& users) {
        auto out = open_output(dir / (name + ".txt"));
        write_interactions(out, x, users);
        manifest["parts"][name] = matrix_summary(x);
    };
    if (split.strong) {
        const StrongSplit& s = *split.strong;
        manifest["heldout_user_fraction"] = config.heldout_user_fraction;
        manifest["foldin_fraction"] = config.foldin_fraction;
        emit("train", s.train, s.train_users);
        emit("val_foldin", s.val_foldin, s.val_users);
        emit("val_heldout", s.val_heldout, s.val_users);
        emit("test_foldin", s.test_foldin, s.test_users);
        emit("test_heldout", s.test_heldout, s.test_users);
    } else {
        manifest["test_fraction"] = config.test_fraction;
        emit("train", split.weak->train, {});
        emit("test", split.weak->test, {});
    }
    write_text(dir / "split_manifest.json", manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Configuration

std::vector<double> default_lambda_grid() { return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 20}; }

std::vector<double> default_unit_grid() {
    std::vector<double> grid;
    for (int k = 1; k <= 9; ++k) grid.push_back(k / 10.0);
    return grid;
}

void ExperimentConfig::validate() const {
    if (models.empty()) throw std::invalid_argument("no models selected");
    if (lambdas.empty()) throw std::invalid_argument("lambda grid is empty");
    for (double l : lambdas)
        if (!(l > 0.0)) throw std::invalid_argument("lambda grid values must be positive");
    const bool dropout = std::any_of(models.begin(), models.end(), uses_dropout);
    const bool relaxed = std::any_of(models.begin(), models.end(), uses_xi);
    if (dropout && dropout_ps.empty()) throw std::invalid_argument("dropout grid is empty");
    if (dropout)
        for (double p : dropout_ps)
            if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout grid values must lie in [0, 1)");
    if (relaxed && xis.empty()) throw std::invalid_argument("xi grid is empty");
    if (relaxed)
        for (double x : xis)
            if (!(x >= 0.0)) throw std::invalid_argument("xi grid values must be non-negative");
    eval.validate();
    const std::size_t k = effective_selection_k();
    if (std::find(eval.ks.begin(), eval.ks.end(), k) == eval.ks.end())
        throw std::invalid_argument("selection cutoff " + std::to_string(k) + " is not among the evaluated cutoffs");
    if (workers == 0) throw std::invalid_argument("workers must be positive");
    if (!(max_memory_gb > 0.0)) throw std::invalid_argument("memory budget must be positive");
}

std::size_t ExperimentConfig::effective_selection_k() const {
    if (selection_k != 0) return selection_k;
    return split.protocol == Protocol::Strong ? 100 : 20;
}

std::string ExperimentConfig::effective_run_id() const {
    if (!run_id.empty()) return run_id;
    return std::string(protocol_name(split.protocol)) + "-seed" + std::to_string(split.seed);
}

void check_memory_budget(std::size_t n, double max_memory_gb, std::size_t workers) {
    // G, the factorization workspace, P, plus one B per worker.
    const double required = dense_matrix_bytes(n) * static_cast<double>(3 + std::max<std::size_t>(workers, 1));
    const double budget = max_memory_gb * 1024.0 * 1024.0 * 1024.0;
    if (required > budget) {
        std::ostringstream msg;
        msg << "catalog of " << n << " items needs about " << fmt_short(required / (1024.0 * 1024.0 * 1024.0))
            << " GiB of dense matrices (8 n^2 bytes each), over the budget of " << fmt_short(max_memory_gb) << " GiB";
        throw std::runtime_error(msg.str());
    }
}

InteractionMatrix load_dataset(const DataSource& source) {
    return load_interactions(source.path, source.load_options()).matrix;
}

// ---------------------------------------------------------------------------
// Reports

nlohmann::json to_json(const MetricReport& report) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& m : report.at_k) {
        out.push_back({{"k", m.k},
                       {"recall_aoa", m.recall_aoa},
                       {"ndcg_aoa", m.ndcg_aoa},
                       {"recall_unbiased", m.recall_unbiased},
                       {"ndcg_unbiased", m.ndcg_unbiased},
                       {"recall_head", m.recall_head},
                       {"ndcg_head", m.ndcg_head},
                       {"recall_tail", m.recall_tail},
                       {"ndcg_tail", m.ndcg_tail},
                       {"users_aoa", m.users_aoa},
                       {"users_head", m.users_head},
                       {"users_tail", m.users_tail}});
    }
    return out;
}

nlohmann::json to_json(const DatasetStats& stats) {
    return {{"users", stats.num_users},
            {"items", stats.num_items},
            {"ratings", stats.num_ratings},
            {"density", stats.density},
            {"gini_item", stats.gini_item}};
}

std::string report_csv_header(const std::vector<std::size_t>& ks) {
    std::string h = "model,lambda,p,xi,split,seed,constrained_fraction";
    for (std::size_t k : ks) {
        const std::string s = "@" + std::to_string(k);
        for (const char* name : {"recall_aoa", "ndcg_aoa", "recall_unbiased", "ndcg_unbiased", "recall_head",
                                 "ndcg_head", "recall_tail", "ndcg_tail", "users_aoa", "users_head", "users_tail"})
            h += std::string(",") + name + s;
    }
    return h;
}

std::string report_csv_row(const SolverConfig& solver, std::string_view split, std::uint64_t seed,
                           double constrained_fraction, const MetricReport& report) {
    std::string row(model_name(solver.model));
    row += "," + fmt_num(solver.lambda);
    row += "," + (uses_dropout(solver.model) ? fmt_num(solver.dropout_p) : std::string());
    row += "," + (uses_xi(solver.model) ? fmt_num(solver.xi) : std::string());
    row += "," + std::string(split) + "," + std::to_string(seed) + "," + fmt_num(constrained_fraction);
    for (const auto& m : report.at_k) {
        for (double v : {m.recall_aoa, m.ndcg_aoa, m.recall_unbiased, m.ndcg_unbiased, m.recall_head, m.ndcg_head,
                         m.recall_tail, m.ndcg_tail})
            row += "," + fmt_num(v);
        for (std::size_t c : {m.users_aoa, m.users_head, m.users_tail}) row += "," + std::to_string(c);
    }
    return row;
}

// ---------------------------------------------------------------------------
// Grid search

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    return run_experiment(config, load_dataset(config.data));
}

ExperimentResult run_experiment(const ExperimentConfig& config, const InteractionMatrix& data) {
    config.validate();
    const auto run_start = Clock::now();
    check_memory_budget(data.num_items(), config.max_memory_gb, config.workers + (config.save_weights ? config.models.size() : 0));

    ExperimentResult result;
    result.run_dir = config.output_dir / config.effective_run_id();
    fs::create_directories(result.run_dir);

    const auto split_start = Clock::now();
    const ExperimentSplit split = make_split(data, config.split);
    const double split_seconds = seconds_since(split_start);

    const auto gram_start = Clock::now();
    const GramMatrix g = gram(split.train());
    const double gram_seconds = seconds_since(gram_start);

    const bool plain = model_selected(config, Model::LAE) || model_selected(config, Model::EASE) ||
                       model_selected(config, Model::RLAE);
    const bool dropout = std::any_of(config.models.begin(), config.models.end(), uses_dropout);

    // Dropout probabilities per lambda; 0 serves the ridge models.
    std::vector<double> ps;
    if (plain) ps.push_back(0.0);
    if (dropout)
        for (double p : config.dropout_ps)
            if (std::find(ps.begin(), ps.end(), p) == ps.end()) ps.push_back(p);
    const auto dropout_listed = [&](double p) {
        return dropout && std::find(config.dropout_ps.begin(), config.dropout_ps.end(), p) != config.dropout_ps.end();
    };

    const std::size_t selection_k = config.effective_selection_k();
    std::map<Model, std::pair<std::size_t, Eigen::MatrixXd>> kept_weights;
    double factorization_seconds = 0.0;

    for (double lambda : config.lambdas) {
        for (double p : ps) {
            std::vector<SolverConfig> tasks;
            for (Model m : config.models) {
                const bool wants = uses_dropout(m) ? dropout_listed(p) : p == 0.0;
                if (!wants) continue;
                if (uses_xi(m)) {
                    for (double xi : config.xis) tasks.push_back({m, lambda, p, xi});
                } else {
                    tasks.push_back({m, lambda, p, 0.0});
                }
            }
            if (tasks.empty()) continue;

            const auto fact_start = Clock::now();
            const RegDiagonal reg = dropout_diagonal(g, p, lambda);
            const PrecisionMatrix prec = precision(g, reg);
            ++result.factorizations;
            factorization_seconds += seconds_since(fact_start);

            struct TaskOutput {
                GridPoint point;
                Eigen::MatrixXd weights;
            };
            const auto run_task = [&](const SolverConfig& sc) {
                const auto start = Clock::now();
                SolverOutput out = solve_with_precision(sc, prec, reg);
                TaskOutput t;
                t.point.solver = sc;
                if (!uses_dropout(sc.model)) t.point.solver.dropout_p = 0.0;
                if (!uses_xi(sc.model)) t.point.solver.xi = 0.0;
                t.point.constrained_fraction = out.constrained_fraction();
                t.point.selection = split.evaluate_selection(out.B, config.eval);
                t.point.test = split.strong ? split.evaluate_test(out.B, config.eval) : t.point.selection;
                t.point.seconds = seconds_since(start);
                if (config.save_weights) t.weights = std::move(out.B.values);
                return t;
            };

            for (std::size_t first = 0; first < tasks.size(); first += config.workers) {
                const std::size_t last = std::min(tasks.size(), first + config.workers);
                std::vector<TaskOutput> outputs;
                if (config.workers == 1) {
                    outputs.push_back(run_task(tasks[first]));
                } else {
                    std::vector<std::future<TaskOutput>> futures;
                    for (std::size_t t = first; t < last; ++t)
                        futures.push_back(std::async(std::launch::async, run_task, std::cref(tasks[t])));
                    for (auto& f : futures) outputs.push_back(f.get());
                }
                for (auto& t : outputs) {
                    result.grid.push_back(std::move(t.point));
                    if (!config.save_weights) continue;
                    const GridPoint& gp = result.grid.back();
                    auto it = kept_weights.find(gp.solver.model);
                    const double score = gp.selection.at(selection_k).ndcg_aoa;
                    if (it == kept_weights.end() ||
                        score > result.grid[it->second.first].selection.at(selection_k).ndcg_aoa)
                        kept_weights[gp.solver.model] = {result.grid.size() - 1, std::move(t.weights)};
                }
            }
        }
    }

    // Report rows in (model, lambda, p, xi) order.
    std::vector<std::size_t> order(result.grid.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto key = [&](std::size_t i) {
        const SolverConfig& s = result.grid[i].solver;
        return std::make_tuple(static_cast<int>(s.model), s.lambda, s.dropout_p, s.xi);
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });

    const std::string selection_split = split.strong ? "val" : "test";
    {
        auto csv = open_output(result.run_dir / "report.csv");
        csv << report_csv_header(config.eval.ks) << '\n';
        for (std::size_t i : order) {
            const GridPoint& gp = result.grid[i];
            csv << report_csv_row(gp.solver, selection_split, config.split.seed, gp.constrained_fraction, gp.selection)
                << '\n';
        }
    }

    for (Model m : config.models) {
        std::optional<std::size_t> best;
        for (std::size_t i : order) {
            const GridPoint& gp = result.grid[i];
            if (gp.solver.model != m) continue;
            if (!best || gp.selection.at(selection_k).ndcg_aoa > result.grid[*best].selection.at(selection_k).ndcg_aoa)
                best = i;
        }
        if (best) result.best.emplace_back(m, *best);
    }

    nlohmann::json best_json = nlohmann::json::array();
    {
        auto csv = open_output(result.run_dir / "best.csv");
        csv << report_csv_header(config.eval.ks) << '\n';
        for (const auto& [m, i] : result.best) {
            const GridPoint& gp = result.grid[i];
            csv << report_csv_row(gp.solver, "test", config.split.seed, gp.constrained_fraction, gp.test) << '\n';
            nlohmann::json entry{{"model", model_name(m)},
                                 {"lambda", gp.solver.lambda},
                                 {"selection_ndcg", gp.selection.at(selection_k).ndcg_aoa},
                                 {"test", to_json(gp.test)}};
            if (uses_dropout(m)) entry["p"] = gp.solver.dropout_p;
            if (uses_xi(m)) entry["xi"] = gp.solver.xi;
            if (config.save_weights) {
                const std::string file = "B_" + std::string(model_name(m)) + ".bin";
                save_matrix(result.run_dir / file, kept_weights.at(m).second);
                entry["weights"] = file;
            }
            best_json.push_back(entry);
        }
    }

    nlohmann::json models = nlohmann::json::array();
    for (Model m : config.models) models.push_back(model_name(m));
    nlohmann::json timings = nlohmann::json::array();
    for (std::size_t i : order) {
        const GridPoint& gp = result.grid[i];
        timings.push_back({{"model", model_name(gp.solver.model)},
                           {"lambda", gp.solver.lambda},
                           {"p", gp.solver.dropout_p},
                           {"xi", gp.solver.xi},
                           {"seconds", gp.seconds}});
    }

    nlohmann::json& mf = result.manifest;
    mf["tool"] = "rlae";
    mf["version"] = kVersion;
    mf["run_id"] = config.effective_run_id();
    mf["data"] = {{"path", config.data.path},
                  {"format", config.data.format == InputFormat::Pairs ? "pairs" : "triples"}};
    if (config.data.binarize_threshold) mf["data"]["binarize_threshold"] = *config.data.binarize_threshold;
    mf["data"]["has_header"] = config.data.has_header;
    mf["data"]["min_user_interactions"] = config.data.min_user_interactions;
    mf["dataset"] = to_json(dataset_stats(data));
    mf["protocol"] = protocol_name(config.split.protocol);
    mf["seed"] = config.split.seed;
    mf["split"] = {{"heldout_user_fraction", config.split.heldout_user_fraction},
                   {"foldin_fraction", config.split.foldin_fraction},
                   {"test_fraction", config.split.test_fraction},
                   {"train", matrix_summary(split.train())}};
    mf["models"] = models;
    mf["grid"] = {{"lambda", config.lambdas}, {"p", config.dropout_ps}, {"xi", config.xis}};
    mf["eval"] = {{"ks", config.eval.ks},
                  {"gamma", config.eval.gamma},
                  {"head_fraction", config.eval.head_fraction},
                  {"recall_denominator",
                   config.eval.recall_denominator == RecallDenominator::Truncated ? "truncated" : "full"},
                  {"unbiased_normalization", config.eval.unbiased_normalization == UnbiasedNormalization::SelfNormalized
                                                 ? "self-normalized"
                                                 : "fixed-ideal"},
                  {"selection", "ndcg_aoa@" + std::to_string(selection_k) + " on " + selection_split}};
    mf["grid_points"] = result.grid.size();
    mf["factorizations"] = result.factorizations;
    mf["best"] = best_json;
    mf["wall_time_seconds"] = {{"split", split_seconds},
                               {"gram", gram_seconds},
                               {"factorizations", factorization_seconds},
                               {"total", seconds_since(run_start)},
                               {"grid_points", timings}};
    write_text(result.run_dir / "manifest.json", mf.dump(2) + "\n");
    return result;
}

// ---------------------------------------------------------------------------
// Spectral export

std::vector<ItemIndex> sample_items_by_popularity(std::span<const std::int64_t> popularity, double head_fraction,
                                                  std::size_t popular, std::size_t unpopular, std::uint64_t seed) {
    const ItemPartition part = head_tail_partition(popularity, head_fraction);
    Rng rng(seed);
    const auto draw = [&](std::vector<ItemIndex> pool, std::size_t count) {
        rng.shuffle(std::span<ItemIndex>(pool));
        pool.resize(std::min(count, pool.size()));
        std::stable_sort(pool.begin(), pool.end(), [&](ItemIndex a, ItemIndex b) {
            const auto pa = popularity[static_cast<std::size_t>(a)];
            const auto pb = popularity[static_cast<std::size_t>(b)];
            return pa > pb || (pa == pb && a < b);
        });
        return pool;
    };
    std::vector<ItemIndex> items = draw(part.head, popular);
    const auto tail = draw(part.tail, unpopular);
    items.insert(items.end(), tail.begin(), tail.end());
    return items;
}

SpectralExport export_spectral(const SpectralConfig& config) { return export_spectral(config, load_dataset(config.data)); }

SpectralExport export_spectral(const SpectralConfig& config, const InteractionMatrix& data) {
    if (config.lambdas.empty()) throw std::invalid_argument("spectral export needs at least one lambda");
    check_memory_budget(data.num_items(), config.max_memory_gb, 1);

    SpectralExport out;
    out.run_dir = config.output_dir / config.run_id;
    fs::create_directories(out.run_dir);

    const GramMatrix g = gram(data);
    const SpectralDecomposition d = eig_gram(g);

    for (double lambda : config.lambdas) {
        const ScalingCurves c = scaling_curves(d.eigenvalues, lambda);
        const fs::path path = out.run_dir / ("curve_lambda_" + fmt_short(lambda) + ".csv");
        auto csv = open_output(path);
        csv.precision(17);
        csv << "rank,sigma_sq,reg_value,constraint_value\n";
        for (Eigen::Index k = 0; k < d.eigenvalues.size(); ++k)
            csv << (k + 1) << ',' << d.eigenvalues(k) << ',' << c.reg_curve(k) << ',' << c.constraint_curve(k) << '\n';
        out.curve_files.push_back(path);
    }

    const auto popularity = item_popularity(data);
    out.sampled_items = sample_items_by_popularity(popularity, config.head_fraction, config.popular_samples,
                                                   config.unpopular_samples, config.seed);
    out.top_heatmap = out.run_dir / "heatmap_top.csv";
    out.bottom_heatmap = out.run_dir / "heatmap_bottom.csv";
    for (const auto& [which, path] : {std::pair{PCGroup::Top, out.top_heatmap}, std::pair{PCGroup::Bottom, out.bottom_heatmap}}) {
        const auto h = pc_group_heatmap(d, config.group_fraction, which, out.sampled_items);
        auto csv = open_output(path);
        write_matrix_csv(csv, h.values, h.items);
    }

    nlohmann::json manifest{{"tool", "rlae"},
                            {"version", kVersion},
                            {"data", config.data.path},
                            {"dataset", to_json(dataset_stats(data))},
                            {"lambdas", config.lambdas},
                            {"group_fraction", config.group_fraction},
                            {"head_fraction", config.head_fraction},
                            {"seed", config.seed},
                            {"sampled_items", out.sampled_items},
                            {"reconstruction_residual", reconstruction_residual(d, g)}};
    write_text(out.run_dir / "spectral_manifest.json", manifest.dump(2) + "\n");
    return out;
}

}  // namespace rlae
