// rlae: batch runner for the linear autoencoder recommenders.
//
//   rlae ingest   --data ratings.csv --format triples --threshold 4 --out runs
//   rlae split    --data ratings.csv --protocol strong --seed 0 --out runs
//   rlae fit      --data ratings.csv --model RLAE --lambda 10 --xi 0.3 --out runs
//   rlae eval     --data ratings.csv --weights runs/fit/B.bin --out runs
//   rlae grid     --data ratings.csv --models EASE,RLAE --lambdas 1,10 --out runs
//   rlae spectral --data ratings.csv --lambdas 100,1000 --out runs
//
// Every subcommand accepts --config FILE with key=value lines; flags given on
// the command line override the file.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rlae/experiment.hpp"
#include "rlae/gram.hpp"
#include "rlae/matrix_io.hpp"

namespace fs = std::filesystem;
using namespace rlae;

namespace {

struct CommonFlags {
    std::string data;
    std::string format = "pairs";
    std::optional<double> threshold;
    bool has_header = false;
    std::size_t min_user_items = 0;
    std::string protocol = "strong";
    std::uint64_t seed = 0;
    double heldout_fraction = 0.2;
    double foldin_fraction = 0.8;
    double test_fraction = 0.2;
    std::vector<std::size_t> ks{20, 100};
    double gamma = 2.0;
    double head_fraction = 0.2;
    std::string recall_denominator = "truncated";
    std::string unbiased_normalization = "self-normalized";
    std::string out = "runs";
    std::string run_id;
    double max_memory_gb = 16.0;
};

void add_data_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--data", f.data, "Interaction file (user item [rating] per line)")->required();
    cmd->add_option("--format", f.format, "pairs or triples")
        ->check(CLI::IsMember({"pairs", "triples"}))
        ->capture_default_str();
    cmd->add_option("--threshold", f.threshold, "Drop ratings below this value (triples only)");
    cmd->add_flag("--has-header", f.has_header, "First data line holds column names");
    cmd->add_option("--min-user-items", f.min_user_items, "Drop users with fewer interactions")->capture_default_str();
}

void add_split_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--protocol", f.protocol, "strong or weak")
        ->check(CLI::IsMember({"strong", "weak"}))
        ->capture_default_str();
    cmd->add_option("--seed", f.seed, "Split seed")->capture_default_str();
    cmd->add_option("--heldout-fraction", f.heldout_fraction, "Share of users held out (strong)")
        ->capture_default_str();
    cmd->add_option("--foldin-fraction", f.foldin_fraction, "Share of a held-out user's items used as fold-in")
        ->capture_default_str();
    cmd->add_option("--test-fraction", f.test_fraction, "Share of each user's items held out (weak)")
        ->capture_default_str();
}

void add_eval_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--ks", f.ks, "Ranking cutoffs")->delimiter(',')->capture_default_str();
    cmd->add_option("--gamma", f.gamma, "Propensity exponent of the unbiased metrics")->capture_default_str();
    cmd->add_option("--head-fraction", f.head_fraction, "Share of items in the head group")->capture_default_str();
    cmd->add_option("--recall-denominator", f.recall_denominator, "truncated (min(K,|H|)) or full (|H|)")
        ->check(CLI::IsMember({"truncated", "full"}))
        ->capture_default_str();
    cmd->add_option("--unbiased-normalization", f.unbiased_normalization, "self-normalized or fixed-ideal")
        ->check(CLI::IsMember({"self-normalized", "fixed-ideal"}))
        ->capture_default_str();
}

void add_output_flags(CLI::App* cmd, CommonFlags& f, const std::string& default_run_id) {
    cmd->add_option("--out", f.out, "Output directory")->capture_default_str();
    cmd->add_option("--run-id", f.run_id, "Run subdirectory under --out (default: " +
                                              (default_run_id.empty() ? "<protocol>-seed<seed>" : default_run_id) + ")");
}

DataSource data_source(const CommonFlags& f) {
    DataSource d;
    d.path = f.data;
    d.format = f.format == "triples" ? InputFormat::Triples : InputFormat::Pairs;
    d.binarize_threshold = f.threshold;
    d.has_header = f.has_header;
    d.min_user_interactions = f.min_user_items;
    return d;
}

SplitConfig split_config(const CommonFlags& f) {
    SplitConfig s;
    s.protocol = *parse_protocol(f.protocol);
    s.seed = f.seed;
    s.heldout_user_fraction = f.heldout_fraction;
    s.foldin_fraction = f.foldin_fraction;
    s.test_fraction = f.test_fraction;
    return s;
}

EvalConfig eval_config(const CommonFlags& f) {
    EvalConfig e;
    e.ks = f.ks;
    e.gamma = f.gamma;
    e.head_fraction = f.head_fraction;
    e.recall_denominator = f.recall_denominator == "full" ? RecallDenominator::Full : RecallDenominator::Truncated;
    e.unbiased_normalization = f.unbiased_normalization == "fixed-ideal" ? UnbiasedNormalization::FixedIdeal
                                                                         : UnbiasedNormalization::SelfNormalized;
    e.validate();
    return e;
}

fs::path run_dir(const CommonFlags& f, const std::string& default_run_id) {
    const fs::path dir = fs::path(f.out) / (f.run_id.empty() ? default_run_id : f.run_id);
    fs::create_directories(dir);
    return dir;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot create " + path.string());
    out << j.dump(2) << '\n';
}

Model model_arg(const std::string& name) {
    const auto m = parse_model(name);
    if (!m) throw CLI::ValidationError("--model", "unknown model '" + name + "'");
    return *m;
}

double elapsed(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Closed-form linear autoencoder recommenders"};
    app.set_config("--config", "", "key=value configuration file");
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    CommonFlags f;

    // ingest ------------------------------------------------------------------
    auto* ingest = app.add_subcommand("ingest", "Parse and binarize a dataset, write dense ids and statistics");
    add_data_flags(ingest, f);
    add_output_flags(ingest, f, "ingest");
    ingest->callback([&] {
        const auto loaded = load_interactions(f.data, data_source(f).load_options());
        const fs::path dir = run_dir(f, "ingest");
        {
            std::ofstream out(dir / "interactions.txt");
            write_interactions(out, loaded.matrix);
        }
        {
            std::ofstream users(dir / "users.txt");
            for (const auto& u : loaded.user_ids) users << u << '\n';
            std::ofstream items(dir / "items.txt");
            for (const auto& i : loaded.item_ids) items << i << '\n';
        }
        const DatasetStats stats = dataset_stats(loaded.matrix);
        write_json(dir / "manifest.json", {{"tool", "rlae"},
                                           {"version", kVersion},
                                           {"command", "ingest"},
                                           {"data", f.data},
                                           {"dataset", to_json(stats)}});
        std::printf("users %zu  items %zu  interactions %zu  density %.6g  gini %.4f\n", stats.num_users,
                    stats.num_items, stats.num_ratings, stats.density, stats.gini_item);
    });

    // split -------------------------------------------------------------------
    auto* split = app.add_subcommand("split", "Write a seeded strong or weak split");
    add_data_flags(split, f);
    add_split_flags(split, f);
    add_output_flags(split, f, "split");
    split->callback([&] {
        const InteractionMatrix x = load_dataset(data_source(f));
        const SplitConfig sc = split_config(f);
        write_split(run_dir(f, "split"), make_split(x, sc), sc);
        std::printf("split written\n");
    });

    // fit ---------------------------------------------------------------------
    std::string model = "EASE";
    double lambda = 1.0, dropout_p = 0.0, xi = 0.0;
    auto* fit = app.add_subcommand("fit", "Train one model on the training part of a split and save B");
    add_data_flags(fit, f);
    add_split_flags(fit, f);
    add_output_flags(fit, f, "fit");
    fit->add_option("--model", model, "LAE, EASE, DLAE, EDLAE, RLAE or RDLAE")->capture_default_str();
    fit->add_option("--lambda", lambda, "L2 strength")->capture_default_str();
    fit->add_option("--p", dropout_p, "Dropout probability (DLAE, EDLAE, RDLAE)")->capture_default_str();
    fit->add_option("--xi", xi, "Diagonal bound (RLAE, RDLAE)")->capture_default_str();
    fit->add_option("--max-memory-gb", f.max_memory_gb, "Dense-matrix memory budget")->capture_default_str();
    fit->callback([&] {
        const SolverConfig sc{model_arg(model), lambda, dropout_p, xi};
        sc.validate();
        const InteractionMatrix x = load_dataset(data_source(f));
        check_memory_budget(x.num_items(), f.max_memory_gb, 1);
        const auto start = std::chrono::steady_clock::now();
        const ExperimentSplit s = make_split(x, split_config(f));
        const SolverOutput out = solve(gram(s.train()), sc);
        const double seconds = elapsed(start);
        const fs::path dir = run_dir(f, "fit");
        save_matrix((dir / "B.bin").string(), out.B.values);
        nlohmann::json mf{{"tool", "rlae"},
                          {"version", kVersion},
                          {"command", "fit"},
                          {"data", f.data},
                          {"protocol", f.protocol},
                          {"seed", f.seed},
                          {"model", model_name(sc.model)},
                          {"lambda", sc.lambda},
                          {"items", x.num_items()},
                          {"constrained_fraction", out.constrained_fraction()},
                          {"weights", "B.bin"},
                          {"wall_time_seconds", seconds}};
        if (uses_dropout(sc.model)) mf["p"] = sc.dropout_p;
        if (uses_xi(sc.model)) mf["xi"] = sc.xi;
        write_json(dir / "manifest.json", mf);
        std::printf("%s fitted in %.3f s, constrained fraction %.4f\n", std::string(model_name(sc.model)).c_str(),
                    seconds, out.constrained_fraction());
    });

    // eval --------------------------------------------------------------------
    std::string weights;
    std::string target = "test";
    auto* eval = app.add_subcommand("eval", "Evaluate saved weights on a split recomputed from data and seed");
    add_data_flags(eval, f);
    add_split_flags(eval, f);
    add_eval_flags(eval, f);
    add_output_flags(eval, f, "eval");
    eval->add_option("--weights", weights, "B.bin written by fit or grid")->required()->check(CLI::ExistingFile);
    eval->add_option("--target", target, "val or test (strong protocol)")
        ->check(CLI::IsMember({"val", "test"}))
        ->capture_default_str();
    eval->callback([&] {
        const InteractionMatrix x = load_dataset(data_source(f));
        const EvalConfig ec = eval_config(f);
        const ExperimentSplit s = make_split(x, split_config(f));
        WeightMatrix b{load_matrix(weights)};
        if (b.values.rows() != static_cast<Eigen::Index>(x.num_items()))
            throw std::runtime_error("weights have " + std::to_string(b.values.rows()) + " items, dataset has " +
                                     std::to_string(x.num_items()));

        // Label the row from the fit manifest when it sits next to the weights.
        SolverConfig sc{Model::LAE, 0.0, 0.0, 0.0};
        double cf = 0.0;
        const fs::path fit_manifest = fs::path(weights).parent_path() / "manifest.json";
        if (fs::exists(fit_manifest)) {
            std::ifstream in(fit_manifest);
            const auto j = nlohmann::json::parse(in, nullptr, false);
            if (!j.is_discarded() && j.contains("model")) {
                sc.model = parse_model(j["model"].get<std::string>()).value_or(Model::LAE);
                sc.lambda = j.value("lambda", 0.0);
                sc.dropout_p = j.value("p", 0.0);
                sc.xi = j.value("xi", 0.0);
                cf = j.value("constrained_fraction", 0.0);
            }
        }

        const bool on_val = s.strong && target == "val";
        const MetricReport report = on_val ? s.evaluate_selection(b, ec) : s.evaluate_test(b, ec);
        const std::string split_name = on_val ? "val" : "test";
        const fs::path dir = run_dir(f, "eval");
        {
            std::ofstream csv(dir / "report.csv");
            csv << report_csv_header(ec.ks) << '\n'
                << report_csv_row(sc, split_name, f.seed, cf, report) << '\n';
        }
        write_json(dir / "manifest.json", {{"tool", "rlae"},
                                           {"version", kVersion},
                                           {"command", "eval"},
                                           {"data", f.data},
                                           {"weights", weights},
                                           {"protocol", f.protocol},
                                           {"seed", f.seed},
                                           {"split", split_name},
                                           {"metrics", to_json(report)}});
        for (const auto& m : report.at_k)
            std::printf("@%-4zu recall %.4f  ndcg %.4f  tail ndcg %.4f  (%zu users)\n", m.k, m.recall_aoa,
                        m.ndcg_aoa, m.ndcg_tail, m.users_aoa);
    });

    // grid --------------------------------------------------------------------
    std::vector<std::string> models{"LAE", "EASE", "DLAE", "EDLAE", "RLAE", "RDLAE"};
    std::vector<double> lambdas = default_lambda_grid();
    std::vector<double> ps = default_unit_grid();
    std::vector<double> xis = default_unit_grid();
    std::size_t selection_k = 0;
    std::size_t workers = 1;
    bool save_weights = false;
    auto* grid = app.add_subcommand("grid", "Grid search with model selection; writes report.csv and best.csv");
    add_data_flags(grid, f);
    add_split_flags(grid, f);
    add_eval_flags(grid, f);
    add_output_flags(grid, f, "");
    grid->add_option("--models", models, "Models to search")->delimiter(',')->capture_default_str();
    grid->add_option("--lambdas", lambdas, "Lambda grid")->delimiter(',')->capture_default_str();
    grid->add_option("--ps", ps, "Dropout grid")->delimiter(',')->capture_default_str();
    grid->add_option("--xis", xis, "Xi grid")->delimiter(',')->capture_default_str();
    grid->add_option("--selection-k", selection_k, "NDCG cutoff for selection (0: 100 strong, 20 weak)")
        ->capture_default_str();
    grid->add_option("--workers", workers, "Concurrent grid points")->capture_default_str();
    grid->add_flag("--save-weights", save_weights, "Write B of the best configuration per model");
    grid->add_option("--max-memory-gb", f.max_memory_gb, "Dense-matrix memory budget")->capture_default_str();
    grid->callback([&] {
        ExperimentConfig cfg;
        cfg.data = data_source(f);
        cfg.split = split_config(f);
        cfg.models.clear();
        for (const auto& name : models) cfg.models.push_back(model_arg(name));
        cfg.lambdas = lambdas;
        cfg.dropout_ps = ps;
        cfg.xis = xis;
        cfg.eval = eval_config(f);
        cfg.selection_k = selection_k;
        cfg.output_dir = f.out;
        cfg.run_id = f.run_id;
        cfg.save_weights = save_weights;
        cfg.max_memory_gb = f.max_memory_gb;
        cfg.workers = workers;
        const ExperimentResult r = run_experiment(cfg);
        std::printf("%zu grid points, %zu factorizations, results in %s\n", r.grid.size(), r.factorizations,
                    r.run_dir.string().c_str());
        const std::size_t k = cfg.effective_selection_k();
        for (const auto& [m, i] : r.best) {
            const GridPoint& gp = r.grid[i];
            std::printf("  %-6s lambda %-8g", std::string(model_name(m)).c_str(), gp.solver.lambda);
            if (uses_dropout(m)) std::printf(" p %-4g", gp.solver.dropout_p);
            if (uses_xi(m)) std::printf(" xi %-4g", gp.solver.xi);
            std::printf(" selection ndcg@%zu %.4f  test ndcg@%zu %.4f\n", k, gp.selection.at(k).ndcg_aoa, k,
                        gp.test.at(k).ndcg_aoa);
        }
    });

    // spectral ----------------------------------------------------------------
    SpectralConfig spec;
    auto* spectral = app.add_subcommand("spectral", "Export eigenvalue scaling curves and PC-group heatmaps");
    add_data_flags(spectral, f);
    add_output_flags(spectral, f, "spectral");
    spectral->add_option("--lambdas", spec.lambdas, "One curve file per lambda")->delimiter(',')->capture_default_str();
    spectral->add_option("--group-fraction", spec.group_fraction, "Share of components per heatmap group")
        ->capture_default_str();
    spectral->add_option("--head-fraction", spec.head_fraction, "Share of items counted as popular")
        ->capture_default_str();
    spectral->add_option("--popular", spec.popular_samples, "Sampled popular items")->capture_default_str();
    spectral->add_option("--unpopular", spec.unpopular_samples, "Sampled unpopular items")->capture_default_str();
    spectral->add_option("--seed", spec.seed, "Item sampling seed")->capture_default_str();
    spectral->add_option("--max-memory-gb", spec.max_memory_gb, "Dense-matrix memory budget")->capture_default_str();
    spectral->callback([&] {
        spec.data = data_source(f);
        spec.output_dir = f.out;
        if (!f.run_id.empty()) spec.run_id = f.run_id;
        const SpectralExport e = export_spectral(spec);
        std::printf("%zu curve files and 2 heatmaps over %zu items in %s\n", e.curve_files.size(),
                    e.sampled_items.size(), e.run_dir.string().c_str());
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "rlae: %s\n", e.what());
        return 1;
    }
    return 0;
}
