#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "linboost/boosting.hpp"
#include "linboost/dataset.hpp"
#include "linboost/eval.hpp"
#include "linboost/experiment.hpp"
#include "linboost/model_io.hpp"
#include "linboost/synth.hpp"

namespace linboost::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 1;
inline constexpr int exit_runtime = 2;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GenOptions {
    std::string function;
    std::optional<std::size_t> grid;
    std::optional<std::size_t> random;
    double noise_var = 0.0;
    std::uint64_t seed = 0;
    std::string out;
};

struct TrainOptions {
    std::string data;
    std::string target = "y";
    bool no_header = false;
    std::string mode = "constant";
    std::size_t trees = 100;
    double lr = 0.1;
    double lambda = 0.0;
    double gamma = 3.0;
    int max_depth = 30;
    std::optional<std::size_t> min_leaf;
    std::size_t min_split = 2;
    double subsample = 1.0;
    std::uint64_t seed = 0;
    std::string model_out;
};

struct PredictOptions {
    std::string model;
    std::string data;
    std::string target = "y";
    bool no_header = false;
    std::string out;
};

struct BenchOptions {
    std::string experiment;
    std::string config;
    std::size_t runs = 20;
    std::uint64_t seed = 0;
    std::optional<std::size_t> test_grid;
    std::string out_report;
    std::string out_runs;
};

struct SummarizeOptions {
    std::string data;
    bool no_header = false;
};

inline std::string format_nmse(double v) { return format_real(v); }

inline int cmd_gen(const GenOptions& o, std::ostream& out) {
    if (o.grid.has_value() == o.random.has_value()) throw UsageError("gen: give exactly one of --grid or --random");
    synth::Function f;
    try {
        f = synth::function_by_name(o.function);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const synth::NoiseSpec noise{o.noise_var, o.seed};
    Dataset ds;
    if (o.grid) {
        if (f.dim > 2) throw UsageError("gen: --grid is only available for 1-d and 2-d functions");
        ds = synth::make_grid_dataset(f, {*o.grid}, noise);
    } else {
        ds = synth::make_random_dataset(f, *o.random, noise);
    }
    save_csv(o.out, ds);
    out << "wrote " << ds.rows() << " rows x " << ds.cols() << " features to " << o.out << '\n';
    return exit_ok;
}

inline TargetColumn target_selector(const std::string& target, bool no_header) {
    if (no_header) {
        try {
            return static_cast<std::size_t>(std::stoul(target));
        } catch (const std::exception&) {
            throw UsageError("--target must be a zero-based column index when --no-header is set");
        }
    }
    return target;
}

inline int cmd_train(const TrainOptions& o, std::ostream& out) {
    BoostParams p;
    try {
        p.mode = parse_leaf_mode(o.mode);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    p.num_trees = o.trees;
    p.learning_rate = o.lr;
    p.lambda = o.lambda;
    p.gamma = o.gamma;
    p.max_depth = o.max_depth;
    p.min_samples_leaf = o.min_leaf;
    p.min_samples_split = o.min_split;
    p.subsample = o.subsample;
    p.seed = o.seed;
    try {
        p.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const Dataset ds = load_csv(o.data, target_selector(o.target, o.no_header), !o.no_header);
    const FitResult fitted = fit_with_trace(ds, p);
    save_model(fitted.model, o.model_out);
    const Vector pred = fitted.model.predict(ds.features);
    out << "trees: " << fitted.model.trees.size() << '\n';
    out << "training NMSE: " << format_nmse(nmse(ds.targets, pred)) << '\n';
    return exit_ok;
}

inline int cmd_predict(const PredictOptions& o, std::ostream& out) {
    const Ensemble model = load_model(o.model);
    const CsvTable table = read_csv_table(o.data, !o.no_header);
    const std::size_t d = model.dim();
    const auto width = static_cast<std::size_t>(table.values.cols());

    Dataset ds;
    bool has_target = false;
    const auto target_col = find_column(table, target_selector(o.target, o.no_header));
    if (target_col && width == d + 1) {
        ds = table_to_dataset(table, *target_col);
        has_target = true;
    } else if (width == d) {
        ds.features = table.values;
        ds.targets = Vector::Zero(table.values.rows());
        ds.feature_names = table.header;
        ds.validate();
    } else {
        throw std::invalid_argument("data has " + std::to_string(width) + " columns; model expects " +
                                    std::to_string(d) + " features" + (target_col ? " plus the target" : ""));
    }

    const Vector pred = model.predict(ds.features);
    std::ostringstream csv;
    for (std::size_t k = 0; k < d; ++k) csv << ds.feature_name(k) << ',';
    csv << "prediction";
    if (has_target) csv << ',' << ds.target_name;
    csv << '\n';
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
        for (std::size_t k = 0; k < d; ++k) csv << format_real(ds.features(i, static_cast<Eigen::Index>(k))) << ',';
        csv << format_real(pred[i]);
        if (has_target) csv << ',' << format_real(ds.targets[i]);
        csv << '\n';
    }
    write_file_atomic(o.out, csv.str());
    out << "wrote " << pred.size() << " predictions to " << o.out << '\n';
    if (has_target) out << "NMSE: " << format_nmse(nmse(ds.targets, pred)) << '\n';
    return exit_ok;
}

inline int cmd_bench(const BenchOptions& o, std::ostream& out) {
    if (o.experiment.empty() == o.config.empty()) throw UsageError("bench: give exactly one of --experiment or --config");
    ExperimentConfig cfg;
    if (!o.config.empty()) {
        std::ifstream in(o.config);
        if (!in) throw std::runtime_error("cannot open config '" + o.config + "'");
        try {
            cfg = experiment_from_json(nlohmann::json::parse(in));
        } catch (const nlohmann::json::exception& e) {
            throw UsageError(std::string("bad experiment config: ") + e.what());
        }
    } else {
        try {
            cfg = builtin_experiment(o.experiment, {o.runs, o.seed, o.test_grid});
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    const auto reports = run_experiment(cfg);
    out << report_table(cfg.name, reports);
    if (!o.out_report.empty()) write_file_atomic(o.out_report, report_csv(reports));
    if (!o.out_runs.empty()) write_file_atomic(o.out_runs, runs_csv(reports));
    return exit_ok;
}

inline int cmd_summarize(const SummarizeOptions& o, std::ostream& out) {
    const CsvTable table = read_csv_table(o.data, !o.no_header);
    const auto summaries = summarize_table(table);
    const auto cell = [](double v) { return format_fixed(v, 6); };
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"column", "count", "mean", "std", "min", "25%", "50%", "75%", "max"});
    for (const auto& s : summaries)
        rows.push_back({s.name, std::to_string(s.count), cell(s.mean), cell(s.std), cell(s.min), cell(s.q1),
                        cell(s.median), cell(s.q3), cell(s.max)});
    std::vector<std::size_t> width(rows.front().size(), 0);
    for (const auto& r : rows)
        for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) {
            if (c == 0)
                out << std::left << std::setw(static_cast<int>(width[c])) << r[c];
            else
                out << "  " << std::right << std::setw(static_cast<int>(width[c])) << r[c];
        }
        out << '\n';
    }
    return exit_ok;
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Gradient-boosted regression trees with constant or linear leaves"};
    app.require_subcommand(1);

    GenOptions gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic dataset as CSV");
    gen_cmd->add_option("--function", gen.function, "heavysine | jakeman1 | jakeman4 | friedman1")->required();
    auto* grid_opt = gen_cmd->add_option("--grid", gen.grid, "Grid points per axis")->check(CLI::Range(2, 100000));
    auto* random_opt = gen_cmd->add_option("--random", gen.random, "Number of uniformly random rows")
                           ->check(CLI::PositiveNumber);
    grid_opt->excludes(random_opt);
    gen_cmd->add_option("--noise-var", gen.noise_var, "Gaussian noise variance")->check(CLI::NonNegativeNumber);
    gen_cmd->add_option("--seed", gen.seed, "Random seed");
    gen_cmd->add_option("--out", gen.out, "Output CSV path")->required();

    TrainOptions train;
    auto* train_cmd = app.add_subcommand("train", "Fit a boosted model on a CSV file");
    train_cmd->add_option("--data", train.data, "Training CSV")->required();
    train_cmd->add_option("--target", train.target, "Target column name (index with --no-header)");
    train_cmd->add_flag("--no-header", train.no_header, "CSV has no header line");
    train_cmd->add_option("--mode", train.mode, "constant | linear")->check(CLI::IsMember({"constant", "linear"}));
    train_cmd->add_option("--trees", train.trees, "Number of boosting rounds")->check(CLI::PositiveNumber);
    train_cmd->add_option("--lr", train.lr, "Learning rate in (0, 1]")->check(CLI::Range(1e-300, 1.0));
    train_cmd->add_option("--lambda", train.lambda, "L2 penalty on leaf weights")->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--gamma", train.gamma, "Penalty per leaf")->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--max-depth", train.max_depth, "Maximum tree depth")->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--min-leaf", train.min_leaf, "Minimum samples per leaf (default 1, or d+2 for linear)")
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--min-split", train.min_split, "Minimum samples to split a node")->check(CLI::PositiveNumber);
    train_cmd->add_option("--subsample", train.subsample, "Row fraction per tree in (0, 1]")
        ->check(CLI::Range(1e-300, 1.0));
    train_cmd->add_option("--seed", train.seed, "Random seed");
    train_cmd->add_option("--model-out", train.model_out, "Model JSON output path")->required();

    PredictOptions predict;
    auto* predict_cmd = app.add_subcommand("predict", "Predict with a saved model");
    predict_cmd->add_option("--model", predict.model, "Model JSON")->required();
    predict_cmd->add_option("--data", predict.data, "Input CSV")->required();
    predict_cmd->add_option("--target", predict.target, "Target column, scored when present");
    predict_cmd->add_flag("--no-header", predict.no_header, "CSV has no header line");
    predict_cmd->add_option("--out", predict.out, "Output CSV of inputs, predictions and truth")->required();

    BenchOptions bench;
    auto* bench_cmd = app.add_subcommand("bench", "Run a benchmark experiment");
    std::string names;
    for (const auto& n : builtin_experiment_names()) names += (names.empty() ? "" : " | ") + n;
    bench_cmd->add_option("--experiment", bench.experiment, names);
    bench_cmd->add_option("--config", bench.config, "JSON experiment description");
    bench_cmd->add_option("--runs", bench.runs, "Number of runs")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--seed", bench.seed, "Base seed");
    bench_cmd->add_option("--test-grid", bench.test_grid, "Points per axis of the Jakeman test grid")
        ->check(CLI::Range(2, 100000));
    bench_cmd->add_option("--out-report", bench.out_report, "Summary CSV path");
    bench_cmd->add_option("--out-runs", bench.out_runs, "Per-run CSV path");

    SummarizeOptions summarize;
    auto* summarize_cmd = app.add_subcommand("summarize", "Per-column statistics of a CSV file");
    summarize_cmd->add_option("--data", summarize.data, "Input CSV")->required();
    summarize_cmd->add_flag("--no-header", summarize.no_header, "CSV has no header line");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        if (*gen_cmd) return cmd_gen(gen, out);
        if (*train_cmd) return cmd_train(train, out);
        if (*predict_cmd) return cmd_predict(predict, out);
        if (*bench_cmd) return cmd_bench(bench, out);
        if (*summarize_cmd) return cmd_summarize(summarize, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_runtime;
    }
    return exit_usage;
}

} // namespace linboost::cli
