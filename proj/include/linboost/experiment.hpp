#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "linboost/boosting.hpp"
#include "linboost/dataset.hpp"
#include "linboost/eval.hpp"
#include "linboost/synth.hpp"

namespace linboost {

enum class Sampling { grid, random };

/// Size is points per axis for a grid, row count for random sampling.
struct SamplingSpec {
    Sampling kind = Sampling::grid;
    std::size_t size = 11;
};

struct SyntheticSource {
    std::string function;
    SamplingSpec train;
    SamplingSpec test;
    double noise_var = 0.0;      // added to training targets
    double test_noise_var = 0.0; // added to test targets; 0 scores against the noise-free truth
};

/// Real data: each run shuffles the rows and takes train_fraction of them for training.
struct CsvSource {
    std::string path;
    TargetColumn target = std::string("y");
    bool has_header = true;
    double train_fraction = 0.7;
};

struct MethodSpec {
    std::string label;
    BoostParams base;
    ParamGrid grid; // searched by k-fold CV on each run's training set
};

struct ExperimentConfig {
    std::string name;
    std::variant<SyntheticSource, CsvSource> source;
    std::vector<MethodSpec> methods;
    std::size_t runs = 20;
    std::size_t folds = 10;
    std::uint64_t seed = 0;
};

struct RunRecord {
    double nmse = 0.0;
    BoostParams chosen;
    double cv_score = 0.0; // NaN when no search was needed
    std::size_t trees_used = 0;
};

struct ExperimentReport {
    std::string method;
    std::vector<RunRecord> runs;
    double mean = 0.0;
    double std = 0.0; // sample standard deviation; 0 for a single run

    void recompute() {
        const double n = static_cast<double>(runs.size());
        mean = 0.0;
        for (const auto& r : runs) mean += r.nmse;
        mean /= n;
        double ss = 0.0;
        for (const auto& r : runs) ss += (r.nmse - mean) * (r.nmse - mean);
        std = runs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    }
};

struct TrainTestSplit {
    Dataset train;
    Dataset test;
};

namespace detail {

inline Dataset sample_synthetic(const synth::Function& f, const SamplingSpec& s, const synth::NoiseSpec& noise) {
    if (s.kind == Sampling::grid) return synth::make_grid_dataset(f, {s.size}, noise);
    return synth::make_random_dataset(f, s.size, noise);
}

} // namespace detail

/// Materializes run `run` of an experiment. Seeds derive from (config seed, run index).
inline TrainTestSplit materialize_run(const ExperimentConfig& cfg, std::size_t run) {
    const std::uint64_t run_seed = derive_seed(cfg.seed, run);
    if (const auto* syn = std::get_if<SyntheticSource>(&cfg.source)) {
        const auto f = synth::function_by_name(syn->function);
        TrainTestSplit s;
        s.train = detail::sample_synthetic(f, syn->train, {syn->noise_var, derive_seed(run_seed, 1)});
        s.test = detail::sample_synthetic(f, syn->test, {syn->test_noise_var, derive_seed(run_seed, 2)});
        return s;
    }
    const auto& csv = std::get<CsvSource>(cfg.source);
    const Dataset all = load_csv(csv.path, csv.target, csv.has_header);
    const std::size_t n = all.rows();
    const auto n_train = static_cast<std::size_t>(std::round(csv.train_fraction * static_cast<double>(n)));
    if (n_train < 2 || n_train + 2 > n) throw std::invalid_argument("train_fraction leaves too few rows on one side");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(derive_seed(run_seed, 3));
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    std::vector<std::size_t> train_idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> test_idx(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    return {all.subset(train_idx), all.subset(test_idx)};
}

/// Test-set predictions, computed in parallel row blocks.
inline Vector predict_parallel(const Ensemble& model, const FeatureMatrix& x) {
    Vector out(x.rows());
    const std::size_t n = static_cast<std::size_t>(x.rows());
    constexpr std::size_t block = 4096;
    const std::size_t blocks = (n + block - 1) / block;
    parallel_for(blocks, [&](std::size_t b) {
        const std::size_t end = std::min(n, (b + 1) * block);
        for (std::size_t i = b * block; i < end; ++i)
            out[static_cast<Eigen::Index>(i)] = model.predict_one({x.data() + i * model.dim(), model.dim()});
    });
    return out;
}

/**
 * Per run: fresh data, grid search on the training set, refit with the
 * chosen parameters on the full training set, test NMSE. One report per method.
 */
inline std::vector<ExperimentReport> run_experiment(const ExperimentConfig& cfg) {
    if (cfg.runs < 1) throw std::invalid_argument("experiment needs at least one run");
    if (cfg.methods.empty()) throw std::invalid_argument("experiment needs at least one method");
    std::vector<ExperimentReport> reports(cfg.methods.size());
    for (std::size_t m = 0; m < cfg.methods.size(); ++m) reports[m].method = cfg.methods[m].label;

    for (std::size_t run = 0; run < cfg.runs; ++run) {
        const std::uint64_t run_seed = derive_seed(cfg.seed, run);
        const TrainTestSplit split = materialize_run(cfg, run);
        for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
            const auto& method = cfg.methods[m];
            BoostParams base = method.base;
            base.seed = derive_seed(run_seed, 4);
            const GridSearchResult search =
                grid_search(split.train, method.grid, base, cfg.folds, derive_seed(run_seed, 5));
            const Ensemble model = fit(split.train, search.best);
            const Vector pred = predict_parallel(model, split.test.features);
            RunRecord rec;
            rec.nmse = nmse(split.test.targets, pred);
            rec.chosen = search.best;
            rec.cv_score = search.candidates.size() > 1 ? search.best_score : std::nan("");
            rec.trees_used = model.trees.size();
            reports[m].runs.push_back(rec);
        }
    }
    for (auto& r : reports) r.recompute();
    return reports;
}

// ---------------------------------------------------------------------------
// Report formatting
// ---------------------------------------------------------------------------

inline std::string format_fixed(double v, int digits = 6) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

inline std::string describe_params(const BoostParams& p) {
    std::ostringstream os;
    os << "trees=" << p.num_trees << " lr=" << p.learning_rate << " lambda=" << p.lambda << " gamma=" << p.gamma
       << " max_depth=" << p.max_depth << " min_leaf="
       << (p.min_samples_leaf ? std::to_string(*p.min_samples_leaf) : std::string("auto"))
       << " min_split=" << p.min_samples_split << " subsample=" << p.subsample;
    return os.str();
}

/// Summary CSV: method,mean_nmse,std_nmse,runs
inline std::string report_csv(const std::vector<ExperimentReport>& reports) {
    std::ostringstream os;
    os << "method,mean_nmse,std_nmse,runs\n";
    for (const auto& r : reports)
        os << r.method << ',' << format_real(r.mean) << ',' << format_real(r.std) << ',' << r.runs.size() << '\n';
    return os.str();
}

/// Per-run CSV: method,run,nmse,trees_used plus the chosen parameters.
inline std::string runs_csv(const std::vector<ExperimentReport>& reports) {
    std::ostringstream os;
    os << "method,run,nmse,trees_used,num_trees,learning_rate,lambda,gamma,max_depth,min_samples_leaf,"
          "min_samples_split,subsample\n";
    for (const auto& r : reports)
        for (std::size_t i = 0; i < r.runs.size(); ++i) {
            const auto& rec = r.runs[i];
            const auto& p = rec.chosen;
            os << r.method << ',' << i << ',' << format_real(rec.nmse) << ',' << rec.trees_used << ','
               << p.num_trees << ',' << format_real(p.learning_rate) << ',' << format_real(p.lambda) << ','
               << format_real(p.gamma) << ',' << p.max_depth << ','
               << (p.min_samples_leaf ? std::to_string(*p.min_samples_leaf) : std::string("auto")) << ','
               << p.min_samples_split << ',' << format_real(p.subsample) << '\n';
        }
    return os.str();
}

inline std::string report_table(const std::string& name, const std::vector<ExperimentReport>& reports) {
    std::ostringstream os;
    os << "experiment " << name << '\n';
    os << std::left << std::setw(12) << "method" << std::right << std::setw(14) << "mean NMSE" << std::setw(14)
       << "std" << std::setw(6) << "runs" << '\n';
    for (const auto& r : reports)
        os << std::left << std::setw(12) << r.method << std::right << std::setw(14) << format_fixed(r.mean)
           << std::setw(14) << format_fixed(r.std) << std::setw(6) << r.runs.size() << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Built-in benchmark protocols
// ---------------------------------------------------------------------------

inline std::vector<std::string> builtin_experiment_names() {
    return {"heavysine", "jakeman1-11", "jakeman1-41", "jakeman4-11", "jakeman4-41", "jakeman4-41-random", "friedman1"};
}

struct BuiltinOptions {
    std::size_t runs = 20;
    std::uint64_t seed = 0;
    std::optional<std::size_t> test_grid; // overrides the default 1001-per-axis Jakeman test grid
};

namespace detail {

inline MethodSpec heavysine_method(LeafMode mode) {
    MethodSpec m;
    m.label = to_string(mode);
    m.base.mode = mode;
    m.base.num_trees = 1;
    m.base.learning_rate = 1.0;
    m.base.gamma = 3.0;
    m.base.lambda = 0.0;
    m.base.max_depth = 30;
    return m;
}

// Constant leaves: lambda fixed at 0, number of trees chosen by CV.
inline MethodSpec jakeman_constant_method() {
    MethodSpec m;
    m.label = "constant";
    m.base.mode = LeafMode::constant;
    m.base.learning_rate = 0.1;
    m.base.lambda = 0.0;
    m.grid.gamma = {0.0, 0.5};
    m.grid.max_depth = {4, 8};
    m.grid.subsample = {0.5, 1.0};
    m.grid.num_trees = {50, 100, 150, 200, 300};
    return m;
}

// Linear leaves: the tree count is fixed per experiment, the rest is searched.
inline MethodSpec jakeman_linear_method(std::size_t trees) {
    MethodSpec m;
    m.label = "linear";
    m.base.mode = LeafMode::linear;
    m.base.num_trees = trees;
    m.base.lambda = 0.0;
    m.grid.learning_rate = {0.5, 0.6, 0.7, 1.0};
    m.grid.gamma = {0.3, 1.0};
    m.grid.min_samples_leaf = {std::nullopt, std::optional<std::size_t>{8}};
    return m;
}

} // namespace detail

inline ExperimentConfig builtin_experiment(const std::string& name, const BuiltinOptions& opt = {}) {
    ExperimentConfig cfg;
    cfg.name = name;
    cfg.runs = opt.runs;
    cfg.seed = opt.seed;
    cfg.folds = 10;
    const std::size_t test_grid = opt.test_grid.value_or(1001);

    const auto jakeman = [&](const std::string& fn, Sampling train_kind, std::size_t train_size,
                             std::size_t linear_trees) {
        cfg.source = SyntheticSource{fn, {train_kind, train_size}, {Sampling::grid, test_grid}, 0.05, 0.0};
        cfg.methods = {detail::jakeman_constant_method(), detail::jakeman_linear_method(linear_trees)};
    };

    if (name == "heavysine") {
        cfg.source = SyntheticSource{"heavysine", {Sampling::grid, 201}, {Sampling::grid, 2001}, 0.05, 0.0};
        cfg.methods = {detail::heavysine_method(LeafMode::constant), detail::heavysine_method(LeafMode::linear)};
    } else if (name == "jakeman1-11") {
        jakeman("jakeman1", Sampling::grid, 11, 3);
    } else if (name == "jakeman1-41") {
        jakeman("jakeman1", Sampling::grid, 41, 5);
    } else if (name == "jakeman4-11") {
        jakeman("jakeman4", Sampling::grid, 11, 3);
    } else if (name == "jakeman4-41") {
        jakeman("jakeman4", Sampling::grid, 41, 3);
    } else if (name == "jakeman4-41-random") {
        jakeman("jakeman4", Sampling::random, 41 * 41, 5);
    } else if (name == "friedman1") {
        cfg.source = SyntheticSource{"friedman1", {Sampling::random, 200}, {Sampling::random, 40568}, 1.0, 1.0};
        MethodSpec constant = detail::jakeman_constant_method();
        constant.grid.max_depth = {2, 3, 4};
        MethodSpec linear = detail::jakeman_linear_method(3);
        linear.grid.learning_rate = {0.6, 0.8};
        linear.grid.gamma = {1.0};
        linear.grid.min_samples_leaf = {std::size_t{30}, std::size_t{40}, std::size_t{60}};
        linear.grid.num_trees = {2, 3};
        cfg.methods = {constant, linear};
    } else {
        std::string valid;
        for (const auto& n : builtin_experiment_names()) valid += (valid.empty() ? "" : ", ") + n;
        throw std::invalid_argument("unknown experiment '" + name + "' (valid: " + valid + ")");
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// JSON experiment configuration
// ---------------------------------------------------------------------------

namespace detail {

inline SamplingSpec sampling_from_json(const nlohmann::json& j) {
    if (j.contains("grid")) return {Sampling::grid, j.at("grid").get<std::size_t>()};
    if (j.contains("random")) return {Sampling::random, j.at("random").get<std::size_t>()};
    throw std::invalid_argument("sampling needs a 'grid' or 'random' entry");
}

inline void apply_param(BoostParams& p, const std::string& key, const nlohmann::json& v) {
    if (key == "num_trees") p.num_trees = v.get<std::size_t>();
    else if (key == "learning_rate") p.learning_rate = v.get<double>();
    else if (key == "lambda") p.lambda = v.get<double>();
    else if (key == "gamma") p.gamma = v.get<double>();
    else if (key == "max_depth") p.max_depth = v.get<int>();
    else if (key == "min_samples_leaf") p.min_samples_leaf = v.is_null() ? std::nullopt : std::optional(v.get<std::size_t>());
    else if (key == "min_samples_split") p.min_samples_split = v.get<std::size_t>();
    else if (key == "subsample") p.subsample = v.get<double>();
    else if (key == "mode") p.mode = parse_leaf_mode(v.get<std::string>());
    else throw std::invalid_argument("unknown parameter '" + key + "'");
}

inline ParamGrid grid_from_json(const nlohmann::json& j) {
    ParamGrid g;
    for (const auto& [key, values] : j.items()) {
        if (!values.is_array()) throw std::invalid_argument("grid entry '" + key + "' must be a list");
        for (const auto& v : values) {
            if (key == "num_trees") g.num_trees.push_back(v.get<std::size_t>());
            else if (key == "learning_rate") g.learning_rate.push_back(v.get<double>());
            else if (key == "lambda") g.lambda.push_back(v.get<double>());
            else if (key == "gamma") g.gamma.push_back(v.get<double>());
            else if (key == "max_depth") g.max_depth.push_back(v.get<int>());
            else if (key == "min_samples_leaf")
                g.min_samples_leaf.push_back(v.is_null() ? std::nullopt : std::optional(v.get<std::size_t>()));
            else if (key == "min_samples_split") g.min_samples_split.push_back(v.get<std::size_t>());
            else if (key == "subsample") g.subsample.push_back(v.get<double>());
            else if (key == "mode") g.mode.push_back(parse_leaf_mode(v.get<std::string>()));
            else throw std::invalid_argument("unknown grid parameter '" + key + "'");
        }
    }
    return g;
}

} // namespace detail

/**
 * Experiment description, e.g.
 *   { "name": "j1", "runs": 20, "folds": 10, "seed": 1,
 *     "source": { "function": "jakeman1", "train": {"grid": 41}, "test": {"grid": 1001},
 *                 "noise_var": 0.05, "test_noise_var": 0 },
 *     "methods": [ { "label": "linear", "params": {"mode": "linear", "num_trees": 5},
 *                    "grid": {"gamma": [0.1, 1]} } ] }
 * A CSV source is { "csv": "path", "target": "PE", "has_header": true, "train_fraction": 0.7 }.
 */
inline ExperimentConfig experiment_from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    cfg.name = j.value("name", std::string("custom"));
    cfg.runs = j.value("runs", std::size_t{20});
    cfg.folds = j.value("folds", std::size_t{10});
    cfg.seed = j.value("seed", std::uint64_t{0});
    const auto& src = j.at("source");
    if (src.contains("csv")) {
        CsvSource csv;
        csv.path = src.at("csv").get<std::string>();
        const auto& t = src.value("target", nlohmann::json("y"));
        csv.target = t.is_number_unsigned() ? TargetColumn(t.get<std::size_t>()) : TargetColumn(t.get<std::string>());
        csv.has_header = src.value("has_header", true);
        csv.train_fraction = src.value("train_fraction", 0.7);
        cfg.source = csv;
    } else {
        SyntheticSource syn;
        syn.function = src.at("function").get<std::string>();
        (void)synth::function_by_name(syn.function);
        syn.train = detail::sampling_from_json(src.at("train"));
        syn.test = detail::sampling_from_json(src.at("test"));
        syn.noise_var = src.value("noise_var", 0.0);
        syn.test_noise_var = src.value("test_noise_var", 0.0);
        cfg.source = syn;
    }
    for (const auto& mj : j.at("methods")) {
        MethodSpec m;
        m.label = mj.value("label", std::string("method"));
        if (mj.contains("params"))
            for (const auto& [key, v] : mj.at("params").items()) detail::apply_param(m.base, key, v);
        if (mj.contains("grid")) m.grid = detail::grid_from_json(mj.at("grid"));
        m.base.validate();
        cfg.methods.push_back(std::move(m));
    }
    return cfg;
}

} // namespace linboost
