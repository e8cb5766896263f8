#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "linboost/boosting.hpp"
#include "linboost/error.hpp"

namespace linboost {

// Model document layout (JSON, UTF-8):
//   { "format": "linboost-model", "version": "1", "mode": "constant"|"linear",
//     "dim": d, "base_prediction": b, "centering": [means...],
//     "params": {...}, "trees": [node, ...] }
// node = { "feature": k, "threshold": t, "left": node, "right": node }
//      | { "leaf_weights": [w] }           (constant leaf)
//      | { "leaf_weights": [w_1..w_d, b] } (linear leaf)
inline constexpr const char* model_format_name = "linboost-model";
inline constexpr const char* model_format_version = "1";

namespace detail {

using json = nlohmann::json;

inline json node_to_json(const Tree& tree, std::size_t index) {
    const auto& n = tree.nodes[index];
    json j;
    if (n.is_leaf()) {
        json w = json::array();
        if (const auto* c = std::get_if<ConstantLeaf>(&n.model))
            w.push_back(c->weight);
        else
            for (double v : std::get<LinearLeaf>(n.model).weights) w.push_back(v);
        j["leaf_weights"] = std::move(w);
        return j;
    }
    j["feature"] = n.feature;
    j["threshold"] = n.threshold;
    j["left"] = node_to_json(tree, static_cast<std::size_t>(n.left));
    j["right"] = node_to_json(tree, static_cast<std::size_t>(n.right));
    return j;
}

inline void node_from_json(const json& j, std::size_t dim, Tree& tree, int depth) {
    if (!j.is_object()) throw ModelFormatError("tree node is not an object");
    if (depth > 4096) throw ModelFormatError("tree nesting too deep");
    const auto index = tree.nodes.size();
    tree.nodes.emplace_back();
    if (j.contains("leaf_weights")) {
        const auto& w = j.at("leaf_weights");
        if (!w.is_array()) throw ModelFormatError("leaf_weights must be an array");
        if (w.size() == 1) {
            tree.nodes[index].model = ConstantLeaf{w[0].get<double>()};
        } else if (w.size() == dim + 1) {
            Vector v(static_cast<Eigen::Index>(dim + 1));
            for (std::size_t k = 0; k <= dim; ++k) v[static_cast<Eigen::Index>(k)] = w[k].get<double>();
            tree.nodes[index].model = LinearLeaf{std::move(v)};
        } else {
            throw ModelFormatError("leaf_weights has " + std::to_string(w.size()) + " entries, expected 1 or " +
                                   std::to_string(dim + 1));
        }
        return;
    }
    const auto feature = j.at("feature").get<std::size_t>();
    if (feature >= dim) throw ModelFormatError("split feature index out of range");
    tree.nodes[index].feature = feature;
    tree.nodes[index].threshold = j.at("threshold").get<double>();
    tree.nodes[index].left = static_cast<std::int32_t>(tree.nodes.size());
    node_from_json(j.at("left"), dim, tree, depth + 1);
    tree.nodes[index].right = static_cast<std::int32_t>(tree.nodes.size());
    node_from_json(j.at("right"), dim, tree, depth + 1);
}

inline json params_to_json(const BoostParams& p) {
    json j;
    j["num_trees"] = p.num_trees;
    j["learning_rate"] = p.learning_rate;
    j["lambda"] = p.lambda;
    j["gamma"] = p.gamma;
    j["max_depth"] = p.max_depth;
    j["min_samples_leaf"] = p.min_samples_leaf ? json(*p.min_samples_leaf) : json(nullptr);
    j["min_samples_split"] = p.min_samples_split;
    j["subsample"] = p.subsample;
    j["mode"] = to_string(p.mode);
    j["seed"] = p.seed;
    return j;
}

inline BoostParams params_from_json(const json& j) {
    BoostParams p;
    p.num_trees = j.at("num_trees").get<std::size_t>();
    p.learning_rate = j.at("learning_rate").get<double>();
    p.lambda = j.at("lambda").get<double>();
    p.gamma = j.at("gamma").get<double>();
    p.max_depth = j.at("max_depth").get<int>();
    if (!j.at("min_samples_leaf").is_null()) p.min_samples_leaf = j.at("min_samples_leaf").get<std::size_t>();
    p.min_samples_split = j.at("min_samples_split").get<std::size_t>();
    p.subsample = j.at("subsample").get<double>();
    p.mode = parse_leaf_mode(j.at("mode").get<std::string>());
    p.seed = j.at("seed").get<std::uint64_t>();
    return p;
}

} // namespace detail

inline std::string model_to_json_string(const Ensemble& model) {
    detail::json j;
    j["format"] = model_format_name;
    j["version"] = model_format_version;
    j["mode"] = to_string(model.mode());
    j["dim"] = model.dim();
    j["base_prediction"] = model.base_prediction;
    j["centering"] = std::vector<double>(model.centering.means.begin(), model.centering.means.end());
    j["params"] = detail::params_to_json(model.params);
    auto trees = detail::json::array();
    for (const auto& t : model.trees) trees.push_back(detail::node_to_json(t, 0));
    j["trees"] = std::move(trees);
    return j.dump(1) + "\n";
}

inline Ensemble model_from_json_string(const std::string& text) {
    detail::json j;
    try {
        j = detail::json::parse(text);
    } catch (const detail::json::parse_error& e) {
        throw ModelFormatError(std::string("model document is not valid JSON: ") + e.what());
    }
    try {
        if (!j.is_object() || j.value("format", "") != model_format_name)
            throw ModelFormatError("not a linboost model document");
        if (!j.contains("version")) throw ModelFormatError("model document has no version field");
        const auto version = j.at("version").is_string() ? j.at("version").get<std::string>()
                                                         : j.at("version").dump();
        if (version != model_format_version)
            throw ModelFormatError("unsupported model version '" + version + "' (this reader supports '" +
                                   model_format_version + "')");
        Ensemble model;
        const auto dim = j.at("dim").get<std::size_t>();
        const auto means = j.at("centering").get<std::vector<double>>();
        if (dim < 1 || means.size() != dim) throw ModelFormatError("centering length does not match dim");
        model.centering.means = Eigen::Map<const Vector>(means.data(), static_cast<Eigen::Index>(dim));
        model.base_prediction = j.at("base_prediction").get<double>();
        model.params = detail::params_from_json(j.at("params"));
        if (to_string(model.params.mode) != j.at("mode").get<std::string>())
            throw ModelFormatError("mode field disagrees with params.mode");
        for (const auto& tj : j.at("trees")) {
            Tree t;
            t.gamma = model.params.gamma;
            detail::node_from_json(tj, dim, t, 0);
            model.trees.push_back(std::move(t));
        }
        return model;
    } catch (const ModelFormatError&) {
        throw;
    } catch (const std::exception& e) {
        throw ModelFormatError(std::string("malformed model document: ") + e.what());
    }
}

inline void save_model(const Ensemble& model, const std::filesystem::path& path) {
    write_file_atomic(path, model_to_json_string(model));
}

inline Ensemble load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelFormatError("cannot open model file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return model_from_json_string(buf.str());
}

} // namespace linboost
