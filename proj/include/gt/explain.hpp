#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gt/common.hpp"
#include "gt/gbdt.hpp"

namespace gt {

/// Per-client additive attribution in margin (log-odds) space.
/// base_value + sum(phi) equals the model margin (local accuracy).
struct ShapExplanation {
    std::string client_id;
    double base_value = 0.0;
    std::vector<double> phi;  // aligned to model feature_names
    double model_output = 0.0;
};

struct ImportanceRanking {
    std::vector<std::pair<std::string, double>> entries;  // desc by mean |phi|, ties by name
};

namespace detail {

/// Cover-weighted expectation of a tree's output (empty conditioning set).
inline double tree_expected_value(const Tree& t, int node = 0) {
    if (t.is_leaf(node)) return t.value[node];
    double cl = t.cover[t.left[node]], cr = t.cover[t.right[node]];
    double total = cl + cr;
    if (total <= 0) return 0.0;
    return (cl * tree_expected_value(t, t.left[node]) +
            cr * tree_expected_value(t, t.right[node])) /
           total;
}

struct PathElement {
    int feature_index;     // -1 for the initial element
    double zero_fraction;  // share of paths flowing through when feature unknown
    double one_fraction;   // 1 when x follows this split, else 0
    double pweight;
};

inline void extend_path(std::vector<PathElement>& path, double pz, double po, int pi) {
    path.push_back({pi, pz, po, path.empty() ? 1.0 : 0.0});
    const int d = static_cast<int>(path.size()) - 1;
    for (int i = d - 1; i >= 0; --i) {
        path[i + 1].pweight += po * path[i].pweight * (i + 1) / static_cast<double>(d + 1);
        path[i].pweight = pz * path[i].pweight * (d - i) / static_cast<double>(d + 1);
    }
}

inline void unwind_path(std::vector<PathElement>& path, int idx) {
    const int d = static_cast<int>(path.size()) - 1;
    double po = path[idx].one_fraction;
    double pz = path[idx].zero_fraction;
    double next = path[d].pweight;
    for (int i = d - 1; i >= 0; --i) {
        if (po != 0) {
            double tmp = path[i].pweight;
            path[i].pweight = next * (d + 1) / (po * (i + 1));
            next = tmp - path[i].pweight * pz * (d - i) / static_cast<double>(d + 1);
        } else {
            path[i].pweight = path[i].pweight * (d + 1) / (pz * (d - i));
        }
    }
    for (int i = idx; i < d; ++i) {
        path[i].feature_index = path[i + 1].feature_index;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
    path.pop_back();
}

/// Sum of permutation weights when the element at idx is removed.
inline double unwound_path_sum(const std::vector<PathElement>& path, int idx) {
    const int d = static_cast<int>(path.size()) - 1;
    double po = path[idx].one_fraction;
    double pz = path[idx].zero_fraction;
    double next = path[d].pweight;
    double total = 0.0;
    for (int i = d - 1; i >= 0; --i) {
        if (po != 0) {
            double tmp = next * (d + 1) / (po * (i + 1));
            total += tmp;
            next = path[i].pweight - tmp * pz * (d - i) / static_cast<double>(d + 1);
        } else {
            total += path[i].pweight / (pz * (d - i) / static_cast<double>(d + 1));
        }
    }
    return total;
}

inline void shap_recurse(const Tree& t, const double* x, std::vector<double>& phi, int node,
                         std::vector<PathElement> path, double pz, double po, int pi) {
    extend_path(path, pz, po, pi);
    if (t.is_leaf(node)) {
        for (int i = 1; i < static_cast<int>(path.size()); ++i) {
            double w = unwound_path_sum(path, i);
            phi[static_cast<std::size_t>(path[i].feature_index)] +=
                w * (path[i].one_fraction - path[i].zero_fraction) * t.value[node];
        }
        return;
    }
    const int f = t.feature[node];
    const int hot = t.route(node, x[f]);
    const int cold = hot == t.left[node] ? t.right[node] : t.left[node];
    const double cover_node = t.cover[node];
    double iz = 1.0, io = 1.0;
    // undo a previous occurrence of the same feature on the path
    for (int i = 1; i < static_cast<int>(path.size()); ++i) {
        if (path[i].feature_index == f) {
            iz = path[i].zero_fraction;
            io = path[i].one_fraction;
            unwind_path(path, i);
            break;
        }
    }
    shap_recurse(t, x, phi, hot, path, iz * t.cover[hot] / cover_node, io, f);
    shap_recurse(t, x, phi, cold, path, iz * t.cover[cold] / cover_node, 0.0, f);
}

}  // namespace detail

/// Exact Shapley attributions for one tree under the tree-path conditional
/// expectation, added into phi (length = number of model features).
inline void shap_single_tree(const Tree& tree, const double* x, std::vector<double>& phi) {
    if (tree.feature.empty()) return;
    if (tree.is_leaf(0)) return;  // constant tree attributes nothing
    detail::shap_recurse(tree, x, phi, 0, {}, 1.0, 1.0, -1);
}

inline double expected_margin(const TreeEnsemble& model) {
    double e = model.base_score;
    for (const auto& t : model.trees) e += detail::tree_expected_value(t);
    return e;
}

inline std::vector<ShapExplanation> shap_values(const TreeEnsemble& model,
                                                const FeatureMatrix& matrix) {
    std::vector<std::size_t> colmap(model.feature_names.size());
    for (std::size_t f = 0; f < model.feature_names.size(); ++f) {
        try {
            colmap[f] = matrix.col(model.feature_names[f]);
        } catch (const std::out_of_range&) {
            throw GbdtError("matrix is missing model feature '" + model.feature_names[f] + "'");
        }
    }
    const double base = expected_margin(model);
    std::vector<ShapExplanation> out(matrix.rows());
    std::vector<double> row(model.feature_names.size());
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        for (std::size_t f = 0; f < colmap.size(); ++f) row[f] = matrix.at(r, colmap[f]);
        auto& ex = out[r];
        ex.client_id = matrix.client_ids[r];
        ex.base_value = base;
        ex.phi.assign(model.feature_names.size(), 0.0);
        for (const auto& t : model.trees) shap_single_tree(t, row.data(), ex.phi);
        ex.model_output = model.margin_row(row.data());
    }
    return out;
}

inline ImportanceRanking mean_abs_importance(const std::vector<ShapExplanation>& explanations,
                                             const std::vector<std::string>& feature_names) {
    if (explanations.empty()) throw std::invalid_argument("no explanations");
    std::vector<double> acc(feature_names.size(), 0.0);
    for (const auto& ex : explanations) {
        if (ex.phi.size() != feature_names.size())
            throw std::invalid_argument("explanation width mismatch");
        for (std::size_t f = 0; f < acc.size(); ++f) acc[f] += std::abs(ex.phi[f]);
    }
    ImportanceRanking rank;
    for (std::size_t f = 0; f < acc.size(); ++f)
        rank.entries.emplace_back(feature_names[f], acc[f] / static_cast<double>(explanations.size()));
    std::sort(rank.entries.begin(), rank.entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return rank;
}

inline void write_importance(const std::string& path, const ImportanceRanking& rank) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "feature,mean_abs_shap\n";
    char buf[48];
    for (const auto& [name, v] : rank.entries) {
        std::snprintf(buf, sizeof(buf), ",%.17g\n", v);
        out << name << buf;
    }
}

/// Exports (feature value, shap value) pairs for the top-k features, enough
/// to render a beeswarm-style summary externally.
inline void summary_export(const std::string& path,
                           const std::vector<ShapExplanation>& explanations,
                           const FeatureMatrix& matrix,
                           const std::vector<std::string>& feature_names, std::size_t top_k = 20) {
    auto rank = mean_abs_importance(explanations, feature_names);
    top_k = std::min(top_k, rank.entries.size());

    nlohmann::json j;
    j["features"] = nlohmann::json::array();
    for (std::size_t i = 0; i < top_k; ++i) {
        const auto& [name, imp] = rank.entries[i];
        std::size_t fi = 0;
        while (feature_names[fi] != name) ++fi;
        std::size_t mc = matrix.col(name);
        nlohmann::json pairs = nlohmann::json::array();
        for (std::size_t r = 0; r < matrix.rows(); ++r) {
            double v = matrix.at(r, mc);
            pairs.push_back({{"value", is_missing(v) ? nlohmann::json() : nlohmann::json(v)},
                             {"shap", explanations[r].phi[fi]}});
        }
        j["features"].push_back({{"name", name}, {"mean_abs_shap", imp}, {"points", pairs}});
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << j.dump(1) << "\n";
}

}  // namespace gt
