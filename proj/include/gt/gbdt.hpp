#pragma once

#include <cstdint>
#include <queue>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "gt/common.hpp"
#include "gt/features.hpp"

namespace gt {

struct GbdtConfig {
    int n_trees = 100;
    double learning_rate = 0.1;
    int max_leaves = 31;
    int max_depth = 6;
    int min_samples_leaf = 5;
    double l2_leaf_reg = 1.0;
    int n_bins = 64;
    enum class Growth { depth_wise, leaf_wise } growth_policy = Growth::leaf_wise;
    double pos_class_weight = 1.0;
    std::uint64_t seed = 0;
    double feature_subsample = 1.0;

    void validate() const {
        if (n_trees < 1) throw std::invalid_argument("n_trees must be >= 1");
        if (learning_rate <= 0 || learning_rate > 1)
            throw std::invalid_argument("learning_rate must be in (0,1]");
        if (n_bins < 2 || n_bins > 256) throw std::invalid_argument("n_bins must be in [2,256]");
        if (feature_subsample <= 0 || feature_subsample > 1)
            throw std::invalid_argument("feature_subsample must be in (0,1]");
        if (pos_class_weight < 0) throw std::invalid_argument("pos_class_weight must be >= 0");
        if (max_leaves < 2) throw std::invalid_argument("max_leaves must be >= 2");
        if (max_depth < 1) throw std::invalid_argument("max_depth must be >= 1");
        if (min_samples_leaf < 1) throw std::invalid_argument("min_samples_leaf must be >= 1");
        if (l2_leaf_reg < 0) throw std::invalid_argument("l2_leaf_reg must be >= 0");
    }
};

/// One tree in flat-array form. Internal node: feature >= 0, route left when
/// x <= threshold (missing routes by missing_left). Leaf: feature == -1.
struct Tree {
    std::vector<int> feature;
    std::vector<double> threshold;
    std::vector<std::uint8_t> missing_left;
    std::vector<int> left;
    std::vector<int> right;
    std::vector<double> value;  // log-odds increment at leaves, 0 elsewhere
    std::vector<double> cover;  // training rows reaching the node

    int add_node() {
        feature.push_back(-1);
        threshold.push_back(0.0);
        missing_left.push_back(1);
        left.push_back(-1);
        right.push_back(-1);
        value.push_back(0.0);
        cover.push_back(0.0);
        return static_cast<int>(feature.size()) - 1;
    }

    bool is_leaf(int n) const { return feature[n] < 0; }

    /// Child the row routes to, honoring the missing-direction flag.
    int route(int n, double x) const {
        if (is_missing(x)) return missing_left[n] ? left[n] : right[n];
        return x <= threshold[n] ? left[n] : right[n];
    }

    double predict_row(const double* x) const {
        int n = 0;
        while (!is_leaf(n)) n = route(n, x[feature[n]]);
        return value[n];
    }
};

class GbdtError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TreeEnsemble {
    static constexpr int kFormatVersion = 1;

    double base_score = 0.0;  // log-odds of training prevalence
    std::vector<Tree> trees;
    std::vector<std::string> feature_names;
    GbdtConfig config;
    std::vector<double> training_loss;  // index 0 = base-only loss, then one per tree

    /// Raw margin (log-odds) for a dense row aligned to feature_names.
    double margin_row(const double* x) const {
        double m = base_score;
        for (const auto& t : trees) m += t.predict_row(x);
        return m;
    }
};

namespace detail {

struct BinnedData {
    // candidate split thresholds per feature (ascending); bin b = values in
    // (thr[b-1], thr[b]], missing stored as kMissingBin
    static constexpr std::uint16_t kMissingBin = 0xFFFF;
    std::vector<std::vector<double>> thresholds;
    std::vector<std::uint16_t> bins;  // row-major [row * n_features + f]
    std::size_t n_rows = 0, n_features = 0;

    std::uint16_t bin(std::size_t r, std::size_t f) const { return bins[r * n_features + f]; }
};

inline BinnedData bin_data(const FeatureMatrix& m, int n_bins) {
    BinnedData b;
    b.n_rows = m.rows();
    b.n_features = m.cols();
    b.thresholds.resize(b.n_features);
    for (std::size_t f = 0; f < b.n_features; ++f) {
        std::vector<double> vals;
        for (std::size_t r = 0; r < b.n_rows; ++r) {
            double v = m.at(r, f);
            if (!is_missing(v)) vals.push_back(v);
        }
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        auto& thr = b.thresholds[f];
        if (vals.size() <= static_cast<std::size_t>(n_bins)) {
            // every distinct value below the max is a candidate threshold
            for (std::size_t i = 0; i + 1 < vals.size(); ++i) thr.push_back(vals[i]);
        } else {
            for (int i = 1; i < n_bins; ++i) {
                std::size_t idx = static_cast<std::size_t>(i) * (vals.size() - 1) /
                                  static_cast<std::size_t>(n_bins);
                thr.push_back(vals[idx]);
            }
            thr.erase(std::unique(thr.begin(), thr.end()), thr.end());
            if (!thr.empty() && thr.back() == vals.back()) thr.pop_back();
        }
    }
    b.bins.resize(b.n_rows * b.n_features);
    for (std::size_t r = 0; r < b.n_rows; ++r)
        for (std::size_t f = 0; f < b.n_features; ++f) {
            double v = m.at(r, f);
            if (is_missing(v)) {
                b.bins[r * b.n_features + f] = BinnedData::kMissingBin;
            } else {
                const auto& thr = b.thresholds[f];
                auto it = std::lower_bound(thr.begin(), thr.end(), v);
                b.bins[r * b.n_features + f] = static_cast<std::uint16_t>(it - thr.begin());
            }
        }
    return b;
}

struct SplitChoice {
    double gain = -std::numeric_limits<double>::infinity();
    std::size_t feature = 0;
    std::uint16_t bin = 0;  // split: bin <= this -> left
    bool missing_left = true;
    double gl = 0, hl = 0;  // left grad/hess sums (missing included per flag)
    std::size_t cl = 0, cr = 0;
};

struct NodeStats {
    double g = 0, h = 0;
    std::size_t count = 0;
};

// Best split of one feature on the rows [begin, end) of `order`.
inline void best_split_feature(const BinnedData& bd, std::size_t f, const std::uint32_t* rows,
                               std::size_t n, const std::vector<double>& grad,
                               const std::vector<double>& hess, const NodeStats& total,
                               const GbdtConfig& cfg, SplitChoice& best) {
    const auto& thr = bd.thresholds[f];
    if (thr.empty()) return;
    const std::size_t nbins = thr.size() + 1;
    thread_local std::vector<double> hg, hh;
    thread_local std::vector<std::uint32_t> hc;
    hg.assign(nbins, 0.0);
    hh.assign(nbins, 0.0);
    hc.assign(nbins, 0);
    double gm = 0, hm = 0;
    std::size_t cm = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t r = rows[i];
        std::uint16_t b = bd.bin(r, f);
        if (b == BinnedData::kMissingBin) {
            gm += grad[r];
            hm += hess[r];
            ++cm;
        } else {
            hg[b] += grad[r];
            hh[b] += hess[r];
            ++hc[b];
        }
    }
    const double lambda = cfg.l2_leaf_reg;
    const double parent = total.g * total.g / (total.h + lambda);
    double cg = 0, ch = 0;
    std::size_t cc = 0;
    for (std::size_t b = 0; b + 1 < nbins; ++b) {
        cg += hg[b];
        ch += hh[b];
        cc += hc[b];
        for (int mleft = 1; mleft >= 0; --mleft) {
            double gl = cg + (mleft ? gm : 0.0);
            double hl = ch + (mleft ? hm : 0.0);
            std::size_t cl = cc + (mleft ? cm : 0);
            std::size_t cr = total.count - cl;
            if (cl < static_cast<std::size_t>(cfg.min_samples_leaf) ||
                cr < static_cast<std::size_t>(cfg.min_samples_leaf))
                continue;
            double gr = total.g - gl, hr = total.h - hl;
            double gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent);
            // deterministic tie-break: lower feature, lower bin, missing-left first
            bool better = gain > best.gain + 1e-12;
            if (!better && std::isfinite(best.gain) && std::abs(gain - best.gain) <= 1e-12) {
                auto key = std::make_tuple(f, b, mleft == 0);
                auto bkey = std::make_tuple(best.feature, static_cast<std::size_t>(best.bin),
                                            !best.missing_left);
                better = key < bkey;
            }
            if (better) {
                best.gain = gain;
                best.feature = f;
                best.bin = static_cast<std::uint16_t>(b);
                best.missing_left = mleft != 0;
                best.gl = gl;
                best.hl = hl;
                best.cl = cl;
                best.cr = cr;
            }
        }
    }
}

}  // namespace detail

/// Fits a boosted binary-logistic ensemble with second-order (Newton) steps
/// over histogram splits. Deterministic for fixed (data, config, seed) at any
/// thread count: histograms may build in parallel but gains reduce in fixed
/// feature order.
inline TreeEnsemble fit(const FeatureMatrix& matrix, const std::vector<int>& labels,
                        const GbdtConfig& config, int n_threads = 1) {
    config.validate();
    const std::size_t n = matrix.rows(), nf = matrix.cols();
    if (labels.size() != n) throw GbdtError("labels size does not match matrix rows");
    std::size_t n_pos = 0;
    for (int y : labels) n_pos += static_cast<std::size_t>(y != 0);
    if (n_pos == 0 || n_pos == n) throw GbdtError("training labels contain a single class");

    auto bd = detail::bin_data(matrix, config.n_bins);

    std::vector<double> w(n);
    double wsum = 0, wpos = 0;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = labels[i] ? config.pos_class_weight : 1.0;
        wsum += w[i];
        if (labels[i]) wpos += w[i];
    }
    if (wpos <= 0 || wpos >= wsum) throw GbdtError("class weighting removed a class");

    TreeEnsemble model;
    model.config = config;
    model.feature_names = matrix.feature_names;
    double prev = wpos / wsum;
    model.base_score = std::log(prev / (1.0 - prev));

    std::vector<double> margin(n, model.base_score);
    auto log_loss = [&]() {
        double s = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double p = sigmoid(margin[i]);
            p = std::clamp(p, 1e-15, 1.0 - 1e-15);
            s += w[i] * (labels[i] ? -std::log(p) : -std::log(1.0 - p));
        }
        return s / wsum;
    };
    model.training_loss.push_back(log_loss());

    std::vector<double> grad(n), hess(n);
    std::vector<std::uint32_t> order(n);

    const std::size_t n_sub =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(config.feature_subsample *
                                                                    static_cast<double>(nf))));
    Rng feat_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

    for (int it = 0; it < config.n_trees; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            double p = sigmoid(margin[i]);
            grad[i] = w[i] * (p - (labels[i] ? 1.0 : 0.0));
            hess[i] = std::max(w[i] * p * (1.0 - p), 1e-16);
        }
        // per-tree feature subsample, sorted so tie-breaking stays index-ordered
        std::vector<std::size_t> feats(nf);
        for (std::size_t f = 0; f < nf; ++f) feats[f] = f;
        if (n_sub < nf) {
            feat_rng.shuffle(feats);
            feats.resize(n_sub);
            std::sort(feats.begin(), feats.end());
        }

        Tree tree;
        int root = tree.add_node();
        for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);

        struct BuildNode {
            int node;
            std::size_t begin, end;  // range in `order`
            detail::NodeStats stats;
            int depth;
            detail::SplitChoice split;  // evaluated lazily
            bool split_done = false;
        };
        std::vector<BuildNode> work;
        {
            detail::NodeStats st;
            for (std::size_t i = 0; i < n; ++i) {
                st.g += grad[i];
                st.h += hess[i];
            }
            st.count = n;
            tree.cover[root] = static_cast<double>(n);
            work.push_back({root, 0, n, st, 0, {}, false});
        }

        auto eval_split = [&](BuildNode& bn) {
            bn.split = detail::SplitChoice{};
            bn.split_done = true;
            if (bn.stats.count < 2 * static_cast<std::size_t>(config.min_samples_leaf)) return;
            if (n_threads <= 1 || feats.size() < 2) {
                for (std::size_t f : feats)
                    detail::best_split_feature(bd, f, order.data() + bn.begin, bn.end - bn.begin,
                                               grad, hess, bn.stats, config, bn.split);
            } else {
                std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(n_threads),
                                                       feats.size());
                std::vector<detail::SplitChoice> partial(feats.size());
                std::vector<std::thread> pool;
                for (std::size_t t = 0; t < nt; ++t) {
                    pool.emplace_back([&, t]() {
                        for (std::size_t fi = t; fi < feats.size(); fi += nt)
                            detail::best_split_feature(bd, feats[fi], order.data() + bn.begin,
                                                       bn.end - bn.begin, grad, hess, bn.stats,
                                                       config, partial[fi]);
                    });
                }
                for (auto& th : pool) th.join();
                // fixed-order reduction keeps results thread-count invariant
                for (std::size_t fi = 0; fi < feats.size(); ++fi) {
                    const auto& p = partial[fi];
                    if (!std::isfinite(p.gain)) continue;
                    bool better = !std::isfinite(bn.split.gain) ||
                                  p.gain > bn.split.gain + 1e-12 ||
                                  (std::abs(p.gain - bn.split.gain) <= 1e-12 &&
                                   p.feature < bn.split.feature);
                    if (better) bn.split = p;
                }
            }
        };

        auto apply_split = [&](BuildNode bn) -> std::pair<BuildNode, BuildNode> {
            const auto& sp = bn.split;
            tree.feature[bn.node] = static_cast<int>(sp.feature);
            tree.threshold[bn.node] = bd.thresholds[sp.feature][sp.bin];
            tree.missing_left[bn.node] = sp.missing_left ? 1 : 0;
            int lc = tree.add_node();
            int rc = tree.add_node();
            tree.left[bn.node] = lc;
            tree.right[bn.node] = rc;
            auto goes_left = [&](std::uint32_t r) {
                std::uint16_t b = bd.bin(r, sp.feature);
                if (b == detail::BinnedData::kMissingBin) return sp.missing_left;
                return b <= sp.bin;
            };
            auto mid = std::stable_partition(order.begin() + bn.begin, order.begin() + bn.end,
                                             goes_left);
            std::size_t m = static_cast<std::size_t>(mid - order.begin());
            BuildNode l{lc, bn.begin, m, {sp.gl, sp.hl, sp.cl}, bn.depth + 1, {}, false};
            BuildNode r{rc,
                        m,
                        bn.end,
                        {bn.stats.g - sp.gl, bn.stats.h - sp.hl, sp.cr},
                        bn.depth + 1,
                        {},
                        false};
            tree.cover[lc] = static_cast<double>(sp.cl);
            tree.cover[rc] = static_cast<double>(sp.cr);
            return {l, r};
        };

        auto finalize_leaf = [&](const BuildNode& bn) {
            tree.value[bn.node] =
                -bn.stats.g / (bn.stats.h + config.l2_leaf_reg) * config.learning_rate;
        };

        if (config.growth_policy == GbdtConfig::Growth::depth_wise) {
            std::vector<BuildNode> level = std::move(work);
            while (!level.empty()) {
                std::vector<BuildNode> next;
                for (auto& bn : level) {
                    if (bn.depth >= config.max_depth) {
                        finalize_leaf(bn);
                        continue;
                    }
                    eval_split(bn);
                    if (bn.split.gain <= 0) {
                        finalize_leaf(bn);
                        continue;
                    }
                    auto [l, r] = apply_split(bn);
                    next.push_back(l);
                    next.push_back(r);
                }
                level = std::move(next);
            }
        } else {
            // leaf-wise: always split the open leaf with the highest gain
            std::vector<BuildNode> leaves = std::move(work);
            eval_split(leaves[0]);
            int n_leaves = 1;
            while (n_leaves < config.max_leaves) {
                int best = -1;
                for (std::size_t i = 0; i < leaves.size(); ++i) {
                    if (!leaves[i].split_done || leaves[i].split.gain <= 0) continue;
                    if (best < 0 || leaves[i].split.gain > leaves[best].split.gain + 1e-12)
                        best = static_cast<int>(i);
                }
                if (best < 0) break;
                BuildNode bn = leaves[best];
                leaves.erase(leaves.begin() + best);
                auto [l, r] = apply_split(bn);
                eval_split(l);
                eval_split(r);
                leaves.push_back(l);
                leaves.push_back(r);
                ++n_leaves;
            }
            for (auto& bn : leaves) finalize_leaf(bn);
        }

        // update margins by walking rows through the finished tree
        for (std::size_t i = 0; i < n; ++i) {
            int node = 0;
            while (!tree.is_leaf(node))
                node = tree.route(node, matrix.at(i, static_cast<std::size_t>(tree.feature[node])));
            margin[i] += tree.value[node];
        }

        model.trees.push_back(std::move(tree));
        model.training_loss.push_back(log_loss());
    }
    return model;
}

/// Probabilities for each row; matrix must contain every model feature.
inline std::vector<double> predict_margin(const TreeEnsemble& model, const FeatureMatrix& matrix) {
    std::vector<std::size_t> colmap(model.feature_names.size());
    for (std::size_t f = 0; f < model.feature_names.size(); ++f) {
        try {
            colmap[f] = matrix.col(model.feature_names[f]);
        } catch (const std::out_of_range&) {
            throw GbdtError("matrix is missing model feature '" + model.feature_names[f] + "'");
        }
    }
    std::vector<double> out(matrix.rows());
    std::vector<double> row(model.feature_names.size());
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        for (std::size_t f = 0; f < colmap.size(); ++f) row[f] = matrix.at(r, colmap[f]);
        out[r] = model.margin_row(row.data());
    }
    return out;
}

inline std::vector<double> predict_proba(const TreeEnsemble& model, const FeatureMatrix& matrix) {
    auto m = predict_margin(model, matrix);
    for (double& v : m) v = sigmoid(v);
    return m;
}

// ---- serialization ------------------------------------------------------

inline nlohmann::json to_json(const GbdtConfig& c) {
    return {{"n_trees", c.n_trees},
            {"learning_rate", c.learning_rate},
            {"max_leaves", c.max_leaves},
            {"max_depth", c.max_depth},
            {"min_samples_leaf", c.min_samples_leaf},
            {"l2_leaf_reg", c.l2_leaf_reg},
            {"n_bins", c.n_bins},
            {"growth_policy",
             c.growth_policy == GbdtConfig::Growth::leaf_wise ? "leaf_wise" : "depth_wise"},
            {"pos_class_weight", c.pos_class_weight},
            {"seed", c.seed},
            {"feature_subsample", c.feature_subsample}};
}

inline GbdtConfig config_from_json(const nlohmann::json& j) {
    GbdtConfig c;
    c.n_trees = j.value("n_trees", c.n_trees);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.max_leaves = j.value("max_leaves", c.max_leaves);
    c.max_depth = j.value("max_depth", c.max_depth);
    c.min_samples_leaf = j.value("min_samples_leaf", c.min_samples_leaf);
    c.l2_leaf_reg = j.value("l2_leaf_reg", c.l2_leaf_reg);
    c.n_bins = j.value("n_bins", c.n_bins);
    c.growth_policy = j.value("growth_policy", "leaf_wise") == std::string("depth_wise")
                          ? GbdtConfig::Growth::depth_wise
                          : GbdtConfig::Growth::leaf_wise;
    c.pos_class_weight = j.value("pos_class_weight", c.pos_class_weight);
    c.seed = j.value("seed", c.seed);
    c.feature_subsample = j.value("feature_subsample", c.feature_subsample);
    return c;
}

inline std::string serialize(const TreeEnsemble& model) {
    nlohmann::json j;
    j["format_version"] = TreeEnsemble::kFormatVersion;
    j["base_score"] = model.base_score;
    j["feature_names"] = model.feature_names;
    j["config"] = to_json(model.config);
    j["training_loss"] = model.training_loss;
    j["trees"] = nlohmann::json::array();
    for (const auto& t : model.trees) {
        j["trees"].push_back({{"feature", t.feature},
                              {"threshold", t.threshold},
                              {"missing_left", t.missing_left},
                              {"left", t.left},
                              {"right", t.right},
                              {"value", t.value},
                              {"cover", t.cover}});
    }
    return j.dump(1);
}

inline TreeEnsemble deserialize(const std::string& bytes) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::exception& e) {
        throw GbdtError(std::string("corrupt model payload: ") + e.what());
    }
    if (!j.contains("format_version") ||
        j["format_version"].get<int>() != TreeEnsemble::kFormatVersion)
        throw GbdtError("unsupported model format version");
    TreeEnsemble m;
    try {
        m.base_score = j.at("base_score").get<double>();
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        m.config = config_from_json(j.at("config"));
        m.training_loss = j.value("training_loss", std::vector<double>{});
        for (const auto& tj : j.at("trees")) {
            Tree t;
            t.feature = tj.at("feature").get<std::vector<int>>();
            t.threshold = tj.at("threshold").get<std::vector<double>>();
            t.missing_left = tj.at("missing_left").get<std::vector<std::uint8_t>>();
            t.left = tj.at("left").get<std::vector<int>>();
            t.right = tj.at("right").get<std::vector<int>>();
            t.value = tj.at("value").get<std::vector<double>>();
            t.cover = tj.at("cover").get<std::vector<double>>();
            std::size_t n = t.feature.size();
            if (t.threshold.size() != n || t.left.size() != n || t.right.size() != n ||
                t.value.size() != n || t.cover.size() != n || t.missing_left.size() != n)
                throw GbdtError("corrupt model payload: ragged tree arrays");
            m.trees.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw GbdtError(std::string("corrupt model payload: ") + e.what());
    }
    return m;
}

inline std::uint64_t model_hash(const TreeEnsemble& model) { return fnv1a(serialize(model)); }

}  // namespace gt
