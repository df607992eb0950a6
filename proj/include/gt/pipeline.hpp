#pragma once

#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gt/eval.hpp"
#include "gt/explain.hpp"
#include "gt/features.hpp"
#include "gt/gbdt.hpp"

namespace gt {

struct SearchSpace {
    std::pair<int, int> n_trees{60, 250};
    std::pair<double, double> learning_rate{0.03, 0.3};  // log-uniform
    std::pair<int, int> max_leaves{8, 64};
    std::pair<int, int> max_depth{3, 8};
    std::pair<int, int> min_samples_leaf{5, 50};
    std::pair<double, double> l2_leaf_reg{0.01, 10.0};  // log-uniform
    std::pair<double, double> feature_subsample{0.6, 1.0};
    std::pair<double, double> pos_class_weight{1.0, 1.0};
    std::vector<GbdtConfig::Growth> growth_policies{GbdtConfig::Growth::depth_wise,
                                                    GbdtConfig::Growth::leaf_wise};
    int trial_budget = 8;
    std::uint64_t seed = 0;

    void validate() const {
        if (trial_budget < 1) throw std::invalid_argument("trial_budget must be >= 1");
        if (growth_policies.empty()) throw std::invalid_argument("growth_policies empty");
    }

    GbdtConfig sample(Rng& rng) const {
        GbdtConfig c;
        c.n_trees = static_cast<int>(rng.uniform_int(n_trees.first, n_trees.second));
        c.learning_rate = rng.log_uniform(learning_rate.first, learning_rate.second);
        c.max_leaves = static_cast<int>(rng.uniform_int(max_leaves.first, max_leaves.second));
        c.max_depth = static_cast<int>(rng.uniform_int(max_depth.first, max_depth.second));
        c.min_samples_leaf =
            static_cast<int>(rng.uniform_int(min_samples_leaf.first, min_samples_leaf.second));
        c.l2_leaf_reg = rng.log_uniform(l2_leaf_reg.first, l2_leaf_reg.second);
        c.feature_subsample = rng.uniform(feature_subsample.first, feature_subsample.second);
        c.pos_class_weight = rng.uniform(pos_class_weight.first, pos_class_weight.second);
        c.growth_policy = growth_policies[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(growth_policies.size()) - 1))];
        return c;
    }
};

struct CvReport {
    std::vector<double> fold_auc;
    double mean_auc = 0.0;
    double std_auc = 0.0;
    std::vector<std::string> feature_set;
    GbdtConfig config;
    int trial_id = -1;
    bool failed = false;
    std::string failure;
};

/// Records which rows every fitted statistic saw, so leakage of holdout rows
/// into caps, filtering, tuning or RFE can be proven absent after the fact.
struct LineageLog {
    struct Entry {
        std::string stat;
        std::vector<std::uint32_t> rows;  // sorted
    };
    std::vector<Entry> entries;

    void record(std::string stat, const std::vector<std::size_t>& rows) {
        Entry e;
        e.stat = std::move(stat);
        e.rows.assign(rows.begin(), rows.end());
        std::sort(e.rows.begin(), e.rows.end());
        entries.push_back(std::move(e));
    }

    /// True when no recorded fit touched any of the given rows.
    bool disjoint_from(const std::vector<std::size_t>& forbidden) const {
        std::set<std::uint32_t> f(forbidden.begin(), forbidden.end());
        for (const auto& e : entries)
            for (auto r : e.rows)
                if (f.count(r)) return false;
        return true;
    }
};

// ---- splitting ----------------------------------------------------------

/// Stratified holdout split; per-class test counts are round(count * fraction).
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    const std::vector<int>& labels, double test_fraction, std::uint64_t seed) {
    if (test_fraction <= 0 || test_fraction >= 1)
        throw std::invalid_argument("test_fraction must be in (0,1)");
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < labels.size(); ++i)
        by_class[labels[i] ? 1 : 0].push_back(i);
    for (int c = 0; c < 2; ++c)
        if (by_class[c].size() < 2)
            throw std::invalid_argument("stratified_split: a class has fewer than 2 members");

    std::vector<std::size_t> train, test;
    for (int c = 0; c < 2; ++c) {
        Rng rng(seed ^ (0xA5A5ULL + static_cast<std::uint64_t>(c)));
        auto idx = by_class[c];
        rng.shuffle(idx);
        auto n_test = static_cast<std::size_t>(
            std::lround(test_fraction * static_cast<double>(idx.size())));
        n_test = std::min(n_test, idx.size() - 1);
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < n_test ? test : train).push_back(idx[i]);
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {train, test};
}

/// k disjoint stratified folds partitioning all rows; per-fold class counts
/// are within one of proportional.
inline std::vector<std::vector<std::size_t>> stratified_kfold(const std::vector<int>& labels,
                                                              int k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("k must be >= 2");
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < labels.size(); ++i)
        by_class[labels[i] ? 1 : 0].push_back(i);
    for (int c = 0; c < 2; ++c)
        if (by_class[c].size() < static_cast<std::size_t>(k))
            throw std::invalid_argument("stratified_kfold: class smaller than k");

    std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
    for (int c = 0; c < 2; ++c) {
        Rng rng(seed ^ (0x5A5AULL + static_cast<std::uint64_t>(c)));
        auto idx = by_class[c];
        rng.shuffle(idx);
        for (std::size_t i = 0; i < idx.size(); ++i)
            folds[i % static_cast<std::size_t>(k)].push_back(idx[i]);
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

// ---- cross-validated evaluation -----------------------------------------

namespace detail {

inline std::vector<int> gather_labels(const std::vector<int>& labels,
                                      const std::vector<std::size_t>& rows) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(labels[r]);
    return out;
}

}  // namespace detail

/// Per-fold preprocessing (caps, correlation filter) is fitted on the fold's
/// training rows only and applied to its validation rows; SHAP, when
/// requested, is pooled over the validation folds.
struct CvOutcome {
    CvReport report;
    std::map<std::string, double> pooled_mean_abs_shap;  // over current feature set
};

inline CvOutcome cv_evaluate(const FeatureMatrix& matrix, const std::vector<int>& labels,
                             const std::vector<std::string>& features, const GbdtConfig& config,
                             const std::vector<std::vector<std::size_t>>& folds,
                             bool with_shap = false, LineageLog* lineage = nullptr,
                             const std::string& lineage_tag = "", int n_threads = 1,
                             double r_max = 0.80) {
    CvOutcome out;
    out.report.config = config;
    out.report.feature_set = features;

    FeatureMatrix sub = matrix.select_columns(features);
    std::map<std::string, double> shap_sum;
    std::size_t shap_rows = 0;
    for (const auto& f : features) shap_sum[f] = 0.0;

    for (std::size_t fi = 0; fi < folds.size(); ++fi) {
        std::vector<std::size_t> train_rows;
        for (std::size_t fj = 0; fj < folds.size(); ++fj)
            if (fj != fi)
                train_rows.insert(train_rows.end(), folds[fj].begin(), folds[fj].end());
        std::sort(train_rows.begin(), train_rows.end());
        const auto& val_rows = folds[fi];

        auto caps = fit_caps(sub, train_rows);
        if (lineage) lineage->record(lineage_tag + " fold" + std::to_string(fi) + " caps", train_rows);
        auto capped = apply_caps(sub, caps);

        auto filt = correlation_filter(capped, detail::gather_labels(labels, train_rows), r_max,
                                       train_rows);
        if (lineage)
            lineage->record(lineage_tag + " fold" + std::to_string(fi) + " corr_filter", train_rows);
        if (filt.surviving.empty()) throw std::runtime_error("all features filtered out in fold");

        auto train_m = capped.select_rows(train_rows).select_columns(filt.surviving);
        auto val_m = capped.select_rows(val_rows).select_columns(filt.surviving);
        auto train_y = detail::gather_labels(labels, train_rows);
        auto val_y = detail::gather_labels(labels, val_rows);

        auto model = fit(train_m, train_y, config, n_threads);
        if (lineage) lineage->record(lineage_tag + " fold" + std::to_string(fi) + " fit", train_rows);
        auto scores = predict_proba(model, val_m);
        out.report.fold_auc.push_back(auc(scores, val_y));

        if (with_shap) {
            auto exps = shap_values(model, val_m);
            for (const auto& ex : exps)
                for (std::size_t c = 0; c < model.feature_names.size(); ++c)
                    shap_sum[model.feature_names[c]] += std::abs(ex.phi[c]);
            shap_rows += exps.size();
        }
    }

    double mean = 0;
    for (double a : out.report.fold_auc) mean += a;
    mean /= static_cast<double>(out.report.fold_auc.size());
    double var = 0;
    for (double a : out.report.fold_auc) var += (a - mean) * (a - mean);
    out.report.mean_auc = mean;
    out.report.std_auc = std::sqrt(var / static_cast<double>(out.report.fold_auc.size()));

    if (with_shap && shap_rows > 0)
        for (auto& [k, v] : shap_sum) out.pooled_mean_abs_shap[k] = v / static_cast<double>(shap_rows);
    return out;
}

// ---- hyperparameter search ----------------------------------------------

/// Seeded uniform random search (log-uniform for learning_rate / l2_leaf_reg).
/// A failing trial is marked failed and skipped. Ties go to the lower trial id.
inline std::pair<GbdtConfig, std::vector<CvReport>> tune(
    const FeatureMatrix& matrix, const std::vector<int>& labels, const SearchSpace& space,
    const std::vector<std::string>& features, const std::vector<std::vector<std::size_t>>& folds,
    LineageLog* lineage = nullptr, int n_threads = 1) {
    space.validate();
    std::vector<CvReport> trials;
    int best = -1;
    for (int t = 0; t < space.trial_budget; ++t) {
        Rng rng(space.seed + 0x1000ULL * static_cast<std::uint64_t>(t + 1));
        GbdtConfig cfg = space.sample(rng);
        cfg.seed = space.seed + static_cast<std::uint64_t>(t);
        CvReport rep;
        try {
            auto outc = cv_evaluate(matrix, labels, features, cfg, folds, false, lineage,
                                    "tune trial" + std::to_string(t), n_threads);
            rep = outc.report;
        } catch (const std::exception& e) {
            rep.config = cfg;
            rep.failed = true;
            rep.failure = e.what();
        }
        rep.trial_id = t;
        trials.push_back(std::move(rep));
        if (!trials.back().failed &&
            (best < 0 || trials.back().mean_auc > trials[static_cast<std::size_t>(best)].mean_auc))
            best = t;
    }
    if (best < 0) throw std::runtime_error("tune: every trial failed");
    return {trials[static_cast<std::size_t>(best)].config, trials};
}

// ---- SHAP-driven recursive feature elimination ---------------------------

struct RfeRound {
    int round = 0;
    std::vector<std::string> removed;  // features removed at the end of this round
    double mean_auc = 0.0;
};

struct RfeResult {
    std::vector<RfeRound> history;
    std::vector<std::string> best_features;  // feature set of the best-AUC round
    double best_auc = 0.0;
};

/// Repeatedly fits via CV, pools validation-fold SHAP, and removes the
/// floor(drop_fraction * |F|) (at least 1) least important features until
/// mean CV AUC stops improving by epsilon for `patience` rounds or |F| < 2.
inline RfeResult shap_rfe(const FeatureMatrix& matrix, const std::vector<int>& labels,
                          const GbdtConfig& config, std::vector<std::string> features,
                          const std::vector<std::vector<std::size_t>>& folds,
                          double drop_fraction = 0.10, double epsilon = 1e-4, int patience = 1,
                          LineageLog* lineage = nullptr, int n_threads = 1) {
    if (features.size() < 2) throw std::invalid_argument("shap_rfe: need at least 2 features");
    RfeResult res;
    res.best_auc = -std::numeric_limits<double>::infinity();
    int round = 0, no_improve = 0;

    while (true) {
        ++round;
        auto outc = cv_evaluate(matrix, labels, features, config, folds, true, lineage,
                                "rfe round" + std::to_string(round), n_threads);
        double mean_auc = outc.report.mean_auc;

        // -inf + finite epsilon is still -inf, so the first round always
        // counts as improved; with epsilon = inf no round ever does.
        bool improved = mean_auc >= res.best_auc + epsilon;
        if (mean_auc > res.best_auc) {
            res.best_auc = mean_auc;
            res.best_features = features;
        }

        RfeRound rr;
        rr.round = round;
        rr.mean_auc = mean_auc;

        no_improve = improved ? 0 : no_improve + 1;
        if (no_improve >= patience || features.size() < 2) {
            res.history.push_back(std::move(rr));
            break;
        }

        // rank ascending by pooled mean |SHAP|; ties by name for determinism
        std::vector<std::pair<double, std::string>> ranked;
        for (const auto& f : features) {
            auto it = outc.pooled_mean_abs_shap.find(f);
            ranked.emplace_back(it == outc.pooled_mean_abs_shap.end() ? 0.0 : it->second, f);
        }
        std::sort(ranked.begin(), ranked.end());
        std::size_t n_drop = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::floor(drop_fraction * static_cast<double>(features.size()))));
        n_drop = std::min(n_drop, features.size() - 1);
        std::set<std::string> dropped;
        for (std::size_t i = 0; i < n_drop; ++i) {
            dropped.insert(ranked[i].second);
            rr.removed.push_back(ranked[i].second);
        }
        res.history.push_back(std::move(rr));
        std::erase_if(features, [&](const std::string& f) { return dropped.count(f) > 0; });
        if (features.size() < 2) break;
    }
    return res;
}

// ---- full Algorithm-1 style pipeline --------------------------------------

struct PipelineOptions {
    double tau = 0.30;
    double test_fraction = 0.20;
    int cv_folds = 5;
    std::uint64_t seed = 7;
    double epsilon = 1e-4;
    int patience = 1;
    double drop_fraction = 0.10;
    int outer_rounds_limit = 3;
    std::size_t min_rows = 100;
    int n_threads = 1;
    double r_max = 0.80;
    std::vector<std::string> excluded_features;  // user-supplied non-actionable list
};

struct PipelineResult {
    GbdtConfig best_config;
    std::vector<std::string> final_features;
    std::vector<RfeRound> elimination_history;
    TreeEnsemble final_model;
    std::vector<CapRule> final_caps;     // fitted on the training split
    FilterReport final_filter;           // fitted on the training split
    MetricReport holdout_metrics;
    double best_cv_auc = 0.0;
    std::vector<std::size_t> train_rows, holdout_rows;
    LineageLog lineage;
    std::vector<CvReport> trials;
};

/// Alternates hyperparameter search and SHAP-RFE on the training split until
/// CV AUC stops improving, then retrains on the whole training split and
/// scores the untouched holdout.
inline PipelineResult run_full_pipeline(const FeatureMatrix& matrix, const std::vector<int>& labels,
                                        const SearchSpace& space_in, const PipelineOptions& opt) {
    if (matrix.rows() < opt.min_rows)
        throw std::runtime_error("too few rows: " + std::to_string(matrix.rows()) + " < " +
                                 std::to_string(opt.min_rows));
    PipelineResult res;
    auto [train_rows, holdout_rows] = stratified_split(labels, opt.test_fraction, opt.seed);
    res.train_rows = train_rows;
    res.holdout_rows = holdout_rows;

    // everything below sees only the training split; row indices are local
    // to train_m but lineage is recorded in original row ids
    FeatureMatrix train_m = matrix.select_rows(train_rows);
    std::vector<int> train_y = detail::gather_labels(labels, train_rows);

    LineageLog local;  // local (train-split) indices
    auto folds = stratified_kfold(train_y, opt.cv_folds, opt.seed);

    std::vector<std::string> features;
    {
        std::set<std::string> excl(opt.excluded_features.begin(), opt.excluded_features.end());
        for (const auto& f : matrix.feature_names)
            if (!excl.count(f)) features.push_back(f);
    }

    double best_outer = -std::numeric_limits<double>::infinity();
    for (int outer = 1; outer <= opt.outer_rounds_limit; ++outer) {
        SearchSpace space = space_in;
        space.seed = space_in.seed + 7919ULL * static_cast<std::uint64_t>(outer - 1);
        auto [cfg, trials] = tune(train_m, train_y, space, features, folds, &local, opt.n_threads);
        res.trials.insert(res.trials.end(), trials.begin(), trials.end());

        auto rfe = shap_rfe(train_m, train_y, cfg, features, folds, opt.drop_fraction, opt.epsilon,
                            opt.patience, &local, opt.n_threads);
        for (auto& rr : rfe.history) {
            rr.round += static_cast<int>(res.elimination_history.size());
            res.elimination_history.push_back(rr);
        }
        if (rfe.best_auc >= best_outer + opt.epsilon) {
            best_outer = rfe.best_auc;
            res.best_config = cfg;
            features = rfe.best_features;
        } else {
            if (rfe.best_auc > best_outer) {
                best_outer = rfe.best_auc;
                res.best_config = cfg;
                features = rfe.best_features;
            }
            break;  // no further gain in overall CV performance
        }
    }
    res.best_cv_auc = best_outer;
    res.final_features = features;

    // final retrain on the full training split with train-fitted preprocessing
    {
        std::vector<std::size_t> all_train(train_m.rows());
        for (std::size_t i = 0; i < all_train.size(); ++i) all_train[i] = i;
        FeatureMatrix sub = train_m.select_columns(features);
        auto caps = fit_caps(sub);
        local.record("final caps", all_train);
        auto capped = apply_caps(sub, caps);
        auto filt = correlation_filter(capped, train_y, opt.r_max);
        local.record("final corr_filter", all_train);
        res.final_caps = caps;
        res.final_filter = filt;
        res.final_features = filt.surviving;
        auto fit_m = capped.select_columns(filt.surviving);
        res.final_model = fit(fit_m, train_y, res.best_config, opt.n_threads);
        local.record("final fit", all_train);

        FeatureMatrix hold_sub = matrix.select_rows(holdout_rows).select_columns(features);
        auto hold_capped = apply_caps(hold_sub, caps).select_columns(filt.surviving);
        auto scores = predict_proba(res.final_model, hold_capped);
        auto hold_y = detail::gather_labels(labels, holdout_rows);
        res.holdout_metrics = full_metrics(scores, hold_y, hold_capped.client_ids);
    }

    // re-express lineage in original row ids
    for (auto& e : local.entries) {
        for (auto& r : e.rows) r = static_cast<std::uint32_t>(train_rows[r]);
        std::sort(e.rows.begin(), e.rows.end());
    }
    res.lineage = std::move(local);
    return res;
}

// ---- artifacts ------------------------------------------------------------

inline void write_elimination_history(const std::string& path,
                                      const std::vector<RfeRound>& history) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "round,mean_auc,removed_features\n";
    char buf[40];
    for (const auto& rr : history) {
        std::snprintf(buf, sizeof(buf), "%d,%.6f,", rr.round, rr.mean_auc);
        out << buf;
        for (std::size_t i = 0; i < rr.removed.size(); ++i)
            out << (i ? ";" : "") << rr.removed[i];
        out << "\n";
    }
}

inline nlohmann::json to_json(const PipelineResult& res) {
    nlohmann::json j;
    j["best_config"] = to_json(res.best_config);
    j["final_features"] = res.final_features;
    j["best_cv_auc"] = res.best_cv_auc;
    j["holdout_metrics"] = to_json(res.holdout_metrics);
    j["elimination_history"] = nlohmann::json::array();
    for (const auto& rr : res.elimination_history)
        j["elimination_history"].push_back(
            {{"round", rr.round}, {"mean_auc", rr.mean_auc}, {"removed", rr.removed}});
    j["n_train"] = res.train_rows.size();
    j["n_holdout"] = res.holdout_rows.size();
    j["trials"] = nlohmann::json::array();
    for (const auto& t : res.trials)
        j["trials"].push_back({{"trial_id", t.trial_id},
                               {"mean_auc", t.mean_auc},
                               {"std_auc", t.std_auc},
                               {"failed", t.failed}});
    return j;
}

}  // namespace gt
