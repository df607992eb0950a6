#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gt/common.hpp"

namespace gt {

struct MetricReport {
    double auc = 0.0;
    double precision_at_half = 0.0;
    double recall_at_half = 0.0;
    double f1 = 0.0;
    bool precision_defined = true;  // false when nothing was predicted positive
    std::map<int, double> precision_at_k;
    int n_pos = 0;
    int n_neg = 0;
};

/// Mann-Whitney AUC: P(random positive outranks random negative), ties 1/2.
inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("auc: size mismatch");
    std::size_t n_pos = 0, n_neg = 0;
    for (int y : labels) (y ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("auc: single-class labels");

    // rank-sum with average ranks over tie groups
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
        double avg_rank = (static_cast<double>(i) + static_cast<double>(j - 1)) / 2.0 + 1.0;
        for (std::size_t k = i; k < j; ++k)
            if (labels[idx[k]]) rank_sum_pos += avg_rank;
        i = j;
    }
    double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1) / 2.0) / (np * nn);
}

struct ThresholdMetrics {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    bool precision_defined = true;
    int tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Predicted positive <=> score >= t. f1 is 0 (not NaN) at zero denominators.
inline ThresholdMetrics threshold_metrics(const std::vector<double>& scores,
                                          const std::vector<int>& labels, double t = 0.5) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("threshold_metrics: size mismatch");
    ThresholdMetrics m;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        bool pred = scores[i] >= t;
        if (pred && labels[i]) ++m.tp;
        else if (pred) ++m.fp;
        else if (labels[i]) ++m.fn;
        else ++m.tn;
    }
    if (m.tp + m.fp == 0) {
        m.precision_defined = false;
        m.precision = 0.0;
    } else {
        m.precision = static_cast<double>(m.tp) / (m.tp + m.fp);
    }
    m.recall = m.tp + m.fn == 0 ? 0.0 : static_cast<double>(m.tp) / (m.tp + m.fn);
    m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

/// Fraction of positives among the top-K by score; ties break by ascending
/// client_id. K > n clamps to n (flagged via *clamped).
inline double precision_at_k(const std::vector<double>& scores, const std::vector<int>& labels,
                             std::size_t k, const std::vector<std::string>& client_ids,
                             bool* clamped = nullptr) {
    if (k < 1) throw std::invalid_argument("precision_at_k: K must be >= 1");
    if (scores.size() != labels.size() || scores.size() != client_ids.size())
        throw std::invalid_argument("precision_at_k: size mismatch");
    if (clamped) *clamped = k > scores.size();
    k = std::min(k, scores.size());
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return client_ids[a] < client_ids[b];
    });
    std::size_t pos = 0;
    for (std::size_t i = 0; i < k; ++i) pos += static_cast<std::size_t>(labels[idx[i]] != 0);
    return static_cast<double>(pos) / static_cast<double>(k);
}

inline MetricReport full_metrics(const std::vector<double>& scores, const std::vector<int>& labels,
                                 const std::vector<std::string>& client_ids,
                                 const std::vector<int>& ks = {100, 500}) {
    MetricReport rep;
    rep.auc = auc(scores, labels);
    auto tm = threshold_metrics(scores, labels, 0.5);
    rep.precision_at_half = tm.precision;
    rep.recall_at_half = tm.recall;
    rep.f1 = tm.f1;
    rep.precision_defined = tm.precision_defined;
    for (int y : labels) (y ? rep.n_pos : rep.n_neg)++;
    for (int k : ks)
        rep.precision_at_k[k] =
            precision_at_k(scores, labels, static_cast<std::size_t>(k), client_ids);
    return rep;
}

inline nlohmann::json to_json(const MetricReport& r) {
    nlohmann::json j = {{"auc", r.auc},
                        {"f1", r.f1},
                        {"precision_at_0.5", r.precision_at_half},
                        {"recall_at_0.5", r.recall_at_half},
                        {"precision_defined", r.precision_defined},
                        {"n_pos", r.n_pos},
                        {"n_neg", r.n_neg}};
    for (const auto& [k, v] : r.precision_at_k) j["precision_at_" + std::to_string(k)] = v;
    return j;
}

}  // namespace gt
