#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "gt/common.hpp"
#include "gt/ingest.hpp"

namespace gt {

/// Growth fractions defining the binary targets; strictly increasing, each > 0.
struct GrowthThresholds {
    std::vector<double> taus{0.10, 0.30, 0.50};

    void validate() const {
        if (taus.empty()) throw std::invalid_argument("thresholds empty");
        double prev = 0.0;
        for (double t : taus) {
            if (t <= prev) throw std::invalid_argument("thresholds must be strictly increasing and > 0");
            prev = t;
        }
    }
};

/// Pre-window volume below which growth is undefined; such clients are
/// flagged ineligible instead of labeled.
inline constexpr double kEligibilityMinPreHl = 0.01;

struct LabeledClient {
    std::string client_id;
    double v_pre = 0.0;
    double v_post = 0.0;
    double growth = 0.0;
    std::map<double, int> labels;  // tau -> {0,1}
    bool eligible = false;
};

/// Cumulative volumes over the 12 months before and after installation.
/// The installation month itself belongs to neither window.
inline std::pair<double, double> window_volumes(const std::vector<TransactionRecord>& transactions,
                                                const ClientRecord& client) {
    const int install = client.install_month.index();
    double pre = 0.0, post = 0.0;
    for (const auto& t : transactions) {
        if (t.client_id != client.client_id) continue;
        int m = t.month.index();
        if (m >= install - 12 && m <= install - 1)
            pre += t.volume_hl;
        else if (m >= install + 1 && m <= install + 12)
            post += t.volume_hl;
    }
    return {pre, post};
}

inline LabeledClient label_one(const std::string& client_id, double v_pre, double v_post,
                               const GrowthThresholds& thresholds) {
    LabeledClient lc;
    lc.client_id = client_id;
    lc.v_pre = v_pre;
    lc.v_post = v_post;
    lc.eligible = v_pre >= kEligibilityMinPreHl;
    if (lc.eligible) {
        lc.growth = (v_post - v_pre) / v_pre;
        for (double tau : thresholds.taus) lc.labels[tau] = lc.growth >= tau ? 1 : 0;
    } else {
        lc.growth = 0.0;
        for (double tau : thresholds.taus) lc.labels[tau] = 0;
    }
    return lc;
}

inline std::vector<LabeledClient> label_clients(const DatasetBundle& bundle,
                                                const GrowthThresholds& thresholds) {
    thresholds.validate();
    // one pass over transactions, bucketed per client
    std::map<std::string, std::pair<double, double>> vols;
    std::map<std::string, int> install;
    for (const auto& c : bundle.clients) {
        install[c.client_id] = c.install_month.index();
        vols[c.client_id] = {0.0, 0.0};
    }
    for (const auto& t : bundle.transactions) {
        auto it = install.find(t.client_id);
        if (it == install.end()) continue;  // orphan, reported by validate_bundle
        int m = t.month.index();
        if (m >= it->second - 12 && m <= it->second - 1)
            vols[t.client_id].first += t.volume_hl;
        else if (m >= it->second + 1 && m <= it->second + 12)
            vols[t.client_id].second += t.volume_hl;
    }
    std::vector<LabeledClient> out;
    out.reserve(bundle.clients.size());
    for (const auto& c : bundle.clients) {
        auto [pre, post] = vols[c.client_id];
        out.push_back(label_one(c.client_id, pre, post, thresholds));
    }
    return out;
}

/// (share of class 0, share of class 1) over eligible clients.
inline std::pair<double, double> class_balance(const std::vector<LabeledClient>& labeled, double tau) {
    std::size_t n = 0, pos = 0;
    for (const auto& lc : labeled) {
        if (!lc.eligible) continue;
        ++n;
        auto it = lc.labels.find(tau);
        if (it == lc.labels.end()) throw std::invalid_argument("tau not present in labels");
        pos += static_cast<std::size_t>(it->second);
    }
    if (n == 0) throw std::runtime_error("no eligible clients");
    double s1 = static_cast<double>(pos) / static_cast<double>(n);
    return {1.0 - s1, s1};
}

inline void write_labels(const std::string& path, const std::vector<LabeledClient>& labeled,
                         const GrowthThresholds& thresholds) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "client_id,v_pre,v_post,growth";
    for (double tau : thresholds.taus)
        out << ",label_" << static_cast<int>(std::lround(tau * 100));
    out << ",eligible\n";
    char buf[64];
    for (const auto& lc : labeled) {
        out << lc.client_id;
        std::snprintf(buf, sizeof(buf), ",%.10g,%.10g,%.10g", lc.v_pre, lc.v_post, lc.growth);
        out << buf;
        for (double tau : thresholds.taus) out << ',' << lc.labels.at(tau);
        out << ',' << (lc.eligible ? 1 : 0) << "\n";
    }
}

}  // namespace gt
