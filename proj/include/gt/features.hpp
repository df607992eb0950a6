#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "gt/common.hpp"
#include "gt/ingest.hpp"

namespace gt {

/// Dense client x feature table. Missing cells are NaN.
struct FeatureMatrix {
    std::vector<std::string> client_ids;
    std::vector<std::string> feature_names;
    std::vector<double> values;  // row-major
    std::map<std::string, std::string> provenance;  // feature -> descriptor

    std::size_t rows() const { return client_ids.size(); }
    std::size_t cols() const { return feature_names.size(); }

    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

    std::size_t col(const std::string& name) const {
        for (std::size_t i = 0; i < feature_names.size(); ++i)
            if (feature_names[i] == name) return i;
        throw std::out_of_range("no such feature: " + name);
    }

    void init(std::vector<std::string> ids, std::vector<std::string> names) {
        client_ids = std::move(ids);
        feature_names = std::move(names);
        values.assign(rows() * cols(), kMissing);
    }

    /// Appends another matrix's columns; client_ids must match.
    void hcat(const FeatureMatrix& other) {
        if (other.client_ids != client_ids)
            throw std::invalid_argument("hcat: client_ids mismatch");
        std::size_t oldc = cols(), addc = other.cols();
        std::vector<double> merged(rows() * (oldc + addc));
        for (std::size_t r = 0; r < rows(); ++r) {
            std::copy_n(&values[r * oldc], oldc, &merged[r * (oldc + addc)]);
            std::copy_n(&other.values[r * addc], addc, &merged[r * (oldc + addc) + oldc]);
        }
        values = std::move(merged);
        feature_names.insert(feature_names.end(), other.feature_names.begin(),
                             other.feature_names.end());
        for (const auto& [k, v] : other.provenance) provenance[k] = v;
    }

    /// New matrix restricted to the given columns (by name), preserving order given.
    FeatureMatrix select_columns(const std::vector<std::string>& names) const {
        FeatureMatrix out;
        out.client_ids = client_ids;
        out.feature_names = names;
        std::vector<std::size_t> idx;
        idx.reserve(names.size());
        for (const auto& n : names) idx.push_back(col(n));
        out.values.resize(rows() * names.size());
        for (std::size_t r = 0; r < rows(); ++r)
            for (std::size_t c = 0; c < idx.size(); ++c)
                out.values[r * names.size() + c] = at(r, idx[c]);
        for (const auto& n : names) {
            auto it = provenance.find(n);
            if (it != provenance.end()) out.provenance[n] = it->second;
        }
        return out;
    }

    FeatureMatrix select_rows(const std::vector<std::size_t>& rows_idx) const {
        FeatureMatrix out;
        out.feature_names = feature_names;
        out.provenance = provenance;
        out.client_ids.reserve(rows_idx.size());
        out.values.reserve(rows_idx.size() * cols());
        for (std::size_t r : rows_idx) {
            out.client_ids.push_back(client_ids[r]);
            out.values.insert(out.values.end(), values.begin() + r * cols(),
                              values.begin() + (r + 1) * cols());
        }
        return out;
    }
};

struct CapRule {
    std::string feature_name;
    double q3 = 0.0;
    double iqr = 0.0;
    double cap = 0.0;
    bool enabled = true;  // false when too few values to fit quantiles
};

struct FilterReport {
    struct PairDrop {
        std::string kept, dropped;
        double r = 0.0;
    };
    struct TargetDrop {
        std::string feature;
        double r = 0.0;  // NaN when variance was zero
    };
    std::vector<PairDrop> dropped_pairwise;
    std::vector<TargetDrop> dropped_target;
    std::vector<std::string> surviving;
};

namespace detail {

inline std::string sanitize_group(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
        else if (!out.empty() && out.back() != '_')
            out.push_back('_');
    }
    return out;
}

struct MonthlyAgg {
    double volume = 0.0, revenue = 0.0, discount = 0.0;
    int order_days = 0;
};

// stats over an explicit monthly series (population std)
struct SeriesStats {
    double sum, mean, mx, mn, stddev;
};

inline SeriesStats series_stats(const std::vector<double>& s) {
    SeriesStats st{0, 0, s[0], s[0], 0};
    for (double v : s) {
        st.sum += v;
        st.mx = std::max(st.mx, v);
        st.mn = std::min(st.mn, v);
    }
    st.mean = st.sum / static_cast<double>(s.size());
    double acc = 0;
    for (double v : s) acc += (v - st.mean) * (v - st.mean);
    st.stddev = std::sqrt(acc / static_cast<double>(s.size()));
    return st;
}

}  // namespace detail

/// Rolling sum/mean/max/min/std of volume, revenue and discount over trailing
/// windows ending at install-1, globally and per product line / brand.
/// A group with no transactions in the window yields missing for all its
/// stats; months inside an active window with no purchase count as zero.
inline FeatureMatrix rolling_stats(const std::vector<TransactionRecord>& transactions,
                                   const std::vector<ClientRecord>& clients,
                                   const std::vector<int>& windows = {3, 6, 12}) {
    // collect group keys: "" = global, "PL_<line>", "BR_<brand>"
    std::set<std::string> groups{""};
    std::unordered_map<std::string, std::string> group_of_line, group_of_brand;
    for (const auto& t : transactions) {
        group_of_line.try_emplace(t.product_line, "PL_" + detail::sanitize_group(t.product_line));
        group_of_brand.try_emplace(t.brand, "BR_" + detail::sanitize_group(t.brand));
    }
    for (const auto& [k, v] : group_of_line) groups.insert(v);
    for (const auto& [k, v] : group_of_brand) groups.insert(v);

    static const char* kMeasures[] = {"VOLUME", "REVENUE", "DISCOUNT"};
    static const char* kStats[] = {"SUM", "MEAN", "MAX", "MIN", "STD"};

    std::vector<std::string> names;
    for (const auto& g : groups)
        for (int w : windows)
            for (const char* m : kMeasures)
                for (const char* s : kStats) {
                    std::string n = (g.empty() ? std::string() : g + "_") + m + "_" + s + "_L" +
                                    std::to_string(w) + "M";
                    names.push_back(n);
                }

    FeatureMatrix fm;
    {
        std::vector<std::string> ids;
        for (const auto& c : clients) ids.push_back(c.client_id);
        fm.init(std::move(ids), names);
    }
    for (const auto& n : fm.feature_names) fm.provenance[n] = "rolling window statistic";

    // per-client bucket of transactions
    std::unordered_map<std::string, std::vector<const TransactionRecord*>> byClient;
    for (const auto& t : transactions) byClient[t.client_id].push_back(&t);

    for (std::size_t r = 0; r < clients.size(); ++r) {
        const auto& cl = clients[r];
        const int install = cl.install_month.index();
        auto itc = byClient.find(cl.client_id);
        if (itc == byClient.end()) continue;

        // group -> month index -> per-measure totals
        std::map<std::string, std::map<int, detail::MonthlyAgg>> agg;
        for (const auto* t : itc->second) {
            int m = t->month.index();
            for (const std::string& g :
                 {std::string(""), group_of_line[t->product_line], group_of_brand[t->brand]}) {
                auto& a = agg[g][m];
                a.volume += t->volume_hl;
                a.revenue += t->revenue;
                a.discount += t->discount;
            }
        }

        std::size_t c = 0;
        for (const auto& g : groups) {
            auto git = agg.find(g);
            for (int w : windows) {
                const int lo = install - w, hi = install - 1;
                bool active = false;
                std::vector<double> vol(static_cast<std::size_t>(w), 0.0), rev = vol, dis = vol;
                if (git != agg.end()) {
                    for (int m = lo; m <= hi; ++m) {
                        auto mit = git->second.find(m);
                        if (mit == git->second.end()) continue;
                        active = true;
                        vol[static_cast<std::size_t>(m - lo)] = mit->second.volume;
                        rev[static_cast<std::size_t>(m - lo)] = mit->second.revenue;
                        dis[static_cast<std::size_t>(m - lo)] = mit->second.discount;
                    }
                }
                for (const auto* series : {&vol, &rev, &dis}) {
                    if (!active) {
                        c += 5;
                        continue;
                    }
                    auto st = detail::series_stats(*series);
                    fm.at(r, c++) = st.sum;
                    fm.at(r, c++) = st.mean;
                    fm.at(r, c++) = st.mx;
                    fm.at(r, c++) = st.mn;
                    fm.at(r, c++) = st.stddev;
                }
            }
        }
    }
    return fm;
}

/// Frequency (monthly distinct purchase days) and recency (month gaps between
/// active months) over trailing windows, plus MONTHS_WITH_TRANSACTION over L12M.
/// Recency is month-granular; see features_meta for the approximation note.
inline FeatureMatrix rfm_stats(const std::vector<TransactionRecord>& transactions,
                               const std::vector<ClientRecord>& clients,
                               const std::vector<int>& windows = {3, 6, 12}) {
    std::vector<std::string> names;
    for (int w : windows) {
        names.push_back("FREQUENCY_MEAN_L" + std::to_string(w) + "M");
        names.push_back("FREQUENCY_STD_L" + std::to_string(w) + "M");
        names.push_back("RECENCY_AVG_L" + std::to_string(w) + "M");
        names.push_back("RECENCY_MAX_L" + std::to_string(w) + "M");
    }
    names.push_back("MONTHS_WITH_TRANSACTION");

    FeatureMatrix fm;
    {
        std::vector<std::string> ids;
        for (const auto& c : clients) ids.push_back(c.client_id);
        fm.init(std::move(ids), names);
    }
    for (const auto& n : fm.feature_names) fm.provenance[n] = "recency/frequency statistic";

    std::unordered_map<std::string, std::map<int, int>> daysByClientMonth;
    for (const auto& t : transactions) {
        auto& d = daysByClientMonth[t.client_id][t.month.index()];
        d = std::min(31, d + t.order_days);
    }

    for (std::size_t r = 0; r < clients.size(); ++r) {
        const auto& cl = clients[r];
        const int install = cl.install_month.index();
        auto it = daysByClientMonth.find(cl.client_id);
        std::size_t c = 0;
        for (int w : windows) {
            const int lo = install - w, hi = install - 1;
            std::vector<double> freq(static_cast<std::size_t>(w), 0.0);
            std::vector<int> active_months;
            if (it != daysByClientMonth.end()) {
                for (int m = lo; m <= hi; ++m) {
                    auto mit = it->second.find(m);
                    if (mit == it->second.end() || mit->second == 0) continue;
                    freq[static_cast<std::size_t>(m - lo)] = mit->second;
                    active_months.push_back(m);
                }
            }
            if (!active_months.empty()) {
                auto st = detail::series_stats(freq);
                fm.at(r, c) = st.mean;
                fm.at(r, c + 1) = st.stddev;
            }
            if (active_months.size() >= 2) {
                double sum_gap = 0, max_gap = 0;
                for (std::size_t i = 1; i < active_months.size(); ++i) {
                    double gap = active_months[i] - active_months[i - 1];
                    sum_gap += gap;
                    max_gap = std::max(max_gap, gap);
                }
                fm.at(r, c + 2) = sum_gap / static_cast<double>(active_months.size() - 1);
                fm.at(r, c + 3) = max_gap;
            }
            c += 4;
        }
        // MONTHS_WITH_TRANSACTION over L12M
        int count = 0;
        if (it != daysByClientMonth.end()) {
            for (int m = install - 12; m <= install - 1; ++m) {
                auto mit = it->second.find(m);
                if (mit != it->second.end() && mit->second > 0) ++count;
            }
        }
        fm.at(r, c) = count;
    }
    return fm;
}

/// Assigns each client the attributes of its containing census polygon, or of
/// the nearest polygon (ring distance in the lat/lon plane) when outside all.
/// Ties break to the lexicographically lower polygon_id. With competitor
/// sites supplied, also emits a count of competitors within 300 m.
inline FeatureMatrix census_join(const std::vector<ClientRecord>& clients,
                                 std::vector<CensusPolygon> polygons,
                                 const std::vector<geom::Point>* competitor_sites = nullptr,
                                 std::string* warning = nullptr) {
    std::sort(polygons.begin(), polygons.end(),
              [](const CensusPolygon& a, const CensusPolygon& b) { return a.polygon_id < b.polygon_id; });
    std::set<std::string> attr_names;
    for (const auto& p : polygons)
        for (const auto& [k, v] : p.attributes) attr_names.insert(k);

    std::vector<std::string> names;
    for (const auto& a : attr_names) names.push_back("CENSUS_" + detail::sanitize_group(a));
    if (competitor_sites) names.push_back("DENSITY_COMPETITION_300M");

    FeatureMatrix fm;
    {
        std::vector<std::string> ids;
        for (const auto& c : clients) ids.push_back(c.client_id);
        fm.init(std::move(ids), names);
    }
    for (const auto& n : fm.feature_names) fm.provenance[n] = "census spatial join";
    if (competitor_sites)
        fm.provenance["DENSITY_COMPETITION_300M"] = "competitor sites within 300 m (haversine)";

    if (polygons.empty() && warning) *warning = "no polygons supplied; census features all missing";

    for (std::size_t r = 0; r < clients.size(); ++r) {
        geom::Point pt{clients[r].latitude, clients[r].longitude};
        const CensusPolygon* match = nullptr;
        if (!polygons.empty()) {
            for (const auto& p : polygons) {
                if (geom::point_in_ring(pt, p.ring)) {
                    match = &p;
                    break;  // polygons sorted by id, first containment wins
                }
            }
            if (!match) {
                double best = std::numeric_limits<double>::infinity();
                for (const auto& p : polygons) {
                    double d = geom::dist2_point_ring(pt, p.ring);
                    if (d < best) {
                        best = d;
                        match = &p;
                    }
                }
            }
        }
        std::size_t c = 0;
        for (const auto& a : attr_names) {
            if (match) {
                auto it = match->attributes.find(a);
                if (it != match->attributes.end()) fm.at(r, c) = it->second;
            }
            ++c;
        }
        if (competitor_sites) {
            int cnt = 0;
            for (const auto& s : *competitor_sites)
                if (geom::haversine_m(pt, s) <= 300.0) ++cnt;
            fm.at(r, c) = cnt;
        }
    }
    return fm;
}

/// Fits Q3 + 1.5*IQR upper caps per feature, on the given rows only (all rows
/// when empty). Features with fewer than 4 non-missing values get a disabled rule.
inline std::vector<CapRule> fit_caps(const FeatureMatrix& m,
                                     const std::vector<std::size_t>& row_subset = {}) {
    std::vector<std::size_t> rows;
    if (row_subset.empty()) {
        rows.resize(m.rows());
        for (std::size_t i = 0; i < m.rows(); ++i) rows[i] = i;
    } else {
        rows = row_subset;
    }
    std::vector<CapRule> out;
    out.reserve(m.cols());
    for (std::size_t c = 0; c < m.cols(); ++c) {
        CapRule rule;
        rule.feature_name = m.feature_names[c];
        std::vector<double> vals;
        for (std::size_t r : rows) {
            double v = m.at(r, c);
            if (!is_missing(v)) vals.push_back(v);
        }
        if (vals.size() < 4) {
            rule.enabled = false;
            out.push_back(rule);
            continue;
        }
        std::sort(vals.begin(), vals.end());
        double q1 = quantile_linear(vals, 0.25);
        rule.q3 = quantile_linear(vals, 0.75);
        rule.iqr = rule.q3 - q1;
        rule.cap = rule.q3 + 1.5 * rule.iqr;
        out.push_back(rule);
    }
    return out;
}

/// Caps the upper tail only; missing stays missing. Idempotent.
inline FeatureMatrix apply_caps(FeatureMatrix m, const std::vector<CapRule>& rules) {
    std::map<std::string, const CapRule*> byName;
    for (const auto& r : rules)
        if (r.enabled) byName[r.feature_name] = &r;
    for (std::size_t c = 0; c < m.cols(); ++c) {
        auto it = byName.find(m.feature_names[c]);
        if (it == byName.end()) continue;
        double cap = it->second->cap;
        for (std::size_t r = 0; r < m.rows(); ++r) {
            double& v = m.at(r, c);
            if (!is_missing(v) && v > cap) v = cap;
        }
    }
    return m;
}

namespace detail {

/// Pearson correlation over complete pairs; nullopt when fewer than 2 pairs
/// or either side has zero variance.
inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (is_missing(x[i]) || is_missing(y[i])) continue;
        ++n;
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
        sxy += x[i] * y[i];
    }
    if (n < 2) return std::nullopt;
    double dn = static_cast<double>(n);
    double vx = sxx - sx * sx / dn;
    double vy = syy - sy * sy / dn;
    if (vx <= 0 || vy <= 0) return std::nullopt;
    double r = (sxy - sx * sy / dn) / std::sqrt(vx * vy);
    return std::clamp(r, -1.0, 1.0);
}

}  // namespace detail

/// Drops features leaking the target (|r to label| > r_max) and then greedily
/// removes pairwise-redundant features (|r| > r_max), keeping the member more
/// correlated with the label. Zero-variance features are dropped with r = NaN.
inline FilterReport correlation_filter(const FeatureMatrix& m, const std::vector<int>& labels,
                                       double r_max = 0.80,
                                       const std::vector<std::size_t>& row_subset = {}) {
    std::vector<std::size_t> rows;
    if (row_subset.empty()) {
        rows.resize(m.rows());
        for (std::size_t i = 0; i < m.rows(); ++i) rows[i] = i;
    } else {
        rows = row_subset;
    }
    if (labels.size() != rows.size())
        throw std::invalid_argument("correlation_filter: labels size mismatch");

    std::vector<double> ylab(labels.begin(), labels.end());
    std::vector<std::vector<double>> col(m.cols());
    for (std::size_t c = 0; c < m.cols(); ++c) {
        col[c].reserve(rows.size());
        for (std::size_t r : rows) col[c].push_back(m.at(r, c));
    }

    FilterReport rep;
    struct Cand {
        std::size_t c;
        double abs_r_label;
    };
    std::vector<Cand> cands;
    for (std::size_t c = 0; c < m.cols(); ++c) {
        auto r = detail::pearson(col[c], ylab);
        if (!r) {
            rep.dropped_target.push_back({m.feature_names[c], kMissing});
            continue;
        }
        if (std::abs(*r) > r_max) {
            rep.dropped_target.push_back({m.feature_names[c], *r});
            continue;
        }
        cands.push_back({c, std::abs(*r)});
    }
    std::sort(cands.begin(), cands.end(), [&](const Cand& a, const Cand& b) {
        if (a.abs_r_label != b.abs_r_label) return a.abs_r_label > b.abs_r_label;
        return m.feature_names[a.c] < m.feature_names[b.c];
    });

    std::vector<std::size_t> kept;
    for (const auto& cand : cands) {
        bool drop = false;
        for (std::size_t k : kept) {
            auto r = detail::pearson(col[cand.c], col[k]);
            if (r && std::abs(*r) > r_max) {
                rep.dropped_pairwise.push_back({m.feature_names[k], m.feature_names[cand.c], *r});
                drop = true;
                break;
            }
        }
        if (!drop) kept.push_back(cand.c);
    }
    std::sort(kept.begin(), kept.end());
    for (std::size_t k : kept) rep.surviving.push_back(m.feature_names[k]);
    return rep;
}

// ---- file formats -------------------------------------------------------

inline void write_feature_matrix(const std::string& path, const FeatureMatrix& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "client_id";
    for (const auto& n : m.feature_names) out << ',' << n;
    out << "\n";
    char buf[48];
    for (std::size_t r = 0; r < m.rows(); ++r) {
        out << m.client_ids[r];
        for (std::size_t c = 0; c < m.cols(); ++c) {
            double v = m.at(r, c);
            if (is_missing(v)) {
                out << ',';
            } else {
                std::snprintf(buf, sizeof(buf), ",%.17g", v);
                out << buf;
            }
        }
        out << "\n";
    }
}

inline FeatureMatrix load_feature_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty features file: " + path);
    auto header = split_csv_line(line);
    if (header.empty() || header[0] != "client_id")
        throw std::runtime_error("bad features header in " + path);

    FeatureMatrix m;
    m.feature_names.assign(header.begin() + 1, header.end());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != header.size())
            throw std::runtime_error("ragged row in " + path);
        m.client_ids.push_back(f[0]);
        for (std::size_t c = 1; c < f.size(); ++c)
            m.values.push_back(f[c].empty() ? kMissing : std::stod(f[c]));
    }
    return m;
}

inline void write_features_meta(const std::string& path, const FeatureMatrix& m) {
    nlohmann::json j;
    for (const auto& [k, v] : m.provenance) j[k] = v;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << j.dump(1) << "\n";
}

inline void write_filter_report(const std::string& path, const FilterReport& rep) {
    nlohmann::json j;
    j["surviving"] = rep.surviving;
    j["dropped_target"] = nlohmann::json::array();
    for (const auto& d : rep.dropped_target)
        j["dropped_target"].push_back(
            {{"feature", d.feature}, {"r", is_missing(d.r) ? nlohmann::json() : nlohmann::json(d.r)}});
    j["dropped_pairwise"] = nlohmann::json::array();
    for (const auto& d : rep.dropped_pairwise)
        j["dropped_pairwise"].push_back({{"kept", d.kept}, {"dropped", d.dropped}, {"r", d.r}});
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << j.dump(1) << "\n";
}

}  // namespace gt
