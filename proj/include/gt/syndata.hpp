#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "gt/common.hpp"
#include "gt/features.hpp"
#include "gt/ingest.hpp"
#include "gt/labeling.hpp"

namespace gt {

/// Effect sizes of the planted drivers of post-installation growth. The
/// latent score is a standardized linear combination of these plus Gaussian
/// noise; realized growth is a monotone map of the latent score calibrated
/// to the configured positive rates.
struct SignalSpec {
    double activity_effect = 1.0;        // purchase-month density
    double beer_volume_effect = 1.0;     // beer volume level
    double competition_effect = -1.0;    // census competition density
    double order_intensity_effect = 0.0; // purchase days per active month
    double noise_sd = 1.0;
};

struct GeneratorConfig {
    int n_clients = 3119;
    int n_product_lines = 3;  // capped at the built-in line names
    int n_brands = 12;
    int months_span = 26;
    std::uint64_t seed = 42;
    SignalSpec signal;
    int noise_feature_count = 3;  // extra uninformative census attributes
    // tau -> marginal positive rate; defaults mirror a mildly imbalanced book
    std::map<double, double> target_positive_rate{{0.10, 0.46}, {0.30, 0.4184}, {0.50, 0.3795}};
    // pre-window volume level range; keep tight when growth must be
    // uncorrelated with volume
    double base_volume_lo = 60.0;
    double base_volume_hi = 140.0;

    void validate() const {
        if (n_clients < 1) throw std::invalid_argument("n_clients must be >= 1");
        if (months_span < 26) throw std::invalid_argument("months_span must cover both windows (>= 26)");
        double prev_tau = 0, prev_rate = 1.0;
        for (const auto& [tau, rate] : target_positive_rate) {
            if (tau <= prev_tau) throw std::invalid_argument("thresholds must increase");
            if (rate <= 0 || rate >= 1) throw std::invalid_argument("infeasible positive rate");
            if (rate > prev_rate)
                throw std::invalid_argument("positive rates must be non-increasing in tau");
            prev_tau = tau;
            prev_rate = rate;
        }
    }
};

struct GroundTruth {
    std::vector<std::string> client_ids;
    std::vector<double> latent;            // pre-noise signal per client
    std::vector<double> realized_growth;   // (v_post - v_pre) / v_pre
    std::map<double, std::vector<double>> true_prob;  // tau -> P(label=1 | features)
    std::vector<std::string> informative_features;    // engineered-feature names carrying signal

    /// AUC ceiling: score every client by its true probability.
    double bayes_auc(double tau) const {
        const auto& p = true_prob.at(tau);
        std::vector<int> y(latent.size());
        for (std::size_t i = 0; i < y.size(); ++i)
            y[i] = realized_growth[i] >= tau ? 1 : 0;
        std::size_t np = 0;
        for (int v : y) np += static_cast<std::size_t>(v);
        if (np == 0 || np == y.size()) return 0.5;
        // Mann-Whitney over (p, y)
        std::vector<std::size_t> idx(p.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
        double rank_sum = 0;
        std::size_t i = 0;
        while (i < idx.size()) {
            std::size_t j = i;
            while (j < idx.size() && p[idx[j]] == p[idx[i]]) ++j;
            double avg = (static_cast<double>(i + j - 1)) / 2.0 + 1.0;
            for (std::size_t k = i; k < j; ++k)
                if (y[idx[k]]) rank_sum += avg;
            i = j;
        }
        double dp = static_cast<double>(np), dn = static_cast<double>(y.size() - np);
        return (rank_sum - dp * (dp + 1) / 2.0) / (dp * dn);
    }
};

namespace detail {

inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline void standardize(std::vector<double>& v) {
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    double sd = var > 0 ? std::sqrt(var) : 1.0;
    for (double& x : v) x = (x - mean) / sd;
}

/// Piecewise-linear growth as a function of the top-rank fraction u in [0,1),
/// pinned so that P(growth >= tau_k) equals the configured rate exactly.
inline double growth_from_rank(double u, const std::map<double, double>& rates) {
    // segments from highest tau downward
    std::vector<std::pair<double, double>> seg(rates.begin(), rates.end());  // (tau, rate) asc
    double prev_u = 0.0, prev_hi = seg.back().first + 1.0;  // growth at the very top
    for (auto it = seg.rbegin(); it != seg.rend(); ++it) {
        double tau = it->first, rate = it->second;
        if (u < rate) {
            // interpolate in [tau, prev_hi) over u in [prev_u, rate)
            double t = (u - prev_u) / (rate - prev_u);
            return prev_hi - t * (prev_hi - tau);
        }
        prev_u = rate;
        prev_hi = tau;
    }
    // below the lowest threshold: drift down to -0.6
    double lo_tau = seg.front().first, lo_rate = seg.front().second;
    double t = (u - lo_rate) / (1.0 - lo_rate);
    return lo_tau - 1e-9 - t * (lo_tau + 0.6);
}

}  // namespace detail

/// Draws a full transactional bundle with a planted growth response. Realized
/// growth is rank-calibrated to the target positive rates, so the marginal
/// class balance matches the configuration up to integer rounding.
inline std::pair<DatasetBundle, GroundTruth> generate(const GeneratorConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const int n = cfg.n_clients;

    static const std::vector<std::string> kLines = {"BEER", "WATER", "SODA", "JUICE", "ENERGY"};
    const int n_lines = std::min<int>(cfg.n_product_lines, static_cast<int>(kLines.size()));

    DatasetBundle bundle;
    GroundTruth truth;

    // census grid: 5x5 squares over a 1x1 degree box
    const double lat0 = 10.0, lon0 = -85.0;
    const int grid = 5;
    std::vector<double> poly_competition(grid * grid);
    {
        int pid = 0;
        for (int gy = 0; gy < grid; ++gy) {
            for (int gx = 0; gx < grid; ++gx, ++pid) {
                CensusPolygon p;
                char buf[16];
                std::snprintf(buf, sizeof(buf), "P%02d", pid);
                p.polygon_id = buf;
                double la = lat0 + gy * (1.0 / grid), lo = lon0 + gx * (1.0 / grid);
                double step = 1.0 / grid;
                p.ring = {{la, lo}, {la, lo + step}, {la + step, lo + step}, {la + step, lo}};
                poly_competition[pid] = rng.uniform(0.0, 10.0);
                p.attributes["COMPETITION_DENSITY"] = poly_competition[pid];
                p.attributes["AVG_INCOME"] = rng.uniform(300.0, 1500.0);
                p.attributes["POP_DENSITY"] = rng.uniform(50.0, 5000.0);
                p.attributes["EDUCATION_YEARS"] = rng.uniform(4.0, 14.0);
                for (int k = 0; k < cfg.noise_feature_count; ++k)
                    p.attributes["NOISE_ATTR_" + std::to_string(k)] = rng.normal();
                bundle.polygons.push_back(std::move(p));
            }
        }
    }

    const YearMonth base{2022, 1};
    const int install_lo = 13, install_hi = cfg.months_span - 13;  // room for both windows

    struct ClientGen {
        double activity;         // P(active month)
        double base_volume;      // monthly volume level
        double beer_share;       // share of volume in BEER
        double order_intensity;  // purchase days per active month
        double competition;
        int install_offset;
        int polygon;
    };
    std::vector<ClientGen> gens(static_cast<std::size_t>(n));

    for (int i = 0; i < n; ++i) {
        auto& g = gens[static_cast<std::size_t>(i)];
        g.activity = rng.uniform(0.35, 1.0);
        g.base_volume = rng.uniform(cfg.base_volume_lo, cfg.base_volume_hi);
        g.beer_share = rng.uniform(0.2, 0.8);
        g.order_intensity = rng.uniform(1.0, 8.0);
        g.install_offset = static_cast<int>(rng.uniform_int(install_lo, std::max(install_lo, install_hi)));
        int gx = static_cast<int>(rng.uniform_int(0, grid - 1));
        int gy = static_cast<int>(rng.uniform_int(0, grid - 1));
        g.polygon = gy * grid + gx;
        g.competition = poly_competition[static_cast<std::size_t>(g.polygon)];

        ClientRecord c;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "C%05d", i);
        c.client_id = buf;
        c.install_month = base.plus(g.install_offset);
        c.latitude = lat0 + (gy + rng.uniform(0.05, 0.95)) / grid;
        c.longitude = lon0 + (gx + rng.uniform(0.05, 0.95)) / grid;
        bundle.clients.push_back(std::move(c));
        truth.client_ids.push_back(bundle.clients.back().client_id);
    }

    // latent growth score from standardized planted drivers
    std::vector<double> z_act(gens.size()), z_beer(gens.size()), z_comp(gens.size()),
        z_ord(gens.size());
    for (std::size_t i = 0; i < gens.size(); ++i) {
        z_act[i] = gens[i].activity;
        z_beer[i] = gens[i].base_volume * gens[i].beer_share;
        z_comp[i] = gens[i].competition;
        z_ord[i] = gens[i].order_intensity;
    }
    detail::standardize(z_act);
    detail::standardize(z_beer);
    detail::standardize(z_comp);
    detail::standardize(z_ord);

    truth.latent.resize(gens.size());
    std::vector<double> score(gens.size());
    for (std::size_t i = 0; i < gens.size(); ++i) {
        truth.latent[i] = cfg.signal.activity_effect * z_act[i] +
                          cfg.signal.beer_volume_effect * z_beer[i] +
                          cfg.signal.competition_effect * z_comp[i] +
                          cfg.signal.order_intensity_effect * z_ord[i];
        score[i] = truth.latent[i] + cfg.signal.noise_sd * rng.normal();
    }

    // rank -> growth, calibrated to the target rates
    std::vector<std::size_t> order(gens.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    truth.realized_growth.resize(gens.size());
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        double u = static_cast<double>(rank) / static_cast<double>(order.size());
        truth.realized_growth[order[rank]] = detail::growth_from_rank(u, cfg.target_positive_rate);
    }

    // true P(label | features): probability the noisy score clears the rank
    // cutoff for each tau, given the client's noiseless latent
    std::vector<double> sorted_score(score);
    std::sort(sorted_score.begin(), sorted_score.end());
    for (const auto& [tau, rate] : cfg.target_positive_rate) {
        std::size_t n_pos = static_cast<std::size_t>(std::ceil(rate * static_cast<double>(gens.size())));
        n_pos = std::min(n_pos, gens.size());
        double cutoff = sorted_score[gens.size() - n_pos];
        auto& probs = truth.true_prob[tau];
        probs.resize(gens.size());
        for (std::size_t i = 0; i < gens.size(); ++i)
            probs[i] = cfg.signal.noise_sd > 0
                           ? detail::std_normal_cdf((truth.latent[i] - cutoff) / cfg.signal.noise_sd)
                           : (truth.latent[i] >= cutoff ? 1.0 : 0.0);
    }

    truth.informative_features = {"MONTHS_WITH_TRANSACTION", "PL_BEER_VOLUME_MAX_L12M",
                                  "CENSUS_COMPETITION_DENSITY", "FREQUENCY_MEAN_L12M"};

    // monthly transactions: pre window drawn from the client's level, post
    // window scaled so realized growth matches the calibrated target
    for (int i = 0; i < n; ++i) {
        const auto& g = gens[static_cast<std::size_t>(i)];
        const auto& cid = bundle.clients[static_cast<std::size_t>(i)].client_id;
        const int install = g.install_offset;

        auto month_volume = [&](int m) {
            double season = 1.0 + 0.15 * std::sin(2.0 * 3.14159265358979 * (m % 12) / 12.0);
            return g.base_volume * season * rng.uniform(0.7, 1.3);
        };

        std::vector<std::pair<int, double>> pre_months, post_months;
        for (int m = install - 12; m <= install - 1; ++m)
            if (rng.uniform() < g.activity) pre_months.emplace_back(m, month_volume(m));
        if (pre_months.empty())  // force a non-empty pre window
            pre_months.emplace_back(install - 1, month_volume(install - 1));
        for (int m = install + 1; m <= install + 12; ++m)
            if (rng.uniform() < g.activity) post_months.emplace_back(m, month_volume(m));
        if (post_months.empty()) post_months.emplace_back(install + 1, month_volume(install + 1));

        double pre_sum = 0, post_raw = 0;
        for (auto& [m, v] : pre_months) pre_sum += v;
        for (auto& [m, v] : post_months) post_raw += v;
        double target_post = pre_sum * (1.0 + truth.realized_growth[static_cast<std::size_t>(i)]);
        target_post = std::max(target_post, 0.0);
        double scale = post_raw > 0 ? target_post / post_raw : 0.0;
        for (auto& [m, v] : post_months) v *= scale;

        auto emit = [&](int m, double vol) {
            // split the month's volume across lines; beer gets the client share
            double beer = vol * g.beer_share;
            double rest = vol - beer;
            int days = std::max(1, static_cast<int>(std::lround(
                                       g.order_intensity * rng.uniform(0.7, 1.3))));
            struct LineAmt {
                int line;
                double amount;
            };
            std::vector<LineAmt> amts{{0, beer}};
            for (int l = 1; l < n_lines; ++l)
                amts.push_back({l, rest / std::max(1, n_lines - 1)});
            for (const auto& la : amts) {
                if (la.amount <= 0) continue;
                TransactionRecord t;
                t.client_id = cid;
                t.month = base.plus(m);
                t.product_line = kLines[static_cast<std::size_t>(la.line)];
                int brand = static_cast<int>(rng.uniform_int(0, std::max(0, cfg.n_brands - 1)));
                char bb[16];
                std::snprintf(bb, sizeof(bb), "BRAND%02d", brand);
                t.brand = bb;
                t.volume_hl = la.amount;
                t.revenue = la.amount * rng.uniform(90.0, 110.0);
                t.discount = t.revenue * rng.uniform(0.0, 0.08);
                t.order_days = std::min(31, days);
                bundle.transactions.push_back(std::move(t));
            }
        };
        for (const auto& [m, v] : pre_months) emit(m, v);
        for (const auto& [m, v] : post_months) emit(m, v);
        // a little activity in the installation month itself (excluded from both windows)
        if (rng.uniform() < g.activity) emit(install, month_volume(install));
    }

    // canonical order by unique key
    std::sort(bundle.transactions.begin(), bundle.transactions.end(),
              [](const TransactionRecord& a, const TransactionRecord& b) { return a.key() < b.key(); });
    return {std::move(bundle), std::move(truth)};
}

inline void write_ground_truth(const std::string& path, const GroundTruth& truth) {
    nlohmann::json j;
    j["client_ids"] = truth.client_ids;
    j["latent"] = truth.latent;
    j["realized_growth"] = truth.realized_growth;
    j["informative_features"] = truth.informative_features;
    for (const auto& [tau, probs] : truth.true_prob) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%.2f", tau);
        j["true_prob"][buf] = probs;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << j.dump(1) << "\n";
}

// ---- planted-feature tabular generator ----------------------------------

/// Feature-matrix generator with named informative and pure-noise columns.
/// Labels are Bernoulli draws of a logistic model over the informative
/// columns, so the Bayes-optimal ranking (the true probabilities) is known.
struct TabularConfig {
    std::size_t n_rows = 3000;
    int n_informative = 10;
    int n_noise = 90;
    double effect_lo = 0.4;
    double effect_hi = 1.0;
    double intercept = 0.0;
    double missing_rate = 0.0;
    std::uint64_t seed = 7;
};

struct TabularData {
    FeatureMatrix X;
    std::vector<int> y;
    std::vector<double> true_prob;
    std::vector<std::string> informative;

    double bayes_auc() const {
        std::vector<std::size_t> idx(true_prob.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(),
                  [&](std::size_t a, std::size_t b) { return true_prob[a] < true_prob[b]; });
        std::size_t np = 0;
        for (int v : y) np += static_cast<std::size_t>(v);
        double rank_sum = 0;
        std::size_t i = 0;
        while (i < idx.size()) {
            std::size_t j = i;
            while (j < idx.size() && true_prob[idx[j]] == true_prob[idx[i]]) ++j;
            double avg = static_cast<double>(i + j - 1) / 2.0 + 1.0;
            for (std::size_t k = i; k < j; ++k)
                if (y[idx[k]]) rank_sum += avg;
            i = j;
        }
        double dp = static_cast<double>(np), dn = static_cast<double>(y.size() - np);
        return (rank_sum - dp * (dp + 1) / 2.0) / (dp * dn);
    }
};

inline TabularData generate_tabular(const TabularConfig& cfg) {
    Rng rng(cfg.seed);
    TabularData d;
    std::vector<std::string> names;
    char buf[24];
    for (int f = 0; f < cfg.n_informative; ++f) {
        std::snprintf(buf, sizeof(buf), "INF_%02d", f);
        names.emplace_back(buf);
        d.informative.emplace_back(buf);
    }
    for (int f = 0; f < cfg.n_noise; ++f) {
        std::snprintf(buf, sizeof(buf), "NOISE_%02d", f);
        names.emplace_back(buf);
    }
    std::vector<std::string> ids;
    for (std::size_t r = 0; r < cfg.n_rows; ++r) {
        std::snprintf(buf, sizeof(buf), "R%06zu", r);
        ids.emplace_back(buf);
    }
    d.X.init(std::move(ids), names);
    for (const auto& nm : d.X.feature_names) d.X.provenance[nm] = "synthetic tabular";

    std::vector<double> beta(static_cast<std::size_t>(cfg.n_informative));
    for (auto& b : beta) {
        b = rng.uniform(cfg.effect_lo, cfg.effect_hi);
        if (rng.uniform() < 0.5) b = -b;
    }
    d.y.resize(cfg.n_rows);
    d.true_prob.resize(cfg.n_rows);
    for (std::size_t r = 0; r < cfg.n_rows; ++r) {
        double logit = cfg.intercept;
        for (std::size_t c = 0; c < d.X.cols(); ++c) {
            double v = rng.normal();
            if (c < beta.size()) logit += beta[c] * v;
            if (cfg.missing_rate > 0 && rng.uniform() < cfg.missing_rate) v = kMissing;
            d.X.at(r, c) = v;
        }
        d.true_prob[r] = sigmoid(logit);
        d.y[r] = rng.uniform() < d.true_prob[r] ? 1 : 0;
    }
    return d;
}

}  // namespace gt
