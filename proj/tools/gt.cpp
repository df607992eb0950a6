// gt: end-to-end cooler-allocation toolkit CLI.
// Subcommands hand artifacts to each other through files; every stage writes
// a manifest with content hashes so downstream stages can detect stale inputs.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "gt/allocsim.hpp"
#include "gt/eval.hpp"
#include "gt/explain.hpp"
#include "gt/features.hpp"
#include "gt/gbdt.hpp"
#include "gt/ingest.hpp"
#include "gt/labeling.hpp"
#include "gt/pipeline.hpp"
#include "gt/syndata.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitStale = 3;

/// Missing or hash-stale input artifact -> exit 3.
class StaleInput : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string file_hash(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return gt::hex64(gt::fnv1a(ss.str()));
}

void require_file(const fs::path& p, const std::string& what) {
    if (!fs::exists(p)) throw StaleInput("missing " + what + ": " + p.string());
}

/// Cross-checks the given input file against every manifest in its directory
/// that claims to have produced it.
void verify_against_manifests(const fs::path& file) {
    if (!fs::exists(file)) return;
    auto dir = file.parent_path().empty() ? fs::path(".") : file.parent_path();
    for (const auto& entry : fs::directory_iterator(dir)) {
        auto name = entry.path().filename().string();
        if (name.size() < 14 || name.substr(name.size() - 14) != "_manifest.json") continue;
        json m;
        try {
            std::ifstream in(entry.path());
            in >> m;
        } catch (...) {
            continue;  // unreadable manifest is not this file's problem
        }
        if (!m.contains("outputs")) continue;
        auto it = m["outputs"].find(file.filename().string());
        if (it == m["outputs"].end()) continue;
        if (it->get<std::string>() != file_hash(file))
            throw StaleInput("stale input hash: " + file.string() +
                             " no longer matches manifest " + entry.path().string());
    }
}

struct ManifestBuilder {
    std::string command;
    std::uint64_t seed = 0;
    json inputs = json::object();
    json outputs = json::object();

    void input(const fs::path& p) { inputs[p.filename().string()] = file_hash(p); }
    void output(const fs::path& p) { outputs[p.filename().string()] = file_hash(p); }

    void write(const fs::path& out_dir) const {
        json m;
        m["command"] = command;
        m["seed"] = seed;
        m["inputs"] = inputs;
        m["outputs"] = outputs;
        auto now = std::chrono::system_clock::now();
        m["timestamp"] =
            std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
        std::ofstream out(out_dir / (command + "_manifest.json"));
        out << m.dump(1) << "\n";
    }
};

json load_json_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    json j;
    in >> j;
    return j;
}

int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("GT_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

struct LabelRow {
    double v_pre = 0, v_post = 0, growth = 0;
    std::map<std::string, int> labels;
    bool eligible = false;
};

std::map<std::string, LabelRow> load_labels_csv(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    std::string line;
    std::getline(in, line);
    auto header = gt::split_csv_line(line);
    std::map<std::string, LabelRow> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = gt::split_csv_line(line);
        LabelRow r;
        for (std::size_t c = 1; c < f.size() && c < header.size(); ++c) {
            const auto& h = header[c];
            if (h == "v_pre") r.v_pre = std::stod(f[c]);
            else if (h == "v_post") r.v_post = std::stod(f[c]);
            else if (h == "growth") r.growth = std::stod(f[c]);
            else if (h == "eligible") r.eligible = f[c] == "1";
            else if (h.rfind("label_", 0) == 0) r.labels[h] = std::stoi(f[c]);
        }
        out[f[0]] = std::move(r);
    }
    return out;
}

std::string label_column(double tau) {
    return "label_" + std::to_string(static_cast<int>(std::lround(tau * 100)));
}

/// Scores every row of features.csv with a trained model + its preprocessing.
struct ScoredSet {
    std::vector<std::string> client_ids;
    std::vector<double> scores;
};

ScoredSet score_features(const fs::path& in_dir) {
    auto model_path = in_dir / "model.json";
    require_file(model_path, "model");
    verify_against_manifests(model_path);
    auto prep_path = in_dir / "preprocess.json";
    require_file(prep_path, "preprocessing artifact");
    auto feat_path = in_dir / "features.csv";
    require_file(feat_path, "features");
    verify_against_manifests(feat_path);

    std::ifstream min(model_path);
    std::ostringstream mss;
    mss << min.rdbuf();
    auto model = gt::deserialize(mss.str());

    auto prep = load_json_file(prep_path);
    std::vector<gt::CapRule> caps;
    for (const auto& c : prep["caps"]) {
        gt::CapRule r;
        r.feature_name = c["feature"].get<std::string>();
        r.cap = c["cap"].get<double>();
        r.q3 = c.value("q3", 0.0);
        r.iqr = c.value("iqr", 0.0);
        r.enabled = c.value("enabled", true);
        caps.push_back(std::move(r));
    }

    auto m = gt::load_feature_matrix(feat_path.string());
    auto capped = gt::apply_caps(m, caps);
    ScoredSet out;
    out.client_ids = capped.client_ids;
    out.scores = gt::predict_proba(model, capped);
    return out;
}

// ---- subcommand bodies ----------------------------------------------------

int cmd_generate(const fs::path& out_dir, std::uint64_t seed, const std::string& config_path) {
    gt::GeneratorConfig cfg;
    cfg.seed = seed;
    if (!config_path.empty()) {
        auto j = load_json_file(config_path);
        cfg.n_clients = j.value("n_clients", cfg.n_clients);
        cfg.months_span = j.value("months_span", cfg.months_span);
        cfg.n_brands = j.value("n_brands", cfg.n_brands);
        cfg.noise_feature_count = j.value("noise_feature_count", cfg.noise_feature_count);
        if (j.contains("signal")) {
            const auto& s = j["signal"];
            cfg.signal.activity_effect = s.value("activity_effect", cfg.signal.activity_effect);
            cfg.signal.beer_volume_effect =
                s.value("beer_volume_effect", cfg.signal.beer_volume_effect);
            cfg.signal.competition_effect =
                s.value("competition_effect", cfg.signal.competition_effect);
            cfg.signal.order_intensity_effect =
                s.value("order_intensity_effect", cfg.signal.order_intensity_effect);
            cfg.signal.noise_sd = s.value("noise_sd", cfg.signal.noise_sd);
        }
    }
    fs::create_directories(out_dir);
    auto [bundle, truth] = gt::generate(cfg);
    gt::write_transactions((out_dir / "transactions.csv").string(), bundle.transactions);
    gt::write_clients((out_dir / "clients.csv").string(), bundle.clients);
    gt::write_polygons((out_dir / "polygons.geojson").string(), bundle.polygons);
    gt::write_ground_truth((out_dir / "ground_truth.json").string(), truth);

    ManifestBuilder mf{"generate", seed};
    mf.output(out_dir / "transactions.csv");
    mf.output(out_dir / "clients.csv");
    mf.output(out_dir / "polygons.geojson");
    mf.output(out_dir / "ground_truth.json");
    mf.write(out_dir);
    std::cout << "generated " << bundle.clients.size() << " clients, "
              << bundle.transactions.size() << " transaction rows\n";
    return 0;
}

int cmd_label(const fs::path& in_dir, const fs::path& out_dir) {
    auto tx_path = in_dir / "transactions.csv";
    auto cl_path = in_dir / "clients.csv";
    require_file(tx_path, "transactions");
    require_file(cl_path, "clients");
    verify_against_manifests(tx_path);
    verify_against_manifests(cl_path);

    gt::DatasetBundle bundle;
    bundle.transactions = gt::load_transactions(tx_path.string());
    bundle.clients = gt::load_clients(cl_path.string());
    auto rep = gt::validate_bundle(bundle);
    for (const auto& o : rep.orphan_transactions)
        std::cerr << "warning: transactions for unknown client " << o << "\n";

    gt::GrowthThresholds th;
    auto labeled = gt::label_clients(bundle, th);
    fs::create_directories(out_dir);
    gt::write_labels((out_dir / "labels.csv").string(), labeled, th);

    ManifestBuilder mf{"label", 0};
    mf.input(tx_path);
    mf.input(cl_path);
    mf.output(out_dir / "labels.csv");
    mf.write(out_dir);
    for (double tau : th.taus) {
        auto [s0, s1] = gt::class_balance(labeled, tau);
        std::cout << "tau=" << tau << " positive share " << s1 << "\n";
    }
    return 0;
}

int cmd_featurize(const fs::path& in_dir, const fs::path& out_dir) {
    auto tx_path = in_dir / "transactions.csv";
    auto cl_path = in_dir / "clients.csv";
    auto pg_path = in_dir / "polygons.geojson";
    require_file(tx_path, "transactions");
    require_file(cl_path, "clients");
    verify_against_manifests(tx_path);
    verify_against_manifests(cl_path);

    auto transactions = gt::load_transactions(tx_path.string());
    auto clients = gt::load_clients(cl_path.string());

    auto fm = gt::rolling_stats(transactions, clients);
    fm.hcat(gt::rfm_stats(transactions, clients));
    if (fs::exists(pg_path)) {
        verify_against_manifests(pg_path);
        std::string warning;
        auto polys = gt::load_polygons(pg_path.string(), &warning);
        if (!warning.empty()) std::cerr << "warning: " << warning << "\n";
        fm.hcat(gt::census_join(clients, polys));
    } else {
        std::cerr << "warning: no polygons.geojson, census features skipped\n";
    }

    fs::create_directories(out_dir);
    gt::write_feature_matrix((out_dir / "features.csv").string(), fm);
    gt::write_features_meta((out_dir / "features_meta.json").string(), fm);

    ManifestBuilder mf{"featurize", 0};
    mf.input(tx_path);
    mf.input(cl_path);
    if (fs::exists(pg_path)) mf.input(pg_path);
    mf.output(out_dir / "features.csv");
    mf.output(out_dir / "features_meta.json");
    mf.write(out_dir);
    std::cout << "wrote " << fm.rows() << " x " << fm.cols() << " feature matrix\n";
    return 0;
}

int cmd_train(const fs::path& in_dir, const fs::path& out_dir, double tau, std::uint64_t seed,
              const std::string& config_path, int threads) {
    auto feat_path = in_dir / "features.csv";
    auto lab_path = in_dir / "labels.csv";
    require_file(feat_path, "features");
    require_file(lab_path, "labels");
    verify_against_manifests(feat_path);
    verify_against_manifests(lab_path);

    auto fm = gt::load_feature_matrix(feat_path.string());
    auto labels = load_labels_csv(lab_path);
    auto col = label_column(tau);

    std::vector<std::size_t> rows;
    std::vector<int> y;
    for (std::size_t r = 0; r < fm.rows(); ++r) {
        auto it = labels.find(fm.client_ids[r]);
        if (it == labels.end() || !it->second.eligible) continue;
        auto lt = it->second.labels.find(col);
        if (lt == it->second.labels.end())
            throw std::runtime_error("labels.csv has no column " + col);
        rows.push_back(r);
        y.push_back(lt->second);
    }
    auto train_fm = fm.select_rows(rows);

    gt::SearchSpace space;
    gt::PipelineOptions opt;
    opt.tau = tau;
    opt.seed = seed;
    space.seed = seed;
    opt.n_threads = threads;
    if (!config_path.empty()) {
        auto j = load_json_file(config_path);
        space.trial_budget = j.value("trial_budget", space.trial_budget);
        opt.cv_folds = j.value("cv_folds", opt.cv_folds);
        opt.test_fraction = j.value("test_fraction", opt.test_fraction);
        opt.outer_rounds_limit = j.value("outer_rounds_limit", opt.outer_rounds_limit);
        opt.drop_fraction = j.value("drop_fraction", opt.drop_fraction);
        opt.epsilon = j.value("epsilon", opt.epsilon);
        opt.patience = j.value("patience", opt.patience);
        opt.min_rows = j.value("min_rows", opt.min_rows);
        opt.r_max = j.value("r_max", opt.r_max);
        if (j.contains("excluded_features"))
            opt.excluded_features = j["excluded_features"].get<std::vector<std::string>>();
        auto range_i = [&](const char* k, std::pair<int, int>& p) {
            if (j.contains(k)) p = {j[k][0].get<int>(), j[k][1].get<int>()};
        };
        auto range_d = [&](const char* k, std::pair<double, double>& p) {
            if (j.contains(k)) p = {j[k][0].get<double>(), j[k][1].get<double>()};
        };
        range_i("n_trees", space.n_trees);
        range_i("max_leaves", space.max_leaves);
        range_i("max_depth", space.max_depth);
        range_i("min_samples_leaf", space.min_samples_leaf);
        range_d("learning_rate", space.learning_rate);
        range_d("l2_leaf_reg", space.l2_leaf_reg);
        range_d("feature_subsample", space.feature_subsample);
    }

    auto res = gt::run_full_pipeline(train_fm, y, space, opt);

    fs::create_directories(out_dir);
    {
        std::ofstream out(out_dir / "model.json");
        out << gt::serialize(res.final_model);
    }
    {
        json prep;
        prep["features"] = res.final_model.feature_names;
        prep["caps"] = json::array();
        for (const auto& c : res.final_caps)
            prep["caps"].push_back({{"feature", c.feature_name},
                                    {"cap", c.cap},
                                    {"q3", c.q3},
                                    {"iqr", c.iqr},
                                    {"enabled", c.enabled}});
        std::ofstream out(out_dir / "preprocess.json");
        out << prep.dump(1) << "\n";
    }
    {
        json jr = gt::to_json(res);
        jr["tau"] = tau;
        jr["seed"] = seed;
        std::ofstream out(out_dir / "pipeline_result.json");
        out << jr.dump(1) << "\n";
    }
    gt::write_elimination_history((out_dir / "elimination_history.csv").string(),
                                  res.elimination_history);
    gt::write_filter_report((out_dir / "filter_report.json").string(), res.final_filter);

    ManifestBuilder mf{"train", seed};
    mf.input(feat_path);
    mf.input(lab_path);
    mf.output(out_dir / "model.json");
    mf.output(out_dir / "preprocess.json");
    mf.output(out_dir / "pipeline_result.json");
    mf.output(out_dir / "elimination_history.csv");
    mf.output(out_dir / "filter_report.json");
    mf.write(out_dir);
    std::cout << "cv auc " << res.best_cv_auc << ", holdout auc " << res.holdout_metrics.auc
              << ", " << res.final_features.size() << " features kept\n";
    return 0;
}

int cmd_explain(const fs::path& in_dir, const fs::path& out_dir) {
    auto model_path = in_dir / "model.json";
    require_file(model_path, "model");
    verify_against_manifests(model_path);
    auto feat_path = in_dir / "features.csv";
    require_file(feat_path, "features");

    std::ifstream min(model_path);
    std::ostringstream mss;
    mss << min.rdbuf();
    auto model = gt::deserialize(mss.str());

    auto prep = load_json_file(in_dir / "preprocess.json");
    std::vector<gt::CapRule> caps;
    for (const auto& c : prep["caps"]) {
        gt::CapRule r;
        r.feature_name = c["feature"].get<std::string>();
        r.cap = c["cap"].get<double>();
        r.enabled = c.value("enabled", true);
        caps.push_back(std::move(r));
    }
    auto fm = gt::load_feature_matrix(feat_path.string());
    auto capped = gt::apply_caps(fm, caps).select_columns(model.feature_names);

    auto exps = gt::shap_values(model, capped);
    auto rank = gt::mean_abs_importance(exps, model.feature_names);
    fs::create_directories(out_dir);
    gt::write_importance((out_dir / "importance.csv").string(), rank);
    gt::summary_export((out_dir / "shap_summary.json").string(), exps, capped,
                       model.feature_names, 20);

    ManifestBuilder mf{"explain", 0};
    mf.input(model_path);
    mf.input(feat_path);
    mf.output(out_dir / "importance.csv");
    mf.output(out_dir / "shap_summary.json");
    mf.write(out_dir);
    std::cout << "top feature: " << rank.entries.front().first << "\n";
    return 0;
}

int cmd_evaluate(const fs::path& in_dir, const fs::path& out_dir, double tau) {
    if (!fs::exists(in_dir / "model.json")) {
        std::cerr << "error: missing model: " << (in_dir / "model.json").string() << "\n";
        return kExitStale;
    }
    auto scored = score_features(in_dir);
    auto lab_path = in_dir / "labels.csv";
    require_file(lab_path, "labels");
    auto labels = load_labels_csv(lab_path);
    auto col = label_column(tau);

    std::vector<double> scores;
    std::vector<int> y;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < scored.client_ids.size(); ++i) {
        auto it = labels.find(scored.client_ids[i]);
        if (it == labels.end() || !it->second.eligible) continue;
        scores.push_back(scored.scores[i]);
        y.push_back(it->second.labels.at(col));
        ids.push_back(scored.client_ids[i]);
    }
    auto rep = gt::full_metrics(scores, y, ids);
    fs::create_directories(out_dir);
    json j = gt::to_json(rep);
    j["tau"] = tau;
    j["n_scored"] = ids.size();
    {
        std::ofstream out(out_dir / "metrics.json");
        out << j.dump(1) << "\n";
    }
    ManifestBuilder mf{"evaluate", 0};
    mf.input(in_dir / "model.json");
    mf.input(lab_path);
    mf.output(out_dir / "metrics.json");
    mf.write(out_dir);
    std::cout << "auc " << rep.auc << " f1 " << rep.f1 << "\n";
    return 0;
}

int cmd_simulate(const fs::path& in_dir, const fs::path& out_dir, double tau, int budget,
                 double margin_per_hl) {
    if (margin_per_hl <= 0) {
        std::cerr << "error: --margin must be a positive margin per hectoliter\n";
        return kExitUsage;
    }
    if (!fs::exists(in_dir / "model.json")) {
        std::cerr << "error: missing model: " << (in_dir / "model.json").string() << "\n";
        return kExitStale;
    }
    auto scored = score_features(in_dir);
    auto lab_path = in_dir / "labels.csv";
    require_file(lab_path, "labels");
    auto labels = load_labels_csv(lab_path);

    std::vector<gt::ClientOutcome> outcomes;
    for (std::size_t i = 0; i < scored.client_ids.size(); ++i) {
        auto it = labels.find(scored.client_ids[i]);
        if (it == labels.end() || !it->second.eligible) continue;
        outcomes.push_back({scored.client_ids[i], it->second.v_pre, it->second.v_post,
                            scored.scores[i]});
    }

    gt::EconomicsConfig econ;
    econ.margin_per_hl = margin_per_hl;
    econ.budget_coolers = budget;
    bool clamped = false;
    auto sel_model = gt::allocate(outcomes, static_cast<std::size_t>(budget), true, &clamped);
    if (clamped) std::cerr << "warning: budget exceeds population, clamped\n";
    auto sel_base = gt::allocate(outcomes, static_cast<std::size_t>(budget), false);

    auto plan_model = gt::evaluate_plan(sel_model, sel_base, outcomes, econ, tau, "model",
                                        "realized holdout growth");
    auto plan_base = gt::evaluate_plan(sel_base, sel_base, outcomes, econ, tau, "volume_baseline",
                                       "realized holdout growth");

    fs::create_directories(out_dir);
    json j;
    j["tau"] = tau;
    j["budget"] = budget;
    j["policies"] = {gt::to_json(plan_model), gt::to_json(plan_base)};
    {
        std::ofstream out(out_dir / "allocation_report.json");
        out << j.dump(1) << "\n";
    }
    ManifestBuilder mf{"simulate", 0};
    mf.input(in_dir / "model.json");
    mf.input(lab_path);
    mf.output(out_dir / "allocation_report.json");
    mf.write(out_dir);

    std::cout << "policy            roi     incr_margin  cost_savings\n";
    for (const auto* p : {&plan_model, &plan_base}) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%-16s %7.4f %12.2f %12.2f\n", p->policy_name.c_str(),
                      p->roi, p->incremental_margin, p->cost_savings);
        std::cout << buf;
    }
    std::cout << gt::kAssociationalCaveat << "\n";
    return 0;
}

int cmd_report(const fs::path& in_dir, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::ostringstream md;
    md << "# Growth targeting run report\n\n";

    // 1. class balance
    md << "## Class balance\n\n";
    if (fs::exists(in_dir / "labels.csv")) {
        auto labels = load_labels_csv(in_dir / "labels.csv");
        std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // col -> (pos, n)
        for (const auto& [id, r] : labels) {
            if (!r.eligible) continue;
            for (const auto& [col, v] : r.labels) {
                counts[col].first += static_cast<std::size_t>(v);
                counts[col].second += 1;
            }
        }
        md << "| threshold | positive share |\n|---|---|\n";
        for (const auto& [col, c] : counts) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "| %s | %.4f |\n", col.c_str(),
                          static_cast<double>(c.first) / static_cast<double>(c.second));
            md << buf;
        }
    } else {
        md << "_missing artifact: labels.csv_\n";
    }

    // 2. metrics
    md << "\n## Model metrics\n\n";
    if (fs::exists(in_dir / "metrics.json")) {
        auto j = load_json_file(in_dir / "metrics.json");
        md << "| metric | value |\n|---|---|\n";
        for (const auto& [k, v] : j.items()) md << "| " << k << " | " << v.dump() << " |\n";
    } else {
        md << "_missing artifact: metrics.json_\n";
    }

    // 3. importances (ordering mirrors importance.csv exactly)
    md << "\n## Top SHAP importances\n\n";
    if (fs::exists(in_dir / "importance.csv")) {
        std::ifstream in(in_dir / "importance.csv");
        std::string line;
        std::getline(in, line);  // header
        md << "| rank | feature | mean abs shap |\n|---|---|---|\n";
        int rank = 0;
        while (std::getline(in, line) && rank < 20) {
            auto f = gt::split_csv_line(line);
            if (f.size() != 2) continue;
            md << "| " << ++rank << " | " << f[0] << " | " << f[1] << " |\n";
        }
    } else {
        md << "_missing artifact: importance.csv_\n";
    }

    // 4. allocation comparison
    md << "\n## Allocation comparison\n\n";
    if (fs::exists(in_dir / "allocation_report.json")) {
        auto j = load_json_file(in_dir / "allocation_report.json");
        md << "| policy | roi | incremental margin | cost savings |\n|---|---|---|---|\n";
        for (const auto& p : j["policies"]) {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "| %s | %.4f | %.2f | %.2f |\n",
                          p["policy_name"].get<std::string>().c_str(), p["roi"].get<double>(),
                          p["incremental_margin"].get<double>(),
                          p["cost_savings"].get<double>());
            md << buf;
        }
        md << "\n" << gt::kAssociationalCaveat << "\n";
    } else {
        md << "_missing artifact: allocation_report.json_\n";
    }

    std::ofstream out(out_dir / "report.md");
    out << md.str();
    std::cout << "wrote " << (out_dir / "report.md").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cooler allocation decision toolkit"};
    app.require_subcommand(1);

    std::string in_dir = ".", out_dir = ".", config_path;
    double tau = 0.30;
    std::uint64_t seed = 7;
    int budget = 100, threads = 0;
    double margin = 0.0;

    auto add_common = [&](CLI::App* sub, bool wants_tau = false) {
        sub->add_option("--input-dir", in_dir, "directory of input artifacts");
        sub->add_option("--out-dir", out_dir, "directory for output artifacts");
        sub->add_option("--seed", seed, "random seed");
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--threads", threads, "worker threads (env GT_THREADS as fallback)");
        if (wants_tau)
            sub->add_option("--tau", tau, "growth threshold")->check(CLI::PositiveNumber);
    };

    auto* c_gen = app.add_subcommand("generate", "draw a synthetic dataset bundle");
    add_common(c_gen);
    auto* c_lab = app.add_subcommand("label", "compute growth labels");
    add_common(c_lab);
    auto* c_feat = app.add_subcommand("featurize", "engineer the feature matrix");
    add_common(c_feat);
    auto* c_train = app.add_subcommand("train", "tune, select features and fit the final model");
    add_common(c_train, true);
    auto* c_exp = app.add_subcommand("explain", "per-client attributions and importances");
    add_common(c_exp);
    auto* c_eval = app.add_subcommand("evaluate", "score and compute ranking metrics");
    add_common(c_eval, true);
    auto* c_sim = app.add_subcommand("simulate", "allocation ROI comparison");
    add_common(c_sim, true);
    c_sim->add_option("--budget", budget, "number of coolers to allocate")
        ->check(CLI::PositiveNumber);
    c_sim->add_option("--margin", margin, "contribution margin per hectoliter");
    auto* c_rep = app.add_subcommand("report", "combined markdown report");
    add_common(c_rep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    try {
        int nthreads = resolve_threads(threads);
        if (c_gen->parsed()) return cmd_generate(out_dir, seed, config_path);
        if (c_lab->parsed()) return cmd_label(in_dir, out_dir);
        if (c_feat->parsed()) return cmd_featurize(in_dir, out_dir);
        if (c_train->parsed())
            return cmd_train(in_dir, out_dir, tau, seed, config_path, nthreads);
        if (c_exp->parsed()) return cmd_explain(in_dir, out_dir);
        if (c_eval->parsed()) return cmd_evaluate(in_dir, out_dir, tau);
        if (c_sim->parsed()) return cmd_simulate(in_dir, out_dir, tau, budget, margin);
        if (c_rep->parsed()) return cmd_report(in_dir, out_dir);
    } catch (const StaleInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStale;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
