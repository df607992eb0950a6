#include <doctest.h>

#include "gt/eval.hpp"
#include "gt/gbdt.hpp"

using namespace gt;

namespace {

FeatureMatrix make_matrix(const std::vector<std::vector<double>>& rows,
                          const std::vector<std::string>& names) {
    FeatureMatrix m;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < rows.size(); ++i) ids.push_back("r" + std::to_string(i));
    m.init(ids, names);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < names.size(); ++c) m.at(r, c) = rows[r][c];
    return m;
}

}  // namespace

TEST_CASE("single split separates 1D data perfectly") {
    std::vector<std::vector<double>> rows;
    std::vector<int> y;
    for (int i = -10; i <= 10; ++i) {
        if (i == 0) continue;
        rows.push_back({static_cast<double>(i)});
        y.push_back(i > 0 ? 1 : 0);
    }
    auto m = make_matrix(rows, {"x"});
    GbdtConfig cfg;
    cfg.n_trees = 1;
    cfg.max_depth = 1;
    cfg.growth_policy = GbdtConfig::Growth::depth_wise;
    cfg.min_samples_leaf = 1;
    cfg.learning_rate = 1.0;
    cfg.l2_leaf_reg = 0.0;
    auto model = fit(m, y, cfg);
    auto p = predict_proba(model, m);
    int correct = 0;
    for (std::size_t i = 0; i < p.size(); ++i) correct += (p[i] >= 0.5) == (y[i] == 1);
    CHECK(correct == static_cast<int>(p.size()));
}

TEST_CASE("no-signal data collapses to the base rate under regularization") {
    Rng rng(7);
    std::vector<std::vector<double>> rows;
    std::vector<int> y;
    for (int i = 0; i < 400; ++i) {
        rows.push_back({rng.normal(), rng.normal()});
        y.push_back(rng.uniform() < 0.3 ? 1 : 0);
    }
    auto m = make_matrix(rows, {"a", "b"});
    GbdtConfig cfg;
    cfg.n_trees = 20;
    cfg.learning_rate = 0.05;
    cfg.l2_leaf_reg = 50.0;
    cfg.min_samples_leaf = 50;
    auto model = fit(m, y, cfg);
    double prevalence = 0;
    for (int v : y) prevalence += v;
    prevalence /= static_cast<double>(y.size());
    for (double p : predict_proba(model, m)) CHECK(std::abs(p - prevalence) < 0.05);
}

TEST_CASE("XOR is learnable with depth >= 2") {
    Rng rng(13);
    std::vector<std::vector<double>> rows;
    std::vector<int> y;
    for (int i = 0; i < 400; ++i) {
        double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
        rows.push_back({a, b});
        y.push_back((a > 0) != (b > 0) ? 1 : 0);
    }
    auto m = make_matrix(rows, {"a", "b"});
    GbdtConfig cfg;
    cfg.n_trees = 60;
    cfg.max_depth = 3;
    cfg.growth_policy = GbdtConfig::Growth::depth_wise;
    cfg.min_samples_leaf = 5;
    auto model = fit(m, y, cfg);
    auto p = predict_proba(model, m);
    int correct = 0;
    for (std::size_t i = 0; i < p.size(); ++i) correct += (p[i] >= 0.5) == (y[i] == 1);
    CHECK(static_cast<double>(correct) / static_cast<double>(p.size()) >= 0.95);
}

TEST_CASE("training loss is non-increasing every iteration") {
    Rng rng(19);
    std::vector<std::vector<double>> rows;
    std::vector<int> y;
    for (int i = 0; i < 300; ++i) {
        double a = rng.normal(), b = rng.normal();
        rows.push_back({a, b});
        y.push_back(rng.uniform() < sigmoid(1.5 * a - b) ? 1 : 0);
    }
    auto m = make_matrix(rows, {"a", "b"});
    for (auto policy : {GbdtConfig::Growth::depth_wise, GbdtConfig::Growth::leaf_wise}) {
        GbdtConfig cfg;
        cfg.n_trees = 50;
        cfg.growth_policy = policy;
        auto model = fit(m, y, cfg);
        REQUIRE(model.training_loss.size() == 51);
        for (std::size_t i = 1; i < model.training_loss.size(); ++i)
            CHECK(model.training_loss[i] <= model.training_loss[i - 1] + 1e-12);
    }
}

TEST_CASE("missing-direction learning picks up missing-not-at-random signal") {
    Rng rng(23);
    std::vector<std::vector<double>> rows;
    std::vector<int> y;
    for (int i = 0; i < 600; ++i) {
        int label = rng.uniform() < 0.5 ? 1 : 0;
        // the value itself is noise; missingness carries the label
        double v = label ? (rng.uniform() < 0.9 ? kMissing : rng.normal())
                         : (rng.uniform() < 0.1 ? kMissing : rng.normal());
        rows.push_back({v, rng.normal()});
        y.push_back(label);
    }
    auto m = make_matrix(rows, {"mnar", "noise"});
    GbdtConfig cfg;
    cfg.n_trees = 30;
    auto model = fit(m, y, cfg);
    CHECK(auc(predict_proba(model, m), y) >= 0.95);
}

TEST_CASE("row with every feature missing gets a valid probability") {
    Rng rng(29);
    std::vector<std::vector<double>> rows;
    std::vector<int> y;
    for (int i = 0; i < 200; ++i) {
        rows.push_back({rng.uniform() < 0.2 ? kMissing : rng.normal(),
                        rng.uniform() < 0.2 ? kMissing : rng.normal()});
        y.push_back(rng.uniform() < 0.5 ? 1 : 0);
    }
    auto m = make_matrix(rows, {"a", "b"});
    GbdtConfig cfg;
    cfg.n_trees = 10;
    auto model = fit(m, y, cfg);
    auto all_missing = make_matrix({{kMissing, kMissing}}, {"a", "b"});
    auto p = predict_proba(model, all_missing);
    REQUIRE(p.size() == 1);
    CHECK(p[0] > 0.0);
    CHECK(p[0] < 1.0);
}

TEST_CASE("empty ensemble predicts sigmoid(base_score)") {
    TreeEnsemble model;
    model.base_score = 0.4;
    model.feature_names = {"a"};
    auto m = make_matrix({{1.0}, {kMissing}}, {"a"});
    auto p = predict_proba(model, m);
    CHECK(p[0] == doctest::Approx(sigmoid(0.4)));
    CHECK(p[1] == doctest::Approx(sigmoid(0.4)));
}

TEST_CASE("manual trace of a 2-tree model") {
    Rng rng(31);
    std::vector<std::vector<double>> rows;
    std::vector<int> y;
    for (int i = 0; i < 100; ++i) {
        rows.push_back({rng.normal(), rng.normal()});
        y.push_back(rows.back()[0] > 0 ? 1 : 0);
    }
    auto m = make_matrix(rows, {"a", "b"});
    GbdtConfig cfg;
    cfg.n_trees = 2;
    cfg.max_depth = 2;
    cfg.growth_policy = GbdtConfig::Growth::depth_wise;
    auto model = fit(m, y, cfg);
    // oracle: walk both trees by hand for each row
    for (std::size_t r = 0; r < 5; ++r) {
        double margin = model.base_score;
        for (const auto& t : model.trees) {
            int node = 0;
            while (!t.is_leaf(node)) {
                double x = m.at(r, static_cast<std::size_t>(t.feature[node]));
                node = is_missing(x) ? (t.missing_left[node] ? t.left[node] : t.right[node])
                                     : (x <= t.threshold[node] ? t.left[node] : t.right[node]);
            }
            margin += t.value[node];
        }
        CHECK(predict_proba(model, m)[r] == doctest::Approx(sigmoid(margin)));
    }
}

TEST_CASE("errors: single class, missing column") {
    auto m = make_matrix({{1.0}, {2.0}}, {"a"});
    GbdtConfig cfg;
    CHECK_THROWS_AS(fit(m, {1, 1}, cfg), GbdtError);

    auto good = make_matrix({{1.0}, {2.0}, {3.0}, {4.0}}, {"a"});
    cfg.min_samples_leaf = 1;
    auto model = fit(good, {0, 0, 1, 1}, cfg);
    auto wrong = make_matrix({{1.0}}, {"zzz"});
    CHECK_THROWS_AS(predict_proba(model, wrong), GbdtError);
}

TEST_CASE("serialize round-trip preserves predictions, rejects corruption") {
    Rng rng(37);
    std::vector<std::vector<double>> rows;
    std::vector<int> y;
    for (int i = 0; i < 150; ++i) {
        rows.push_back({rng.normal(), rng.uniform() < 0.1 ? kMissing : rng.normal()});
        y.push_back(rng.uniform() < sigmoid(rows.back()[0]) ? 1 : 0);
    }
    auto m = make_matrix(rows, {"a", "b"});
    GbdtConfig cfg;
    cfg.n_trees = 15;
    cfg.seed = 7;
    auto model = fit(m, y, cfg);
    auto bytes = serialize(model);
    auto back = deserialize(bytes);
    auto p1 = predict_proba(model, m);
    auto p2 = predict_proba(back, m);
    for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i] == p2[i]);

    CHECK_THROWS_AS(deserialize(bytes.substr(0, bytes.size() / 2)), GbdtError);
    auto vjson = nlohmann::json::parse(bytes);
    vjson["format_version"] = 999;
    CHECK_THROWS_AS(deserialize(vjson.dump()), GbdtError);
}

TEST_CASE("determinism across runs and thread counts") {
    Rng rng(41);
    std::vector<std::vector<double>> rows;
    std::vector<int> y;
    for (int i = 0; i < 500; ++i) {
        rows.push_back({rng.normal(), rng.normal(), rng.normal(), rng.normal()});
        y.push_back(rng.uniform() < sigmoid(rows.back()[0] + 0.5 * rows.back()[2]) ? 1 : 0);
    }
    auto m = make_matrix(rows, {"a", "b", "c", "d"});
    GbdtConfig cfg;
    cfg.n_trees = 25;
    cfg.seed = 7;
    cfg.feature_subsample = 0.75;
    auto m1 = fit(m, y, cfg, 1);
    auto m2 = fit(m, y, cfg, 1);
    auto m8 = fit(m, y, cfg, 8);
    CHECK(model_hash(m1) == model_hash(m2));
    CHECK(model_hash(m1) == model_hash(m8));
}

TEST_CASE("pos_class_weight = 1 reproduces the unweighted fit exactly") {
    Rng rng(43);
    std::vector<std::vector<double>> rows;
    std::vector<int> y;
    for (int i = 0; i < 200; ++i) {
        rows.push_back({rng.normal(), rng.normal()});
        y.push_back(rng.uniform() < 0.3 ? 1 : 0);
    }
    auto m = make_matrix(rows, {"a", "b"});
    GbdtConfig cfg;
    cfg.n_trees = 10;
    auto base = fit(m, y, cfg);
    cfg.pos_class_weight = 1.0;
    auto weighted = fit(m, y, cfg);
    CHECK(model_hash(base) == model_hash(weighted));
}

TEST_CASE("monotone transform of a feature keeps ranking quality") {
    Rng rng(47);
    std::vector<std::vector<double>> rows;
    std::vector<int> y;
    for (int i = 0; i < 600; ++i) {
        double a = rng.normal(), b = rng.normal();
        rows.push_back({a, b});
        y.push_back(rng.uniform() < sigmoid(2 * a + b) ? 1 : 0);
    }
    auto m = make_matrix(rows, {"a", "b"});
    GbdtConfig cfg;
    cfg.n_trees = 40;
    auto base_model = fit(m, y, cfg);
    double base_auc = auc(predict_proba(base_model, m), y);

    auto warped = m;
    auto ca = warped.col("a");
    for (std::size_t r = 0; r < warped.rows(); ++r)
        warped.at(r, ca) = std::exp(warped.at(r, ca));  // strictly increasing
    auto warped_model = fit(warped, y, cfg);
    double warped_auc = auc(predict_proba(warped_model, warped), y);
    CHECK(std::abs(base_auc - warped_auc) <= 0.005);
}
