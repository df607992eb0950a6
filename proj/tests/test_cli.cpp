// End-to-end tests against the built CLI binary (path given as argv[1]).
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

std::string g_gt;

int run(const std::string& args) {
    int status = std::system((g_gt + " " + args + " > /dev/null 2>&1").c_str());
    return status < 0 ? status : WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / "gt_cli_tests" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_file(const fs::path& p, const std::string& s) {
    std::ofstream out(p);
    out << s;
}

}  // namespace

TEST_CASE("usage errors exit 2") {
    CHECK(run("--no-such-flag") == 2);
    CHECK(run("train --bogus 1") == 2);
    CHECK(run("") == 2);  // missing subcommand
}

TEST_CASE("evaluate without a model exits 3") {
    auto d = fresh_dir("nomodel");
    CHECK(run("evaluate --input-dir " + d.string() + " --out-dir " + d.string()) == 3);
}

TEST_CASE("full chain, stale-hash detection, report sections") {
    auto d = fresh_dir("chain");
    auto gen_cfg = d / "gen.json";
    write_file(gen_cfg, R"({"n_clients": 250})");
    auto train_cfg = d / "train.json";
    write_file(train_cfg,
               R"({"trial_budget": 1, "cv_folds": 3, "outer_rounds_limit": 1,
                   "n_trees": [20, 40], "min_rows": 50})");
    std::string dd = d.string();

    REQUIRE(run("generate --seed 3 --config " + gen_cfg.string() + " --out-dir " + dd) == 0);
    REQUIRE(run("label --input-dir " + dd + " --out-dir " + dd) == 0);
    REQUIRE(run("featurize --input-dir " + dd + " --out-dir " + dd) == 0);
    REQUIRE(run("train --tau 0.30 --seed 3 --config " + train_cfg.string() + " --input-dir " +
                dd + " --out-dir " + dd) == 0);
    REQUIRE(run("explain --input-dir " + dd + " --out-dir " + dd) == 0);
    REQUIRE(run("evaluate --tau 0.30 --input-dir " + dd + " --out-dir " + dd) == 0);
    REQUIRE(run("simulate --tau 0.30 --budget 40 --margin 40 --input-dir " + dd + " --out-dir " +
                dd) == 0);
    REQUIRE(run("report --input-dir " + dd + " --out-dir " + dd) == 0);

    for (const char* f :
         {"transactions.csv", "clients.csv", "polygons.geojson", "labels.csv", "features.csv",
          "features_meta.json", "model.json", "pipeline_result.json", "elimination_history.csv",
          "filter_report.json", "importance.csv", "shap_summary.json", "metrics.json",
          "allocation_report.json", "report.md"})
        CHECK(fs::exists(d / f));

    auto report = slurp(d / "report.md");
    CHECK(report.find("## Class balance") != std::string::npos);
    CHECK(report.find("## Model metrics") != std::string::npos);
    CHECK(report.find("## Top SHAP importances") != std::string::npos);
    CHECK(report.find("## Allocation comparison") != std::string::npos);
    CHECK(report.find("missing artifact") == std::string::npos);

    // importances section mirrors importance.csv ordering
    std::ifstream imp(d / "importance.csv");
    std::string line, first_feature;
    std::getline(imp, line);  // header
    std::getline(imp, line);
    first_feature = line.substr(0, line.find(','));
    auto sec = report.find("Top SHAP importances");
    CHECK(report.find("| 1 | " + first_feature + " |", sec) != std::string::npos);

    // train twice with the same seed into a fresh dir: identical result bytes
    auto d2 = fresh_dir("chain2");
    for (const char* f : {"features.csv", "labels.csv"}) fs::copy_file(d / f, d2 / f);
    REQUIRE(run("train --tau 0.30 --seed 3 --config " + train_cfg.string() + " --input-dir " +
                d2.string() + " --out-dir " + d2.string()) == 0);
    CHECK(slurp(d / "pipeline_result.json") == slurp(d2 / "pipeline_result.json"));
    CHECK(slurp(d / "model.json") == slurp(d2 / "model.json"));

    // corrupting an input after its manifest was written -> stale hash, exit 3
    {
        std::ofstream out(d / "features.csv", std::ios::app);
        out << "\n";
    }
    CHECK(run("train --tau 0.30 --seed 3 --config " + train_cfg.string() + " --input-dir " + dd +
              " --out-dir " + dd) == 3);
}

TEST_CASE("report renders gap flags for missing artifacts") {
    auto d = fresh_dir("gaps");
    auto gen_cfg = d / "gen.json";
    write_file(gen_cfg, R"({"n_clients": 60})");
    std::string dd = d.string();
    REQUIRE(run("generate --seed 4 --config " + gen_cfg.string() + " --out-dir " + dd) == 0);
    REQUIRE(run("label --input-dir " + dd + " --out-dir " + dd) == 0);
    REQUIRE(run("report --input-dir " + dd + " --out-dir " + dd) == 0);
    auto report = slurp(d / "report.md");
    CHECK(report.find("## Class balance") != std::string::npos);
    CHECK(report.find("_missing artifact: metrics.json_") != std::string::npos);
    CHECK(report.find("_missing artifact: allocation_report.json_") != std::string::npos);
}

int main(int argc, char** argv) {
    if (argc > 1) g_gt = argv[1];
    doctest::Context ctx;
    ctx.applyCommandLine(1, argv);
    return ctx.run();
}
