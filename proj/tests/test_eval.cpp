#include <doctest.h>

#include "gt/eval.hpp"

using namespace gt;

namespace {

// O(n^2) pair-counting oracle, ties 1/2
double auc_oracle(const std::vector<double>& s, const std::vector<int>& y) {
    double num = 0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!y[i]) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j]) continue;
            ++pairs;
            if (s[i] > s[j]) num += 1.0;
            else if (s[i] == s[j]) num += 0.5;
        }
    }
    return num / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("auc basics") {
    CHECK(auc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == doctest::Approx(1.0));
    CHECK(auc({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == doctest::Approx(0.5));
    CHECK(auc({0.9, 0.8, 0.2, 0.1}, {0, 0, 1, 1}) == doctest::Approx(0.0));
    CHECK_THROWS(auc({0.5, 0.6}, {1, 1}));
}

TEST_CASE("auc equals the pair-counting oracle on random instances") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t n = 5 + static_cast<std::size_t>(rng.uniform_int(0, 60));
        std::vector<double> s(n);
        std::vector<int> y(n);
        bool has0 = false, has1 = false;
        for (std::size_t i = 0; i < n; ++i) {
            // coarse grid to force ties
            s[i] = std::floor(rng.uniform() * 8) / 8.0;
            y[i] = rng.uniform() < 0.5 ? 1 : 0;
            (y[i] ? has1 : has0) = true;
        }
        if (!has0 || !has1) continue;
        CHECK(auc(s, y) == doctest::Approx(auc_oracle(s, y)).epsilon(1e-12));
    }
}

TEST_CASE("auc is invariant under strictly increasing transforms") {
    Rng rng(37);
    std::vector<double> s(80);
    std::vector<int> y(80);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = rng.uniform();
        y[i] = rng.uniform() < 0.4 ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    double base = auc(s, y);
    auto t = s;
    for (double& v : t) v = std::exp(3 * v) + 7;
    CHECK(auc(t, y) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("threshold metrics hand arithmetic") {
    // TP=3 FP=1 FN=1 TN=1
    std::vector<double> s{0.9, 0.8, 0.7, 0.6, 0.4, 0.2};
    std::vector<int> y{1, 1, 1, 0, 1, 0};
    auto m = threshold_metrics(s, y, 0.5);
    CHECK(m.tp == 3);
    CHECK(m.fp == 1);
    CHECK(m.fn == 1);
    CHECK(m.precision == doctest::Approx(0.75));
    CHECK(m.recall == doctest::Approx(0.75));
    CHECK(m.f1 == doctest::Approx(0.75));

    auto all = threshold_metrics(s, y, 0.0);
    CHECK(all.recall == doctest::Approx(1.0));

    // nothing predicted positive: precision undefined, f1 = 0
    auto none = threshold_metrics({0.1, 0.2}, {1, 0}, 0.5);
    CHECK(!none.precision_defined);
    CHECK(none.f1 == doctest::Approx(0.0));
}

TEST_CASE("threshold metrics match confusion-matrix brute force") {
    Rng rng(41);
    for (int trial = 0; trial < 30; ++trial) {
        std::size_t n = 30;
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = rng.uniform();
            y[i] = rng.uniform() < 0.5 ? 1 : 0;
        }
        auto m = threshold_metrics(s, y, 0.5);
        int tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (s[i] >= 0.5 && y[i]) ++tp;
            if (s[i] >= 0.5 && !y[i]) ++fp;
            if (s[i] < 0.5 && y[i]) ++fn;
        }
        CHECK(m.tp == tp);
        CHECK(m.fp == fp);
        CHECK(m.fn == fn);
    }
}

TEST_CASE("precision_at_k basics and tie handling") {
    std::vector<std::string> ids{"a", "b", "c", "d"};
    CHECK(precision_at_k({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}, 2, ids) == doctest::Approx(1.0));
    // K = n -> overall positive rate
    CHECK(precision_at_k({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}, 4, ids) == doctest::Approx(0.5));
    // score ties broken by ascending client_id: "a" and "b" win
    CHECK(precision_at_k({0.5, 0.5, 0.5, 0.5}, {1, 1, 0, 0}, 2, ids) == doctest::Approx(1.0));
    bool clamped = false;
    CHECK(precision_at_k({0.9, 0.8}, {1, 0}, 10, {"a", "b"}, &clamped) == doctest::Approx(0.5));
    CHECK(clamped);
}

TEST_CASE("precision_at_k matches stable-sort oracle with ties") {
    Rng rng(43);
    for (int trial = 0; trial < 30; ++trial) {
        std::size_t n = 25;
        std::vector<double> s(n);
        std::vector<int> y(n);
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = std::floor(rng.uniform() * 5) / 5.0;
            y[i] = rng.uniform() < 0.5 ? 1 : 0;
            char b[8];
            std::snprintf(b, sizeof(b), "c%03zu", i);
            ids.emplace_back(b);
        }
        std::size_t k = 1 + static_cast<std::size_t>(rng.uniform_int(0, 20));
        // oracle: explicit sort by (score desc, id asc) then count
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b2) {
            if (s[a] != s[b2]) return s[a] > s[b2];
            return ids[a] < ids[b2];
        });
        std::size_t kk = std::min(k, n), pos = 0;
        for (std::size_t i = 0; i < kk; ++i) pos += static_cast<std::size_t>(y[idx[i]]);
        CHECK(precision_at_k(s, y, k, ids) ==
              doctest::Approx(static_cast<double>(pos) / static_cast<double>(kk)));
    }
}

TEST_CASE("precision_at_k is monotone under label improvement") {
    std::vector<std::string> ids{"a", "b", "c", "d", "e"};
    std::vector<double> s{0.9, 0.8, 0.7, 0.6, 0.5};
    std::vector<int> y{0, 1, 0, 0, 1};
    double before = precision_at_k(s, y, 3, ids);
    y[0] = 1;  // flip a top-K label 0 -> 1
    CHECK(precision_at_k(s, y, 3, ids) >= before);
}
