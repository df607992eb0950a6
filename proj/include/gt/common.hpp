#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gt {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

/// Calendar month, totally ordered. Serialized as "YYYY-MM".
struct YearMonth {
    int year = 0;
    int month = 1;  // 1..12

    int index() const { return year * 12 + (month - 1); }

    static YearMonth from_index(int idx) {
        YearMonth ym;
        ym.year = idx / 12;
        ym.month = idx % 12 + 1;
        if (ym.month < 1) {  // negative index wrap
            ym.month += 12;
            ym.year -= 1;
        }
        return ym;
    }

    YearMonth plus(int months) const { return from_index(index() + months); }

    std::string str() const {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d", year, month);
        return buf;
    }

    auto operator<=>(const YearMonth&) const = default;
};

/// Parses "YYYY-MM"; throws std::invalid_argument on bad format or month out of range.
inline YearMonth parse_month(const std::string& s) {
    if (s.size() != 7 || s[4] != '-' ||
        !std::all_of(s.begin(), s.begin() + 4, [](char c) { return c >= '0' && c <= '9'; }) ||
        !std::isdigit(static_cast<unsigned char>(s[5])) ||
        !std::isdigit(static_cast<unsigned char>(s[6]))) {
        throw std::invalid_argument("invalid month '" + s + "'");
    }
    YearMonth ym;
    ym.year = std::stoi(s.substr(0, 4));
    ym.month = std::stoi(s.substr(5, 2));
    if (ym.month < 1 || ym.month > 12)
        throw std::invalid_argument("invalid month '" + s + "'");
    return ym;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

/// FNV-1a 64-bit. Stable across platforms; used for content hashes in manifests.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

inline std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Deterministic RNG wrapper. Distribution helpers are hand-rolled so results
/// do not depend on the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    double uniform() {  // [0, 1)
        return (next_u64() >> 11) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double log_uniform(double lo, double hi) {
        return std::exp(uniform(std::log(lo), std::log(hi)));
    }

    /// Integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(next_u64() % span);
    }

    double normal() {
        // Box-Muller; consumes two uniforms per pair, caches the spare.
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_u64() % i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

inline double sigmoid(double z) {
    if (z >= 0) {
        double e = std::exp(-z);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(z);
    return e / (1.0 + e);
}

/// Quantile with linear interpolation between order statistics.
/// `sorted` must be non-empty and ascending; q in [0, 1].
inline double quantile_linear(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty vector");
    if (sorted.size() == 1) return sorted[0];
    double pos = q * (static_cast<double>(sorted.size()) - 1.0);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    auto hi = static_cast<std::size_t>(std::ceil(pos));
    if (lo == hi) return sorted[lo];
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace gt
