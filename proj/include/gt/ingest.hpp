#pragma once

#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gt/common.hpp"
#include "gt/geometry.hpp"

namespace gt {

/// One client-month-product sales line. Volume is in hectoliters.
struct TransactionRecord {
    std::string client_id;
    YearMonth month;
    std::string product_line;
    std::string brand;
    double volume_hl = 0.0;
    double revenue = 0.0;
    double discount = 0.0;
    int order_days = 0;

    auto key() const { return std::tie(client_id, month, product_line, brand); }
};

struct ClientRecord {
    std::string client_id;
    YearMonth install_month;
    double latitude = 0.0;
    double longitude = 0.0;
};

struct CensusPolygon {
    std::string polygon_id;
    std::vector<geom::Point> ring;
    std::map<std::string, double> attributes;
};

struct DatasetBundle {
    std::vector<TransactionRecord> transactions;
    std::vector<ClientRecord> clients;
    std::vector<CensusPolygon> polygons;
};

struct ValidationReport {
    std::vector<std::string> orphan_transactions;   // client_ids not in registry
    std::vector<std::string> clients_no_transactions;
    std::map<std::string, std::pair<YearMonth, YearMonth>> month_coverage;  // per client

    bool clean() const { return orphan_transactions.empty() && clients_no_transactions.empty(); }
};

class IngestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline double parse_nonneg(const std::string& s, const char* what, std::size_t line_no) {
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw IngestError(std::string("non-numeric ") + what + " at line " + std::to_string(line_no));
    }
    if (pos != s.size())
        throw IngestError(std::string("non-numeric ") + what + " at line " + std::to_string(line_no));
    if (v < 0)
        throw IngestError(std::string("negative ") + what + " at line " + std::to_string(line_no));
    return v;
}

inline std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open file: " + path);
    return in;
}

}  // namespace detail

inline const std::string kTransactionsHeader =
    "client_id,month,product_line,brand,volume_hl,revenue,discount,order_days";
inline const std::string kClientsHeader = "client_id,install_month,latitude,longitude";

/// Reads transactions.csv. Duplicate (client, month, line, brand) rows are summed.
/// Output is canonically sorted by the unique key, so ingestion is order-independent.
inline std::vector<TransactionRecord> load_transactions(const std::string& path) {
    auto in = detail::open_or_throw(path);
    std::string line;
    if (!std::getline(in, line) || split_csv_line(line) != split_csv_line(kTransactionsHeader))
        throw IngestError("bad transactions header in " + path);

    std::map<std::tuple<std::string, YearMonth, std::string, std::string>, TransactionRecord> byKey;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 8)
            throw IngestError("expected 8 fields at line " + std::to_string(line_no));
        TransactionRecord r;
        r.client_id = f[0];
        try {
            r.month = parse_month(f[1]);
        } catch (const std::invalid_argument&) {
            throw IngestError("invalid month at line " + std::to_string(line_no));
        }
        r.product_line = f[2];
        r.brand = f[3];
        r.volume_hl = detail::parse_nonneg(f[4], "volume_hl", line_no);
        r.revenue = detail::parse_nonneg(f[5], "revenue", line_no);
        r.discount = detail::parse_nonneg(f[6], "discount", line_no);
        double od = detail::parse_nonneg(f[7], "order_days", line_no);
        if (od != std::floor(od) || od > 31)
            throw IngestError("invalid order_days at line " + std::to_string(line_no));
        r.order_days = static_cast<int>(od);

        auto [it, inserted] = byKey.try_emplace(r.key(), r);
        if (!inserted) {
            it->second.volume_hl += r.volume_hl;
            it->second.revenue += r.revenue;
            it->second.discount += r.discount;
            it->second.order_days = std::min(31, it->second.order_days + r.order_days);
        }
    }
    std::vector<TransactionRecord> out;
    out.reserve(byKey.size());
    for (auto& [k, v] : byKey) out.push_back(std::move(v));
    return out;
}

inline void write_transactions(const std::string& path, const std::vector<TransactionRecord>& recs) {
    std::ofstream out(path);
    if (!out) throw IngestError("cannot write file: " + path);
    out << kTransactionsHeader << "\n";
    char buf[256];
    for (const auto& r : recs) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%s,%s,%.10g,%.10g,%.10g,%d\n", r.client_id.c_str(),
                      r.month.str().c_str(), r.product_line.c_str(), r.brand.c_str(), r.volume_hl,
                      r.revenue, r.discount, r.order_days);
        out << buf;
    }
}

inline std::vector<ClientRecord> load_clients(const std::string& path) {
    auto in = detail::open_or_throw(path);
    std::string line;
    if (!std::getline(in, line) || split_csv_line(line) != split_csv_line(kClientsHeader))
        throw IngestError("bad clients header in " + path);

    std::vector<ClientRecord> out;
    std::set<std::string> seen;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 4)
            throw IngestError("expected 4 fields at line " + std::to_string(line_no));
        ClientRecord c;
        c.client_id = f[0];
        if (!seen.insert(c.client_id).second)
            throw IngestError("duplicate client_id '" + c.client_id + "' at line " +
                              std::to_string(line_no));
        try {
            c.install_month = parse_month(f[1]);
        } catch (const std::invalid_argument&) {
            throw IngestError("invalid month at line " + std::to_string(line_no));
        }
        try {
            c.latitude = std::stod(f[2]);
            c.longitude = std::stod(f[3]);
        } catch (const std::exception&) {
            throw IngestError("non-numeric coordinate at line " + std::to_string(line_no));
        }
        if (c.latitude < -90 || c.latitude > 90 || c.longitude < -180 || c.longitude > 180)
            throw IngestError("coordinate out of range at line " + std::to_string(line_no));
        out.push_back(std::move(c));
    }
    std::sort(out.begin(), out.end(),
              [](const ClientRecord& a, const ClientRecord& b) { return a.client_id < b.client_id; });
    return out;
}

inline void write_clients(const std::string& path, const std::vector<ClientRecord>& clients) {
    std::ofstream out(path);
    if (!out) throw IngestError("cannot write file: " + path);
    out << kClientsHeader << "\n";
    char buf[160];
    for (const auto& c : clients) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%.8f,%.8f\n", c.client_id.c_str(),
                      c.install_month.str().c_str(), c.latitude, c.longitude);
        out << buf;
    }
}

/// Reads the GeoJSON subset: FeatureCollection of single-ring Polygons with
/// numeric properties. Self-intersecting or degenerate rings are rejected.
inline std::vector<CensusPolygon> load_polygons(const std::string& path, std::string* warning = nullptr) {
    auto in = detail::open_or_throw(path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IngestError("bad GeoJSON in " + path + ": " + e.what());
    }
    if (j.value("type", "") != "FeatureCollection")
        throw IngestError("expected FeatureCollection in " + path);

    std::vector<CensusPolygon> out;
    for (const auto& feat : j.value("features", nlohmann::json::array())) {
        CensusPolygon p;
        p.polygon_id = feat.value("id", std::string{});
        if (p.polygon_id.empty() && feat.contains("properties") &&
            feat["properties"].contains("polygon_id"))
            p.polygon_id = feat["properties"]["polygon_id"].get<std::string>();
        const auto& geom = feat.at("geometry");
        if (geom.value("type", "") != "Polygon")
            throw IngestError("polygon '" + p.polygon_id + "': geometry must be Polygon");
        const auto& rings = geom.at("coordinates");
        if (rings.size() != 1)
            throw IngestError("polygon '" + p.polygon_id + "': holes/multi-ring not supported");
        for (const auto& v : rings[0]) {
            // GeoJSON order is [lon, lat]
            p.ring.push_back({v.at(1).get<double>(), v.at(0).get<double>()});
        }
        // drop the closing vertex if the ring repeats the first point
        if (p.ring.size() >= 2 && p.ring.front().lat == p.ring.back().lat &&
            p.ring.front().lon == p.ring.back().lon)
            p.ring.pop_back();
        if (p.ring.size() < 3)
            throw IngestError("polygon '" + p.polygon_id + "': fewer than 3 vertices");
        if (!geom::ring_is_simple(p.ring))
            throw IngestError("polygon '" + p.polygon_id + "': ring is not simple");
        const auto props = feat.value("properties", nlohmann::json::object());
        for (const auto& [k, v] : props.items()) {
            if (k == "polygon_id") continue;
            if (!v.is_number())
                throw IngestError("polygon '" + p.polygon_id + "': property '" + k +
                                  "' is not numeric");
            p.attributes[k] = v.get<double>();
        }
        out.push_back(std::move(p));
    }
    if (out.empty() && warning) *warning = "empty FeatureCollection in " + path;
    std::sort(out.begin(), out.end(), [](const CensusPolygon& a, const CensusPolygon& b) {
        return a.polygon_id < b.polygon_id;
    });
    return out;
}

inline void write_polygons(const std::string& path, const std::vector<CensusPolygon>& polys) {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& p : polys) {
        nlohmann::json coords = nlohmann::json::array();
        for (const auto& v : p.ring) coords.push_back({v.lon, v.lat});
        coords.push_back({p.ring.front().lon, p.ring.front().lat});
        nlohmann::json props;
        props["polygon_id"] = p.polygon_id;
        for (const auto& [k, v] : p.attributes) props[k] = v;
        features.push_back({{"type", "Feature"},
                            {"id", p.polygon_id},
                            {"geometry", {{"type", "Polygon"}, {"coordinates", {coords}}}},
                            {"properties", props}});
    }
    nlohmann::json j = {{"type", "FeatureCollection"}, {"features", features}};
    std::ofstream out(path);
    if (!out) throw IngestError("cannot write file: " + path);
    out << j.dump(1) << "\n";
}

inline ValidationReport validate_bundle(const DatasetBundle& bundle) {
    ValidationReport rep;
    std::set<std::string> known;
    for (const auto& c : bundle.clients) known.insert(c.client_id);

    std::set<std::string> with_tx, orphans;
    for (const auto& t : bundle.transactions) {
        with_tx.insert(t.client_id);
        if (!known.count(t.client_id)) orphans.insert(t.client_id);
        auto it = rep.month_coverage.find(t.client_id);
        if (it == rep.month_coverage.end()) {
            rep.month_coverage.emplace(t.client_id, std::make_pair(t.month, t.month));
        } else {
            it->second.first = std::min(it->second.first, t.month);
            it->second.second = std::max(it->second.second, t.month);
        }
    }
    rep.orphan_transactions.assign(orphans.begin(), orphans.end());
    for (const auto& c : bundle.clients)
        if (!with_tx.count(c.client_id)) rep.clients_no_transactions.push_back(c.client_id);
    return rep;
}

}  // namespace gt
