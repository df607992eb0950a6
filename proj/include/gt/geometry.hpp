#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace gt::geom {

struct Point {
    double lat = 0.0;
    double lon = 0.0;
};

namespace detail {

inline int orientation(const Point& a, const Point& b, const Point& c) {
    double v = (b.lon - a.lon) * (c.lat - a.lat) - (b.lat - a.lat) * (c.lon - a.lon);
    if (v > 0) return 1;
    if (v < 0) return -1;
    return 0;
}

inline bool on_segment(const Point& a, const Point& b, const Point& p) {
    return std::min(a.lat, b.lat) <= p.lat && p.lat <= std::max(a.lat, b.lat) &&
           std::min(a.lon, b.lon) <= p.lon && p.lon <= std::max(a.lon, b.lon);
}

inline bool segments_intersect(const Point& p1, const Point& p2, const Point& q1, const Point& q2) {
    int o1 = orientation(p1, p2, q1);
    int o2 = orientation(p1, p2, q2);
    int o3 = orientation(q1, q2, p1);
    int o4 = orientation(q1, q2, p2);
    if (o1 != o2 && o3 != o4) return true;
    if (o1 == 0 && on_segment(p1, p2, q1)) return true;
    if (o2 == 0 && on_segment(p1, p2, q2)) return true;
    if (o3 == 0 && on_segment(q1, q2, p1)) return true;
    if (o4 == 0 && on_segment(q1, q2, p2)) return true;
    return false;
}

}  // namespace detail

/// True when the closed ring has no self-intersections between non-adjacent
/// edges and no repeated vertices. Ring closure is implied (last -> first).
inline bool ring_is_simple(const std::vector<Point>& ring) {
    const std::size_t n = ring.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (ring[i].lat == ring[j].lat && ring[i].lon == ring[j].lon) return false;
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a1 = ring[i];
        const Point& a2 = ring[(i + 1) % n];
        for (std::size_t j = i + 1; j < n; ++j) {
            // skip adjacent edges (they share a vertex)
            if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
            if (detail::segments_intersect(a1, a2, ring[j], ring[(j + 1) % n])) return false;
        }
    }
    return true;
}

/// Even-odd rule; boundary points count as inside.
inline bool point_in_ring(const Point& p, const std::vector<Point>& ring) {
    const std::size_t n = ring.size();
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point& a = ring[i];
        const Point& b = ring[j];
        // boundary check
        if (detail::orientation(a, b, p) == 0 && detail::on_segment(a, b, p)) return true;
        bool crosses = (a.lat > p.lat) != (b.lat > p.lat);
        if (crosses) {
            double x = (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon;
            if (p.lon < x) inside = !inside;
        }
    }
    return inside;
}

inline double dist2_point_segment(const Point& p, const Point& a, const Point& b) {
    double dx = b.lon - a.lon, dy = b.lat - a.lat;
    double len2 = dx * dx + dy * dy;
    double t = 0.0;
    if (len2 > 0) {
        t = ((p.lon - a.lon) * dx + (p.lat - a.lat) * dy) / len2;
        t = std::clamp(t, 0.0, 1.0);
    }
    double px = a.lon + t * dx - p.lon;
    double py = a.lat + t * dy - p.lat;
    return px * px + py * py;
}

/// Minimum squared Euclidean distance in the lat/lon plane from p to the ring boundary.
inline double dist2_point_ring(const Point& p, const std::vector<Point>& ring) {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++)
        best = std::min(best, dist2_point_segment(p, ring[j], ring[i]));
    return best;
}

/// Great-circle distance in meters.
inline double haversine_m(const Point& a, const Point& b) {
    constexpr double kEarthRadiusM = 6371000.0;
    constexpr double kDeg2Rad = 3.14159265358979323846 / 180.0;
    double lat1 = a.lat * kDeg2Rad, lat2 = b.lat * kDeg2Rad;
    double dlat = (b.lat - a.lat) * kDeg2Rad;
    double dlon = (b.lon - a.lon) * kDeg2Rad;
    double s = std::sin(dlat / 2), t = std::sin(dlon / 2);
    double h = s * s + std::cos(lat1) * std::cos(lat2) * t * t;
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

}  // namespace gt::geom
