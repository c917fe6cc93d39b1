#include "lanemap/lane_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <unordered_set>

#include "lanemap/error.hpp"

namespace lanemap {

bool GeoTransform::invertible() const {
    const double det = determinant();
    return std::isfinite(det) && det != 0.0;
}

std::string_view to_string(LineForm v) { return v == LineForm::Single ? "single" : "double"; }
std::string_view to_string(LineColor v) { return v == LineColor::White ? "white" : "yellow"; }
std::string_view to_string(Continuity v) { return v == Continuity::Solid ? "solid" : "dash"; }

LineForm parse_line_form(std::string_view s) {
    if (s == "single") return LineForm::Single;
    if (s == "double") return LineForm::Double;
    throw ParseError("unknown line_form '" + std::string(s) + "'");
}

LineColor parse_line_color(std::string_view s) {
    if (s == "white") return LineColor::White;
    if (s == "yellow") return LineColor::Yellow;
    throw ParseError("unknown color '" + std::string(s) + "'");
}

Continuity parse_continuity(std::string_view s) {
    if (s == "solid") return Continuity::Solid;
    if (s == "dash") return Continuity::Dash;
    throw ParseError("unknown continuity '" + std::string(s) + "'");
}

void validate(const GeoPoint& g) {
    if (!std::isfinite(g.lon) || !std::isfinite(g.lat) || g.lon < -180.0 || g.lon > 180.0 ||
        g.lat < -90.0 || g.lat > 90.0) {
        throw ValidationError("geo point out of range");
    }
}

void validate(const Lane& lane) {
    if (lane.vertices.size() < 2) {
        throw ValidationError("lane '" + lane.lane_id + "' has fewer than 2 vertices");
    }
    for (std::size_t i = 0; i < lane.vertices.size(); ++i) {
        try {
            validate(lane.vertices[i]);
        } catch (const ValidationError&) {
            throw ValidationError("lane '" + lane.lane_id + "' vertex " + std::to_string(i) +
                                  " is not a valid WGS84 coordinate");
        }
        if (i > 0 && lane.vertices[i] == lane.vertices[i - 1]) {
            throw ValidationError("lane '" + lane.lane_id + "' repeats vertex " + std::to_string(i));
        }
    }
}

void validate(const LaneMap& map) {
    std::unordered_set<std::string> seen;
    for (const Lane& lane : map.lanes) {
        validate(lane);
        if (!seen.insert(lane.lane_id).second) {
            throw ValidationError("duplicate lane_id '" + lane.lane_id + "' in region '" + map.region + "'");
        }
    }
}

PixelPoint geo_to_pixel(const GeoTransform& t, GeoPoint g) {
    if (!t.invertible()) {
        throw ValidationError("geo transform is not invertible");
    }
    const double det = t.determinant();
    const double u = g.lon - t.c;
    const double v = g.lat - t.f;
    return {(t.e * u - t.b * v) / det, (t.a * v - t.d * u) / det};
}

GeoPoint pixel_to_geo(const GeoTransform& t, PixelPoint p) {
    return {t.a * p.x + t.b * p.y + t.c, t.d * p.x + t.e * p.y + t.f};
}

double haversine_m(GeoPoint a, GeoPoint b) {
    constexpr double deg = std::numbers::pi / 180.0;
    const double dlat = (b.lat - a.lat) * deg;
    const double dlon = (b.lon - a.lon) * deg;
    const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                     std::cos(a.lat * deg) * std::cos(b.lat * deg) * std::sin(dlon / 2) * std::sin(dlon / 2);
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(s)));
}

double lane_length_m(const Lane& lane) {
    double total = 0.0;
    for (std::size_t i = 1; i < lane.vertices.size(); ++i) {
        total += haversine_m(lane.vertices[i - 1], lane.vertices[i]);
    }
    return total;
}

MapStats map_stats(const LaneMap& map) {
    MapStats s;
    s.lane_count = map.lanes.size();
    for (const Lane& lane : map.lanes) {
        s.vertex_count += lane.vertices.size();
        s.total_length_km += lane_length_m(lane) / 1000.0;
    }
    return s;
}

namespace {

enum Outcode : unsigned { kInside = 0, kLeft = 1, kRight = 2, kTop = 4, kBottom = 8 };

unsigned outcode(PixelPoint p, double w, double h) {
    unsigned code = kInside;
    if (p.x < 0.0) code |= kLeft;
    else if (p.x > w) code |= kRight;
    if (p.y < 0.0) code |= kTop;
    else if (p.y > h) code |= kBottom;
    return code;
}

// Cohen-Sutherland; border hits are placed exactly on the border line.
std::optional<std::pair<PixelPoint, PixelPoint>> clip_segment(PixelPoint p0, PixelPoint p1, double w, double h) {
    unsigned c0 = outcode(p0, w, h);
    unsigned c1 = outcode(p1, w, h);
    while (true) {
        if ((c0 | c1) == 0) {
            return std::make_pair(p0, p1);
        }
        if ((c0 & c1) != 0) {
            return std::nullopt;
        }
        const unsigned out = c0 != 0 ? c0 : c1;
        PixelPoint q;
        const double dx = p1.x - p0.x;
        const double dy = p1.y - p0.y;
        if (out & kBottom) {
            q = {p0.x + dx * (h - p0.y) / dy, h};
        } else if (out & kTop) {
            q = {p0.x + dx * (0.0 - p0.y) / dy, 0.0};
        } else if (out & kRight) {
            q = {w, p0.y + dy * (w - p0.x) / dx};
        } else {
            q = {0.0, p0.y + dy * (0.0 - p0.x) / dx};
        }
        if (out == c0) {
            p0 = q;
            c0 = outcode(p0, w, h);
        } else {
            p1 = q;
            c1 = outcode(p1, w, h);
        }
    }
}

}  // namespace

std::vector<Polyline> clip_polyline(const Polyline& poly, double w, double h) {
    std::vector<Polyline> pieces;
    Polyline current;
    bool connected = false;  // last clipped segment ended at its original endpoint
    for (std::size_t i = 1; i < poly.size(); ++i) {
        const auto clipped = clip_segment(poly[i - 1], poly[i], w, h);
        if (!clipped || clipped->first == clipped->second) {
            connected = false;
            continue;
        }
        const auto [a, b] = *clipped;
        if (!(connected && !current.empty() && current.back() == a)) {
            if (current.size() >= 2) {
                pieces.push_back(std::move(current));
            }
            current = {a};
        }
        current.push_back(b);
        connected = b == poly[i];
    }
    if (current.size() >= 2) {
        pieces.push_back(std::move(current));
    }
    return pieces;
}

std::vector<Polyline> project_lane(const GeoTransform& t, const Lane& lane, double w, double h) {
    Polyline pixels;
    pixels.reserve(lane.vertices.size());
    for (const GeoPoint& g : lane.vertices) {
        pixels.push_back(geo_to_pixel(t, g));
    }
    return clip_polyline(pixels, w, h);
}

}  // namespace lanemap
