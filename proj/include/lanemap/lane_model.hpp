#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "lanemap/geometry.hpp"

namespace lanemap {

// WGS84 degrees.
struct GeoPoint {
    double lon = 0.0;
    double lat = 0.0;

    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

// World-file style affine georeference of one image patch:
//   lon = a*x + b*y + c,  lat = d*x + e*y + f
struct GeoTransform {
    double a = 1.0, b = 0.0, c = 0.0;
    double d = 0.0, e = 1.0, f = 0.0;

    double determinant() const { return a * e - b * d; }
    bool invertible() const;

    friend bool operator==(const GeoTransform&, const GeoTransform&) = default;
};

enum class LineForm { Single, Double };
enum class LineColor { White, Yellow };
enum class Continuity { Solid, Dash };

struct LaneAttributes {
    LineForm line_form = LineForm::Single;
    LineColor color = LineColor::White;
    Continuity continuity = Continuity::Solid;

    friend bool operator==(const LaneAttributes&, const LaneAttributes&) = default;
};

std::string_view to_string(LineForm v);
std::string_view to_string(LineColor v);
std::string_view to_string(Continuity v);
LineForm parse_line_form(std::string_view s);
LineColor parse_line_color(std::string_view s);
Continuity parse_continuity(std::string_view s);

// A painted lane line; vertex order is the lane direction.
struct Lane {
    std::string lane_id;
    std::string road_id;
    LaneAttributes attributes;
    std::vector<GeoPoint> vertices;

    friend bool operator==(const Lane&, const Lane&) = default;
};

struct LaneMap {
    std::string region;
    std::vector<Lane> lanes;

    friend bool operator==(const LaneMap&, const LaneMap&) = default;
};

// Throw ValidationError naming the offending lane.
void validate(const GeoPoint& g);
void validate(const Lane& lane);
void validate(const LaneMap& map);

PixelPoint geo_to_pixel(const GeoTransform& t, GeoPoint g);
GeoPoint pixel_to_geo(const GeoTransform& t, PixelPoint p);

inline constexpr double kEarthRadiusM = 6371008.8;

double haversine_m(GeoPoint a, GeoPoint b);
double lane_length_m(const Lane& lane);

struct MapStats {
    std::size_t lane_count = 0;
    std::size_t vertex_count = 0;
    double total_length_km = 0.0;

    MapStats& operator+=(const MapStats& o) {
        lane_count += o.lane_count;
        vertex_count += o.vertex_count;
        total_length_km += o.total_length_km;
        return *this;
    }
};

MapStats map_stats(const LaneMap& map);

// Clip a pixel polyline to [0,w]x[0,h]. A polyline that leaves and re-enters
// the box comes back as several pieces; each piece keeps the input direction.
std::vector<Polyline> clip_polyline(const Polyline& poly, double w, double h);

std::vector<Polyline> project_lane(const GeoTransform& t, const Lane& lane, double w, double h);

}  // namespace lanemap
