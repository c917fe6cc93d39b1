#pragma once

#include <cmath>
#include <vector>

namespace lanemap {

// Continuous image-frame coordinate: x rightward, y downward.
struct PixelPoint {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

using Polyline = std::vector<PixelPoint>;

inline double distance(PixelPoint a, PixelPoint b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

// Euclidean distance from p to the closed segment [a, b].
inline double point_segment_distance(PixelPoint p, PixelPoint a, PixelPoint b) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    if (len2 == 0.0) {
        return distance(p, a);
    }
    double t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
    t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
    return distance(p, {a.x + t * dx, a.y + t * dy});
}

// Minimum distance between two closed segments.
double segment_segment_distance(PixelPoint a0, PixelPoint a1, PixelPoint b0, PixelPoint b1);

// Minimum distance between two polylines (each with at least one vertex).
double polyline_distance(const Polyline& a, const Polyline& b);

double polyline_length(const Polyline& poly);

}  // namespace lanemap
