#include "lanemap/geometry.hpp"

#include <algorithm>
#include <limits>

namespace lanemap {

namespace {

double cross(PixelPoint o, PixelPoint a, PixelPoint b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool segments_intersect(PixelPoint a0, PixelPoint a1, PixelPoint b0, PixelPoint b1) {
    const double d1 = cross(b0, b1, a0);
    const double d2 = cross(b0, b1, a1);
    const double d3 = cross(a0, a1, b0);
    const double d4 = cross(a0, a1, b1);
    return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

}  // namespace

double segment_segment_distance(PixelPoint a0, PixelPoint a1, PixelPoint b0, PixelPoint b1) {
    if (segments_intersect(a0, a1, b0, b1)) {
        return 0.0;
    }
    return std::min({point_segment_distance(a0, b0, b1), point_segment_distance(a1, b0, b1),
                     point_segment_distance(b0, a0, a1), point_segment_distance(b1, a0, a1)});
}

double polyline_distance(const Polyline& a, const Polyline& b) {
    if (a.empty() || b.empty()) {
        return std::numeric_limits<double>::infinity();
    }
    double best = std::numeric_limits<double>::infinity();
    const std::size_t na = std::max<std::size_t>(a.size() - 1, 1);
    const std::size_t nb = std::max<std::size_t>(b.size() - 1, 1);
    for (std::size_t i = 0; i < na; ++i) {
        const PixelPoint a0 = a[i];
        const PixelPoint a1 = a.size() > 1 ? a[i + 1] : a[i];
        for (std::size_t j = 0; j < nb; ++j) {
            const PixelPoint b0 = b[j];
            const PixelPoint b1 = b.size() > 1 ? b[j + 1] : b[j];
            best = std::min(best, segment_segment_distance(a0, a1, b0, b1));
        }
    }
    return best;
}

double polyline_length(const Polyline& poly) {
    double total = 0.0;
    for (std::size_t i = 1; i < poly.size(); ++i) {
        total += distance(poly[i - 1], poly[i]);
    }
    return total;
}

}  // namespace lanemap
