#include "lanemap/heatmap_codec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lanemap/error.hpp"

namespace lanemap {

void HeatmapConfig::validate() const {
    if (stride < 1) throw ValidationError("heatmap stride must be >= 1");
    if (!(sigma > 0.0)) throw ValidationError("heatmap sigma must be > 0");
    if (c_vert < 1) throw ValidationError("c_vert must be >= 1");
    if (!(peak_threshold >= 0.0 && peak_threshold <= 1.0)) {
        throw ValidationError("peak_threshold must lie in [0,1]");
    }
}

int heatmap_cell(double coord, int stride, int cells) {
    const int cell = static_cast<int>(std::floor(coord / stride));
    return std::clamp(cell, 0, cells - 1);
}

EncodedVertices encode_vertices(std::span<const PixelPoint> vertices, const HeatmapConfig& cfg, int width,
                                int height) {
    cfg.validate();
    if (width <= 0 || height <= 0) {
        throw ValidationError("image dimensions must be positive");
    }
    const bool per_vertex = cfg.mode == HeatmapMode::PerVertexChannel;
    if (per_vertex && vertices.size() > static_cast<std::size_t>(cfg.c_vert)) {
        throw ValidationError(std::to_string(vertices.size()) + " vertices exceed c_vert = " +
                              std::to_string(cfg.c_vert));
    }
    const int R = cfg.stride;
    const int hh = (height + R - 1) / R;
    const int hw = (width + R - 1) / R;
    EncodedVertices out{{Tensor(hh, hw, per_vertex ? cfg.c_vert : 1), R}, {Tensor(hh, hw, 2)}};
    Tensor& grid = out.heatmaps.grid;
    Tensor& off = out.offsets.grid;

    // Offsets of vertices sharing a cell: the smaller (y, x) vertex wins, which
    // keeps the encoding independent of input order.
    Tensor owner(hh, hw, 2, std::numeric_limits<float>::infinity());

    const double denom = 2.0 * cfg.sigma * cfg.sigma;
    constexpr float kBelowOne = 1.0f - std::numeric_limits<float>::epsilon() / 2;
    for (std::size_t v = 0; v < vertices.size(); ++v) {
        const PixelPoint p = vertices[v];
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0 || p.y < 0 || p.x > width || p.y > height) {
            throw ValidationError("vertex " + std::to_string(v) + " lies outside the image");
        }
        const int cx = heatmap_cell(p.x, R, hw);
        const int cy = heatmap_cell(p.y, R, hh);
        const int c = per_vertex ? static_cast<int>(v) : 0;
        for (int y = 0; y < hh; ++y) {
            const double dy2 = static_cast<double>(y - cy) * (y - cy);
            for (int x = 0; x < hw; ++x) {
                const double d2 = dy2 + static_cast<double>(x - cx) * (x - cx);
                const auto g = static_cast<float>(std::exp(-d2 / denom));
                float& cell = grid.at(y, x, c);
                cell = std::max(cell, g);
            }
        }
        const bool claim = p.y < owner.at(cy, cx, 1) || (p.y == owner.at(cy, cx, 1) && p.x < owner.at(cy, cx, 0));
        if (claim) {
            owner.at(cy, cx, 0) = static_cast<float>(p.x);
            owner.at(cy, cx, 1) = static_cast<float>(p.y);
            off.at(cy, cx, 0) = std::min(static_cast<float>(p.x / R - cx), kBelowOne);
            off.at(cy, cx, 1) = std::min(static_cast<float>(p.y / R - cy), kBelowOne);
        }
    }
    return out;
}

namespace {

PixelPoint cell_to_pixel(int x, int y, int R, const OffsetMap* offsets) {
    if (offsets != nullptr) {
        return {(x + static_cast<double>(offsets->grid.at(y, x, 0))) * R,
                (y + static_cast<double>(offsets->grid.at(y, x, 1))) * R};
    }
    return {(x + 0.5) * R, (y + 0.5) * R};
}

// Beats neighbor (ny, nx) under the strict-maximum-with-tie-break rule.
bool dominates(const Tensor& g, int y, int x, int ny, int nx, int c) {
    const float v = g.at(y, x, c);
    const float n = g.at(ny, nx, c);
    if (v != n) {
        return v > n;
    }
    return y < ny || (y == ny && x < nx);
}

}  // namespace

std::vector<Peak> decode_peaks(const VertexHeatmaps& hm, const OffsetMap* offsets, const HeatmapConfig& cfg) {
    const Tensor& g = hm.grid;
    if (offsets != nullptr && (offsets->grid.height() != g.height() || offsets->grid.width() != g.width() ||
                               offsets->grid.channels() != 2)) {
        throw ValidationError("offset map does not match heatmap dimensions");
    }
    const auto threshold = static_cast<float>(cfg.peak_threshold);
    std::vector<Peak> peaks;
    if (cfg.mode == HeatmapMode::PerVertexChannel) {
        for (int c = 0; c < g.channels(); ++c) {
            int by = -1, bx = -1;
            float best = -1.0f;
            for (int y = 0; y < g.height(); ++y) {
                for (int x = 0; x < g.width(); ++x) {
                    if (g.at(y, x, c) > best) {
                        best = g.at(y, x, c);
                        by = y;
                        bx = x;
                    }
                }
            }
            if (by >= 0 && best >= threshold && best > 0.0f) {
                peaks.push_back({cell_to_pixel(bx, by, hm.stride, offsets), best, c});
            }
        }
        return peaks;
    }
    for (int c = 0; c < g.channels(); ++c) {
        for (int y = 0; y < g.height(); ++y) {
            for (int x = 0; x < g.width(); ++x) {
                const float v = g.at(y, x, c);
                if (v < threshold || v <= 0.0f) {
                    continue;
                }
                bool is_peak = true;
                for (int dy = -1; dy <= 1 && is_peak; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if ((dy == 0 && dx == 0) || !g.contains(y + dy, x + dx)) {
                            continue;
                        }
                        if (!dominates(g, y, x, y + dy, x + dx, c)) {
                            is_peak = false;
                            break;
                        }
                    }
                }
                if (is_peak) {
                    peaks.push_back({cell_to_pixel(x, y, hm.stride, offsets), v, c});
                }
            }
        }
    }
    return peaks;
}

}  // namespace lanemap
