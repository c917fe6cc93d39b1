#pragma once

#include <span>
#include <vector>

#include "lanemap/geometry.hpp"
#include "lanemap/tensor.hpp"

namespace lanemap {

enum class HeatmapMode {
    PerVertexChannel,  // one channel per vertex, C = c_vert
    SharedChannel,     // all vertices max-merged on one channel
};

struct HeatmapConfig {
    int stride = 4;
    double sigma = 2.0;  // in heatmap cells
    HeatmapMode mode = HeatmapMode::PerVertexChannel;
    int c_vert = 256;
    double peak_threshold = 0.3;

    void validate() const;
};

struct VertexHeatmaps {
    Tensor grid;  // ceil(H/R) x ceil(W/R) x C, values in [0,1]
    int stride = 4;
};

// Sub-stride position of each vertex at its peak cell: p/R - floor(p/R).
struct OffsetMap {
    Tensor grid;  // ceil(H/R) x ceil(W/R) x 2, channel 0 = x, 1 = y
};

struct EncodedVertices {
    VertexHeatmaps heatmaps;
    OffsetMap offsets;
};

// Heatmap cell of a pixel coordinate. Vertices on the far image border are
// pulled into the last cell.
int heatmap_cell(double coord, int stride, int cells);

// Gaussian splat of every vertex at stride R, overlaps merged by maximum.
EncodedVertices encode_vertices(std::span<const PixelPoint> vertices, const HeatmapConfig& cfg, int width,
                                int height);

struct Peak {
    PixelPoint point;
    float confidence = 0.0f;
    int channel = 0;
};

// Per-vertex mode: at most one peak per channel (its argmax), in channel order.
// Shared mode: strict 3x3 local maxima in row-major order; among equal values
// the smaller (y, x) cell wins.
std::vector<Peak> decode_peaks(const VertexHeatmaps& hm, const OffsetMap* offsets, const HeatmapConfig& cfg);

}  // namespace lanemap
