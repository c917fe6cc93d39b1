#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lanemap/dataset_io.hpp"
#include "lanemap/matcher.hpp"

namespace lanemap {

struct DirectedEdge {
    std::size_t from = 0;
    std::size_t to = 0;
    double confidence = 0.0;

    friend bool operator==(const DirectedEdge&, const DirectedEdge&) = default;
};

struct VertexGraph {
    std::vector<PixelPoint> vertices;
    std::vector<DirectedEdge> edges;
};

// One edge per vertex towards its most probable candidate, unless the
// terminal class (or a padded slot) wins. Ties go to the earlier class.
std::vector<DirectedEdge> link(std::span<const MatchDecision> decisions, std::span<const CandidateSet> candidates);

// Keeps, per head vertex, the most confident edge (tie: smaller from-index).
std::vector<DirectedEdge> resolve_conflicts(std::span<const DirectedEdge> edges);

// Requires in/out-degree <= 1. Each cycle loses its least confident edge
// (tie: smallest from-index).
std::vector<DirectedEdge> break_cycles(std::span<const DirectedEdge> edges);

// Vertex-index chains from every in-degree-0 vertex with an outgoing edge,
// ordered by start index. Isolated vertices are dropped. Throws
// ValidationError when the graph has a vertex of degree > 1, a cycle or an
// edge past vertex_count.
std::vector<std::vector<std::size_t>> extract_chains(std::size_t vertex_count, std::span<const DirectedEdge> edges);
std::vector<Polyline> extract_polylines(const VertexGraph& graph);

// resolve_conflicts, then break_cycles.
std::vector<DirectedEdge> clean_edges(std::span<const DirectedEdge> edges);

// Predicted polylines as an annotation (single/white/solid, road_id "pred").
// Vertices are clamped to the image and consecutive duplicates dropped.
ImageAnnotation polylines_to_annotation(std::span<const Polyline> polylines, const std::string& image_id, int width,
                                        int height, const GeoTransform& transform = {});

}  // namespace lanemap
