#include "lanemap/polyline_builder.hpp"

#include <algorithm>
#include <optional>

#include "lanemap/error.hpp"

namespace lanemap {

std::vector<DirectedEdge> link(std::span<const MatchDecision> decisions, std::span<const CandidateSet> candidates) {
    if (decisions.size() != candidates.size()) {
        throw ValidationError("link: decisions and candidate sets differ in length");
    }
    std::vector<DirectedEdge> edges;
    for (std::size_t v = 0; v < decisions.size(); ++v) {
        const MatchDecision& d = decisions[v];
        if (d.class_probs.empty()) {
            continue;
        }
        const std::size_t best = d.best_class();
        const CandidateSet& cands = candidates[v];
        if (best < cands.neighbors.size()) {
            edges.push_back({cands.anchor, cands.neighbors[best].index, d.class_probs[best]});
        }
    }
    return edges;
}

std::vector<DirectedEdge> resolve_conflicts(std::span<const DirectedEdge> edges) {
    std::vector<bool> keep(edges.size(), true);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        for (std::size_t j = 0; j < edges.size(); ++j) {
            if (i == j || edges[i].to != edges[j].to) continue;
            const DirectedEdge& a = edges[i];
            const DirectedEdge& b = edges[j];
            const bool b_wins = b.confidence > a.confidence || (b.confidence == a.confidence && b.from < a.from) ||
                                (b.confidence == a.confidence && b.from == a.from && j < i);
            if (b_wins) {
                keep[i] = false;
                break;
            }
        }
    }
    std::vector<DirectedEdge> out;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (keep[i]) out.push_back(edges[i]);
    }
    return out;
}

namespace {

std::size_t vertex_bound(std::span<const DirectedEdge> edges) {
    std::size_t n = 0;
    for (const DirectedEdge& e : edges) {
        n = std::max({n, e.from + 1, e.to + 1});
    }
    return n;
}

// out_edge[v] = index of the edge leaving v; throws on degree > 1.
std::vector<std::optional<std::size_t>> out_edges(std::size_t n, std::span<const DirectedEdge> edges,
                                                  std::vector<int>* in_degree) {
    std::vector<std::optional<std::size_t>> out(n);
    std::vector<int> indeg(n, 0);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const DirectedEdge& e = edges[i];
        if (e.from == e.to) {
            throw ValidationError("self loop at vertex " + std::to_string(e.from));
        }
        if (e.from >= n || e.to >= n) {
            throw ValidationError("edge references a missing vertex");
        }
        if (out[e.from]) {
            throw ValidationError("vertex " + std::to_string(e.from) + " has out-degree > 1");
        }
        out[e.from] = i;
        if (++indeg[e.to] > 1) {
            throw ValidationError("vertex " + std::to_string(e.to) + " has in-degree > 1");
        }
    }
    if (in_degree != nullptr) {
        *in_degree = std::move(indeg);
    }
    return out;
}

}  // namespace

std::vector<DirectedEdge> break_cycles(std::span<const DirectedEdge> edges) {
    const std::size_t n = vertex_bound(edges);
    const auto out = out_edges(n, edges, nullptr);
    std::vector<bool> removed(edges.size(), false);
    // 0 = unvisited, 1 = on the current walk, 2 = done
    std::vector<int> state(n, 0);
    for (std::size_t start = 0; start < n; ++start) {
        if (state[start] != 0) continue;
        std::vector<std::size_t> walk;
        std::optional<std::size_t> cycle_entry;
        std::size_t v = start;
        while (true) {
            state[v] = 1;
            walk.push_back(v);
            if (!out[v]) break;
            const std::size_t next = edges[*out[v]].to;
            if (state[next] == 1) {
                cycle_entry = next;
                break;
            }
            if (state[next] == 2) break;
            v = next;
        }
        if (cycle_entry) {
            std::optional<std::size_t> weakest;
            for (auto it = std::find(walk.begin(), walk.end(), *cycle_entry); it != walk.end(); ++it) {
                const std::size_t ei = *out[*it];
                if (!weakest) {
                    weakest = ei;
                    continue;
                }
                const DirectedEdge& a = edges[ei];
                const DirectedEdge& b = edges[*weakest];
                if (a.confidence < b.confidence || (a.confidence == b.confidence && a.from < b.from)) {
                    weakest = ei;
                }
            }
            removed[*weakest] = true;
        }
        for (std::size_t w : walk) {
            state[w] = 2;
        }
    }
    std::vector<DirectedEdge> kept;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (!removed[i]) kept.push_back(edges[i]);
    }
    return kept;
}

std::vector<DirectedEdge> clean_edges(std::span<const DirectedEdge> edges) {
    const auto resolved = resolve_conflicts(edges);
    return break_cycles(resolved);
}

std::vector<std::vector<std::size_t>> extract_chains(std::size_t vertex_count, std::span<const DirectedEdge> edges) {
    const std::size_t n = vertex_count;
    std::vector<int> indeg;
    const auto out = out_edges(n, edges, &indeg);
    std::vector<std::vector<std::size_t>> chains;
    std::size_t covered = 0;
    for (std::size_t v = 0; v < n; ++v) {
        if (indeg[v] != 0 || !out[v]) continue;
        std::vector<std::size_t> chain{v};
        std::size_t cur = v;
        while (out[cur]) {
            cur = edges[*out[cur]].to;
            chain.push_back(cur);
        }
        covered += chain.size() - 1;
        chains.push_back(std::move(chain));
    }
    if (covered != edges.size()) {
        throw ValidationError("graph contains a cycle");
    }
    return chains;
}

std::vector<Polyline> extract_polylines(const VertexGraph& graph) {
    std::vector<Polyline> polylines;
    for (const auto& chain : extract_chains(graph.vertices.size(), graph.edges)) {
        Polyline poly;
        for (std::size_t v : chain) {
            if (v >= graph.vertices.size()) {
                throw ValidationError("edge references a missing vertex");
            }
            poly.push_back(graph.vertices[v]);
        }
        polylines.push_back(std::move(poly));
    }
    return polylines;
}

ImageAnnotation polylines_to_annotation(std::span<const Polyline> polylines, const std::string& image_id, int width,
                                        int height, const GeoTransform& transform) {
    ImageAnnotation ann;
    ann.image_id = image_id;
    ann.width = width;
    ann.height = height;
    ann.geo_transform = transform;
    for (const Polyline& poly : polylines) {
        LaneAnnotation lane;
        lane.lane_id = "pred_" + std::to_string(ann.lanes.size());
        lane.road_id = "pred";
        for (PixelPoint p : poly) {
            p.x = std::clamp(p.x, 0.0, static_cast<double>(width));
            p.y = std::clamp(p.y, 0.0, static_cast<double>(height));
            if (lane.vertices.empty() || !(lane.vertices.back() == p)) {
                lane.vertices.push_back(p);
            }
        }
        if (lane.vertices.size() >= 2) {
            ann.lanes.push_back(std::move(lane));
        }
    }
    return ann;
}

}  // namespace lanemap
