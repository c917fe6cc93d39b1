#include "lanemap/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lanemap/error.hpp"
#include "lanemap/heatmap_codec.hpp"
#include "lanemap/losses.hpp"

namespace lanemap {

void MatchConfig::validate() const {
    if (k < 1) throw ValidationError("k must be >= 1");
    if (crop_size < 4 || crop_size % 2 != 0) throw ValidationError("crop_size must be even and >= 4");
    if (c_feat < 0) throw ValidationError("c_feat must be >= 0");
    if (feature_stride < 1) throw ValidationError("feature_stride must be >= 1");
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ValidationError("lambdas must be >= 0");
}

namespace {

auto neighbor_order(std::span<const PixelPoint> vertices) {
    return [vertices](const Neighbor& l, const Neighbor& r) {
        if (l.distance != r.distance) return l.distance < r.distance;
        const PixelPoint pl = vertices[l.index];
        const PixelPoint pr = vertices[r.index];
        if (pl.y != pr.y) return pl.y < pr.y;
        if (pl.x != pr.x) return pl.x < pr.x;
        return l.index < r.index;
    };
}

}  // namespace

std::size_t neighbor_rank(std::span<const PixelPoint> vertices, std::size_t anchor, std::size_t target) {
    if (anchor >= vertices.size() || target >= vertices.size() || target == anchor) {
        throw ValidationError("neighbor_rank: invalid anchor or target");
    }
    const auto closer = neighbor_order(vertices);
    const PixelPoint a = vertices[anchor];
    const Neighbor t{target, distance(a, vertices[target])};
    std::size_t rank = 0;
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        if (i != anchor && i != target && closer({i, distance(a, vertices[i])}, t)) ++rank;
    }
    return rank;
}

CandidateSet topk_neighbors(std::span<const PixelPoint> vertices, std::size_t anchor, int k,
                            std::span<const bool> excluded) {
    if (anchor >= vertices.size()) {
        throw ValidationError("anchor index out of range");
    }
    if (k < 1) {
        throw ValidationError("k must be >= 1");
    }
    const PixelPoint a = vertices[anchor];
    const auto closer = neighbor_order(vertices);
    std::vector<Neighbor> all;
    all.reserve(vertices.size());
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        if (i == anchor || (!excluded.empty() && excluded[i])) {
            continue;
        }
        all.push_back({i, distance(a, vertices[i])});
    }
    const std::size_t take = std::min(all.size(), static_cast<std::size_t>(k));
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(), closer);
    all.resize(take);
    return {anchor, std::move(all), static_cast<std::size_t>(k) - take};
}

VertexMaps VertexMaps::gaussian(std::span<const PixelPoint> vertices, int height, int width, int stride,
                                double sigma) {
    if (height <= 0 || width <= 0 || stride < 1 || !(sigma > 0.0)) {
        throw ValidationError("invalid vertex map geometry");
    }
    VertexMaps m;
    m.height_ = height;
    m.width_ = width;
    m.sigma_ = sigma;
    m.centers_.reserve(vertices.size());
    for (const PixelPoint& p : vertices) {
        m.centers_.emplace_back(heatmap_cell(p.x, stride, width), heatmap_cell(p.y, stride, height));
    }
    return m;
}

VertexMaps VertexMaps::from_tensor(Tensor maps) {
    VertexMaps m;
    m.height_ = maps.height();
    m.width_ = maps.width();
    for (int c = 0; c < maps.channels(); ++c) {
        int bx = 0, by = 0;
        float best = -1.0f;
        for (int y = 0; y < maps.height(); ++y) {
            for (int x = 0; x < maps.width(); ++x) {
                if (maps.at(y, x, c) > best) {
                    best = maps.at(y, x, c);
                    bx = x;
                    by = y;
                }
            }
        }
        m.centers_.emplace_back(bx, by);
    }
    m.maps_ = std::move(maps);
    return m;
}

float VertexMaps::at(std::size_t v, int y, int x) const {
    if (maps_) {
        return maps_->at(y, x, static_cast<int>(v));
    }
    const auto [cx, cy] = centers_[v];
    const double d2 = static_cast<double>(x - cx) * (x - cx) + static_cast<double>(y - cy) * (y - cy);
    if (d2 > kVertexMapRadius * kVertexMapRadius * sigma_ * sigma_) return 0.0f;
    return static_cast<float>(std::exp(-d2 / (2.0 * sigma_ * sigma_)));
}

Tensor VertexMaps::to_tensor() const {
    if (maps_) {
        return *maps_;
    }
    Tensor t(height_, width_, static_cast<int>(size()));
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            for (std::size_t v = 0; v < size(); ++v) {
                t.at(y, x, static_cast<int>(v)) = at(v, y, x);
            }
        }
    }
    return t;
}

namespace {

void check_inputs(const Tensor& seg, const Tensor& features, const VertexMaps& maps, const CandidateSet& cands,
                  const MatchConfig& cfg) {
    cfg.validate();
    if (seg.channels() != 1) {
        throw ValidationError("segmentation map must have one channel");
    }
    if (features.channels() != cfg.c_feat) {
        throw ValidationError("feature tensor has " + std::to_string(features.channels()) +
                              " channels, expected c_feat = " + std::to_string(cfg.c_feat));
    }
    if (features.height() != seg.height() || features.width() != seg.width() || maps.height() != seg.height() ||
        maps.width() != seg.width()) {
        throw ValidationError("segmentation, feature and vertex maps differ in spatial size");
    }
    if (cands.k() != static_cast<std::size_t>(cfg.k)) {
        throw ValidationError("candidate set size does not match k");
    }
    if (cands.anchor >= maps.size()) {
        throw ValidationError("anchor has no vertex map");
    }
    for (const Neighbor& n : cands.neighbors) {
        if (n.index >= maps.size()) {
            throw ValidationError("candidate has no vertex map");
        }
    }
}

// Writes every channel of frame cell (y, x) into dst[0..channels).
void fill_cell(float* dst, const Tensor& seg, const Tensor& features, const VertexMaps& maps,
               const CandidateSet& cands, int y, int x) {
    dst[0] = seg.at(y, x, 0);
    dst[1] = maps.at(cands.anchor, y, x);
    for (std::size_t k = 0; k < cands.neighbors.size(); ++k) {
        dst[2 + k] = maps.at(cands.neighbors[k].index, y, x);
    }
    float* feat = dst + 2 + cands.k();
    for (int c = 0; c < features.channels(); ++c) {
        feat[c] = features.at(y, x, c);
    }
}

}  // namespace

AggregatedPatch aggregate_patch(const Tensor& seg, const Tensor& features, const VertexMaps& vertex_maps,
                                const CandidateSet& candidates, const MatchConfig& cfg) {
    check_inputs(seg, features, vertex_maps, candidates, cfg);
    const int S = cfg.crop_size;
    const auto [cx, cy] = vertex_maps.center(candidates.anchor);
    AggregatedPatch patch{Tensor(S, S, cfg.patch_channels()), cx - S / 2, cy - S / 2};
    for (int py = 0; py < S; ++py) {
        const int y = patch.origin_y + py;
        if (y < 0 || y >= seg.height()) continue;
        for (int px = 0; px < S; ++px) {
            const int x = patch.origin_x + px;
            if (x < 0 || x >= seg.width()) continue;
            fill_cell(&patch.grid.at(py, px, 0), seg, features, vertex_maps, candidates, y, x);
        }
    }
    return patch;
}

Tensor concat_channels(const Tensor& seg, const Tensor& features, const VertexMaps& vertex_maps,
                       const CandidateSet& candidates, const MatchConfig& cfg) {
    check_inputs(seg, features, vertex_maps, candidates, cfg);
    Tensor out(seg.height(), seg.width(), cfg.patch_channels());
    for (int y = 0; y < seg.height(); ++y) {
        for (int x = 0; x < seg.width(); ++x) {
            fill_cell(&out.at(y, x, 0), seg, features, vertex_maps, candidates, y, x);
        }
    }
    return out;
}

std::size_t MatchDecision::best_class() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < class_probs.size(); ++i) {
        if (class_probs[i] > class_probs[best]) {
            best = i;
        }
    }
    return best;
}

std::vector<double> candidate_softmax(std::span<const double> candidate_logits, std::size_t valid,
                                      std::optional<double> terminal_logit) {
    std::vector<double> logits(candidate_logits.begin(), candidate_logits.end());
    for (std::size_t i = valid; i < logits.size(); ++i) {
        logits[i] = -std::numeric_limits<double>::infinity();
    }
    if (terminal_logit) {
        logits.push_back(*terminal_logit);
    }
    if (valid == 0 && !terminal_logit) {
        throw ValidationError("no candidates and the terminal class is disabled");
    }
    return softmax(logits);
}

OracleScorer::OracleScorer(std::vector<std::optional<std::size_t>> next, std::vector<PixelPoint> locations)
    : next_(std::move(next)), locations_(std::move(locations)) {
    if (next_.size() != locations_.size()) {
        throw ValidationError("oracle truth tables differ in length");
    }
}

MatchDecision OracleScorer::score(const MatchContext& ctx) const {
    const std::size_t anchor = ctx.candidates.anchor;
    if (anchor >= next_.size()) {
        throw ValidationError("oracle has no truth for vertex " + std::to_string(anchor));
    }
    const std::size_t K = ctx.candidates.k();
    MatchDecision d{std::vector<double>(K + (ctx.cfg.use_terminal_class ? 1 : 0), 0.0), locations_[anchor]};
    std::optional<std::size_t> slot;
    if (next_[anchor]) {
        for (std::size_t k = 0; k < ctx.candidates.neighbors.size(); ++k) {
            if (ctx.candidates.neighbors[k].index == *next_[anchor]) {
                slot = k;
                break;
            }
        }
    }
    if (slot) {
        d.class_probs[*slot] = 1.0;
    } else if (ctx.cfg.use_terminal_class) {
        d.class_probs[K] = 1.0;
    } else if (!ctx.candidates.neighbors.empty()) {
        d.class_probs[0] = 1.0;
    } else {
        throw ValidationError("no candidates and the terminal class is disabled");
    }
    return d;
}

double GeometricScorer::segment_evidence(const MatchContext& ctx, PixelPoint target) {
    const double fs = ctx.cfg.feature_stride;
    const PixelPoint anchor = ctx.vertices[ctx.candidates.anchor];
    const double ax = anchor.x / fs - ctx.patch.origin_x;
    const double ay = anchor.y / fs - ctx.patch.origin_y;
    const double bx = target.x / fs - ctx.patch.origin_x;
    const double by = target.y / fs - ctx.patch.origin_y;
    const double len = std::hypot(bx - ax, by - ay);
    const int n = std::max(2, static_cast<int>(std::ceil(2.0 * len)));
    const Tensor& g = ctx.patch.grid;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double t = (i + 0.5) / n;
        const int x = static_cast<int>(std::floor(ax + t * (bx - ax)));
        const int y = static_cast<int>(std::floor(ay + t * (by - ay)));
        if (g.contains(y, x)) {
            sum += g.at(y, x, 0);
        }
    }
    return sum / n;
}

MatchDecision GeometricScorer::score(const MatchContext& ctx) const {
    const PixelPoint anchor = ctx.vertices[ctx.candidates.anchor];
    const double fs = ctx.cfg.feature_stride;
    const double S = ctx.cfg.crop_size;
    std::vector<double> logits(ctx.candidates.k(), 0.0);
    for (std::size_t k = 0; k < ctx.candidates.neighbors.size(); ++k) {
        const Neighbor& nb = ctx.candidates.neighbors[k];
        const PixelPoint target = ctx.vertices[nb.index];
        double turn = 1.0;
        if (ctx.incoming && nb.distance > 0.0) {
            turn = (ctx.incoming->x * (target.x - anchor.x) + ctx.incoming->y * (target.y - anchor.y)) / nb.distance;
        }
        logits[k] = w_.evidence * segment_evidence(ctx, target) + w_.turn * turn -
                    w_.distance * (nb.distance / fs) / S;
    }
    std::optional<double> terminal;
    if (ctx.cfg.use_terminal_class) {
        terminal = w_.terminal_bias;
    }
    return {candidate_softmax(logits, ctx.candidates.neighbors.size(), terminal), anchor};
}

}  // namespace lanemap
