#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lanemap/geometry.hpp"
#include "lanemap/tensor.hpp"

namespace lanemap {

struct MatchConfig {
    int k = 20;
    int crop_size = 64;       // S, in feature cells
    int c_feat = 4;
    int feature_stride = 4;   // image pixels per feature cell
    bool use_terminal_class = true;
    bool exclude_visited = true;
    double lambda1 = 0.1;
    double lambda2 = 0.01;

    void validate() const;
    int patch_channels() const { return c_feat + k + 2; }
    int num_classes() const { return k + (use_terminal_class ? 1 : 0); }
};

struct Neighbor {
    std::size_t index = 0;
    double distance = 0.0;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

// The K nearest other vertices of an anchor. When fewer than K exist the
// remaining slots are padding.
struct CandidateSet {
    std::size_t anchor = 0;
    std::vector<Neighbor> neighbors;
    std::size_t padding = 0;

    std::size_t k() const { return neighbors.size() + padding; }
    friend bool operator==(const CandidateSet&, const CandidateSet&) = default;
};

// Ties in distance are broken by (y, x), then by vertex index. Vertices
// flagged in `excluded` are never candidates.
CandidateSet topk_neighbors(std::span<const PixelPoint> vertices, std::size_t anchor, int k,
                            std::span<const bool> excluded = {});

// Position of `target` in the full neighbor order of `anchor` (0 = nearest).
std::size_t neighbor_rank(std::span<const PixelPoint> vertices, std::size_t anchor, std::size_t target);

// One Gaussian vertex map per vertex at feature resolution. Either backed by
// an explicit tensor (channel v = vertex v) or evaluated on demand from the
// vertex positions with the heatmap encoding rule, cut to zero beyond
// kVertexMapRadius sigmas.
inline constexpr double kVertexMapRadius = 3.0;

class VertexMaps {
public:
    static VertexMaps gaussian(std::span<const PixelPoint> vertices, int height, int width, int stride,
                               double sigma);
    static VertexMaps from_tensor(Tensor maps);

    std::size_t size() const { return centers_.size(); }
    int height() const { return height_; }
    int width() const { return width_; }
    float at(std::size_t v, int y, int x) const;
    // Peak cell of vertex v as (x, y).
    std::pair<int, int> center(std::size_t v) const { return centers_[v]; }

    Tensor to_tensor() const;

private:
    int height_ = 0;
    int width_ = 0;
    double sigma_ = 1.0;
    std::vector<std::pair<int, int>> centers_;
    std::optional<Tensor> maps_;
};

// S x S crop of [seg (1)] ++ [anchor map (1)] ++ [K neighbor maps] ++ [features]
// centered on the anchor's cell, zero outside the image and for padded
// neighbor slots.
struct AggregatedPatch {
    Tensor grid;
    int origin_x = 0;  // feature cell of crop column 0
    int origin_y = 0;
};

AggregatedPatch aggregate_patch(const Tensor& seg, const Tensor& features, const VertexMaps& vertex_maps,
                                const CandidateSet& candidates, const MatchConfig& cfg);

// Full-frame channel concatenation in patch channel order; aggregate_patch
// is a crop of this.
Tensor concat_channels(const Tensor& seg, const Tensor& features, const VertexMaps& vertex_maps,
                       const CandidateSet& candidates, const MatchConfig& cfg);

// Class k < K selects candidate k; class K (when enabled) is terminal.
struct MatchDecision {
    std::vector<double> class_probs;
    PixelPoint location;

    std::size_t best_class() const;
};

struct MatchContext {
    const AggregatedPatch& patch;
    const CandidateSet& candidates;
    std::span<const PixelPoint> vertices;  // decoded positions, image pixels
    std::optional<PixelPoint> incoming;    // unit direction into the anchor
    const MatchConfig& cfg;
};

class Scorer {
public:
    virtual ~Scorer() = default;
    virtual MatchDecision score(const MatchContext& ctx) const = 0;
    virtual std::string name() const = 0;
};

// Answers from ground truth; isolates pipeline correctness from model quality.
class OracleScorer : public Scorer {
public:
    OracleScorer(std::vector<std::optional<std::size_t>> next, std::vector<PixelPoint> locations);

    MatchDecision score(const MatchContext& ctx) const override;
    std::string name() const override { return "oracle"; }

private:
    std::vector<std::optional<std::size_t>> next_;
    std::vector<PixelPoint> locations_;
};

struct GeometricWeights {
    double evidence = 1.0;
    double turn = 0.5;
    double distance = 0.5;
    double terminal_bias = 0.2;
};

// Non-learned baseline: segmentation evidence along the anchor->candidate
// segment, turn cosine against the incoming direction, and a distance penalty.
class GeometricScorer : public Scorer {
public:
    explicit GeometricScorer(GeometricWeights w = {}) : w_(w) {}

    MatchDecision score(const MatchContext& ctx) const override;
    std::string name() const override { return "geometric"; }

    // Mean segmentation value sampled along anchor->target inside the patch.
    static double segment_evidence(const MatchContext& ctx, PixelPoint target);

private:
    GeometricWeights w_;
};

// Masks padding slots with -inf, appends the terminal logit when enabled,
// and normalizes.
std::vector<double> candidate_softmax(std::span<const double> candidate_logits, std::size_t valid,
                                      std::optional<double> terminal_logit);

}  // namespace lanemap
