#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lanemap/evaluator.hpp"
#include "lanemap/heatmap_codec.hpp"
#include "lanemap/matcher.hpp"
#include "lanemap/polyline_builder.hpp"
#include "lanemap/synthgen.hpp"
#include "lanemap/tiny_scorer.hpp"

namespace lanemap {

struct PipelineConfig {
    HeatmapConfig heatmap;
    MatchConfig match;
    EvalConfig eval;
    SynthConfig synth;
    TrainConfig train;
    bool decode_offsets = false;

    void validate() const;
};

// Stage-one stand-in for one image: ground-truth vertices run through the
// heatmap codec, and the segmentation and feature rasters pooled to
// feature resolution.
struct StageOne {
    int image_width = 0;
    int image_height = 0;
    Tensor seg;
    Tensor features;
    std::vector<PixelPoint> vertices;  // decoded, image pixels
    std::vector<int> channels;         // heatmap channel of each decoded vertex
    VertexMaps maps;
};

StageOne run_stage_one(const SyntheticScene& scene, const PipelineConfig& cfg);

// Decoded vertices tied back to the annotation.
struct SceneTruth {
    std::vector<std::optional<std::size_t>> gt_of;  // decoded -> annotation vertex
    std::vector<std::optional<std::size_t>> next;   // decoded -> decoded successor
    std::vector<PixelPoint> location;               // decoded -> true position
};

SceneTruth associate_truth(const StageOne& stage, const SyntheticScene& scene, const PipelineConfig& cfg);

struct MatchOutput {
    std::vector<CandidateSet> candidates;
    std::vector<MatchDecision> decisions;
    double seconds = 0.0;
};

MatchOutput run_matching(const StageOne& stage, const Scorer& scorer, const MatchConfig& cfg);

// Training label: index of the true successor among the candidates; the
// terminal class when the vertex ends its lane or its successor is not a
// candidate.
std::size_t true_class(const CandidateSet& cands, const std::optional<std::size_t>& next, const MatchConfig& cfg);
// Evaluation labels, independent of K (see MatchTruth).
std::vector<MatchTruth> match_truths(const StageOne& stage, const MatchOutput& out, const SceneTruth& truth);

struct BuildOutput {
    std::vector<DirectedEdge> edges;  // after cleanup
    std::vector<std::vector<std::size_t>> chains;
    std::vector<Polyline> polylines;  // corrected vertex locations
};

BuildOutput build_polylines(const MatchOutput& match);

// Training examples over prepared scenes; patches are rebuilt on demand.
class SceneExampleSource : public ExampleSource {
public:
    SceneExampleSource(std::span<const SyntheticScene> scenes, const PipelineConfig& cfg);

    std::size_t size() const override { return items_.size(); }
    void fill(std::size_t index, TrainingExample& out) const override;

private:
    struct Prepared {
        StageOne stage;
        SceneTruth truth;
        std::vector<CandidateSet> candidates;
    };
    PipelineConfig cfg_;
    std::vector<Prepared> scenes_;
    std::vector<std::pair<std::size_t, std::size_t>> items_;  // (scene, anchor)
};

TinyScorer train_tiny_scorer(std::span<const SyntheticScene> scenes, const PipelineConfig& cfg,
                             std::vector<EpochLog>* log = nullptr);

struct E2EResult {
    EvalReport report;  // per-threshold precision/recall averaged over images
    std::size_t scenes = 0;
    std::size_t exact_scenes = 0;  // extracted chains equal the annotation's
    MatcherReport matcher;
};

// Full flow per scene: stage one, matching with `scorer` (an OracleScorer
// built from the scene truth when null), polyline building, evaluation.
E2EResult run_e2e(std::span<const SyntheticScene> scenes, const PipelineConfig& cfg, const Scorer* scorer,
                  int threads = 1);

struct AblationRow {
    int k = 0;
    MatcherReport report;
    double oracle_coverage = 0.0;
};

using ScorerProvider = std::function<std::unique_ptr<Scorer>(const PipelineConfig& cfg)>;

// Matching stage per K with a scorer from `provider` (given cfg with match.k
// set); oracle coverage is the share of true successors inside the top-K.
// Each scene's matching time is the fastest of `timing_runs` runs; the runs
// interleave all K values.
std::vector<AblationRow> ablate_k(std::span<const SyntheticScene> scenes, const PipelineConfig& cfg,
                                  std::span<const int> k_values, const ScorerProvider& provider, int timing_runs = 5);

// K | F1-Score_class | MSE_position | Runtime_class | coverage
std::string format_ablation_table(std::span<const AblationRow> rows);

// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

// LANEMAP_THREADS, else the number of logical cores.
int default_thread_count();

}  // namespace lanemap
