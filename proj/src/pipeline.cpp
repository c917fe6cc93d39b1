#include "lanemap/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include "lanemap/error.hpp"

namespace lanemap {

void PipelineConfig::validate() const {
    heatmap.validate();
    match.validate();
    eval.validate();
    synth.validate();
    if (train.epochs < 0 || train.batch_size < 1 || !(train.lr > 0.0)) {
        throw ValidationError("invalid training configuration");
    }
}

namespace {

Tensor mask_tensor(const LaneMask& mask) {
    Tensor t(mask.height, mask.width, 1);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            t.at(y, x, 0) = mask.at(x, y);
        }
    }
    return t;
}

}  // namespace

StageOne run_stage_one(const SyntheticScene& scene, const PipelineConfig& cfg) {
    const ImageAnnotation& ann = scene.annotation;
    if (scene.features.channels() != cfg.match.c_feat) {
        throw ValidationError("scene features have " + std::to_string(scene.features.channels()) +
                              " channels but c_feat = " + std::to_string(cfg.match.c_feat));
    }
    StageOne stage;
    stage.image_width = ann.width;
    stage.image_height = ann.height;
    const EncodedVertices enc = encode_vertices(scene.vertices, cfg.heatmap, ann.width, ann.height);
    for (const Peak& p : decode_peaks(enc.heatmaps, cfg.decode_offsets ? &enc.offsets : nullptr, cfg.heatmap)) {
        stage.vertices.push_back(p.point);
        stage.channels.push_back(p.channel);
    }
    const int fs = cfg.match.feature_stride;
    stage.seg = downsample_mean(mask_tensor(scene.seg_mask), fs);
    stage.features = downsample_mean(scene.features, fs);
    stage.maps = VertexMaps::gaussian(stage.vertices, stage.seg.height(), stage.seg.width(), fs, cfg.heatmap.sigma);
    return stage;
}

SceneTruth associate_truth(const StageOne& stage, const SyntheticScene& scene, const PipelineConfig& cfg) {
    const std::size_t n = stage.vertices.size();
    SceneTruth truth;
    truth.gt_of.assign(n, std::nullopt);
    if (cfg.heatmap.mode == HeatmapMode::PerVertexChannel) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(stage.channels[i]);
            if (c < scene.vertices.size()) truth.gt_of[i] = c;
        }
    } else {
        // Greedy nearest pairing within the no-offset quantization radius.
        const double radius = cfg.heatmap.stride * std::sqrt(2.0) / 2.0 + 1e-6;
        std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < scene.vertices.size(); ++j) {
                const double d = distance(stage.vertices[i], scene.vertices[j]);
                if (d <= radius) pairs.emplace_back(d, i, j);
            }
        }
        std::sort(pairs.begin(), pairs.end());
        std::vector<bool> used(scene.vertices.size(), false);
        for (const auto& [d, i, j] : pairs) {
            if (!truth.gt_of[i] && !used[j]) {
                truth.gt_of[i] = j;
                used[j] = true;
            }
        }
    }
    std::vector<std::optional<std::size_t>> decoded_of(scene.vertices.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (truth.gt_of[i]) decoded_of[*truth.gt_of[i]] = i;
    }
    truth.next.assign(n, std::nullopt);
    truth.location.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        truth.location[i] = stage.vertices[i];
        if (!truth.gt_of[i]) continue;
        const std::size_t g = *truth.gt_of[i];
        truth.location[i] = scene.vertices[g];
        if (scene.next[g]) truth.next[i] = decoded_of[*scene.next[g]];
    }
    return truth;
}

MatchOutput run_matching(const StageOne& stage, const Scorer& scorer, const MatchConfig& cfg) {
    cfg.validate();
    MatchOutput out;
    const auto start = std::chrono::steady_clock::now();
    // One-shot matching has no visited set, so exclude_visited never removes candidates here.
    for (std::size_t v = 0; v < stage.vertices.size(); ++v) {
        out.candidates.push_back(topk_neighbors(stage.vertices, v, cfg.k));
        const AggregatedPatch patch = aggregate_patch(stage.seg, stage.features, stage.maps, out.candidates.back(), cfg);
        const MatchContext ctx{patch, out.candidates.back(), stage.vertices, std::nullopt, cfg};
        out.decisions.push_back(scorer.score(ctx));
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

std::size_t true_class(const CandidateSet& cands, const std::optional<std::size_t>& next, const MatchConfig& cfg) {
    if (next) {
        for (std::size_t k = 0; k < cands.neighbors.size(); ++k) {
            if (cands.neighbors[k].index == *next) return k;
        }
    }
    return static_cast<std::size_t>(cfg.k);
}

std::vector<MatchTruth> match_truths(const StageOne& stage, const MatchOutput& out, const SceneTruth& truth) {
    std::vector<MatchTruth> truths;
    for (std::size_t v = 0; v < out.candidates.size(); ++v) {
        std::size_t label = kTerminalLabel;
        if (truth.next[v]) {
            label = neighbor_rank(stage.vertices, v, *truth.next[v]);
        }
        truths.push_back({label, truth.location[v]});
    }
    return truths;
}

BuildOutput build_polylines(const MatchOutput& match) {
    BuildOutput out;
    out.edges = clean_edges(link(match.decisions, match.candidates));
    out.chains = extract_chains(match.decisions.size(), out.edges);
    for (const auto& chain : out.chains) {
        Polyline poly;
        for (std::size_t v : chain) poly.push_back(match.decisions[v].location);
        out.polylines.push_back(std::move(poly));
    }
    return out;
}

SceneExampleSource::SceneExampleSource(std::span<const SyntheticScene> scenes, const PipelineConfig& cfg)
    : cfg_(cfg) {
    cfg_.validate();
    scenes_.resize(scenes.size());
    for (std::size_t s = 0; s < scenes.size(); ++s) {
        Prepared& p = scenes_[s];
        p.stage = run_stage_one(scenes[s], cfg_);
        p.truth = associate_truth(p.stage, scenes[s], cfg_);
        for (std::size_t v = 0; v < p.stage.vertices.size(); ++v) {
            p.candidates.push_back(topk_neighbors(p.stage.vertices, v, cfg_.match.k));
            items_.emplace_back(s, v);
        }
    }
}

void SceneExampleSource::fill(std::size_t index, TrainingExample& out) const {
    const auto [s, v] = items_.at(index);
    const Prepared& p = scenes_[s];
    const CandidateSet& cands = p.candidates[v];
    const AggregatedPatch patch = aggregate_patch(p.stage.seg, p.stage.features, p.stage.maps, cands, cfg_.match);
    out.input.assign(patch.grid.data().begin(), patch.grid.data().end());
    out.valid_candidates = cands.neighbors.size();
    out.true_class = true_class(cands, p.truth.next[v], cfg_.match);
    if (!cfg_.match.use_terminal_class && out.true_class == static_cast<std::size_t>(cfg_.match.k)) {
        out.true_class = 0;  // no stop class: nearest candidate is the fallback label
    }
    const double extent = static_cast<double>(cfg_.match.crop_size) * cfg_.match.feature_stride;
    const PixelPoint anchor = p.stage.vertices[v];
    out.location_target = {static_cast<float>((p.truth.location[v].x - anchor.x) / extent),
                           static_cast<float>((p.truth.location[v].y - anchor.y) / extent)};
}

TinyScorer train_tiny_scorer(std::span<const SyntheticScene> scenes, const PipelineConfig& cfg,
                             std::vector<EpochLog>* log) {
    const SceneExampleSource source(scenes, cfg);
    TrainConfig tc = cfg.train;
    tc.lambda1 = cfg.match.lambda1;
    tc.lambda2 = cfg.match.lambda2;
    return tiny_scorer_train(source, ScorerShape::from(cfg.match), tc, log);
}

namespace {

std::vector<std::vector<std::size_t>> canonical(std::vector<std::vector<std::size_t>> chains) {
    std::sort(chains.begin(), chains.end());
    return chains;
}

}  // namespace

E2EResult run_e2e(std::span<const SyntheticScene> scenes, const PipelineConfig& cfg, const Scorer* scorer,
                  int threads) {
    cfg.validate();
    struct PerScene {
        EvalReport report;
        bool exact = false;
        std::vector<MatchDecision> decisions;
        std::vector<MatchTruth> truths;
        double seconds = 0.0;
    };
    std::vector<PerScene> results(scenes.size());
    parallel_for(scenes.size(), threads, [&](std::size_t s) {
        const SyntheticScene& scene = scenes[s];
        const StageOne stage = run_stage_one(scene, cfg);
        const SceneTruth truth = associate_truth(stage, scene, cfg);
        std::unique_ptr<Scorer> oracle;
        if (scorer == nullptr) {
            oracle = std::make_unique<OracleScorer>(truth.next, truth.location);
        }
        const Scorer& active = scorer != nullptr ? *scorer : *oracle;
        MatchOutput match = run_matching(stage, active, cfg.match);
        const BuildOutput built = build_polylines(match);

        std::vector<Polyline> gt;
        for (const LaneAnnotation& lane : scene.annotation.lanes) gt.push_back(lane.vertices);
        PerScene& r = results[s];
        r.report = evaluate(built.polylines, gt, cfg.eval);

        std::vector<std::vector<std::size_t>> mapped;
        bool complete = true;
        for (const auto& chain : built.chains) {
            std::vector<std::size_t> m;
            for (std::size_t v : chain) {
                if (!truth.gt_of[v]) complete = false;
                else m.push_back(*truth.gt_of[v]);
            }
            mapped.push_back(std::move(m));
        }
        r.exact = complete && canonical(mapped) == canonical(scene.chains());
        r.truths = match_truths(stage, match, truth);
        r.decisions = std::move(match.decisions);
        r.seconds = match.seconds;
    });

    E2EResult out;
    out.scenes = scenes.size();
    std::vector<MatchDecision> decisions;
    std::vector<MatchTruth> truths;
    std::vector<double> times;
    for (const double t : cfg.eval.thresholds) {
        out.report.scores.push_back({t, 0.0, 0.0, 0.0});
    }
    for (PerScene& r : results) {
        for (std::size_t t = 0; t < r.report.scores.size(); ++t) {
            out.report.scores[t].precision += r.report.scores[t].precision;
            out.report.scores[t].recall += r.report.scores[t].recall;
        }
        out.exact_scenes += r.exact ? 1 : 0;
        decisions.insert(decisions.end(), r.decisions.begin(), r.decisions.end());
        truths.insert(truths.end(), r.truths.begin(), r.truths.end());
        times.push_back(r.seconds);
    }
    for (ThresholdScore& s : out.report.scores) {
        if (!results.empty()) {
            s.precision /= static_cast<double>(results.size());
            s.recall /= static_cast<double>(results.size());
        }
        s.f1 = f1_score(s.precision, s.recall);
    }
    out.matcher = matcher_metrics(decisions, truths, times, static_cast<std::size_t>(cfg.match.k));
    return out;
}

std::vector<AblationRow> ablate_k(std::span<const SyntheticScene> scenes, const PipelineConfig& cfg,
                                  std::span<const int> k_values, const ScorerProvider& provider, int timing_runs) {
    if (timing_runs < 1) {
        throw ValidationError("timing_runs must be >= 1");
    }
    if (scenes.empty()) {
        throw ValidationError("ablation needs at least one scene");
    }
    cfg.validate();
    std::vector<StageOne> stages;
    std::vector<SceneTruth> truths;
    for (const SyntheticScene& scene : scenes) {
        stages.push_back(run_stage_one(scene, cfg));
        truths.push_back(associate_truth(stages.back(), scene, cfg));
    }
    std::vector<PipelineConfig> configs;
    std::vector<std::unique_ptr<Scorer>> scorers;
    for (const int k : k_values) {
        PipelineConfig kc = cfg;
        kc.match.k = k;
        kc.match.validate();
        scorers.push_back(provider(kc));
        configs.push_back(std::move(kc));
    }
    // Timing rounds visit every K back to back on the same scene, so slow
    // phases of the machine hit all K alike.
    std::vector<std::vector<double>> times(configs.size(), std::vector<double>(stages.size(), 0.0));
    std::vector<std::vector<MatchOutput>> outputs(configs.size());
    for (int run = 0; run < timing_runs; ++run) {
        for (std::size_t s = 0; s < stages.size(); ++s) {
            for (std::size_t i = 0; i < configs.size(); ++i) {
                MatchOutput out = run_matching(stages[s], *scorers[i], configs[i].match);
                times[i][s] = run == 0 ? out.seconds : std::min(times[i][s], out.seconds);
                if (run == 0) outputs[i].push_back(std::move(out));
            }
        }
    }
    std::vector<AblationRow> rows;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const MatchConfig& mc = configs[i].match;
        std::vector<MatchDecision> decisions;
        std::vector<MatchTruth> match_truth;
        std::size_t with_successor = 0;
        std::size_t covered = 0;
        for (std::size_t s = 0; s < stages.size(); ++s) {
            const MatchOutput& out = outputs[i][s];
            for (std::size_t v = 0; v < out.candidates.size(); ++v) {
                if (!truths[s].next[v]) continue;
                ++with_successor;
                if (true_class(out.candidates[v], truths[s].next[v], mc) < out.candidates[v].neighbors.size()) {
                    ++covered;
                }
            }
            auto t = match_truths(stages[s], out, truths[s]);
            match_truth.insert(match_truth.end(), t.begin(), t.end());
            decisions.insert(decisions.end(), out.decisions.begin(), out.decisions.end());
        }
        rows.push_back({mc.k, matcher_metrics(decisions, match_truth, times[i], static_cast<std::size_t>(mc.k)),
                        with_successor > 0 ? static_cast<double>(covered) / static_cast<double>(with_successor) : 1.0});
    }
    return rows;
}

std::string format_ablation_table(std::span<const AblationRow> rows) {
    std::ostringstream out;
    out << std::fixed << std::setw(4) << "K" << std::setw(16) << "F1-Score_class" << std::setw(14) << "MSE_position"
        << std::setw(15) << "Runtime_class" << std::setw(10) << "coverage" << '\n';
    for (const AblationRow& r : rows) {
        out << std::setw(4) << r.k << std::setw(16) << std::setprecision(1) << r.report.f1_class << std::setw(14)
            << std::setprecision(2) << r.report.mse_position << std::setw(15) << std::setprecision(4)
            << r.report.runtime_class << std::setw(10) << std::setprecision(3) << r.oracle_coverage << '\n';
    }
    return out.str();
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    const std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (std::thread& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

int default_thread_count() {
    if (const char* env = std::getenv("LANEMAP_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

}  // namespace lanemap
