#include <doctest.h>

#include <algorithm>

#include "lanemap/error.hpp"
#include "lanemap/pipeline.hpp"

using namespace lanemap;

namespace {

std::vector<SyntheticScene> scenes(std::uint64_t seed, std::size_t n) {
    SynthConfig cfg;
    cfg.seed = seed;
    return gen_dataset(cfg, n).scenes;
}

PipelineConfig small_config() {
    PipelineConfig cfg;
    cfg.match.k = 8;
    cfg.match.crop_size = 16;
    return cfg;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("oracle end to end reconstructs every scene") {
    const auto data = scenes(21, 8);
    PipelineConfig cfg = small_config();
    SUBCASE("per-vertex channels") {}
    SUBCASE("shared channel with offsets") {
        cfg.heatmap.mode = HeatmapMode::SharedChannel;
        cfg.decode_offsets = true;
    }
    SUBCASE("per-vertex channels with offsets") { cfg.decode_offsets = true; }
    const E2EResult r = run_e2e(data, cfg, nullptr);
    CHECK(r.scenes == data.size());
    CHECK(r.exact_scenes == data.size());
    for (const ThresholdScore& s : r.report.scores) CHECK(s.f1 >= 0.99);
    CHECK(r.matcher.f1_class == 100.0);
}

TEST_CASE("stage one shapes and truth association") {
    const auto data = scenes(4, 1);
    const PipelineConfig cfg = small_config();
    const StageOne stage = run_stage_one(data[0], cfg);
    const int fs = cfg.match.feature_stride;
    CHECK(stage.seg.height() == (data[0].seg_mask.height + fs - 1) / fs);
    CHECK(stage.features.channels() == cfg.match.c_feat);
    CHECK(stage.vertices.size() == data[0].vertices.size());
    const SceneTruth truth = associate_truth(stage, data[0], cfg);
    for (std::size_t v = 0; v < stage.vertices.size(); ++v) {
        REQUIRE(truth.gt_of[v]);
        const std::size_t g = *truth.gt_of[v];
        CHECK(truth.location[v] == data[0].vertices[g]);
        CHECK(truth.next[v].has_value() == data[0].next[g].has_value());
    }
    PipelineConfig bad = cfg;
    bad.match.c_feat = 3;
    CHECK_THROWS_AS(run_stage_one(data[0], bad), ValidationError);
}

TEST_CASE("training labels") {
    CandidateSet c;
    c.anchor = 0;
    c.neighbors = {{3, 1.0}, {5, 2.0}};
    c.padding = 1;
    MatchConfig cfg;
    cfg.k = 3;
    CHECK(true_class(c, std::size_t{5}, cfg) == 1);
    CHECK(true_class(c, std::nullopt, cfg) == 3);
    CHECK(true_class(c, std::size_t{9}, cfg) == 3);
}

TEST_CASE("evaluation labels do not depend on K") {
    const auto data = scenes(8, 2);
    std::vector<std::size_t> labels_at[2];
    const int ks[] = {3, 20};
    for (int i = 0; i < 2; ++i) {
        PipelineConfig cfg = small_config();
        cfg.match.k = ks[i];
        for (const SyntheticScene& s : data) {
            const StageOne stage = run_stage_one(s, cfg);
            const SceneTruth truth = associate_truth(stage, s, cfg);
            const MatchOutput out = run_matching(stage, GeometricScorer(), cfg.match);
            for (const MatchTruth& t : match_truths(stage, out, truth)) labels_at[i].push_back(t.true_class);
        }
    }
    CHECK(labels_at[0] == labels_at[1]);
    CHECK(std::count(labels_at[0].begin(), labels_at[0].end(), kTerminalLabel) > 0);
}

TEST_CASE("ablation coverage") {
    const auto data = scenes(31, 4);
    const std::vector<int> ks{1, 2, 5, 10, 40, 400};
    const ScorerProvider geometric = [](const PipelineConfig&) { return std::make_unique<GeometricScorer>(); };
    const auto rows = ablate_k(data, small_config(), ks, geometric);
    REQUIRE(rows.size() == ks.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].k == ks[i]);
        CHECK(rows[i].oracle_coverage >= 0.0);
        CHECK(rows[i].report.f1_class >= 0.0);
        CHECK(rows[i].report.mse_position >= 0.0);
        if (i > 0) CHECK(rows[i].oracle_coverage >= rows[i - 1].oracle_coverage);
    }
    CHECK(rows.back().oracle_coverage == 1.0);
    const std::string table = format_ablation_table(rows);
    CHECK(table.find("F1-Score_class") != std::string::npos);
    CHECK(std::count(table.begin(), table.end(), '\n') == static_cast<long>(ks.size() + 1));
}

TEST_CASE("training on scenes lowers the loss") {
    const auto data = scenes(50, 6);
    PipelineConfig cfg = small_config();
    cfg.match.crop_size = 12;
    cfg.train.epochs = 5;
    cfg.train.lr = 0.05;
    std::vector<EpochLog> log;
    const TinyScorer model = train_tiny_scorer(data, cfg, &log);
    REQUIRE(log.size() == 5);
    CHECK(log.back().total < log.front().total);
    CHECK(model.shape() == ScorerShape::from(cfg.match));
    const E2EResult r = run_e2e(data, cfg, &model);
    CHECK(r.scenes == data.size());
}

TEST_CASE("parallel results match serial") {
    const auto data = scenes(61, 6);
    const PipelineConfig cfg = small_config();
    const GeometricScorer geo;
    const E2EResult a = run_e2e(data, cfg, &geo, 1);
    const E2EResult b = run_e2e(data, cfg, &geo, 3);
    for (std::size_t t = 0; t < a.report.scores.size(); ++t) {
        CHECK(a.report.scores[t].precision == b.report.scores[t].precision);
        CHECK(a.report.scores[t].recall == b.report.scores[t].recall);
    }
    CHECK(a.matcher.f1_class == b.matcher.f1_class);
    CHECK(a.matcher.mse_position == b.matcher.mse_position);
    CHECK(a.exact_scenes == b.exact_scenes);
}

TEST_CASE("parallel_for propagates errors") {
    std::vector<int> hits(100, 0);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    CHECK_THROWS_AS(parallel_for(10, 3,
                                 [](std::size_t i) {
                                     if (i == 7) throw ValidationError("boom");
                                 }),
                    ValidationError);
}

TEST_CASE("pipeline config validation") {
    PipelineConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.train.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = {};
    cfg.match.k = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

}
