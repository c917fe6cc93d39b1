#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "lanemap/error.hpp"
#include "lanemap/losses.hpp"
#include "lanemap/pipeline.hpp"
#include "lanemap/tiny_scorer.hpp"

using namespace lanemap;
namespace fs = std::filesystem;

namespace {

ScorerShape tiny_shape() {
    ScorerShape s;
    s.crop_size = 4;
    s.k = 3;
    s.c_feat = 1;
    s.hidden = 8;
    return s;
}

TrainingExample random_example(std::mt19937_64& rng, const ScorerShape& shape) {
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    TrainingExample ex;
    ex.input.resize(static_cast<std::size_t>(shape.input_dim()));
    for (float& v : ex.input) v = u(rng) < 0.3f ? 0.0f : u(rng);
    ex.valid_candidates = 2;
    ex.true_class = 1;
    ex.location_target = {0.05f, -0.02f};
    return ex;
}

PipelineConfig small_pipeline() {
    PipelineConfig cfg;
    cfg.synth.width = 160;
    cfg.synth.height = 160;
    cfg.synth.max_lanes = 3;
    cfg.match.k = 5;
    cfg.match.crop_size = 12;
    cfg.train.epochs = 20;
    cfg.train.lr = 0.02;
    cfg.train.batch_size = 16;
    return cfg;
}

std::vector<SyntheticScene> small_scenes(const PipelineConfig& cfg, std::size_t n, std::uint64_t seed) {
    SynthConfig sc = cfg.synth;
    sc.seed = seed;
    return gen_dataset(sc, n).scenes;
}

}  // namespace

TEST_SUITE("tiny_scorer") {

TEST_CASE("perceptron gradient matches finite differences") {
    std::mt19937_64 rng(8);
    const ScorerShape shape = tiny_shape();
    Mlp<double> mlp(shape.input_dim(), shape.hidden, shape.num_classes(), 3);
    std::normal_distribution<double> g(0.0, 0.3);
    for (double& p : mlp.params()) p += g(rng);
    std::vector<double> input(static_cast<std::size_t>(shape.input_dim()));
    for (double& v : input) v = std::abs(g(rng));
    for (std::size_t cls : {0, 1, 3}) {
        const Mlp<double>::Sample s{input, 2, 3, cls, {0.4, -1.7}};
        auto loss_at = [&](std::span<const double> params) {
            Mlp<double> m = mlp;
            std::copy(params.begin(), params.end(), m.params().begin());
            const auto t = m.loss(s, 0.1, 0.01);
            return 0.1 * t.l_cls + 0.01 * t.l_reg;
        };
        auto grad_at = [&](std::span<const double> params) {
            Mlp<double> m = mlp;
            std::copy(params.begin(), params.end(), m.params().begin());
            std::vector<double> grad(params.size(), 0.0);
            m.loss(s, 0.1, 0.01, &grad);
            return grad;
        };
        CHECK(grad_check(loss_at, grad_at, mlp.params(), 1e-6) < 1e-4);
    }
}

TEST_CASE("padded slots get zero probability") {
    const ScorerShape shape = tiny_shape();
    const Mlp<float> mlp(shape.input_dim(), shape.hidden, shape.num_classes(), 1);
    std::vector<float> x(static_cast<std::size_t>(shape.input_dim()), 0.5f);
    Mlp<float>::Output out;
    mlp.forward(x, out);
    const auto p = softmax(mlp.masked_logits(out, 1, 3));
    CHECK(p[1] == 0.0);
    CHECK(p[2] == 0.0);
    CHECK(p[0] + p[3] == doctest::Approx(1.0));
    CHECK_THROWS_AS(mlp.loss({x, 1, 3, 2, {}}, 0.1, 0.01), ValidationError);
}

TEST_CASE("one example is memorized") {
    std::mt19937_64 rng(1);
    const ScorerShape shape = tiny_shape();
    const VectorExampleSource data({random_example(rng, shape)});
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.lr = 0.5;
    cfg.batch_size = 1;
    std::vector<EpochLog> log;
    tiny_scorer_train(data, shape, cfg, &log);
    REQUIRE(log.size() == 200);
    CHECK(log.back().total < 1e-3);
    CHECK(log.back().total < log.front().total);
}

TEST_CASE("training is bit-identical for a fixed seed") {
    std::mt19937_64 rng(2);
    const ScorerShape shape = tiny_shape();
    std::vector<TrainingExample> ex;
    for (int i = 0; i < 40; ++i) {
        ex.push_back(random_example(rng, shape));
        ex.back().true_class = static_cast<std::size_t>(i % 3 == 2 ? 3 : i % 2);
    }
    const VectorExampleSource data(ex);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.lr = 0.1;
    cfg.batch_size = 7;
    const TinyScorer a = tiny_scorer_train(data, shape, cfg);
    const TinyScorer b = tiny_scorer_train(data, shape, cfg);
    CHECK(a.mlp().params() == b.mlp().params());
    cfg.seed = 2;
    CHECK(tiny_scorer_train(data, shape, cfg).mlp().params() != a.mlp().params());
    CHECK_THROWS_AS(tiny_scorer_train(VectorExampleSource({}), shape, cfg), ValidationError);
}

TEST_CASE("epoch losses mostly decrease on synthetic scenes") {
    const PipelineConfig cfg = small_pipeline();
    const auto scenes = small_scenes(cfg, 12, 40);
    std::vector<EpochLog> log;
    train_tiny_scorer(scenes, cfg, &log);
    REQUIRE(log.size() == 20);
    int nonincreasing = 0;
    for (std::size_t e = 1; e < log.size(); ++e) {
        if (log[e].total <= log[e - 1].total + 1e-6) ++nonincreasing;
    }
    CHECK(nonincreasing >= 0.9 * static_cast<double>(log.size() - 1));
    CHECK(log.back().total < log.front().total);
}

TEST_CASE("untrained scorer keeps the anchor and emits a simplex") {
    const PipelineConfig cfg = small_pipeline();
    const auto scenes = small_scenes(cfg, 2, 41);
    const TinyScorer scorer(ScorerShape::from(cfg.match), 4);
    const StageOne stage = run_stage_one(scenes[0], cfg);
    const MatchOutput out = run_matching(stage, scorer, cfg.match);
    REQUIRE(!out.decisions.empty());
    for (std::size_t v = 0; v < out.decisions.size(); ++v) {
        CHECK(out.decisions[v].location == stage.vertices[v]);
        double sum = 0.0;
        for (double p : out.decisions[v].class_probs) sum += p;
        CHECK(std::abs(sum - 1.0) < 1e-6);
    }
    MatchConfig other = cfg.match;
    other.k = 6;
    CHECK_THROWS_AS(run_matching(stage, scorer, other), ValidationError);
}

TEST_CASE("parameter file round trip") {
    const ScorerShape shape = tiny_shape();
    const TinyScorer scorer(shape, 11);
    const fs::path path = fs::temp_directory_path() / "lanemap_tiny_scorer.bin";
    scorer.save(path);
    CHECK(fs::file_size(path) == 32 + 4 * scorer.mlp().params().size());
    const TinyScorer back = TinyScorer::load(path);
    CHECK(back.shape() == shape);
    CHECK(back.mlp().params() == scorer.mlp().params());

    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << "not a parameter file at all, sorry";
    }
    CHECK_THROWS_AS(TinyScorer::load(path), ParseError);
    fs::remove(path);
    CHECK_THROWS_AS(TinyScorer::load(path), IoError);
}

TEST_CASE("training log format") {
    const std::vector<EpochLog> log{{1, 2.5, 0.25, 0.2525}};
    CHECK(format_training_log(log) == "epoch,l_cls,l_reg,total\n1,2.5,0.25,0.2525\n");
}

}
