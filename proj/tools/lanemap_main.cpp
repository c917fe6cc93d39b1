#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "lanemap/config.hpp"
#include "lanemap/dataset_io.hpp"
#include "lanemap/error.hpp"
#include "lanemap/heatmap_codec.hpp"
#include "lanemap/pipeline.hpp"

namespace fs = std::filesystem;
using namespace lanemap;

namespace {

// Config file, then --set pairs, then dedicated flags.
struct ConfigOptions {
    std::string file;
    std::vector<std::string> sets;
    std::map<std::string, std::string> flags;  // config key -> value
};

void add_config_options(CLI::App* sub, ConfigOptions& opts) {
    sub->add_option("--config", opts.file, "INI config file");
    sub->add_option("--set", opts.sets, "Override one config value, section.key=value (repeatable)");
}

void add_config_flag(CLI::App* sub, ConfigOptions& opts, const std::string& flag, const std::string& key,
                     const std::string& help) {
    sub->add_option_function<std::string>(
        flag, [&opts, key](const std::string& v) { opts.flags[key] = v; }, help + " (" + key + ")");
}

void require_exists(const fs::path& path) {
    if (!fs::exists(path)) throw IoError(path.string() + " does not exist");
}

PipelineConfig resolve(const ConfigOptions& opts) {
    PipelineConfig cfg;
    if (!opts.file.empty()) {
        require_exists(opts.file);
        apply_config_file(cfg, opts.file);
    }
    for (const std::string& s : opts.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ValidationError("--set expects section.key=value, got '" + s + "'");
        apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [key, value] : opts.flags) apply_setting(cfg, key, value);
    cfg.validate();
    return cfg;
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("failed writing " + path);
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

std::string fixed(double v, int precision) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(precision) << v;
    return out.str();
}

SyntheticScene load_scene_file(const fs::path& json_path) {
    require_exists(json_path);
    return load_scene(json_path.parent_path().empty() ? fs::path(".") : json_path.parent_path(),
                      json_path.stem().string());
}

std::vector<SyntheticScene> load_scene_dir(const fs::path& dir) {
    require_exists(dir);
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") ids.push_back(entry.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
    std::vector<SyntheticScene> scenes;
    for (const std::string& id : ids) scenes.push_back(load_scene(dir, id));
    if (scenes.empty()) throw ValidationError("no scenes in " + dir.string());
    return scenes;
}

std::vector<SyntheticScene> synth_scenes(const SynthConfig& cfg, std::size_t n) {
    return gen_dataset(cfg, n).scenes;
}

// Null means "oracle": callers build it from scene truth.
std::unique_ptr<Scorer> make_scorer(const std::string& name, const std::string& model) {
    if (name == "oracle") return nullptr;
    if (name == "geometric") return std::make_unique<GeometricScorer>();
    if (name == "tiny") {
        if (model.empty()) throw ValidationError("--scorer tiny needs --model");
        require_exists(model);
        return std::make_unique<TinyScorer>(TinyScorer::load(model));
    }
    throw ValidationError("unknown scorer '" + name + "'");
}

void check_scorer_shape(const Scorer* scorer, const MatchConfig& cfg) {
    const auto* tiny = dynamic_cast<const TinyScorer*>(scorer);
    if (tiny == nullptr) return;
    const ScorerShape want = ScorerShape::from(cfg);
    const ScorerShape got = tiny->shape();
    if (got.crop_size != want.crop_size || got.k != want.k || got.c_feat != want.c_feat ||
        got.terminal != want.terminal) {
        throw ValidationError("model was trained with crop_size=" + std::to_string(got.crop_size) +
                              " k=" + std::to_string(got.k) + " c_feat=" + std::to_string(got.c_feat) +
                              "; set match.* to match it");
    }
}

// stats -----------------------------------------------------------------

struct StatsArgs {
    std::vector<std::string> paths;
    bool csv = false;
};

int run_stats(const StatsArgs& a) {
    std::vector<std::pair<std::string, MapStats>> rows;
    for (const std::string& p : a.paths) {
        for (const LaneMap& map : load_lane_maps(p)) rows.emplace_back(map.region, map_stats(map));
    }
    std::ostringstream out;
    if (a.csv) {
        out << "region,lanes,vertices,length_km\n";
        for (const auto& [region, s] : rows) {
            out << region << ',' << s.lane_count << ',' << s.vertex_count << ',' << fixed(s.total_length_km, 3) << '\n';
        }
    } else {
        std::size_t width = 6;
        for (const auto& row : rows) width = std::max(width, row.first.size());
        out << std::left << std::setw(static_cast<int>(width)) << "region" << std::right << std::setw(8) << "lanes"
            << std::setw(10) << "vertices" << std::setw(12) << "length_km" << '\n';
        for (const auto& [region, s] : rows) {
            out << std::left << std::setw(static_cast<int>(width)) << region << std::right << std::setw(8)
                << s.lane_count << std::setw(10) << s.vertex_count << std::setw(12) << fixed(s.total_length_km, 3)
                << '\n';
        }
    }
    std::cout << out.str();
    return 0;
}

// rasterize / split / encode / decode ----------------------------------

struct RasterizeArgs {
    std::string input;
    std::string out;
    double stroke_width = kDefaultStrokeWidth;
};

int run_rasterize(const RasterizeArgs& a) {
    if (!(a.stroke_width > 0.0)) throw ValidationError("--stroke-width must be > 0");
    const auto anns = load_annotations(a.input);
    ensure_dir(a.out);
    for (const ImageAnnotation& ann : anns) {
        write_mask_png(fs::path(a.out) / (ann.image_id + "_mask.png"), rasterize_mask(ann, a.stroke_width));
    }
    return 0;
}

struct SplitArgs {
    std::string input;
    std::string ids;
    std::string out;
    std::uint64_t seed = 1;
};

int run_split(const SplitArgs& a) {
    std::vector<std::string> ids;
    if (!a.ids.empty()) {
        require_exists(a.ids);
        std::ifstream in(a.ids);
        for (std::string line; std::getline(in, line);) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) ids.push_back(line);
        }
    } else if (!a.input.empty()) {
        for (const ImageAnnotation& ann : load_annotations(a.input)) ids.push_back(ann.image_id);
    } else {
        throw ValidationError("split needs an annotation path or --ids");
    }
    const SplitAssignment split = split_dataset(ids, a.seed);
    write_output(a.out, format_split_manifest(split));
    std::cerr << "train " << split.count(Split::Train) << " val " << split.count(Split::Val) << " test "
              << split.count(Split::Test) << '\n';
    return 0;
}

void write_tensor_file(const fs::path& path, const Tensor& t, int stride) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    write_tensor(out, t, static_cast<std::uint32_t>(stride));
    if (!out) throw IoError("failed writing " + path.string());
}

TensorFile read_tensor_file(const fs::path& path) {
    require_exists(path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return read_tensor(in);
}

struct EncodeArgs {
    std::string input;
    std::string out;
    ConfigOptions cfg;
};

int run_encode(const EncodeArgs& a) {
    const PipelineConfig cfg = resolve(a.cfg);
    const auto anns = load_annotations(a.input);
    ensure_dir(a.out);
    for (const ImageAnnotation& ann : anns) {
        std::vector<PixelPoint> vertices;
        for (const LaneAnnotation& lane : ann.lanes) vertices.insert(vertices.end(), lane.vertices.begin(), lane.vertices.end());
        const EncodedVertices enc = encode_vertices(vertices, cfg.heatmap, ann.width, ann.height);
        write_tensor_file(fs::path(a.out) / (ann.image_id + "_heatmap.bin"), enc.heatmaps.grid, cfg.heatmap.stride);
        write_tensor_file(fs::path(a.out) / (ann.image_id + "_offsets.bin"), enc.offsets.grid, cfg.heatmap.stride);
    }
    return 0;
}

struct DecodeArgs {
    std::string input;
    std::string offsets;
    std::string out;
    ConfigOptions cfg;
};

int run_decode(const DecodeArgs& a) {
    PipelineConfig cfg = resolve(a.cfg);
    const TensorFile hm = read_tensor_file(a.input);
    cfg.heatmap.stride = static_cast<int>(hm.stride);
    cfg.heatmap.mode = hm.tensor.channels() == 1 ? HeatmapMode::SharedChannel : HeatmapMode::PerVertexChannel;
    if (cfg.heatmap.mode == HeatmapMode::PerVertexChannel) cfg.heatmap.c_vert = hm.tensor.channels();
    std::optional<OffsetMap> offsets;
    if (!a.offsets.empty()) offsets = OffsetMap{read_tensor_file(a.offsets).tensor};
    const VertexHeatmaps heatmaps{hm.tensor, cfg.heatmap.stride};
    const auto peaks = decode_peaks(heatmaps, offsets ? &*offsets : nullptr, cfg.heatmap);
    std::ostringstream out;
    out << std::setprecision(17) << "vertex,x,y,confidence,channel\n";
    for (std::size_t i = 0; i < peaks.size(); ++i) {
        out << i << ',' << peaks[i].point.x << ',' << peaks[i].point.y << ',' << peaks[i].confidence << ','
            << peaks[i].channel << '\n';
    }
    write_output(a.out, out.str());
    return 0;
}

// match / build / eval -------------------------------------------------

struct MatchArgs {
    std::string scene;
    std::string scorer = "geometric";
    std::string model;
    std::string out;
    ConfigOptions cfg;
};

int run_match(const MatchArgs& a) {
    const PipelineConfig cfg = resolve(a.cfg);
    const SyntheticScene scene = load_scene_file(a.scene);
    const StageOne stage = run_stage_one(scene, cfg);
    std::unique_ptr<Scorer> scorer = make_scorer(a.scorer, a.model);
    if (!scorer) {
        const SceneTruth truth = associate_truth(stage, scene, cfg);
        scorer = std::make_unique<OracleScorer>(truth.next, truth.location);
    }
    check_scorer_shape(scorer.get(), cfg.match);
    const MatchOutput match = run_matching(stage, *scorer, cfg.match);
    std::ostringstream out;
    out << std::setprecision(17) << "vertex,x,y,next,confidence\n";
    for (std::size_t v = 0; v < match.decisions.size(); ++v) {
        const MatchDecision& d = match.decisions[v];
        const std::size_t cls = d.best_class();
        out << v << ',' << d.location.x << ',' << d.location.y << ',';
        if (cls < match.candidates[v].neighbors.size()) {
            out << match.candidates[v].neighbors[cls].index;
        } else {
            out << -1;
        }
        out << ',' << d.class_probs[cls] << '\n';
    }
    write_output(a.out, out.str());
    return 0;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    return cells;
}

double to_double(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("bad " + what + " value '" + s + "'");
    }
}

struct BuildArgs {
    std::string input;
    std::string reference;
    std::string image_id = "pred";
    int width = 1280;
    int height = 1280;
    std::string out;
};

int run_build(const BuildArgs& a) {
    require_exists(a.input);
    std::ifstream in(a.input);
    if (!in) throw IoError("cannot open " + a.input);
    std::string line;
    if (!std::getline(in, line) || line.rfind("vertex,x,y,next,confidence", 0) != 0) {
        throw ParseError(a.input + ": expected header vertex,x,y,next,confidence");
    }
    std::vector<PixelPoint> points;
    std::vector<DirectedEdge> edges;
    std::vector<std::pair<long long, double>> links;
    for (std::size_t row = 0; std::getline(in, line); ++row) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 5) throw ParseError(a.input + ": row " + std::to_string(row + 1) + " needs 5 fields");
        if (static_cast<std::size_t>(to_double(cells[0], "vertex")) != points.size()) {
            throw ParseError(a.input + ": vertex ids must be 0..n-1 in order");
        }
        points.push_back({to_double(cells[1], "x"), to_double(cells[2], "y")});
        links.emplace_back(static_cast<long long>(to_double(cells[3], "next")), to_double(cells[4], "confidence"));
    }
    for (std::size_t v = 0; v < links.size(); ++v) {
        const auto [next, conf] = links[v];
        if (next < 0) continue;
        if (static_cast<std::size_t>(next) >= points.size() || static_cast<std::size_t>(next) == v) {
            throw ValidationError("vertex " + std::to_string(v) + " links to invalid vertex " + std::to_string(next));
        }
        edges.push_back({v, static_cast<std::size_t>(next), conf});
    }
    const auto cleaned = clean_edges(edges);
    std::vector<Polyline> polylines;
    for (const auto& chain : extract_chains(points.size(), cleaned)) {
        Polyline poly;
        for (std::size_t v : chain) poly.push_back(points[v]);
        polylines.push_back(std::move(poly));
    }
    ImageAnnotation ref;
    ref.image_id = a.image_id;
    ref.width = a.width;
    ref.height = a.height;
    if (!a.reference.empty()) {
        const auto anns = load_annotations(a.reference);
        if (anns.size() != 1) throw ValidationError("--reference must hold exactly one annotation");
        ref = anns.front();
    }
    const ImageAnnotation pred = polylines_to_annotation(polylines, ref.image_id, ref.width, ref.height, ref.geo_transform);
    write_output(a.out, save_annotations(std::span(&pred, 1)));
    return 0;
}

struct EvalArgs {
    std::string pred;
    std::string gt;
    bool csv = false;
    ConfigOptions cfg;
};

int run_eval(const EvalArgs& a) {
    const PipelineConfig cfg = resolve(a.cfg);
    const auto preds = load_annotations(a.pred);
    const auto gts = load_annotations(a.gt);
    std::map<std::string, const ImageAnnotation*> by_id;
    for (const ImageAnnotation& p : preds) by_id[p.image_id] = &p;
    EvalReport total;
    for (double t : cfg.eval.thresholds) total.scores.push_back({t, 0.0, 0.0, 0.0});
    for (const ImageAnnotation& g : gts) {
        std::vector<Polyline> gt_lines, pred_lines;
        for (const LaneAnnotation& l : g.lanes) gt_lines.push_back(l.vertices);
        if (const auto it = by_id.find(g.image_id); it != by_id.end()) {
            for (const LaneAnnotation& l : it->second->lanes) pred_lines.push_back(l.vertices);
        }
        const EvalReport r = evaluate(pred_lines, gt_lines, cfg.eval);
        for (std::size_t t = 0; t < r.scores.size(); ++t) {
            total.scores[t].precision += r.scores[t].precision;
            total.scores[t].recall += r.scores[t].recall;
        }
    }
    for (ThresholdScore& s : total.scores) {
        if (!gts.empty()) {
            s.precision /= static_cast<double>(gts.size());
            s.recall /= static_cast<double>(gts.size());
        }
        s.f1 = f1_score(s.precision, s.recall);
    }
    std::cout << (a.csv ? format_eval_csv(total) : format_eval_table(total));
    return 0;
}

// synth / train-scorer / ablate-k / e2e-oracle ---------------------------

struct SynthArgs {
    std::size_t count = 10;
    std::string out;
    ConfigOptions cfg;
};

int run_synth(const SynthArgs& a) {
    const PipelineConfig cfg = resolve(a.cfg);
    const SyntheticDataset data = gen_dataset(cfg.synth, a.count);
    ensure_dir(a.out);
    for (const SyntheticScene& scene : data.scenes) {
        save_scene(a.out, scene);
        for (const std::string& w : scene.warnings) std::cerr << scene.annotation.image_id << ": " << w << '\n';
    }
    write_output((fs::path(a.out) / "split.tsv").string(), format_split_manifest(data.split));
    return 0;
}

struct TrainArgs {
    std::size_t scenes = 100;
    std::string data;
    std::string out;
    std::string log;
    ConfigOptions cfg;
};

int run_train(const TrainArgs& a) {
    const PipelineConfig cfg = resolve(a.cfg);
    const auto scenes = a.data.empty() ? synth_scenes(cfg.synth, a.scenes) : load_scene_dir(a.data);
    std::vector<EpochLog> log;
    const TinyScorer scorer = train_tiny_scorer(scenes, cfg, &log);
    scorer.save(a.out);
    const std::string csv = format_training_log(log);
    if (!a.log.empty()) write_output(a.log, csv);
    else std::cerr << csv;
    return 0;
}

std::vector<int> parse_k_list(const std::string& s) {
    std::vector<int> ks;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            const int k = std::stoi(item, &used);
            if (used != item.size() || k < 1) throw std::invalid_argument(item);
            ks.push_back(k);
        } catch (const std::exception&) {
            throw ValidationError("--k expects positive integers separated by commas, got '" + s + "'");
        }
    }
    if (ks.empty()) throw ValidationError("--k is empty");
    return ks;
}

struct AblateArgs {
    std::string k_list = "5,10,20,40";
    std::string scorer = "tiny";
    std::size_t scenes = 100;
    std::size_t train_scenes = 200;
    int timing_runs = 5;
    ConfigOptions cfg;
};

int run_ablate(const AblateArgs& a) {
    const PipelineConfig cfg = resolve(a.cfg);
    const std::vector<int> ks = parse_k_list(a.k_list);
    const auto test = synth_scenes(cfg.synth, a.scenes);
    std::vector<SyntheticScene> train;
    if (a.scorer == "tiny") {
        SynthConfig tc = cfg.synth;
        tc.seed = cfg.synth.seed + 1;
        train = synth_scenes(tc, a.train_scenes);
    } else if (a.scorer != "geometric") {
        throw ValidationError("ablate-k supports --scorer tiny or geometric");
    }
    const ScorerProvider provider = [&](const PipelineConfig& kc) -> std::unique_ptr<Scorer> {
        if (a.scorer == "geometric") return std::make_unique<GeometricScorer>();
        return std::make_unique<TinyScorer>(train_tiny_scorer(train, kc));
    };
    const auto rows = ablate_k(test, cfg, ks, provider, a.timing_runs);
    std::cout << format_ablation_table(rows);
    return 0;
}

struct E2EArgs {
    std::size_t scenes = 50;
    std::string scorer = "oracle";
    std::string model;
    int threads = 0;
    bool csv = false;
    ConfigOptions cfg;
};

int run_e2e_cmd(const E2EArgs& a) {
    const PipelineConfig cfg = resolve(a.cfg);
    const auto scorer = make_scorer(a.scorer, a.model);
    check_scorer_shape(scorer.get(), cfg.match);
    const auto scenes = synth_scenes(cfg.synth, a.scenes);
    const int threads = a.threads > 0 ? a.threads : default_thread_count();
    const E2EResult r = run_e2e(scenes, cfg, scorer.get(), threads);
    std::ostringstream out;
    out << (a.csv ? format_eval_csv(r.report) : format_eval_table(r.report));
    out << "scenes " << r.scenes << "\nexact_scenes " << r.exact_scenes << "\nf1_class " << fixed(r.matcher.f1_class, 4)
        << "\nmse_position " << fixed(r.matcher.mse_position, 6) << '\n';
    std::cout << out.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vectorized lane mapping: annotations, vertex heatmaps, top-K matching, polylines, evaluation"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    StatsArgs stats;
    auto* c_stats = app.add_subcommand("stats", "Lane, vertex and length totals per region");
    c_stats->add_option("paths", stats.paths, "Region or annotation JSON files or directories")->required();
    c_stats->add_flag("--csv", stats.csv, "CSV instead of an aligned table");

    RasterizeArgs raster;
    auto* c_raster = app.add_subcommand("rasterize", "Write <image_id>_mask.png for each annotation");
    c_raster->add_option("annotations", raster.input, "Annotation file or directory")->required();
    c_raster->add_option("--out", raster.out, "Output directory")->required();
    c_raster->add_option("--stroke-width", raster.stroke_width, "Mask stroke width in pixels");

    SplitArgs split;
    auto* c_split = app.add_subcommand("split", "Seeded 7:2:1 train/val/test manifest");
    c_split->add_option("annotations", split.input, "Annotation file or directory (ids are taken from it)");
    c_split->add_option("--ids", split.ids, "Text file with one image id per line");
    c_split->add_option("--seed", split.seed, "Split seed");
    c_split->add_option("--out", split.out, "Manifest path (default stdout)");

    EncodeArgs encode;
    auto* c_encode = app.add_subcommand("encode", "Vertex heatmap and offset tensors per annotation");
    c_encode->add_option("annotations", encode.input, "Annotation file or directory")->required();
    c_encode->add_option("--out", encode.out, "Output directory")->required();
    add_config_options(c_encode, encode.cfg);
    add_config_flag(c_encode, encode.cfg, "--stride", "heatmap.stride", "Heatmap stride R");
    add_config_flag(c_encode, encode.cfg, "--sigma", "heatmap.sigma", "Gaussian sigma in cells");
    add_config_flag(c_encode, encode.cfg, "--mode", "heatmap.mode", "per_vertex or shared");
    add_config_flag(c_encode, encode.cfg, "--c-vert", "heatmap.c_vert", "Channels in per-vertex mode");

    DecodeArgs decode;
    auto* c_decode = app.add_subcommand("decode", "Peaks of a heatmap tensor as vertex CSV");
    c_decode->add_option("heatmap", decode.input, "Heatmap tensor file")->required();
    c_decode->add_option("--offsets", decode.offsets, "Offset tensor file");
    c_decode->add_option("--out", decode.out, "CSV path (default stdout)");
    add_config_options(c_decode, decode.cfg);
    add_config_flag(c_decode, decode.cfg, "--threshold", "heatmap.peak_threshold", "Peak threshold");

    MatchArgs match;
    auto* c_match = app.add_subcommand("match", "Next-vertex decisions for a saved scene");
    c_match->add_option("--scene", match.scene, "Scene annotation <dir>/<image_id>.json")->required();
    c_match->add_option("--scorer", match.scorer, "oracle, geometric or tiny");
    c_match->add_option("--model", match.model, "TinyScorer parameter file");
    c_match->add_option("--out", match.out, "CSV path (default stdout)");
    add_config_options(c_match, match.cfg);
    add_config_flag(c_match, match.cfg, "--k", "match.k", "Candidates per vertex");
    add_config_flag(c_match, match.cfg, "--crop-size", "match.crop_size", "Crop size S in feature cells");

    BuildArgs build;
    auto* c_build = app.add_subcommand("build", "Polylines from match CSV as an annotation document");
    c_build->add_option("match_csv", build.input, "Output of the match subcommand")->required();
    c_build->add_option("--reference", build.reference, "Annotation supplying image id, size and transform");
    c_build->add_option("--image-id", build.image_id, "Image id when no reference is given");
    c_build->add_option("--width", build.width, "Image width when no reference is given");
    c_build->add_option("--height", build.height, "Image height when no reference is given");
    c_build->add_option("--out", build.out, "Annotation path (default stdout)");

    EvalArgs eval;
    auto* c_eval = app.add_subcommand("eval", "Precision, recall and F1 per distance threshold");
    c_eval->add_option("--pred", eval.pred, "Predicted annotations")->required();
    c_eval->add_option("--gt", eval.gt, "Ground-truth annotations")->required();
    c_eval->add_flag("--csv", eval.csv, "CSV instead of an aligned table");
    add_config_options(c_eval, eval.cfg);
    add_config_flag(c_eval, eval.cfg, "--thresholds", "eval.thresholds", "Comma-separated pixel thresholds");

    SynthArgs synth;
    auto* c_synth = app.add_subcommand("synth", "Generate synthetic scenes and a split manifest");
    c_synth->add_option("--count", synth.count, "Number of scenes");
    c_synth->add_option("--out", synth.out, "Output directory")->required();
    add_config_options(c_synth, synth.cfg);
    add_config_flag(c_synth, synth.cfg, "--seed", "synth.seed", "Generator seed");

    TrainArgs train;
    auto* c_train = app.add_subcommand("train-scorer", "Train the tiny perceptron scorer");
    c_train->add_option("--scenes", train.scenes, "Synthetic training scenes to generate");
    c_train->add_option("--data", train.data, "Directory of saved scenes instead of generating");
    c_train->add_option("--out", train.out, "Parameter file")->required();
    c_train->add_option("--log", train.log, "Per-epoch CSV log (default stderr)");
    add_config_options(c_train, train.cfg);
    add_config_flag(c_train, train.cfg, "--seed", "synth.seed", "Scene seed");
    add_config_flag(c_train, train.cfg, "--train-seed", "train.seed", "Initialization and shuffling seed");
    add_config_flag(c_train, train.cfg, "--epochs", "train.epochs", "Epochs");
    add_config_flag(c_train, train.cfg, "--lr", "train.lr", "Learning rate");
    add_config_flag(c_train, train.cfg, "--batch-size", "train.batch_size", "Mini-batch size");
    add_config_flag(c_train, train.cfg, "--k", "match.k", "Candidates per vertex");
    add_config_flag(c_train, train.cfg, "--crop-size", "match.crop_size", "Crop size S in feature cells");

    AblateArgs ablate;
    auto* c_ablate = app.add_subcommand("ablate-k", "Matcher metrics for several K");
    c_ablate->add_option("--k", ablate.k_list, "Comma-separated K values");
    c_ablate->add_option("--scorer", ablate.scorer, "tiny (trained per K) or geometric");
    c_ablate->add_option("--scenes", ablate.scenes, "Evaluation scenes");
    c_ablate->add_option("--train-scenes", ablate.train_scenes, "Training scenes for tiny (seed + 1)");
    c_ablate->add_option("--timing-runs", ablate.timing_runs, "Matching runs per scene; the fastest is reported");
    add_config_options(c_ablate, ablate.cfg);
    add_config_flag(c_ablate, ablate.cfg, "--seed", "synth.seed", "Scene seed");
    add_config_flag(c_ablate, ablate.cfg, "--epochs", "train.epochs", "Epochs");
    add_config_flag(c_ablate, ablate.cfg, "--lr", "train.lr", "Learning rate");
    add_config_flag(c_ablate, ablate.cfg, "--crop-size", "match.crop_size", "Crop size S in feature cells");

    E2EArgs e2e;
    auto* c_e2e = app.add_subcommand("e2e-oracle", "synth, encode, decode, match, build and eval in one run");
    c_e2e->add_option("--scenes", e2e.scenes, "Number of scenes");
    c_e2e->add_option("--scorer", e2e.scorer, "oracle, geometric or tiny");
    c_e2e->add_option("--model", e2e.model, "TinyScorer parameter file");
    c_e2e->add_option("--threads", e2e.threads, "Workers (default LANEMAP_THREADS or logical cores)");
    c_e2e->add_flag("--csv", e2e.csv, "CSV report");
    add_config_options(c_e2e, e2e.cfg);
    add_config_flag(c_e2e, e2e.cfg, "--seed", "synth.seed", "Scene seed");
    add_config_flag(c_e2e, e2e.cfg, "--k", "match.k", "Candidates per vertex");
    add_config_flag(c_e2e, e2e.cfg, "--crop-size", "match.crop_size", "Crop size S in feature cells");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*c_stats) return run_stats(stats);
        if (*c_raster) return run_rasterize(raster);
        if (*c_split) return run_split(split);
        if (*c_encode) return run_encode(encode);
        if (*c_decode) return run_decode(decode);
        if (*c_match) return run_match(match);
        if (*c_build) return run_build(build);
        if (*c_eval) return run_eval(eval);
        if (*c_synth) return run_synth(synth);
        if (*c_train) return run_train(train);
        if (*c_ablate) return run_ablate(ablate);
        if (*c_e2e) return run_e2e_cmd(e2e);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
