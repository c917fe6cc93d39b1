#include "lanemap/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "lanemap/error.hpp"

namespace lanemap {

void SynthConfig::validate() const {
    if (width < 16 || height < 16) throw ValidationError("synthetic canvas must be at least 16x16");
    if (min_lanes < 0 || max_lanes < min_lanes) throw ValidationError("invalid lane count range");
    if (!(min_spacing > 0.0) || max_spacing < min_spacing) throw ValidationError("invalid vertex spacing range");
    if (!(min_separation > 0.0)) throw ValidationError("min_separation must be > 0");
    if (!(max_curvature >= 0.0)) throw ValidationError("max_curvature must be >= 0");
    if (!(heading_spread >= 0.0 && heading_spread < 1.5)) throw ValidationError("heading_spread must be in [0, 1.5)");
    if (!(noise >= 0.0 && noise <= 1.0)) throw ValidationError("noise must be in [0,1]");
    if (!(stroke_width >= 1.0)) throw ValidationError("stroke_width must be >= 1");
}

std::vector<std::vector<std::size_t>> SyntheticScene::chains() const {
    std::vector<std::vector<std::size_t>> out;
    std::size_t base = 0;
    for (const LaneAnnotation& lane : annotation.lanes) {
        std::vector<std::size_t> chain(lane.vertices.size());
        for (std::size_t i = 0; i < chain.size(); ++i) chain[i] = base + i;
        base += chain.size();
        out.push_back(std::move(chain));
    }
    return out;
}

void derive_labels(const ImageAnnotation& ann, std::vector<PixelPoint>& vertices,
                   std::vector<std::optional<std::size_t>>& next) {
    vertices.clear();
    next.clear();
    for (const LaneAnnotation& lane : ann.lanes) {
        for (std::size_t i = 0; i < lane.vertices.size(); ++i) {
            vertices.push_back(lane.vertices[i]);
            next.push_back(i + 1 < lane.vertices.size() ? std::optional<std::size_t>(vertices.size())
                                                        : std::nullopt);
        }
    }
}

namespace {

constexpr double kControlLeg = 40.0;
constexpr int kSamplesPerPiece = 16;
constexpr double kInnerMargin = 2.0;
constexpr int kMaxAttempts = 1000;

std::vector<float> gaussian_kernel(double sigma) {
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<float> k(2 * r + 1);
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        k[i + r] = static_cast<float>(std::exp(-(i * i) / (2.0 * sigma * sigma)));
        sum += k[i + r];
    }
    for (float& v : k) v = static_cast<float>(v / sum);
    return k;
}

// Separable blur with zero padding.
std::vector<float> blur(const std::vector<float>& img, int w, int h, double sigma) {
    const std::vector<float> k = gaussian_kernel(sigma);
    const int r = static_cast<int>(k.size() / 2);
    std::vector<float> tmp(img.size(), 0.0f), out(img.size(), 0.0f);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            float s = 0.0f;
            for (int i = -r; i <= r; ++i) {
                const int xx = x + i;
                if (xx >= 0 && xx < w) s += k[i + r] * img[static_cast<std::size_t>(y) * w + xx];
            }
            tmp[static_cast<std::size_t>(y) * w + x] = s;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            float s = 0.0f;
            for (int i = -r; i <= r; ++i) {
                const int yy = y + i;
                if (yy >= 0 && yy < h) s += k[i + r] * tmp[static_cast<std::size_t>(yy) * w + x];
            }
            out[static_cast<std::size_t>(y) * w + x] = s;
        }
    }
    return out;
}

// Dense samples of a C1 chain of quadratic pieces (uniform quadratic B-spline).
Polyline smooth_curve(const Polyline& control) {
    Polyline out;
    for (std::size_t i = 1; i + 1 < control.size(); ++i) {
        const PixelPoint m0{(control[i - 1].x + control[i].x) / 2, (control[i - 1].y + control[i].y) / 2};
        const PixelPoint m1{(control[i].x + control[i + 1].x) / 2, (control[i].y + control[i + 1].y) / 2};
        for (int s = (i == 1 ? 0 : 1); s <= kSamplesPerPiece; ++s) {
            const double t = static_cast<double>(s) / kSamplesPerPiece;
            const double a = (1 - t) * (1 - t), b = 2 * t * (1 - t), c = t * t;
            out.push_back({a * m0.x + b * control[i].x + c * m1.x, a * m0.y + b * control[i].y + c * m1.y});
        }
    }
    return out;
}

// Vertices along `curve` whose consecutive chord lengths are drawn from
// [min_spacing, max_spacing].
Polyline place_vertices(const Polyline& curve, const SynthConfig& cfg, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> spacing(cfg.min_spacing, cfg.max_spacing);
    Polyline verts{curve.front()};
    double target = spacing(rng);
    std::size_t seg = 0;
    while (seg + 1 < curve.size()) {
        const PixelPoint cur = verts.back();
        const PixelPoint a = curve[seg];
        const PixelPoint b = curve[seg + 1];
        if (distance(cur, b) < target) {
            ++seg;
            continue;
        }
        // Solve |a + t(b - a) - cur| = target for the largest t in [0, 1].
        const double dx = b.x - a.x, dy = b.y - a.y;
        const double fx = a.x - cur.x, fy = a.y - cur.y;
        const double qa = dx * dx + dy * dy;
        const double qb = 2 * (fx * dx + fy * dy);
        const double qc = fx * fx + fy * fy - target * target;
        const double disc = std::max(0.0, qb * qb - 4 * qa * qc);
        const double t = std::clamp((-qb + std::sqrt(disc)) / (2 * qa), 0.0, 1.0);
        verts.push_back({a.x + t * dx, a.y + t * dy});
        target = spacing(rng);
    }
    if (distance(verts.back(), curve.back()) >= cfg.min_spacing) {
        verts.push_back(curve.back());
    }
    return verts;
}

std::optional<Polyline> propose_lane(const SynthConfig& cfg, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double w = cfg.width, h = cfg.height;
    double heading = (2 * unit(rng) - 1) * cfg.heading_spread;
    const double max_turn = cfg.max_curvature * kControlLeg;
    Polyline control{{-kControlLeg, unit(rng) * h}};
    while (control.back().x < w + kControlLeg && control.size() < 200) {
        heading += (2 * unit(rng) - 1) * max_turn;
        heading = std::clamp(heading, -cfg.heading_spread - 0.2, cfg.heading_spread + 0.2);
        control.push_back({control.back().x + kControlLeg * std::cos(heading),
                           control.back().y + kControlLeg * std::sin(heading)});
    }
    const Polyline curve = smooth_curve(control);
    Polyline inner = curve;
    for (PixelPoint& p : inner) {
        p.x -= kInnerMargin;
        p.y -= kInnerMargin;
    }
    std::vector<Polyline> pieces = clip_polyline(inner, w - 2 * kInnerMargin, h - 2 * kInnerMargin);
    if (pieces.empty()) return std::nullopt;
    auto longest = std::max_element(pieces.begin(), pieces.end(), [](const Polyline& a, const Polyline& b) {
        return polyline_length(a) < polyline_length(b);
    });
    Polyline piece = *longest;
    for (PixelPoint& p : piece) {
        p.x += kInnerMargin;
        p.y += kInnerMargin;
    }
    if (polyline_length(piece) < 3 * cfg.max_spacing) return std::nullopt;
    Polyline verts = place_vertices(piece, cfg, rng);
    if (verts.size() < 3) return std::nullopt;
    return verts;
}

}  // namespace

Tensor synth_features(const LaneMask& mask) {
    const int w = mask.width, h = mask.height;
    std::vector<float> img(mask.pixels.begin(), mask.pixels.end());
    const std::vector<float> fine = blur(img, w, h, 2.0);
    const std::vector<float> coarse = blur(img, w, h, 6.0);
    Tensor t(h, w, kSynthFeatureChannels);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            t.at(y, x, 0) = fine[i];
            t.at(y, x, 1) = coarse[i];
            t.at(y, x, 2) = static_cast<float>((x + 0.5) / w);
            t.at(y, x, 3) = static_cast<float>((y + 0.5) / h);
        }
    }
    return t;
}

SyntheticScene gen_scene(const SynthConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<int> lane_count(cfg.min_lanes, cfg.max_lanes);
    std::uniform_int_distribution<int> coin(0, 1);
    SyntheticScene scene;
    ImageAnnotation& ann = scene.annotation;
    ann.image_id = "synth_" + std::to_string(cfg.seed);
    ann.width = cfg.width;
    ann.height = cfg.height;
    ann.geo_transform = {1e-5, 0.0, 31.2, 0.0, -1e-5, 30.05};

    const int wanted = lane_count(rng);
    std::vector<Polyline> lanes;
    int attempts = 0;
    while (static_cast<int>(lanes.size()) < wanted && attempts < kMaxAttempts) {
        ++attempts;
        auto lane = propose_lane(cfg, rng);
        if (!lane) continue;
        const bool separated = std::all_of(lanes.begin(), lanes.end(), [&](const Polyline& other) {
            return polyline_distance(*lane, other) >= cfg.min_separation;
        });
        if (separated) lanes.push_back(std::move(*lane));
    }
    if (static_cast<int>(lanes.size()) < wanted) {
        scene.warnings.push_back("placed " + std::to_string(lanes.size()) + " of " + std::to_string(wanted) +
                                 " lanes after " + std::to_string(kMaxAttempts) + " attempts");
    }
    for (std::size_t i = 0; i < lanes.size(); ++i) {
        LaneAttributes attrs{coin(rng) ? LineForm::Double : LineForm::Single,
                             coin(rng) ? LineColor::Yellow : LineColor::White,
                             coin(rng) ? Continuity::Dash : Continuity::Solid};
        ann.lanes.push_back({"lane_" + std::to_string(i), "road_" + std::to_string(i / 2), attrs, lanes[i]});
    }
    validate(ann);

    scene.seg_mask = rasterize_mask(ann, cfg.stroke_width);
    if (cfg.noise > 0.0) {
        std::bernoulli_distribution flip(cfg.noise / 10.0);
        for (auto& v : scene.seg_mask.pixels) {
            if (flip(rng)) v = v ? 0 : 1;
        }
    }
    scene.features = synth_features(scene.seg_mask);
    derive_labels(ann, scene.vertices, scene.next);
    return scene;
}

std::uint64_t scene_seed(std::uint64_t base_seed, std::size_t index) {
    std::uint64_t z = base_seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

SyntheticDataset gen_dataset(const SynthConfig& cfg, std::size_t n_scenes) {
    if (n_scenes < 1) {
        throw ValidationError("n_scenes must be >= 1");
    }
    SyntheticDataset ds;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n_scenes; ++i) {
        SynthConfig c = cfg;
        c.seed = scene_seed(cfg.seed, i);
        SyntheticScene scene = gen_scene(c);
        scene.annotation.image_id = "synth_" + std::to_string(cfg.seed) + "_" + std::to_string(i);
        ids.push_back(scene.annotation.image_id);
        ds.scenes.push_back(std::move(scene));
    }
    ds.split = split_dataset(ids, cfg.seed);
    return ds;
}

void save_scene(const std::filesystem::path& dir, const SyntheticScene& scene) {
    const std::string& id = scene.annotation.image_id;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    write_annotations(dir / (id + ".json"), std::span(&scene.annotation, 1));
    write_mask_png(dir / (id + "_mask.png"), scene.seg_mask);
    std::ofstream out(dir / (id + "_features.bin"), std::ios::binary);
    if (!out) {
        throw IoError("cannot write features for " + id);
    }
    write_tensor(out, scene.features, 1);
}

SyntheticScene load_scene(const std::filesystem::path& dir, const std::string& image_id) {
    SyntheticScene scene;
    auto anns = load_annotations(dir / (image_id + ".json"));
    if (anns.size() != 1) {
        throw ValidationError("scene document must hold exactly one annotation");
    }
    scene.annotation = std::move(anns.front());
    scene.seg_mask = read_mask_png(dir / (image_id + "_mask.png"));
    std::ifstream in(dir / (image_id + "_features.bin"), std::ios::binary);
    if (!in) {
        throw IoError("cannot open features for " + image_id);
    }
    scene.features = read_tensor(in).tensor;
    if (scene.seg_mask.width != scene.annotation.width || scene.seg_mask.height != scene.annotation.height ||
        scene.features.width() != scene.annotation.width || scene.features.height() != scene.annotation.height) {
        throw ValidationError("scene '" + image_id + "' rasters do not match the annotation size");
    }
    derive_labels(scene.annotation, scene.vertices, scene.next);
    return scene;
}

}  // namespace lanemap
