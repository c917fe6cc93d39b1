#include "lanemap/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "lanemap/error.hpp"
#include "lanemap/png_io.hpp"

namespace lanemap {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text)) {
        throw IoError("cannot write " + path.string());
    }
}

json attributes_to_json(const LaneAttributes& a) {
    return json{{"line_form", to_string(a.line_form)},
                {"color", to_string(a.color)},
                {"continuity", to_string(a.continuity)}};
}

LaneAttributes attributes_from_json(const json& j) {
    return {parse_line_form(j.at("line_form").get<std::string>()),
            parse_line_color(j.at("color").get<std::string>()),
            parse_continuity(j.at("continuity").get<std::string>())};
}

json annotation_to_json(const ImageAnnotation& ann) {
    json lanes = json::array();
    for (const LaneAnnotation& lane : ann.lanes) {
        json vertices = json::array();
        for (const PixelPoint& p : lane.vertices) {
            vertices.push_back({p.x, p.y});
        }
        lanes.push_back({{"lane_id", lane.lane_id},
                         {"road_id", lane.road_id},
                         {"attributes", attributes_to_json(lane.attributes)},
                         {"vertices", std::move(vertices)}});
    }
    const GeoTransform& t = ann.geo_transform;
    return json{{"image_id", ann.image_id},
                {"width", ann.width},
                {"height", ann.height},
                {"geo_transform", {t.a, t.b, t.c, t.d, t.e, t.f}},
                {"lanes", std::move(lanes)}};
}

ImageAnnotation annotation_from_json(const json& j) {
    ImageAnnotation ann;
    ann.image_id = j.at("image_id").get<std::string>();
    ann.width = j.value("width", 1280);
    ann.height = j.value("height", 1280);
    const auto gt = j.at("geo_transform").get<std::vector<double>>();
    if (gt.size() != 6) {
        throw ParseError("image '" + ann.image_id + "': geo_transform needs 6 coefficients");
    }
    ann.geo_transform = {gt[0], gt[1], gt[2], gt[3], gt[4], gt[5]};
    for (const json& jl : j.at("lanes")) {
        LaneAnnotation lane;
        lane.lane_id = jl.at("lane_id").get<std::string>();
        lane.road_id = jl.at("road_id").get<std::string>();
        lane.attributes = attributes_from_json(jl.at("attributes"));
        for (const json& v : jl.at("vertices")) {
            if (!v.is_array() || v.size() != 2) {
                throw ParseError("image '" + ann.image_id + "' lane '" + lane.lane_id +
                                 "': vertex must be [x, y]");
            }
            lane.vertices.push_back({v[0].get<double>(), v[1].get<double>()});
        }
        ann.lanes.push_back(std::move(lane));
    }
    return ann;
}

template <class Fn>
auto with_parse_errors(Fn&& fn) {
    try {
        return fn();
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed document: ") + e.what());
    }
}

// FNV-1a over the seed bytes followed by the id, then a splitmix64 finalizer.
std::uint64_t seeded_hash(std::string_view id, std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](unsigned char byte) {
        h ^= byte;
        h *= 0x100000001b3ULL;
    };
    for (int i = 0; i < 8; ++i) {
        mix(static_cast<unsigned char>(seed >> (8 * i)));
    }
    for (char ch : id) {
        mix(static_cast<unsigned char>(ch));
    }
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebULL;
    h ^= h >> 31;
    return h;
}

}  // namespace

void validate(const ImageAnnotation& ann) {
    const std::string where = "image '" + ann.image_id + "'";
    if (ann.width <= 0 || ann.height <= 0) {
        throw ValidationError(where + ": width and height must be positive");
    }
    if (!ann.geo_transform.invertible()) {
        throw ValidationError(where + ": geo_transform is not invertible");
    }
    std::unordered_set<std::string> ids;
    for (const LaneAnnotation& lane : ann.lanes) {
        const std::string lw = where + " lane '" + lane.lane_id + "'";
        if (!ids.insert(lane.lane_id).second) {
            throw ValidationError(where + ": duplicate lane_id '" + lane.lane_id + "'");
        }
        if (lane.vertices.size() < 2) {
            throw ValidationError(lw + ": fewer than 2 vertices");
        }
        for (std::size_t i = 0; i < lane.vertices.size(); ++i) {
            const PixelPoint p = lane.vertices[i];
            if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0.0 || p.y < 0.0 || p.x > ann.width ||
                p.y > ann.height) {
                throw ValidationError(lw + ": vertex " + std::to_string(i) + " outside the image");
            }
            if (i > 0 && p == lane.vertices[i - 1]) {
                throw ValidationError(lw + ": vertex " + std::to_string(i) + " repeats its predecessor");
            }
        }
    }
}

std::vector<ImageAnnotation> parse_annotations(std::string_view document) {
    return with_parse_errors([&] {
        const json j = json::parse(document);
        std::vector<ImageAnnotation> anns;
        if (j.is_array()) {
            for (const json& item : j) {
                anns.push_back(annotation_from_json(item));
            }
        } else {
            anns.push_back(annotation_from_json(j));
        }
        for (const ImageAnnotation& ann : anns) {
            validate(ann);
        }
        return anns;
    });
}

std::string save_annotations(std::span<const ImageAnnotation> anns) {
    json j = json::array();
    for (const ImageAnnotation& ann : anns) {
        j.push_back(annotation_to_json(ann));
    }
    return j.dump(2) + "\n";
}

namespace {

std::vector<std::filesystem::path> json_documents(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw IoError(path.string() + " does not exist");
    }
    if (!std::filesystem::is_directory(path)) {
        return {path};
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace

std::vector<ImageAnnotation> load_annotations(const std::filesystem::path& path) {
    std::vector<ImageAnnotation> all;
    for (const auto& file : json_documents(path)) {
        auto anns = parse_annotations(read_file(file));
        all.insert(all.end(), std::make_move_iterator(anns.begin()), std::make_move_iterator(anns.end()));
    }
    return all;
}

void write_annotations(const std::filesystem::path& path, std::span<const ImageAnnotation> anns) {
    write_file(path, save_annotations(anns));
}

LaneMap parse_lane_map(std::string_view document) {
    return with_parse_errors([&] {
        const json j = json::parse(document);
        LaneMap map;
        map.region = j.at("region").get<std::string>();
        for (const json& jl : j.at("lanes")) {
            Lane lane;
            lane.lane_id = jl.at("lane_id").get<std::string>();
            lane.road_id = jl.at("road_id").get<std::string>();
            lane.attributes = attributes_from_json(jl.at("attributes"));
            for (const json& v : jl.at("vertices")) {
                lane.vertices.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
            }
            map.lanes.push_back(std::move(lane));
        }
        validate(map);
        return map;
    });
}

std::string save_lane_map(const LaneMap& map) {
    json lanes = json::array();
    for (const Lane& lane : map.lanes) {
        json vertices = json::array();
        for (const GeoPoint& g : lane.vertices) {
            vertices.push_back({g.lon, g.lat});
        }
        lanes.push_back({{"lane_id", lane.lane_id},
                         {"road_id", lane.road_id},
                         {"attributes", attributes_to_json(lane.attributes)},
                         {"vertices", std::move(vertices)}});
    }
    return json{{"region", map.region}, {"lanes", std::move(lanes)}}.dump(2) + "\n";
}

LaneMap load_lane_map(const std::filesystem::path& path) {
    return parse_lane_map(read_file(path));
}

std::vector<LaneMap> load_lane_maps(const std::filesystem::path& path) {
    std::vector<LaneMap> maps;
    for (const auto& file : json_documents(path)) {
        const std::string text = read_file(file);
        const bool region = with_parse_errors([&] {
            const json j = json::parse(text);
            return j.is_object() && j.contains("region");
        });
        if (region) {
            maps.push_back(parse_lane_map(text));
            continue;
        }
        for (const ImageAnnotation& ann : parse_annotations(text)) {
            maps.push_back(to_lane_map(ann));
        }
    }
    return maps;
}

LaneMap to_lane_map(const ImageAnnotation& ann) {
    LaneMap map;
    map.region = ann.image_id;
    for (const LaneAnnotation& la : ann.lanes) {
        Lane lane{la.lane_id, la.road_id, la.attributes, {}};
        for (const PixelPoint& p : la.vertices) {
            lane.vertices.push_back(pixel_to_geo(ann.geo_transform, p));
        }
        map.lanes.push_back(std::move(lane));
    }
    return map;
}

LaneMask rasterize_mask(const ImageAnnotation& ann, double stroke_width) {
    if (!(stroke_width >= 1.0)) {
        throw ValidationError("stroke_width must be >= 1");
    }
    LaneMask mask{ann.width, ann.height, stroke_width,
                  std::vector<std::uint8_t>(static_cast<std::size_t>(ann.width) * ann.height, 0)};
    const double radius = stroke_width / 2.0;
    for (const LaneAnnotation& lane : ann.lanes) {
        for (std::size_t i = 1; i < lane.vertices.size(); ++i) {
            const PixelPoint a = lane.vertices[i - 1];
            const PixelPoint b = lane.vertices[i];
            // Pixel (x, y) has center (x + 0.5, y + 0.5).
            const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - radius - 0.5)));
            const int x1 = std::min(ann.width - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + radius - 0.5)));
            const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - radius - 0.5)));
            const int y1 = std::min(ann.height - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + radius - 0.5)));
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    if (point_segment_distance({x + 0.5, y + 0.5}, a, b) <= radius) {
                        mask.pixels[static_cast<std::size_t>(y) * ann.width + x] = 1;
                    }
                }
            }
        }
    }
    return mask;
}

void write_mask_png(const std::filesystem::path& path, const LaneMask& mask) {
    GrayImage img{mask.width, mask.height, mask.pixels};
    for (auto& v : img.pixels) {
        v = v ? 255 : 0;
    }
    write_png_gray(path, img);
}

LaneMask read_mask_png(const std::filesystem::path& path) {
    GrayImage img = read_png_gray(path);
    LaneMask mask{img.width, img.height, 0.0, std::move(img.pixels)};
    for (auto& v : mask.pixels) {
        v = v >= 128 ? 1 : 0;
    }
    return mask;
}

std::string_view to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "test";
}

std::size_t SplitAssignment::count(Split s) const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [s](const auto& e) { return e.second == s; }));
}

std::optional<Split> SplitAssignment::find(std::string_view id) const {
    for (const auto& [name, split] : entries) {
        if (name == id) {
            return split;
        }
    }
    return std::nullopt;
}

SplitAssignment split_dataset(std::span<const std::string> ids, std::uint64_t seed) {
    if (ids.empty()) {
        throw ValidationError("cannot split an empty id list");
    }
    std::unordered_set<std::string_view> seen;
    for (const std::string& id : ids) {
        if (!seen.insert(id).second) {
            throw ValidationError("duplicate image id '" + id + "'");
        }
    }
    const std::size_t n = ids.size();
    const auto n_train = static_cast<std::size_t>(std::floor(0.7 * static_cast<double>(n) + 0.5));
    const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::floor(0.2 * static_cast<double>(n) + 0.5)));

    std::vector<std::pair<std::uint64_t, std::size_t>> order;
    order.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        order.emplace_back(seeded_hash(ids[i], seed), i);
    }
    std::sort(order.begin(), order.end(), [&](const auto& l, const auto& r) {
        return l.first != r.first ? l.first < r.first : ids[l.second] < ids[r.second];
    });

    SplitAssignment out;
    out.seed = seed;
    out.entries.resize(n);
    for (std::size_t rank = 0; rank < n; ++rank) {
        const std::size_t i = order[rank].second;
        const Split s = rank < n_train ? Split::Train : (rank < n_train + n_val ? Split::Val : Split::Test);
        out.entries[i] = {ids[i], s};
    }
    return out;
}

std::string format_split_manifest(const SplitAssignment& split) {
    std::string out;
    for (const auto& [id, s] : split.entries) {
        out += id;
        out += '\t';
        out += to_string(s);
        out += '\n';
    }
    return out;
}

}  // namespace lanemap
