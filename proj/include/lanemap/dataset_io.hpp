#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lanemap/lane_model.hpp"

namespace lanemap {

struct LaneAnnotation {
    std::string lane_id;
    std::string road_id;
    LaneAttributes attributes;
    std::vector<PixelPoint> vertices;

    friend bool operator==(const LaneAnnotation&, const LaneAnnotation&) = default;
};

// One exported image patch with its lanes in pixel coordinates.
struct ImageAnnotation {
    std::string image_id;
    int width = 1280;
    int height = 1280;
    GeoTransform geo_transform;
    std::vector<LaneAnnotation> lanes;

    friend bool operator==(const ImageAnnotation&, const ImageAnnotation&) = default;
};

// Throws ValidationError mentioning image_id and lane_id.
void validate(const ImageAnnotation& ann);

// Annotation documents are JSON; a document holds either one annotation
// object or an array of them:
//
//   {"image_id": "...", "width": 1280, "height": 1280,
//    "geo_transform": [a, b, c, d, e, f],
//    "lanes": [{"lane_id": "...", "road_id": "...",
//               "attributes": {"line_form": "single", "color": "white",
//                              "continuity": "solid"},
//               "vertices": [[x, y], ...]}]}
std::vector<ImageAnnotation> parse_annotations(std::string_view document);
std::string save_annotations(std::span<const ImageAnnotation> anns);

// Loads one document, or every *.json document of a directory in
// lexicographic filename order.
std::vector<ImageAnnotation> load_annotations(const std::filesystem::path& path);
void write_annotations(const std::filesystem::path& path, std::span<const ImageAnnotation> anns);

// Geo-referenced region documents:
//   {"region": "...", "lanes": [{..., "vertices": [[lon, lat], ...]}]}
LaneMap parse_lane_map(std::string_view document);
std::string save_lane_map(const LaneMap& map);
LaneMap load_lane_map(const std::filesystem::path& path);
// Region documents and annotation documents (converted with to_lane_map)
// from a file or a directory of *.json.
std::vector<LaneMap> load_lane_maps(const std::filesystem::path& path);

// Lanes of an image mapped back to WGS84 through its geo transform.
LaneMap to_lane_map(const ImageAnnotation& ann);

struct LaneMask {
    int width = 0;
    int height = 0;
    double stroke_width = 0.0;
    std::vector<std::uint8_t> pixels;  // row-major, values 0 or 1

    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    friend bool operator==(const LaneMask&, const LaneMask&) = default;
};

inline constexpr double kDefaultStrokeWidth = 5.0;

// A pixel is set when its center lies within stroke_width/2 of a lane segment.
LaneMask rasterize_mask(const ImageAnnotation& ann, double stroke_width = kDefaultStrokeWidth);

void write_mask_png(const std::filesystem::path& path, const LaneMask& mask);
LaneMask read_mask_png(const std::filesystem::path& path);

enum class Split { Train, Val, Test };
std::string_view to_string(Split s);

struct SplitAssignment {
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, Split>> entries;  // input id order

    std::size_t count(Split s) const;
    std::optional<Split> find(std::string_view id) const;
};

// 7:2:1 partition of ids ordered by a seeded hash of the id.
SplitAssignment split_dataset(std::span<const std::string> ids, std::uint64_t seed);

// Lines of `image_id<TAB>split`.
std::string format_split_manifest(const SplitAssignment& split);

}  // namespace lanemap
