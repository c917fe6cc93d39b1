#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lanemap/dataset_io.hpp"
#include "lanemap/tensor.hpp"

namespace lanemap {

struct SynthConfig {
    std::uint64_t seed = 1;
    int width = 320;
    int height = 320;
    int min_lanes = 2;
    int max_lanes = 6;
    double min_spacing = 15.0;     // chord length between consecutive vertices, px
    double max_spacing = 40.0;
    double min_separation = 12.0;  // between any two lanes, px
    double max_curvature = 0.006;  // heading change per px of control polygon, rad
    double heading_spread = 0.5;   // |initial heading| from +x, rad
    double noise = 0.2;            // mask pixels flip with probability noise / 10
    double stroke_width = kDefaultStrokeWidth;

    void validate() const;
};

inline constexpr int kSynthFeatureChannels = 4;

// Lanes run left to right across the canvas; direction is therefore
// recoverable from local context.
struct SyntheticScene {
    ImageAnnotation annotation;
    LaneMask seg_mask;   // noisy copy of the rasterized annotation
    Tensor features;     // H x W x 4: mask blurred at sigma 2 and 6, x/W, y/H
    std::vector<PixelPoint> vertices;               // all lanes, concatenated
    std::vector<std::optional<std::size_t>> next;   // successor index, empty at lane ends
    std::vector<std::string> warnings;

    // Ground-truth lanes as index sequences into `vertices`.
    std::vector<std::vector<std::size_t>> chains() const;
};

// Flattened vertices and successor labels of an annotation.
void derive_labels(const ImageAnnotation& ann, std::vector<PixelPoint>& vertices,
                   std::vector<std::optional<std::size_t>>& next);

// Features for a mask (exposed so loaded scenes can be rebuilt).
Tensor synth_features(const LaneMask& mask);

SyntheticScene gen_scene(const SynthConfig& cfg);

struct SyntheticDataset {
    std::vector<SyntheticScene> scenes;
    SplitAssignment split;
};

// Scene i uses a seed derived from (cfg.seed, i); ids are "synth_<seed>_<i>".
SyntheticDataset gen_dataset(const SynthConfig& cfg, std::size_t n_scenes);
std::uint64_t scene_seed(std::uint64_t base_seed, std::size_t index);

// <dir>/<image_id>.json, <image_id>_mask.png, <image_id>_features.bin
void save_scene(const std::filesystem::path& dir, const SyntheticScene& scene);
SyntheticScene load_scene(const std::filesystem::path& dir, const std::string& image_id);

}  // namespace lanemap
