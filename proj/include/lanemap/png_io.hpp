#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace lanemap {

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;
};

void write_png_gray(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_png_gray(const std::filesystem::path& path);

}  // namespace lanemap
