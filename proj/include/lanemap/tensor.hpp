#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace lanemap {

// Dense height x width x channels float raster, channel-fastest (HWC).
class Tensor {
public:
    Tensor() = default;
    Tensor(int height, int width, int channels, float fill = 0.0f);

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float& at(int y, int x, int c) { return data_[index(y, x, c)]; }
    float at(int y, int x, int c) const { return data_[index(y, x, c)]; }
    bool contains(int y, int x) const { return y >= 0 && y < height_ && x >= 0 && x < width_; }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::size_t index(int y, int x, int c) const {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<float> data_;
};

// Average-pool by an integer stride; output dims are ceil(dim / stride) and
// partial border cells average only their in-bounds pixels.
Tensor downsample_mean(const Tensor& t, int stride);

// Binary tensor format: 16-byte header of four little-endian uint32
// (height, width, channels, stride) followed by height*width*channels
// little-endian float32 values in HWC order.
struct TensorFile {
    Tensor tensor;
    std::uint32_t stride = 1;
};

void write_tensor(std::ostream& out, const Tensor& t, std::uint32_t stride);
TensorFile read_tensor(std::istream& in);

}  // namespace lanemap
