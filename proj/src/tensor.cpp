#include "lanemap/tensor.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

#include "lanemap/error.hpp"

namespace lanemap {

Tensor::Tensor(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
    if (height < 0 || width < 0 || channels < 0) {
        throw ValidationError("negative tensor dimension");
    }
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Tensor downsample_mean(const Tensor& t, int stride) {
    if (stride < 1) {
        throw ValidationError("downsample stride must be >= 1");
    }
    if (stride == 1) {
        return t;
    }
    const int oh = (t.height() + stride - 1) / stride;
    const int ow = (t.width() + stride - 1) / stride;
    Tensor out(oh, ow, t.channels());
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const int y1 = std::min(t.height(), (oy + 1) * stride);
            const int x1 = std::min(t.width(), (ox + 1) * stride);
            const float inv = 1.0f / static_cast<float>((y1 - oy * stride) * (x1 - ox * stride));
            for (int c = 0; c < t.channels(); ++c) {
                float sum = 0.0f;
                for (int y = oy * stride; y < y1; ++y) {
                    for (int x = ox * stride; x < x1; ++x) {
                        sum += t.at(y, x, c);
                    }
                }
                out.at(oy, ox, c) = sum * inv;
            }
        }
    }
    return out;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
    const std::array<char, 4> bytes{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                                    static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
    out.write(bytes.data(), 4);
}

std::uint32_t get_u32(std::istream& in) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
        throw ParseError("truncated tensor stream");
    }
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t, std::uint32_t stride) {
    put_u32(out, static_cast<std::uint32_t>(t.height()));
    put_u32(out, static_cast<std::uint32_t>(t.width()));
    put_u32(out, static_cast<std::uint32_t>(t.channels()));
    put_u32(out, stride);
    for (float v : t.data()) {
        put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    if (!out) {
        throw IoError("failed writing tensor");
    }
}

TensorFile read_tensor(std::istream& in) {
    const std::uint32_t h = get_u32(in);
    const std::uint32_t w = get_u32(in);
    const std::uint32_t c = get_u32(in);
    const std::uint32_t stride = get_u32(in);
    constexpr std::uint32_t kMaxDim = 1u << 16;
    if (h > kMaxDim || w > kMaxDim || c > kMaxDim || stride == 0) {
        throw ParseError("implausible tensor header");
    }
    TensorFile file{Tensor(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c)), stride};
    for (float& v : file.tensor.data()) {
        v = std::bit_cast<float>(get_u32(in));
    }
    return file;
}

}  // namespace lanemap
