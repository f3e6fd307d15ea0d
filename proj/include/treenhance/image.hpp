#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace trenh {

struct Rgb {
    float r = 0.0f;
    float g = 0.0f;
    float b = 0.0f;
};

/// Hexcone HSV: h in degrees [0,360), s and v in [0,1].
struct HsvPixel {
    float h = 0.0f;
    float s = 0.0f;
    float v = 0.0f;
};

enum class Channel : int { R = 0, G = 1, B = 2 };

/// Dense H x W x 3 raster of floats, interleaved RGB, row major.
class Image {
public:
    static constexpr std::size_t kChannels = 3;

    Image() = default;
    Image(std::size_t height, std::size_t width, float fill = 0.0f);
    Image(std::size_t height, std::size_t width, std::vector<float> data);

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t pixels() const noexcept { return height_ * width_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    float& at(std::size_t y, std::size_t x, std::size_t c) noexcept {
        return data_[(y * width_ + x) * kChannels + c];
    }
    float at(std::size_t y, std::size_t x, std::size_t c) const noexcept {
        return data_[(y * width_ + x) * kChannels + c];
    }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }

    bool same_shape(const Image& other) const noexcept {
        return height_ == other.height_ && width_ == other.width_;
    }

    /// Clamps every value into [0,1] in place.
    void clip_inplace() noexcept;

    /// Per-channel mean over all pixels, accumulated in double.
    std::array<double, 3> channel_means() const noexcept;

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<float> data_;
};

inline float clip(float v) noexcept { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }

HsvPixel rgb_to_hsv(Rgb p) noexcept;
Rgb hsv_to_rgb(HsvPixel p) noexcept;

/// Bilinear resampling with half-pixel center alignment and edge clamping.
Image resize(const Image& img, std::size_t height, std::size_t width);

/// Horizontal mirror.
Image flip_horizontal(const Image& img);

/// Copies the rectangle [top, top+height) x [left, left+width).
Image crop(const Image& img, std::size_t top, std::size_t left, std::size_t height,
           std::size_t width);

/// 8-bit quantization, round half away from zero after clamping.
std::uint8_t quantize(float v) noexcept;

/// PNG (8-bit RGB or RGBA, alpha dropped) and binary PPM P6 with maxval 255.
/// The format is chosen from the file contents on load and from the
/// extension on save.
Image load_image(const std::filesystem::path& path);
void save_image(const Image& img, const std::filesystem::path& path);

/// Order-sensitive FNV-1a over the raw float bytes; used to check that
/// operators never touch their input.
std::uint64_t checksum(const Image& img) noexcept;

}  // namespace trenh
