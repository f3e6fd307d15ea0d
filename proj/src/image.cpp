#include "treenhance/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "treenhance/error.hpp"

namespace trenh {

Image::Image(std::size_t height, std::size_t width, float fill)
    : height_(height), width_(width), data_(height * width * kChannels, fill) {
    if (height == 0 || width == 0) {
        throw Error(ErrorKind::InvalidArgument, "image dimensions must be at least 1x1");
    }
}

Image::Image(std::size_t height, std::size_t width, std::vector<float> data)
    : height_(height), width_(width), data_(std::move(data)) {
    if (height == 0 || width == 0) {
        throw Error(ErrorKind::InvalidArgument, "image dimensions must be at least 1x1");
    }
    if (data_.size() != height * width * kChannels) {
        throw Error(ErrorKind::DimensionMismatch,
                    "image data length " + std::to_string(data_.size()) + " does not match " +
                        std::to_string(height) + "x" + std::to_string(width) + "x3");
    }
}

void Image::clip_inplace() noexcept {
    for (float& v : data_) v = clip(v);
}

std::array<double, 3> Image::channel_means() const noexcept {
    std::array<double, 3> sum{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < data_.size(); i += kChannels) {
        sum[0] += data_[i];
        sum[1] += data_[i + 1];
        sum[2] += data_[i + 2];
    }
    const double n = static_cast<double>(pixels());
    for (double& s : sum) s /= n;
    return sum;
}

HsvPixel rgb_to_hsv(Rgb p) noexcept {
    const double r = p.r, g = p.g, b = p.b;
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double delta = mx - mn;
    double h = 0.0;
    if (delta > 0.0) {
        if (mx == r) {
            h = 60.0 * std::fmod((g - b) / delta, 6.0);
        } else if (mx == g) {
            h = 60.0 * ((b - r) / delta + 2.0);
        } else {
            h = 60.0 * ((r - g) / delta + 4.0);
        }
        if (h < 0.0) h += 360.0;
        if (h >= 360.0) h -= 360.0;
    }
    const double s = mx > 0.0 ? delta / mx : 0.0;
    return {static_cast<float>(h), static_cast<float>(s), static_cast<float>(mx)};
}

Rgb hsv_to_rgb(HsvPixel p) noexcept {
    double h = std::fmod(static_cast<double>(p.h), 360.0);
    if (h < 0.0) h += 360.0;
    const double s = std::clamp(static_cast<double>(p.s), 0.0, 1.0);
    const double v = std::clamp(static_cast<double>(p.v), 0.0, 1.0);
    const double c = v * s;
    const double hp = h / 60.0;
    const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    const double m = v - c;
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(hp) % 6) {
        case 0: r = c; g = x; break;
        case 1: r = x; g = c; break;
        case 2: g = c; b = x; break;
        case 3: g = x; b = c; break;
        case 4: r = x; b = c; break;
        default: r = c; b = x; break;
    }
    return {static_cast<float>(r + m), static_cast<float>(g + m), static_cast<float>(b + m)};
}

Image resize(const Image& img, std::size_t height, std::size_t width) {
    if (height == 0 || width == 0) {
        throw Error(ErrorKind::InvalidArgument, "resize target dimension must be >= 1");
    }
    if (height == img.height() && width == img.width()) return img;

    Image out(height, width);
    const double sy = static_cast<double>(img.height()) / static_cast<double>(height);
    const double sx = static_cast<double>(img.width()) / static_cast<double>(width);
    const double max_y = static_cast<double>(img.height() - 1);
    const double max_x = static_cast<double>(img.width() - 1);
    for (std::size_t y = 0; y < height; ++y) {
        const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, max_y);
        const auto y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, img.height() - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < width; ++x) {
            const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, max_x);
            const auto x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, img.width() - 1);
            const double wx = fx - static_cast<double>(x0);
            for (std::size_t c = 0; c < Image::kChannels; ++c) {
                const double top = (1.0 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c);
                const double bot = (1.0 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c);
                out.at(y, x, c) = clip(static_cast<float>((1.0 - wy) * top + wy * bot));
            }
        }
    }
    return out;
}

Image flip_horizontal(const Image& img) {
    Image out(img.height(), img.width());
    for (std::size_t y = 0; y < img.height(); ++y) {
        for (std::size_t x = 0; x < img.width(); ++x) {
            for (std::size_t c = 0; c < Image::kChannels; ++c) {
                out.at(y, img.width() - 1 - x, c) = img.at(y, x, c);
            }
        }
    }
    return out;
}

Image crop(const Image& img, std::size_t top, std::size_t left, std::size_t height,
           std::size_t width) {
    if (height == 0 || width == 0 || top + height > img.height() || left + width > img.width()) {
        throw Error(ErrorKind::InvalidArgument, "crop rectangle outside image");
    }
    Image out(height, width);
    for (std::size_t y = 0; y < height; ++y) {
        const float* src = &img.data()[((top + y) * img.width() + left) * Image::kChannels];
        std::memcpy(&out.data()[y * width * Image::kChannels], src,
                    width * Image::kChannels * sizeof(float));
    }
    return out;
}

std::uint8_t quantize(float v) noexcept {
    const double scaled = static_cast<double>(clip(v)) * 255.0;
    return static_cast<std::uint8_t>(std::lround(scaled));
}

std::uint64_t checksum(const Image& img) noexcept {
    std::uint64_t hash = 1469598103934665603ULL;
    auto mix = [&hash](const void* bytes, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(bytes);
        for (std::size_t i = 0; i < n; ++i) {
            hash ^= p[i];
            hash *= 1099511628211ULL;
        }
    };
    const std::uint64_t dims[2] = {img.height(), img.width()};
    mix(dims, sizeof(dims));
    mix(img.data().data(), img.data().size_bytes());
    return hash;
}

}  // namespace trenh
