#include "treenhance/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "treenhance/error.hpp"

namespace trenh {
namespace {

constexpr std::array<std::pair<Family, std::string_view>, 14> kFamilyNames = {{
    {Family::Brightness, "brightness"},
    {Family::Contrast, "contrast"},
    {Family::Gamma, "gamma"},
    {Family::Saturation, "saturation"},
    {Family::Hue, "hue"},
    {Family::GrayWorld, "gray_world"},
    {Family::MaxRgb, "max_rgb"},
    {Family::Median, "median"},
    {Family::GaussianBlur, "gaussian_blur"},
    {Family::Sharpen, "sharpen"},
    {Family::EdgeEnhance, "edge_enhance"},
    {Family::Detail, "detail"},
    {Family::Smooth, "smooth"},
    {Family::Stop, "stop"},
}};

constexpr std::array<ChannelMask, 4> kChannelModes = {ChannelMask::All, ChannelMask::R,
                                                      ChannelMask::G, ChannelMask::B};

bool masked(ChannelMask mask, std::size_t c) noexcept {
    return mask == ChannelMask::All || static_cast<std::size_t>(mask) - 1 == c;
}

// Applies f to every masked channel value; unmasked values are copied as is.
template <typename F>
Image map_masked(const Image& img, ChannelMask mask, F f) {
    Image out = img;
    auto data = out.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t c = i % Image::kChannels;
        if (masked(mask, c)) data[i] = clip(static_cast<float>(f(data[i], c)));
    }
    return out;
}

template <typename F>
Image map_hsv(const Image& img, F f) {
    Image out = img;
    auto data = out.data();
    for (std::size_t i = 0; i < data.size(); i += Image::kChannels) {
        HsvPixel hsv = rgb_to_hsv({data[i], data[i + 1], data[i + 2]});
        f(hsv);
        const Rgb rgb = hsv_to_rgb(hsv);
        data[i] = clip(rgb.r);
        data[i + 1] = clip(rgb.g);
        data[i + 2] = clip(rgb.b);
    }
    return out;
}

std::size_t clamp_index(std::ptrdiff_t i, std::size_t n) noexcept {
    if (i < 0) return 0;
    if (static_cast<std::size_t>(i) >= n) return n - 1;
    return static_cast<std::size_t>(i);
}

void add_parametric(std::vector<Operation>& ops, Family family, float low, float high) {
    for (float p : {low, high}) {
        for (ChannelMask mask : kChannelModes) {
            ops.push_back({static_cast<int>(ops.size()), family, mask, p, false});
        }
    }
}

void add_global(std::vector<Operation>& ops, Family family, float param) {
    ops.push_back({static_cast<int>(ops.size()), family, ChannelMask::All, param, false});
}

}  // namespace

std::string_view to_string(Family family) noexcept {
    for (const auto& [f, name] : kFamilyNames) {
        if (f == family) return name;
    }
    return "unknown";
}

std::string_view to_string(ChannelMask mask) noexcept {
    switch (mask) {
        case ChannelMask::All: return "ALL";
        case ChannelMask::R: return "R";
        case ChannelMask::G: return "G";
        case ChannelMask::B: return "B";
    }
    return "ALL";
}

Family family_from_string(std::string_view name) {
    for (const auto& [f, n] : kFamilyNames) {
        if (n == name) return f;
    }
    throw Error(ErrorKind::UnknownOperation, "unknown operation family '" + std::string(name) + "'");
}

ChannelMask channel_from_string(std::string_view name) {
    for (ChannelMask m : kChannelModes) {
        if (to_string(m) == name) return m;
    }
    throw Error(ErrorKind::UnknownOperation, "unknown channel mask '" + std::string(name) + "'");
}

Catalog::Catalog(std::string name, std::vector<Operation> ops)
    : name_(std::move(name)), ops_(std::move(ops)) {
    if (ops_.empty()) throw Error(ErrorKind::InvalidArgument, "catalog is empty");
    for (std::size_t i = 0; i < ops_.size(); ++i) {
        const Operation& op = ops_[i];
        if (op.id != static_cast<int>(i)) {
            throw Error(ErrorKind::InvalidArgument, "catalog ids must be dense and ordered");
        }
        if (op.terminal != (op.family == Family::Stop)) {
            throw Error(ErrorKind::InvalidArgument, "only the stop operation may be terminal");
        }
        if (op.terminal) {
            if (stop_id_ >= 0) {
                throw Error(ErrorKind::InvalidArgument, "catalog contains more than one stop");
            }
            stop_id_ = op.id;
        }
    }
    if (stop_id_ < 0) throw Error(ErrorKind::InvalidArgument, "catalog has no stop operation");
}

Catalog catalog(std::string_view name) {
    std::vector<Operation> ops;
    ops.push_back({0, Family::Stop, ChannelMask::All, 0.0f, true});
    if (name == "lol") {
        add_parametric(ops, Family::Brightness, -0.1f, 0.1f);
        add_parametric(ops, Family::Contrast, 0.8f, 2.0f);
        add_parametric(ops, Family::Gamma, 0.6f, 1.1f);
        add_global(ops, Family::Saturation, 0.5f);
        add_global(ops, Family::Saturation, 2.0f);
        add_global(ops, Family::Hue, -18.0f);
        add_global(ops, Family::Hue, 18.0f);
        add_global(ops, Family::GrayWorld, 0.0f);
        add_global(ops, Family::MaxRgb, 0.0f);
        add_global(ops, Family::Median, 3.0f);
        add_global(ops, Family::GaussianBlur, 2.0f);
        add_global(ops, Family::Sharpen, 0.0f);
        add_global(ops, Family::EdgeEnhance, 0.0f);
        add_global(ops, Family::Detail, 0.0f);
        add_global(ops, Family::Smooth, 0.0f);
        return Catalog("lol", std::move(ops));
    }
    if (name == "fivek") {
        add_parametric(ops, Family::Brightness, -0.05f, 0.05f);
        add_parametric(ops, Family::Contrast, 0.894f, 1.414f);
        add_parametric(ops, Family::Gamma, 0.775f, 1.05f);
        add_global(ops, Family::Saturation, 0.707f);
        add_global(ops, Family::Saturation, 1.414f);
        add_global(ops, Family::Hue, -9.0f);
        add_global(ops, Family::Hue, 9.0f);
        return Catalog("fivek", std::move(ops));
    }
    throw Error(ErrorKind::UnknownCatalog, "unknown catalog '" + std::string(name) + "'");
}

nlohmann::json catalog_to_json(const Catalog& cat) {
    auto arr = nlohmann::json::array();
    for (const Operation& op : cat.ops()) {
        arr.push_back({{"id", op.id},
                       {"family", to_string(op.family)},
                       {"channel", to_string(op.channel)},
                       {"param", op.param},
                       {"terminal", op.terminal}});
    }
    return arr;
}

Catalog catalog_from_json(const nlohmann::json& j, std::string name) {
    if (!j.is_array()) throw Error(ErrorKind::InvalidArgument, "catalog JSON must be an array");
    std::vector<Operation> ops;
    for (const auto& item : j) {
        Operation op;
        op.id = item.at("id").get<int>();
        op.family = family_from_string(item.at("family").get<std::string>());
        op.channel = channel_from_string(item.value("channel", std::string("ALL")));
        op.param = item.value("param", 0.0f);
        op.terminal = item.value("terminal", op.family == Family::Stop);
        ops.push_back(op);
    }
    return Catalog(std::move(name), std::move(ops));
}

Image apply(const Operation& op, const Image& img) {
    switch (op.family) {
        case Family::Brightness: {
            const double delta = op.param;
            return map_masked(img, op.channel, [delta](float x, std::size_t) { return x + delta; });
        }
        case Family::Contrast: {
            const auto mean = img.channel_means();
            const double beta = op.param;
            return map_masked(img, op.channel, [&mean, beta](float x, std::size_t c) {
                return mean[c] + beta * (x - mean[c]);
            });
        }
        case Family::Gamma: {
            const double gamma = op.param;
            return map_masked(img, op.channel, [gamma](float x, std::size_t) {
                return std::pow(static_cast<double>(x), gamma);
            });
        }
        case Family::Saturation: {
            const float factor = op.param;
            return map_hsv(img, [factor](HsvPixel& p) { p.s = clip(p.s * factor); });
        }
        case Family::Hue: {
            const float degrees = op.param;
            return map_hsv(img, [degrees](HsvPixel& p) {
                float h = std::fmod(p.h + degrees, 360.0f);
                if (h < 0.0f) h += 360.0f;
                p.h = h;
            });
        }
        case Family::GrayWorld: return gray_world(img);
        case Family::MaxRgb: return max_rgb(img);
        case Family::Median: return median3x3(img);
        case Family::GaussianBlur: return gaussian_blur(img, op.param);
        case Family::Sharpen: return convolve3x3(img, kSharpenKernel);
        case Family::EdgeEnhance: return convolve3x3(img, kEdgeEnhanceKernel);
        case Family::Detail: return convolve3x3(img, kDetailKernel);
        case Family::Smooth: return convolve3x3(img, kSmoothKernel);
        case Family::Stop: break;
    }
    throw Error(ErrorKind::InvalidArgument,
                "stop terminates an episode and cannot be applied to an image");
}

Image apply_sequence(const Catalog& cat, std::span<const int> ids, const Image& img) {
    Image current = img;
    for (int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= cat.size()) {
            throw Error(ErrorKind::UnknownOperation,
                        "operation id " + std::to_string(id) + " not in catalog " + cat.name());
        }
        current = apply(cat[static_cast<std::size_t>(id)], current);
    }
    return current;
}

Image gray_world(const Image& img) {
    const auto mean = img.channel_means();
    const double gray = (mean[0] + mean[1] + mean[2]) / 3.0;
    std::array<double, 3> gain{1.0, 1.0, 1.0};
    for (std::size_t c = 0; c < 3; ++c) {
        if (mean[c] >= 1e-6) gain[c] = gray / mean[c];
    }
    return map_masked(img, ChannelMask::All,
                      [&gain](float x, std::size_t c) { return gain[c] * x; });
}

Image max_rgb(const Image& img) {
    std::array<float, 3> peak{0.0f, 0.0f, 0.0f};
    const auto data = img.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
        peak[i % 3] = std::max(peak[i % 3], data[i]);
    }
    return map_masked(img, ChannelMask::All, [&peak](float x, std::size_t c) {
        return peak[c] < 1e-6f ? static_cast<double>(x)
                               : static_cast<double>(x) / static_cast<double>(peak[c]);
    });
}

Image convolve3x3(const Image& img, const Kernel3x3& kernel) {
    const std::size_t h = img.height(), w = img.width();
    Image out(h, w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < Image::kChannels; ++c) {
                double acc = 0.0;
                for (int dy = -1; dy <= 1; ++dy) {
                    const std::size_t yy = clamp_index(static_cast<std::ptrdiff_t>(y) + dy, h);
                    for (int dx = -1; dx <= 1; ++dx) {
                        const std::size_t xx =
                            clamp_index(static_cast<std::ptrdiff_t>(x) + dx, w);
                        acc += static_cast<double>(kernel[(dy + 1) * 3 + (dx + 1)]) *
                               img.at(yy, xx, c);
                    }
                }
                out.at(y, x, c) = clip(static_cast<float>(acc));
            }
        }
    }
    return out;
}

Image median3x3(const Image& img) {
    const std::size_t h = img.height(), w = img.width();
    Image out(h, w);
    std::array<float, 9> window{};
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < Image::kChannels; ++c) {
                std::size_t k = 0;
                for (int dy = -1; dy <= 1; ++dy) {
                    const std::size_t yy = clamp_index(static_cast<std::ptrdiff_t>(y) + dy, h);
                    for (int dx = -1; dx <= 1; ++dx) {
                        window[k++] =
                            img.at(yy, clamp_index(static_cast<std::ptrdiff_t>(x) + dx, w), c);
                    }
                }
                std::nth_element(window.begin(), window.begin() + 4, window.end());
                out.at(y, x, c) = window[4];
            }
        }
    }
    return out;
}

std::vector<double> gaussian_kernel(float sigma) {
    if (!(sigma > 0.0f)) {
        throw Error(ErrorKind::InvalidArgument, "gaussian sigma must be positive");
    }
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
    std::vector<double> weights(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        const double wk = std::exp(-static_cast<double>(k * k) / (2.0 * sigma * sigma));
        weights[static_cast<std::size_t>(k + radius)] = wk;
        sum += wk;
    }
    for (double& wk : weights) wk /= sum;
    return weights;
}

Image gaussian_blur(const Image& img, float sigma) {
    const auto weights = gaussian_kernel(sigma);
    const auto radius = static_cast<std::ptrdiff_t>(weights.size() / 2);
    const std::size_t h = img.height(), w = img.width();
    std::vector<double> horizontal(img.size());
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < Image::kChannels; ++c) {
                double acc = 0.0;
                for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
                    acc += weights[static_cast<std::size_t>(k + radius)] *
                           img.at(y, clamp_index(static_cast<std::ptrdiff_t>(x) + k, w), c);
                }
                horizontal[(y * w + x) * Image::kChannels + c] = acc;
            }
        }
    }
    Image out(h, w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < Image::kChannels; ++c) {
                double acc = 0.0;
                for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
                    const std::size_t yy = clamp_index(static_cast<std::ptrdiff_t>(y) + k, h);
                    acc += weights[static_cast<std::size_t>(k + radius)] *
                           horizontal[(yy * w + x) * Image::kChannels + c];
                }
                out.at(y, x, c) = clip(static_cast<float>(acc));
            }
        }
    }
    return out;
}

}  // namespace trenh
