#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "treenhance/image.hpp"

namespace trenh {

enum class Family {
    Brightness,
    Contrast,
    Gamma,
    Saturation,
    Hue,
    GrayWorld,
    MaxRgb,
    Median,
    GaussianBlur,
    Sharpen,
    EdgeEnhance,
    Detail,
    Smooth,
    Stop,
};

enum class ChannelMask { All, R, G, B };

std::string_view to_string(Family family) noexcept;
std::string_view to_string(ChannelMask mask) noexcept;
Family family_from_string(std::string_view name);
ChannelMask channel_from_string(std::string_view name);

/// One entry of an operator catalog. `param` holds the family's scalar
/// (delta, beta, gamma, saturation factor, hue degrees, sigma or window size).
struct Operation {
    int id = 0;
    Family family = Family::Stop;
    ChannelMask channel = ChannelMask::All;
    float param = 0.0f;
    bool terminal = false;

    friend bool operator==(const Operation&, const Operation&) = default;
};

/// Ordered, dense set of operations. Index in `ops` equals `Operation::id`,
/// which is also the index into evaluator policy vectors.
class Catalog {
public:
    Catalog(std::string name, std::vector<Operation> ops);

    const std::string& name() const noexcept { return name_; }
    std::size_t size() const noexcept { return ops_.size(); }
    const Operation& operator[](std::size_t id) const { return ops_.at(id); }
    std::span<const Operation> ops() const noexcept { return ops_; }
    int stop_id() const noexcept { return stop_id_; }

private:
    std::string name_;
    std::vector<Operation> ops_;
    int stop_id_ = -1;
};

/// Built-in catalogs: "lol" (37 operations) and "fivek" (29 operations).
/// Both place STOP at id 0, followed by the parametric families in the
/// order brightness, contrast, gamma (each: negative/decreasing variant
/// first, channel order ALL, R, G, B), saturation, hue, then for "lol" the
/// white-balance and spatial operators.
Catalog catalog(std::string_view name);

nlohmann::json catalog_to_json(const Catalog& cat);
Catalog catalog_from_json(const nlohmann::json& j, std::string name = "custom");

using Kernel3x3 = std::array<float, 9>;

inline constexpr Kernel3x3 kSharpenKernel = {-0.125f, -0.125f, -0.125f, -0.125f, 2.0f,
                                             -0.125f, -0.125f, -0.125f, -0.125f};
inline constexpr Kernel3x3 kEdgeEnhanceKernel = {-0.5f, -0.5f, -0.5f, -0.5f, 5.0f,
                                                 -0.5f, -0.5f, -0.5f, -0.5f};
inline constexpr Kernel3x3 kDetailKernel = {0.0f,   -0.17f, 0.0f,   -0.17f, 1.67f,
                                            -0.17f, 0.0f,   -0.17f, 0.0f};
inline constexpr Kernel3x3 kSmoothKernel = {0.077f, 0.077f, 0.077f, 0.077f, 0.385f,
                                            0.077f, 0.077f, 0.077f, 0.077f};

/// Applies a non-terminal operation, returning a new image. Throws on STOP.
Image apply(const Operation& op, const Image& img);

/// Replays a sequence of catalog ids (STOP must not appear).
Image apply_sequence(const Catalog& cat, std::span<const int> ids, const Image& img);

Image gray_world(const Image& img);
Image max_rgb(const Image& img);
/// Correlation with replicate padding, per channel, clipped.
Image convolve3x3(const Image& img, const Kernel3x3& kernel);
Image median3x3(const Image& img);
Image gaussian_blur(const Image& img, float sigma);

/// Normalized 1-D Gaussian weights, half-width ceil(3 sigma).
std::vector<double> gaussian_kernel(float sigma);

}  // namespace trenh
