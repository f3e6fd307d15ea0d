#pragma once

// Straight-line reference implementations used to check the production code.
// They work pixel by pixel in double precision and deliberately share no code
// with src/.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "treenhance/image.hpp"
#include "treenhance/metrics.hpp"
#include "treenhance/ops.hpp"

namespace trenh::oracle {

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

inline bool masked(ChannelMask m, int c) {
    switch (m) {
        case ChannelMask::All: return true;
        case ChannelMask::R: return c == 0;
        case ChannelMask::G: return c == 1;
        case ChannelMask::B: return c == 2;
    }
    return false;
}

inline double channel_mean(const Image& img, int c) {
    double s = 0.0;
    for (std::size_t y = 0; y < img.height(); ++y)
        for (std::size_t x = 0; x < img.width(); ++x) s += img.at(y, x, static_cast<std::size_t>(c));
    return s / static_cast<double>(img.height() * img.width());
}

inline double channel_max(const Image& img, int c) {
    double m = 0.0;
    for (std::size_t y = 0; y < img.height(); ++y)
        for (std::size_t x = 0; x < img.width(); ++x)
            m = std::max(m, static_cast<double>(img.at(y, x, static_cast<std::size_t>(c))));
    return m;
}

// Hexcone HSV written the way most textbooks present it.
inline void to_hsv(double r, double g, double b, double& h, double& s, double& v) {
    const double mx = std::max(r, std::max(g, b));
    const double mn = std::min(r, std::min(g, b));
    v = mx;
    s = mx <= 0.0 ? 0.0 : (mx - mn) / mx;
    if (mx == mn) {
        h = 0.0;
        return;
    }
    const double d = mx - mn;
    const double rc = (mx - r) / d, gc = (mx - g) / d, bc = (mx - b) / d;
    double hh;
    if (r == mx) hh = bc - gc;
    else if (g == mx) hh = 2.0 + rc - bc;
    else hh = 4.0 + gc - rc;
    hh = hh / 6.0;
    hh -= std::floor(hh);
    h = hh * 360.0;
}

inline void from_hsv(double h, double s, double v, double& r, double& g, double& b) {
    if (s <= 0.0) {
        r = g = b = v;
        return;
    }
    const double hh = h / 60.0;
    const int sector = static_cast<int>(std::floor(hh)) % 6;
    const double f = hh - std::floor(hh);
    const double p = v * (1.0 - s), q = v * (1.0 - s * f), t = v * (1.0 - s * (1.0 - f));
    switch (sector) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
}

inline double kernel_at(Family f, int ky, int kx) {
    const bool centre = ky == 1 && kx == 1;
    const bool cross = (ky == 1) != (kx == 1);
    switch (f) {
        case Family::Sharpen: return centre ? 2.0 : -0.125;
        case Family::EdgeEnhance: return centre ? 5.0 : -0.5;
        case Family::Detail: return centre ? 1.67 : (cross ? -0.17 : 0.0);
        case Family::Smooth: return centre ? 0.385 : 0.077;
        default: return 0.0;
    }
}

inline std::size_t clampi(long v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<long>(v, 0, static_cast<long>(n) - 1));
}

/// Dense 1-D Gaussian weights by direct evaluation.
inline std::vector<double> gaussian_weights(double sigma) {
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> w;
    double sum = 0.0;
    for (int k = -r; k <= r; ++k) {
        w.push_back(std::exp(-0.5 * k * k / (sigma * sigma)));
        sum += w.back();
    }
    for (double& v : w) v /= sum;
    return w;
}

/// Full 2-D Gaussian convolution with the outer-product kernel, no
/// separability shortcut.
inline Image dense_gaussian(const Image& img, double sigma) {
    const auto w = gaussian_weights(sigma);
    const long r = static_cast<long>(w.size() / 2);
    Image out(img.height(), img.width());
    for (std::size_t y = 0; y < img.height(); ++y)
        for (std::size_t x = 0; x < img.width(); ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (long dy = -r; dy <= r; ++dy)
                    for (long dx = -r; dx <= r; ++dx)
                        acc += w[static_cast<std::size_t>(dy + r)] * w[static_cast<std::size_t>(dx + r)] *
                               img.at(clampi(static_cast<long>(y) + dy, img.height()),
                                      clampi(static_cast<long>(x) + dx, img.width()), c);
                out.at(y, x, c) = static_cast<float>(clamp01(acc));
            }
    return out;
}

/// Median by full sort of the nine replicate-padded neighbours.
inline Image brute_median(const Image& img) {
    Image out(img.height(), img.width());
    for (std::size_t y = 0; y < img.height(); ++y)
        for (std::size_t x = 0; x < img.width(); ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                std::vector<float> v;
                for (long dy = -1; dy <= 1; ++dy)
                    for (long dx = -1; dx <= 1; ++dx)
                        v.push_back(img.at(clampi(static_cast<long>(y) + dy, img.height()),
                                           clampi(static_cast<long>(x) + dx, img.width()), c));
                std::sort(v.begin(), v.end());
                out.at(y, x, c) = v[4];
            }
    return out;
}

/// Scalar reference for one catalog operation.
inline Image apply(const Operation& op, const Image& img) {
    const std::size_t H = img.height(), W = img.width();
    Image out = img;
    switch (op.family) {
        case Family::Brightness:
        case Family::Contrast:
        case Family::Gamma: {
            for (int c = 0; c < 3; ++c) {
                if (!masked(op.channel, c)) continue;
                const double mu = channel_mean(img, c);
                for (std::size_t y = 0; y < H; ++y)
                    for (std::size_t x = 0; x < W; ++x) {
                        const double v = img.at(y, x, static_cast<std::size_t>(c));
                        double r = v;
                        if (op.family == Family::Brightness) r = v + op.param;
                        if (op.family == Family::Contrast) r = mu + op.param * (v - mu);
                        if (op.family == Family::Gamma) r = std::pow(v, static_cast<double>(op.param));
                        out.at(y, x, static_cast<std::size_t>(c)) = static_cast<float>(clamp01(r));
                    }
            }
            return out;
        }
        case Family::Saturation:
        case Family::Hue: {
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x) {
                    double h, s, v;
                    to_hsv(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2), h, s, v);
                    if (op.family == Family::Saturation) {
                        s = clamp01(s * op.param);
                    } else {
                        h = std::fmod(h + op.param + 720.0, 360.0);
                    }
                    double r, g, b;
                    from_hsv(h, s, v, r, g, b);
                    out.at(y, x, 0) = static_cast<float>(clamp01(r));
                    out.at(y, x, 1) = static_cast<float>(clamp01(g));
                    out.at(y, x, 2) = static_cast<float>(clamp01(b));
                }
            return out;
        }
        case Family::GrayWorld:
        case Family::MaxRgb: {
            std::array<double, 3> gain{1.0, 1.0, 1.0};
            const double gray = (channel_mean(img, 0) + channel_mean(img, 1) + channel_mean(img, 2)) / 3.0;
            for (int c = 0; c < 3; ++c) {
                const double stat = op.family == Family::GrayWorld ? channel_mean(img, c) : channel_max(img, c);
                if (stat >= 1e-6) gain[static_cast<std::size_t>(c)] = op.family == Family::GrayWorld ? gray / stat : 1.0 / stat;
            }
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x)
                    for (std::size_t c = 0; c < 3; ++c)
                        out.at(y, x, c) = static_cast<float>(clamp01(gain[c] * img.at(y, x, c)));
            return out;
        }
        case Family::Median: return brute_median(img);
        case Family::GaussianBlur: return dense_gaussian(img, op.param);
        case Family::Sharpen:
        case Family::EdgeEnhance:
        case Family::Detail:
        case Family::Smooth: {
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x)
                    for (std::size_t c = 0; c < 3; ++c) {
                        double acc = 0.0;
                        for (int ky = 0; ky < 3; ++ky)
                            for (int kx = 0; kx < 3; ++kx)
                                acc += kernel_at(op.family, ky, kx) *
                                       img.at(clampi(static_cast<long>(y) + ky - 1, H),
                                              clampi(static_cast<long>(x) + kx - 1, W), c);
                        out.at(y, x, c) = static_cast<float>(clamp01(acc));
                    }
            return out;
        }
        case Family::Stop: break;
    }
    return out;
}

inline double max_abs_diff(const Image& a, const Image& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i)
        m = std::max(m, std::fabs(static_cast<double>(a.data()[i]) - b.data()[i]));
    return m;
}

/// Best return over every sequence of at most `max_ops` non-stop
/// operations (the empty sequence included).
inline double best_return_exhaustive(const Catalog& cat, const Image& input, const Image& target,
                                     std::size_t max_ops, const ReturnConfig& ret) {
    double best = return_r(input, target, ret);
    std::function<void(const Image&, std::size_t)> walk = [&](const Image& img, std::size_t depth) {
        if (depth == max_ops) return;
        for (const Operation& op : cat.ops()) {
            if (op.terminal) continue;
            const Image next = trenh::apply(op, img);
            best = std::max(best, return_r(next, target, ret));
            walk(next, depth + 1);
        }
    };
    walk(input, 0);
    return best;
}

}  // namespace trenh::oracle
