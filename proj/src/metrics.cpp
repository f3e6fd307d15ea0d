#include "treenhance/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "treenhance/error.hpp"

namespace trenh {
namespace {

void require_same_shape(const Image& a, const Image& b) {
    if (!a.same_shape(b) || a.empty()) {
        throw Error(ErrorKind::DimensionMismatch,
                    "metric inputs differ in size: " + std::to_string(a.height()) + "x" +
                        std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                        std::to_string(b.width()));
    }
}

std::vector<double> luma(const Image& img) {
    std::vector<double> y(img.pixels());
    const auto d = img.data();
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = 0.299 * d[3 * i] + 0.587 * d[3 * i + 1] + 0.114 * d[3 * i + 2];
    }
    return y;
}

// Separable Gaussian filtering over a plane; the window is truncated at the
// borders and renormalized so every output is a proper weighted mean.
std::vector<double> filter_plane(const std::vector<double>& plane, std::size_t h, std::size_t w,
                                 const std::vector<double>& g) {
    const auto r = static_cast<std::ptrdiff_t>(g.size() / 2);
    std::vector<double> tmp(plane.size()), out(plane.size());
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double acc = 0.0, norm = 0.0;
            for (std::ptrdiff_t k = -r; k <= r; ++k) {
                const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + k;
                if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(w)) continue;
                const double wk = g[static_cast<std::size_t>(k + r)];
                acc += wk * plane[y * w + static_cast<std::size_t>(xx)];
                norm += wk;
            }
            tmp[y * w + x] = acc / norm;
        }
    }
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double acc = 0.0, norm = 0.0;
            for (std::ptrdiff_t k = -r; k <= r; ++k) {
                const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + k;
                if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(h)) continue;
                const double wk = g[static_cast<std::size_t>(k + r)];
                acc += wk * tmp[static_cast<std::size_t>(yy) * w + x];
                norm += wk;
            }
            out[y * w + x] = acc / norm;
        }
    }
    return out;
}

double srgb_to_linear(double v) noexcept {
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double lab_f(double t) noexcept {
    constexpr double delta = 6.0 / 29.0;
    return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

}  // namespace

double mse(const Image& a, const Image& b, MseScale scale) {
    require_same_shape(a, b);
    const auto da = a.data(), db = b.data();
    double sum = 0.0;
    for (std::size_t i = 0; i < da.size(); ++i) {
        const double d = static_cast<double>(da[i]) - static_cast<double>(db[i]);
        sum += d * d;
    }
    const double m = sum / static_cast<double>(da.size());
    return scale == MseScale::Byte ? m * 255.0 * 255.0 : m;
}

double return_r(const Image& x, const Image& target, const ReturnConfig& cfg) {
    if (!(cfg.alpha > 0.0)) throw Error(ErrorKind::InvalidArgument, "return alpha must be > 0");
    return std::exp(-cfg.alpha * mse(x, target, cfg.mse_scale));
}

double psnr(const Image& a, const Image& b) {
    const double m = mse(a, b, MseScale::Unit);
    if (m < 1e-10) return 100.0;
    return std::min(100.0, 10.0 * std::log10(1.0 / m));
}

double ssim(const Image& a, const Image& b) {
    require_same_shape(a, b);
    constexpr double k1 = 0.01, k2 = 0.03, range = 1.0;
    constexpr double c1 = (k1 * range) * (k1 * range);
    constexpr double c2 = (k2 * range) * (k2 * range);
    std::vector<double> g(11);
    for (int k = -5; k <= 5; ++k) g[static_cast<std::size_t>(k + 5)] = std::exp(-k * k / (2.0 * 1.5 * 1.5));

    const std::size_t h = a.height(), w = a.width();
    const auto ya = luma(a), yb = luma(b);
    std::vector<double> aa(ya.size()), bb(ya.size()), ab(ya.size());
    for (std::size_t i = 0; i < ya.size(); ++i) {
        aa[i] = ya[i] * ya[i];
        bb[i] = yb[i] * yb[i];
        ab[i] = ya[i] * yb[i];
    }
    const auto mu_a = filter_plane(ya, h, w, g);
    const auto mu_b = filter_plane(yb, h, w, g);
    const auto e_aa = filter_plane(aa, h, w, g);
    const auto e_bb = filter_plane(bb, h, w, g);
    const auto e_ab = filter_plane(ab, h, w, g);
    double total = 0.0;
    for (std::size_t i = 0; i < ya.size(); ++i) {
        const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
        const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
        const double cov = e_ab[i] - mu_a[i] * mu_b[i];
        total += ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
                 ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (var_a + var_b + c2));
    }
    return total / static_cast<double>(ya.size());
}

Lab srgb_to_lab(Rgb p) noexcept {
    const double r = srgb_to_linear(p.r), g = srgb_to_linear(p.g), b = srgb_to_linear(p.b);
    const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    const double fx = lab_f(x / 0.95047), fy = lab_f(y / 1.0), fz = lab_f(z / 1.08883);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

double delta_e(const Image& a, const Image& b) {
    require_same_shape(a, b);
    const auto da = a.data(), db = b.data();
    double total = 0.0;
    for (std::size_t i = 0; i < da.size(); i += 3) {
        const Lab la = srgb_to_lab({da[i], da[i + 1], da[i + 2]});
        const Lab lb = srgb_to_lab({db[i], db[i + 1], db[i + 2]});
        total += std::sqrt((la.l - lb.l) * (la.l - lb.l) + (la.a - lb.a) * (la.a - lb.a) +
                           (la.b - lb.b) * (la.b - lb.b));
    }
    return total / static_cast<double>(a.pixels());
}

}  // namespace trenh
