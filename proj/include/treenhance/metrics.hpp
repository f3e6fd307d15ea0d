#pragma once

#include "treenhance/image.hpp"

namespace trenh {

enum class MseScale { Unit, Byte };

/// Parameters of the terminal return r(x) = exp(-alpha * mse(x, target)).
/// With Byte scale the squared error is measured on values multiplied by 255.
struct ReturnConfig {
    double alpha = 0.05;
    MseScale mse_scale = MseScale::Byte;
};

double mse(const Image& a, const Image& b, MseScale scale = MseScale::Unit);
double return_r(const Image& x, const Image& target, const ReturnConfig& cfg = {});

/// 10 log10(1 / mse) on [0,1] values, capped at 100 dB.
double psnr(const Image& a, const Image& b);

/// Mean local SSIM on BT.601 luma with an 11x11 Gaussian window (sigma 1.5).
double ssim(const Image& a, const Image& b);

/// Mean CIE76 colour difference in CIELAB (sRGB input, D65 white).
double delta_e(const Image& a, const Image& b);

struct Lab {
    double l = 0.0;
    double a = 0.0;
    double b = 0.0;
};
Lab srgb_to_lab(Rgb p) noexcept;

}  // namespace trenh
