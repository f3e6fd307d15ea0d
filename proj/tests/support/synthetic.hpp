#pragma once

// Deterministic synthetic images and pairs shared by the unit, CLI and
// acceptance tests.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "treenhance/image.hpp"
#include "treenhance/ops.hpp"

namespace trenh::testing {

/// Smooth colour field: a base colour, a linear gradient per channel and
/// four Gaussian blobs. Values stay in the mid range so that single edits
/// rarely saturate.
inline Image synthetic_image(std::uint64_t seed, std::size_t height, std::size_t width) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double base[3];
    double gx[3];
    double gy[3];
    for (int c = 0; c < 3; ++c) {
        base[c] = 0.3 + 0.3 * u(rng);
        gx[c] = 0.3 * (u(rng) - 0.5);
        gy[c] = 0.3 * (u(rng) - 0.5);
    }
    struct Blob {
        double x, y, r, col[3];
    };
    std::vector<Blob> blobs(4);
    for (Blob& b : blobs) {
        b.x = u(rng);
        b.y = u(rng);
        b.r = 0.1 + 0.2 * u(rng);
        for (double& c : b.col) c = 0.4 * (u(rng) - 0.5);
    }
    Image img(height, width);
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            const double fx = (static_cast<double>(x) + 0.5) / static_cast<double>(width);
            const double fy = (static_cast<double>(y) + 0.5) / static_cast<double>(height);
            for (int c = 0; c < 3; ++c) {
                double v = base[c] + gx[c] * (fx - 0.5) + gy[c] * (fy - 0.5);
                for (const Blob& b : blobs) {
                    const double d2 = ((fx - b.x) * (fx - b.x) + (fy - b.y) * (fy - b.y)) / (b.r * b.r);
                    v += b.col[c] * std::exp(-d2);
                }
                img.at(y, x, static_cast<std::size_t>(c)) = clip(static_cast<float>(v));
            }
        }
    }
    return img;
}

/// Uniform noise image, used where smoothness does not matter.
inline Image random_image(std::mt19937_64& rng, std::size_t height, std::size_t width) {
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    Image img(height, width);
    for (float& v : img.data()) v = u(rng);
    return img;
}

struct InverseCase {
    Image input;
    Image target;
    std::vector<int> sequence;
};

/// Clean image as input, the same image edited by a random sequence of one
/// to four non-stop Five-K operations as target.
inline InverseCase fivek_inverse_case(std::uint64_t seed, std::size_t size) {
    static const Catalog cat = catalog("fivek");
    std::mt19937_64 rng(seed);
    InverseCase out;
    out.input = synthetic_image(rng(), size, size);
    const std::size_t len = 1 + rng() % 4;
    for (std::size_t k = 0; k < len; ++k) {
        out.sequence.push_back(1 + static_cast<int>(rng() % (cat.size() - 1)));
    }
    out.target = apply_sequence(cat, out.sequence, out.input);
    return out;
}

/// Low-light style pair: the clean image is the target and the input is the
/// clean image darkened by one or two LOL "brightness -0.1" edits on all
/// channels or on a single channel. Each edit has an exact inverse in the
/// catalog, so a perfect sequence exists.
inline InverseCase lowlight_pair(std::uint64_t seed, std::size_t size) {
    static const Catalog cat = catalog("lol");
    std::mt19937_64 rng(seed);
    InverseCase out;
    out.target = synthetic_image(rng(), size, size);
    const std::size_t len = 1 + rng() % 2;
    for (std::size_t k = 0; k < len; ++k) out.sequence.push_back(1 + static_cast<int>(rng() % 4));
    out.input = apply_sequence(cat, out.sequence, out.target);
    return out;
}

}  // namespace trenh::testing
