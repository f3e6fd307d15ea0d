#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "support/synthetic.hpp"
#include "treenhance/error.hpp"
#include "treenhance/image.hpp"

using namespace trenh;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "trenh_unit_image";
    fs::create_directories(dir);
    return dir / name;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out << bytes;
}

ErrorKind load_error_kind(const fs::path& p) {
    try {
        (void)load_image(p);
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected load_image to throw");
    return ErrorKind::Io;
}

}  // namespace

TEST_CASE("clip bounds values to the unit interval") {
    CHECK(clip(-0.5f) == 0.0f);
    CHECK(clip(1.5f) == 1.0f);
    CHECK(clip(0.25f) == 0.25f);
}

TEST_CASE("hsv conversion of primaries and round trip") {
    const HsvPixel red = rgb_to_hsv({1.0f, 0.0f, 0.0f});
    CHECK(red.h == doctest::Approx(0.0));
    CHECK(red.s == doctest::Approx(1.0));
    CHECK(red.v == doctest::Approx(1.0));
    CHECK(rgb_to_hsv({0.0f, 1.0f, 0.0f}).h == doctest::Approx(120.0));
    CHECK(rgb_to_hsv({0.0f, 0.0f, 1.0f}).h == doctest::Approx(240.0));
    CHECK(rgb_to_hsv({0.5f, 0.5f, 0.5f}).s == 0.0f);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (int i = 0; i < 1000; ++i) {
        const Rgb p{u(rng), u(rng), u(rng)};
        const Rgb q = hsv_to_rgb(rgb_to_hsv(p));
        CHECK(q.r == doctest::Approx(p.r).epsilon(1e-5));
        CHECK(q.g == doctest::Approx(p.g).epsilon(1e-5));
        CHECK(q.b == doctest::Approx(p.b).epsilon(1e-5));
    }
}

TEST_CASE("resize uses half-pixel centres") {
    Image checker(2, 2);
    for (std::size_t c = 0; c < 3; ++c) {
        checker.at(0, 0, c) = 1.0f;
        checker.at(1, 1, c) = 1.0f;
    }
    const Image one = resize(checker, 1, 1);
    CHECK(one.at(0, 0, 0) == doctest::Approx(0.5));

    const Image img = testing::synthetic_image(1, 9, 7);
    CHECK(resize(img, 9, 7) == img);
    const Image big = resize(img, 18, 14);
    CHECK(big.height() == 18);
    CHECK(big.width() == 14);
    CHECK_THROWS_AS(resize(img, 0, 4), Error);
}

TEST_CASE("flip and crop") {
    const Image img = testing::synthetic_image(2, 5, 6);
    CHECK(flip_horizontal(flip_horizontal(img)) == img);
    CHECK(flip_horizontal(img).at(1, 0, 2) == img.at(1, 5, 2));
    const Image c = crop(img, 1, 2, 3, 4);
    CHECK(c.height() == 3);
    CHECK(c.width() == 4);
    CHECK(c.at(0, 0, 1) == img.at(1, 2, 1));
    CHECK_THROWS_AS(crop(img, 3, 0, 3, 1), Error);
}

TEST_CASE("quantize maps the unit interval onto bytes") {
    CHECK(quantize(0.0f) == 0);
    CHECK(quantize(1.0f) == 255);
    CHECK(quantize(2.0f) == 255);
    CHECK(quantize(128.0f / 255.0f) == 128);
}

TEST_CASE("png and ppm round trips are lossless at 8 bits") {
    std::mt19937_64 rng(11);
    Image img(7, 5);
    std::uniform_int_distribution<int> byte(0, 255);
    for (float& v : img.data()) v = static_cast<float>(byte(rng)) / 255.0f;
    for (const char* name : {"rt.png", "rt.ppm"}) {
        const auto p = temp_path(name);
        save_image(img, p);
        CHECK(load_image(p) == img);
    }
}

TEST_CASE("8-bit scale definition") {
    const auto p = temp_path("scale.ppm");
    write_bytes(p, std::string("P6\n# comment\n2 1\n255\n") + std::string("\xff\x80\x00\x00\x00\x00", 6));
    const Image img = load_image(p);
    CHECK(img.at(0, 0, 0) == 1.0f);
    CHECK(img.at(0, 0, 1) == doctest::Approx(0.50196).epsilon(1e-4));
    CHECK(img.at(0, 0, 2) == 0.0f);
}

TEST_CASE("image loading errors are distinct") {
    const auto truncated = temp_path("truncated.ppm");
    write_bytes(truncated, "P6\n4 4\n255\nabc");
    CHECK(load_error_kind(truncated) == ErrorKind::TruncatedFile);

    const auto gray = temp_path("gray.pgm");
    write_bytes(gray, std::string("P5\n1 1\n255\n") + '\x10');
    CHECK(load_error_kind(gray) == ErrorKind::BadChannelCount);

    const auto junk = temp_path("junk.bmp");
    write_bytes(junk, "BM not an image");
    CHECK(load_error_kind(junk) == ErrorKind::UnsupportedFormat);

    const auto wide = temp_path("wide.ppm");
    write_bytes(wide, "P6\n1 1\n65535\n\x01\x02\x03\x04\x05\x06");
    CHECK(load_error_kind(wide) == ErrorKind::UnsupportedFormat);

    CHECK(load_error_kind(temp_path("missing.png")) == ErrorKind::Io);

    try {
        (void)load_image(truncated);
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("truncated.ppm") != std::string::npos);
    }
}

TEST_CASE("checksum distinguishes images") {
    Image a(3, 3, 0.5f);
    Image b = a;
    CHECK(checksum(a) == checksum(b));
    b.at(2, 2, 2) = 0.25f;
    CHECK(checksum(a) != checksum(b));
}
