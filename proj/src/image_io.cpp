#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <string>
#include <vector>

#include "treenhance/error.hpp"
#include "treenhance/image.hpp"

namespace trenh {
namespace {

constexpr unsigned char kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Image from_bytes(std::size_t height, std::size_t width, const unsigned char* rgb,
                 std::size_t stride_channels) {
    std::vector<float> data(height * width * Image::kChannels);
    for (std::size_t i = 0; i < height * width; ++i) {
        for (std::size_t c = 0; c < Image::kChannels; ++c) {
            data[i * Image::kChannels + c] =
                static_cast<float>(rgb[i * stride_channels + c]) / 255.0f;
        }
    }
    return Image(height, width, std::move(data));
}

std::vector<unsigned char> to_bytes(const Image& img) {
    std::vector<unsigned char> bytes(img.size());
    std::transform(img.data().begin(), img.data().end(), bytes.begin(), quantize);
    return bytes;
}

// Netpbm header token reader: skips whitespace and '#' comments.
bool next_token(const std::vector<unsigned char>& buf, std::size_t& pos, std::string& token) {
    token.clear();
    while (pos < buf.size()) {
        if (buf[pos] == '#') {
            while (pos < buf.size() && buf[pos] != '\n') ++pos;
        } else if (std::isspace(buf[pos])) {
            ++pos;
        } else {
            break;
        }
    }
    while (pos < buf.size() && !std::isspace(buf[pos]) && buf[pos] != '#') {
        token.push_back(static_cast<char>(buf[pos++]));
    }
    return !token.empty();
}

Image load_ppm(const std::vector<unsigned char>& buf, const std::filesystem::path& path) {
    std::size_t pos = 2;
    std::string w_tok, h_tok, max_tok;
    if (!next_token(buf, pos, w_tok) || !next_token(buf, pos, h_tok) ||
        !next_token(buf, pos, max_tok) || pos >= buf.size()) {
        throw Error(ErrorKind::TruncatedFile, path.string() + ": truncated PPM header");
    }
    std::size_t width = 0, height = 0;
    int maxval = 0;
    try {
        width = std::stoul(w_tok);
        height = std::stoul(h_tok);
        maxval = std::stoi(max_tok);
    } catch (const std::exception&) {
        throw Error(ErrorKind::UnsupportedFormat, path.string() + ": malformed PPM header");
    }
    if (maxval != 255) {
        throw Error(ErrorKind::UnsupportedFormat,
                    path.string() + ": only PPM maxval 255 is supported");
    }
    if (width == 0 || height == 0) {
        throw Error(ErrorKind::UnsupportedFormat, path.string() + ": zero image dimension");
    }
    ++pos;  // single whitespace byte after maxval
    const std::size_t need = width * height * 3;
    if (buf.size() < pos + need) {
        throw Error(ErrorKind::TruncatedFile, path.string() + ": truncated PPM pixel data");
    }
    return from_bytes(height, width, buf.data() + pos, 3);
}

Image load_png(const std::vector<unsigned char>& buf, const std::filesystem::path& path) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&png, buf.data(), buf.size())) {
        const std::string msg = png.message;
        png_image_free(&png);
        throw Error(ErrorKind::TruncatedFile, path.string() + ": " + msg);
    }
    if ((png.format & PNG_FORMAT_FLAG_COLOR) == 0) {
        png_image_free(&png);
        throw Error(ErrorKind::BadChannelCount,
                    path.string() + ": grayscale PNG, expected 3 color channels");
    }
    if ((png.format & PNG_FORMAT_FLAG_LINEAR) != 0) {
        png_image_free(&png);
        throw Error(ErrorKind::UnsupportedFormat, path.string() + ": 16-bit PNG not supported");
    }
    const bool has_alpha = (png.format & PNG_FORMAT_FLAG_ALPHA) != 0;
    if (has_alpha) {
        std::cerr << "warning: " << path.string() << ": alpha channel stripped\n";
    }
    png.format = has_alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;
    const std::size_t channels = has_alpha ? 4 : 3;
    std::vector<unsigned char> pixels(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, pixels.data(), 0, nullptr)) {
        const std::string msg = png.message;
        png_image_free(&png);
        throw Error(ErrorKind::TruncatedFile, path.string() + ": " + msg);
    }
    Image out = from_bytes(png.height, png.width, pixels.data(), channels);
    png_image_free(&png);
    return out;
}

bool has_extension(const std::filesystem::path& path, std::initializer_list<const char*> exts) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return std::any_of(exts.begin(), exts.end(), [&](const char* e) { return ext == e; });
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
    const auto buf = read_all(path);
    if (buf.size() >= 8 && std::equal(std::begin(kPngSignature), std::end(kPngSignature),
                                      buf.begin())) {
        return load_png(buf, path);
    }
    if (buf.size() >= 2 && buf[0] == 'P' && buf[1] == '6') return load_ppm(buf, path);
    if (buf.size() >= 2 && buf[0] == 'P' && (buf[1] == '5' || buf[1] == '2')) {
        throw Error(ErrorKind::BadChannelCount,
                    path.string() + ": graymap, expected 3 color channels");
    }
    throw Error(ErrorKind::UnsupportedFormat, path.string() + ": not a PNG or binary PPM file");
}

void save_image(const Image& img, const std::filesystem::path& path) {
    const auto bytes = to_bytes(img);
    if (has_extension(path, {".png"})) {
        png_image png{};
        png.version = PNG_IMAGE_VERSION;
        png.width = static_cast<png_uint_32>(img.width());
        png.height = static_cast<png_uint_32>(img.height());
        png.format = PNG_FORMAT_RGB;
        if (!png_image_write_to_file(&png, path.string().c_str(), 0, bytes.data(), 0, nullptr)) {
            const std::string msg = png.message;
            png_image_free(&png);
            throw Error(ErrorKind::Io, path.string() + ": " + msg);
        }
        return;
    }
    if (!has_extension(path, {".ppm", ".pnm"})) {
        throw Error(ErrorKind::UnsupportedFormat,
                    path.string() + ": output extension must be .png or .ppm");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace trenh
