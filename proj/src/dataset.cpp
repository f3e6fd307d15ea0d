#include "treenhance/dataset.hpp"

#include <algorithm>

#include "treenhance/error.hpp"

namespace trenh {
namespace {

bool is_image_file(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return ext == ".png" || ext == ".ppm";
}

}  // namespace

std::vector<NamedPair> load_pairs(const std::filesystem::path& dir, const std::string& first,
                                  const std::string& second) {
    namespace fs = std::filesystem;
    const fs::path a_dir = dir / first;
    const fs::path b_dir = dir / second;
    if (!fs::is_directory(a_dir)) {
        throw Error(ErrorKind::Dataset, "no pairs found: missing directory " + a_dir.string());
    }
    if (!fs::is_directory(b_dir)) {
        throw Error(ErrorKind::Dataset, "no pairs found: missing directory " + b_dir.string());
    }

    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(a_dir)) {
        if (entry.is_regular_file() && is_image_file(entry.path())) {
            names.push_back(entry.path().filename().string());
        }
    }
    std::sort(names.begin(), names.end());
    if (names.empty()) throw Error(ErrorKind::Dataset, "no pairs found in " + a_dir.string());

    std::vector<NamedPair> pairs;
    pairs.reserve(names.size());
    for (const std::string& name : names) {
        const fs::path partner = b_dir / name;
        if (!fs::exists(partner)) {
            throw Error(ErrorKind::Dataset, "missing partner for " + name + " in " + b_dir.string());
        }
        NamedPair pair{name, {load_image(a_dir / name), load_image(partner)}};
        if (!pair.images.input.same_shape(pair.images.target)) {
            throw Error(ErrorKind::DimensionMismatch, "size mismatch for pair " + name);
        }
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

}  // namespace trenh
