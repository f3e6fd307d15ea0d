#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "treenhance/pipeline.hpp"

namespace trenh {

struct NamedPair {
    std::string name;
    PairedImages images;
};

/// Pairs files in `dir/first` with same-named files in `dir/second`.
/// Only .png and .ppm files are considered; the result is sorted by name.
/// Throws ErrorKind::Dataset when nothing matches or a partner is missing
/// and ErrorKind::DimensionMismatch when a pair disagrees in size.
std::vector<NamedPair> load_pairs(const std::filesystem::path& dir, const std::string& first,
                                  const std::string& second);

}  // namespace trenh
