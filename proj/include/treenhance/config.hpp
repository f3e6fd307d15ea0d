#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "treenhance/evaluator.hpp"
#include "treenhance/pipeline.hpp"

namespace trenh {

struct InferenceConfig {
    /// Square resolution the search works at; sequences are replayed on the
    /// full-resolution input afterwards.
    std::size_t working_resolution = 256;
    std::size_t tree_iterations = 1000;
    std::size_t policy_max_steps = 10;
    /// Guided search spreads its budget evenly over this many root moves.
    std::size_t guided_moves = 3;
    double guided_c = 4.0;
};

/// Everything a run needs, loadable from one JSON document. Unknown keys
/// are rejected with ErrorKind::Config.
struct RunConfig {
    std::string catalog = "lol";
    std::uint64_t seed = 0;
    RoundConfig round{};
    Architecture network{};
    InferenceConfig inference{};

    /// "lol" or "fivek" hyperparameter profile.
    static RunConfig preset(const std::string& name);
    /// Overlays the keys present in `j` onto `base`.
    static RunConfig from_json(const nlohmann::json& j, RunConfig base);
    static RunConfig load(const std::filesystem::path& path, RunConfig base);

    nlohmann::json to_json() const;
    /// Architecture with catalog name and action count filled in.
    Architecture architecture() const;
    /// Guided-mode search settings spending `budget` iterations in total.
    SearchConfig guided_search(std::size_t budget) const;
};

}  // namespace trenh
