#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "treenhance/evaluator.hpp"
#include "treenhance/image.hpp"
#include "treenhance/mcts.hpp"
#include "treenhance/ops.hpp"

namespace trenh {

struct AugmentConfig {
    double flip_prob = 0.5;
    double crop_scale_min = 0.8;
    double crop_scale_max = 1.0;
    std::size_t target_resolution = 256;
};

struct RoundConfig {
    std::size_t images_per_round = 100;
    std::size_t triplets_per_tree = 10;
    std::size_t rounds = 1;
    std::size_t parallel_trees = 4;
    /// Keep triplets from earlier rounds in the optimization buffer.
    bool replay_across_rounds = false;
    std::uint64_t seed = 0;
    SearchConfig search{};
    TrainConfig train{};
    AugmentConfig augmentation{};

    void validate() const;
};

struct EnhanceResult {
    Image image;
    /// Catalog ids in application order; STOP is never included.
    std::vector<int> sequence;
    std::vector<float> per_step_values;
    /// Return against the target, for strategies that know it.
    std::optional<double> achieved_return;
};

struct EpisodeResult {
    std::vector<Triplet> triplets;
    double terminal_return = 0.0;
    std::vector<int> sequence;
};

struct PairedImages {
    Image input;
    Image target;
};

struct RoundLog {
    std::size_t round = 0;
    double mean_return = 0.0;
    /// Mean pre-update loss over the round's optimizer steps.
    double mean_loss = 0.0;
    /// Loss of the network entering the round on that round's fresh triplets.
    double heldout_loss = 0.0;
    std::size_t triplets = 0;

    nlohmann::json to_json() const;
};

struct TrainResult {
    EvaluatorParams params;
    std::vector<RoundLog> logs;
};

/// Deterministic 64-bit mixing for deriving per-item seeds.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) noexcept;

/// One training episode from `input` (already augmented and resized): search,
/// sample the move from the root visit distribution, advance, repeat until
/// STOP or the depth cap. Every kept triplet carries the terminal return.
EpisodeResult run_episode(const Image& input, const Image& target, const Catalog& cat,
                          const Evaluator& evaluator, const SearchConfig& cfg,
                          std::size_t triplets_per_tree);

/// Alternating generation / optimization rounds starting from `initial`.
/// `on_round` is invoked after every round with its log entry.
TrainResult train(const std::vector<PairedImages>& dataset, const Catalog& cat,
                  EvaluatorParams initial, const RoundConfig& cfg,
                  const std::function<void(const RoundLog&)>& on_round = {});

/// Tree search without the target: grow one tree, then descend taking the
/// most visited child until STOP or an unvisited frontier.
EnhanceResult infer_tree(const Image& input, const Catalog& cat, const Evaluator& evaluator,
                         SearchConfig cfg);

/// Greedy argmax of the policy head until STOP or `max_steps` operations.
EnhanceResult infer_policy(const Image& input, const Catalog& cat, const Evaluator& evaluator,
                           std::size_t max_steps);

/// Search scored against a known target. Without an evaluator, priors are
/// uniform and leaf values 0.5. Runs `cfg.iterations` per root move (capped
/// by `cfg.episode_iterations` in total), advancing by the most visited
/// child, and returns the best terminal found, never worse than the input.
EnhanceResult infer_guided(const Image& input, const Image& target, const Catalog& cat,
                           const Evaluator* evaluator, SearchConfig cfg);

/// Identical random flip and crop on both images, then resize to the
/// configured square resolution.
std::pair<Image, Image> augment(const Image& input, const Image& target, const AugmentConfig& cfg,
                                std::uint64_t seed);

struct SequenceStats {
    std::vector<std::size_t> counts;
    std::vector<double> frequencies;
};

SequenceStats sequence_stats(const std::vector<EnhanceResult>& results, std::size_t catalog_size);
std::string sequence_stats_csv(const SequenceStats& stats, const Catalog& cat);

nlohmann::json sequence_to_json(const Catalog& cat, const std::string& input_name,
                                const EnhanceResult& result,
                                const nlohmann::json& metrics = nullptr);
/// Reads the operation ids back; ids must exist in `cat` and must not be STOP.
std::vector<int> sequence_from_json(const nlohmann::json& j, const Catalog& cat);

}  // namespace trenh
