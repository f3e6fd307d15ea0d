#include "treenhance/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <memory>
#include <numeric>
#include <sstream>

#include "treenhance/error.hpp"
#include "treenhance/metrics.hpp"
#include "treenhance/parallel.hpp"

namespace trenh {
namespace {

std::size_t argmax(std::span<const float> v) {
    return static_cast<std::size_t>(std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

// Most visited child; ties go to the lowest id. Returns size() if none visited.
std::size_t most_visited(const Node& node) {
    std::size_t best = node.children.size();
    std::uint32_t best_visits = 0;
    for (std::size_t i = 0; i < node.children.size(); ++i) {
        if (node.children[i].visits > best_visits) {
            best_visits = node.children[i].visits;
            best = i;
        }
    }
    return best;
}

std::vector<std::size_t> choose_indices(std::size_t available, std::size_t wanted,
                                        std::mt19937_64& rng) {
    std::vector<std::size_t> idx(available);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    if (wanted <= available) {
        idx.resize(wanted);
        return idx;
    }
    std::uniform_int_distribution<std::size_t> pick(0, available - 1);
    while (idx.size() < wanted) idx.push_back(pick(rng));
    return idx;
}

}  // namespace

void RoundConfig::validate() const {
    if (images_per_round < 1 || triplets_per_tree < 1 || parallel_trees < 1) {
        throw Error(ErrorKind::InvalidArgument, "round counts must be >= 1");
    }
    const AugmentConfig& a = augmentation;
    if (!(a.crop_scale_min > 0.0 && a.crop_scale_min <= a.crop_scale_max && a.crop_scale_max <= 1.0) ||
        a.target_resolution < 1) {
        throw Error(ErrorKind::InvalidArgument, "crop scale range must satisfy 0 < min <= max <= 1");
    }
    search.validate();
}

nlohmann::json RoundLog::to_json() const {
    return {{"round", round},
            {"mean_return", mean_return},
            {"mean_loss", mean_loss},
            {"heldout_loss", heldout_loss},
            {"triplets", triplets}};
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) noexcept {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(base) ^ a) ^ (b * 0xff51afd7ed558ccdULL));
}

EpisodeResult run_episode(const Image& input, const Image& target, const Catalog& cat,
                          const Evaluator& evaluator, const SearchConfig& cfg,
                          std::size_t triplets_per_tree) {
    if (cfg.mode != SearchMode::Train) {
        throw Error(ErrorKind::InvalidArgument, "episodes require a train-mode search config");
    }
    Search search(cat, evaluator, cfg, &target);
    search.reset(input);
    std::vector<std::pair<std::shared_ptr<const Image>, std::vector<float>>> roots;
    EpisodeResult result;
    while (true) {
        search.run(cfg.iterations);
        const Node& root = search.root();
        const bool visited = std::any_of(root.children.begin(), root.children.end(),
                                         [](const Node& ch) { return ch.visits > 0; });
        if (!visited) {
            result.terminal_return = 0.0;  // budget exhausted before this root was searched
            break;
        }
        std::vector<float> rho = search.policy();
        roots.emplace_back(root.image, rho);
        std::discrete_distribution<int> sample(rho.begin(), rho.end());
        const int action = sample(search.rng());
        if (action == cat.stop_id()) {
            result.terminal_return = return_r(*root.image, target, cfg.ret);
            break;
        }
        search.advance(action);
        if (search.root().terminal == TerminalKind::DepthExceeded) {
            result.terminal_return = 0.0;
            break;
        }
    }
    result.sequence = search.taken();
    if (result.terminal_return == 0.0 && !result.sequence.empty() &&
        search.root().terminal == TerminalKind::DepthExceeded) {
        result.sequence.pop_back();  // the failing move is not part of an applied sequence
    }

    std::vector<std::size_t> keep(roots.size());
    std::iota(keep.begin(), keep.end(), 0);
    if (keep.size() > triplets_per_tree) {
        std::shuffle(keep.begin(), keep.end(), search.rng());
        keep.resize(triplets_per_tree);
        std::sort(keep.begin(), keep.end());
    }
    for (std::size_t i : keep) {
        result.triplets.push_back(
            {*roots[i].first, static_cast<float>(result.terminal_return), roots[i].second});
    }
    return result;
}

TrainResult train(const std::vector<PairedImages>& dataset, const Catalog& cat,
                  EvaluatorParams initial, const RoundConfig& cfg,
                  const std::function<void(const RoundLog&)>& on_round) {
    if (dataset.empty()) throw Error(ErrorKind::Dataset, "training dataset is empty");
    cfg.validate();
    check_catalog(initial, cat);
    for (const PairedImages& p : dataset) {
        if (!p.input.same_shape(p.target)) {
            throw Error(ErrorKind::Dataset, "training pair has mismatched dimensions");
        }
    }

    TrainResult result{std::move(initial), {}};
    TrainConfig tcfg = cfg.train;
    tcfg.seed = derive_seed(cfg.seed, 0x7472, tcfg.seed);
    Trainer trainer(result.params, tcfg);
    std::mt19937_64 rng(derive_seed(cfg.seed, 0x726f756e64));
    std::vector<Triplet> buffer;

    for (std::size_t round = 0; round < cfg.rounds; ++round) {
        const auto picks = choose_indices(dataset.size(), cfg.images_per_round, rng);
        auto snapshot = std::make_shared<const EvaluatorParams>(result.params);
        const NetworkEvaluator evaluator(snapshot);
        std::vector<EpisodeResult> episodes(picks.size());
        parallel_for(picks.size(), cfg.parallel_trees, [&](std::size_t i) {
            const PairedImages& pair = dataset[picks[i]];
            const auto [input, target] =
                augment(pair.input, pair.target, cfg.augmentation, derive_seed(cfg.seed, round, 2 * i));
            SearchConfig scfg = cfg.search;
            scfg.mode = SearchMode::Train;
            scfg.seed = derive_seed(cfg.seed, round, 2 * i + 1);
            episodes[i] = run_episode(input, target, cat, evaluator, scfg, cfg.triplets_per_tree);
        });

        if (!cfg.replay_across_rounds) buffer.clear();
        std::vector<const Triplet*> fresh;
        double return_sum = 0.0;
        const std::size_t first_new = buffer.size();
        for (EpisodeResult& ep : episodes) {
            return_sum += ep.terminal_return;
            for (Triplet& t : ep.triplets) buffer.push_back(std::move(t));
        }
        for (std::size_t i = first_new; i < buffer.size(); ++i) fresh.push_back(&buffer[i]);

        RoundLog log;
        log.round = round + 1;
        log.mean_return = return_sum / static_cast<double>(episodes.size());
        log.triplets = buffer.size();
        log.heldout_loss = trainer.evaluate_loss(fresh);

        double loss_sum = 0.0;
        std::size_t steps = 0;
        if (!buffer.empty()) {
            std::uniform_int_distribution<std::size_t> pick(0, buffer.size() - 1);
            std::vector<const Triplet*> batch(std::min(cfg.train.batch_size, buffer.size()));
            for (std::size_t s = 0; s < cfg.train.steps_per_round; ++s) {
                for (auto& slot : batch) slot = &buffer[pick(rng)];
                loss_sum += trainer.step(batch);
                ++steps;
            }
        }
        log.mean_loss = steps ? loss_sum / static_cast<double>(steps) : 0.0;
        result.logs.push_back(log);
        if (on_round) on_round(log);
    }
    return result;
}

EnhanceResult infer_tree(const Image& input, const Catalog& cat, const Evaluator& evaluator,
                         SearchConfig cfg) {
    cfg.mode = SearchMode::Infer;
    Search search(cat, evaluator, cfg, nullptr);
    search.reset(input);
    search.run(cfg.iterations);

    EnhanceResult result;
    const Node* node = &search.root();
    while (node->expanded && !node->is_terminal()) {
        const std::size_t pick = most_visited(*node);
        if (pick == node->children.size()) break;
        const Node& child = node->children[pick];
        if (cat[pick].terminal) break;
        result.sequence.push_back(child.action);
        result.per_step_values.push_back(static_cast<float>(child.mean_return()));
        node = &child;
    }
    result.image = *node->image;
    return result;
}

EnhanceResult infer_policy(const Image& input, const Catalog& cat, const Evaluator& evaluator,
                           std::size_t max_steps) {
    if (evaluator.num_actions() != cat.size()) {
        throw Error(ErrorKind::CatalogMismatch, "evaluator and catalog sizes differ");
    }
    EnhanceResult result{input, {}, {}, std::nullopt};
    for (std::size_t step = 0; step < max_steps; ++step) {
        const EvaluatorOutput out = evaluator.evaluate(result.image);
        const std::size_t a = argmax(out.policy);
        result.per_step_values.push_back(out.value);
        if (cat[a].terminal) break;
        result.image = apply(cat[a], result.image);
        result.sequence.push_back(static_cast<int>(a));
    }
    return result;
}

EnhanceResult infer_guided(const Image& input, const Image& target, const Catalog& cat,
                           const Evaluator* evaluator, SearchConfig cfg) {
    if (!input.same_shape(target)) {
        throw Error(ErrorKind::DimensionMismatch, "guided search input and target differ in size");
    }
    cfg.mode = SearchMode::Guided;
    const UniformEvaluator fallback(cat.size());
    Search search(cat, evaluator ? *evaluator : fallback, cfg, &target);
    search.reset(input);
    while (!search.finished() && search.iterations_run() < cfg.episode_iterations) {
        const std::size_t before = search.iterations_run();
        search.run(cfg.iterations);
        if (search.iterations_run() == before) break;
        const std::size_t pick = most_visited(search.root());
        if (pick == search.root().children.size()) break;
        search.advance(static_cast<int>(pick));
    }

    EnhanceResult result;
    const double identity = return_r(input, target, cfg.ret);
    const TerminalRecord& best = search.best_terminal();
    if (best.image && best.ret > identity) {
        result.image = *best.image;
        result.sequence = best.sequence;
        result.achieved_return = best.ret;
    } else {
        result.image = input;
        result.achieved_return = identity;
    }
    Image replay = input;
    for (int id : result.sequence) {
        replay = apply(cat[static_cast<std::size_t>(id)], replay);
        result.per_step_values.push_back(static_cast<float>(return_r(replay, target, cfg.ret)));
    }
    return result;
}

std::pair<Image, Image> augment(const Image& input, const Image& target, const AugmentConfig& cfg,
                                std::uint64_t seed) {
    if (!input.same_shape(target)) {
        throw Error(ErrorKind::DimensionMismatch, "augment needs same-size input and target");
    }
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution flip(std::clamp(cfg.flip_prob, 0.0, 1.0));
    std::uniform_real_distribution<double> scale_dist(cfg.crop_scale_min, cfg.crop_scale_max);
    const bool do_flip = flip(rng);
    const double side = std::sqrt(cfg.crop_scale_min == cfg.crop_scale_max ? cfg.crop_scale_min
                                                                            : scale_dist(rng));
    const std::size_t h = input.height(), w = input.width();
    const auto ch = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(h * side)), 1, h);
    const auto cw = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(w * side)), 1, w);
    std::uniform_int_distribution<std::size_t> top_dist(0, h - ch), left_dist(0, w - cw);
    const std::size_t top = top_dist(rng), left = left_dist(rng);

    auto transform = [&](const Image& img) {
        Image out = (ch == h && cw == w) ? img : crop(img, top, left, ch, cw);
        if (do_flip) out = flip_horizontal(out);
        return resize(out, cfg.target_resolution, cfg.target_resolution);
    };
    return {transform(input), transform(target)};
}

SequenceStats sequence_stats(const std::vector<EnhanceResult>& results, std::size_t catalog_size) {
    SequenceStats stats{std::vector<std::size_t>(catalog_size, 0),
                        std::vector<double>(catalog_size, 0.0)};
    std::size_t total = 0;
    for (const EnhanceResult& r : results) {
        for (int id : r.sequence) {
            if (id < 0 || static_cast<std::size_t>(id) >= catalog_size) {
                throw Error(ErrorKind::UnknownOperation, "sequence id outside catalog");
            }
            ++stats.counts[static_cast<std::size_t>(id)];
            ++total;
        }
    }
    if (total > 0) {
        for (std::size_t i = 0; i < catalog_size; ++i) {
            stats.frequencies[i] = static_cast<double>(stats.counts[i]) / static_cast<double>(total);
        }
    }
    return stats;
}

std::string sequence_stats_csv(const SequenceStats& stats, const Catalog& cat) {
    std::ostringstream out;
    out << "id,family,channel,param,count,frequency\n";
    for (std::size_t i = 0; i < stats.counts.size(); ++i) {
        const Operation& op = cat[i];
        out << op.id << ',' << to_string(op.family) << ',' << to_string(op.channel) << ','
            << op.param << ',' << stats.counts[i] << ',' << std::setprecision(6)
            << stats.frequencies[i] << '\n';
    }
    return out.str();
}

nlohmann::json sequence_to_json(const Catalog& cat, const std::string& input_name,
                                const EnhanceResult& result, const nlohmann::json& metrics) {
    auto ops = nlohmann::json::array();
    for (std::size_t step = 0; step < result.sequence.size(); ++step) {
        const Operation& op = cat[static_cast<std::size_t>(result.sequence[step])];
        ops.push_back({{"step", step + 1},
                       {"id", op.id},
                       {"family", to_string(op.family)},
                       {"channel", to_string(op.channel)},
                       {"param", op.param}});
    }
    nlohmann::json j = {{"input", input_name},
                        {"catalog", cat.name()},
                        {"operations", std::move(ops)},
                        {"value_trace", result.per_step_values}};
    if (!metrics.is_null()) j["metrics"] = metrics;
    return j;
}

std::vector<int> sequence_from_json(const nlohmann::json& j, const Catalog& cat) {
    if (!j.is_object() || !j.contains("operations") || !j["operations"].is_array()) {
        throw Error(ErrorKind::InvalidArgument, "sequence file must contain an 'operations' array");
    }
    std::vector<int> ids;
    for (const auto& op : j["operations"]) {
        const int id = op.at("id").get<int>();
        if (id < 0 || static_cast<std::size_t>(id) >= cat.size() ||
            cat[static_cast<std::size_t>(id)].terminal) {
            throw Error(ErrorKind::UnknownOperation,
                        "unknown op id " + std::to_string(id) + " for catalog " + cat.name());
        }
        if (op.contains("family") &&
            op["family"].get<std::string>() != to_string(cat[static_cast<std::size_t>(id)].family)) {
            throw Error(ErrorKind::UnknownOperation,
                        "op id " + std::to_string(id) + " is not a " +
                            op["family"].get<std::string>() + " in catalog " + cat.name());
        }
        ids.push_back(id);
    }
    return ids;
}

}  // namespace trenh
