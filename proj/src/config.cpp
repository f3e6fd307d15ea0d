#include "treenhance/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "treenhance/error.hpp"
#include "treenhance/ops.hpp"

namespace trenh {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw Error(ErrorKind::Config, where + " must be an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& item : j.items()) {
        if (!allowed.contains(item.key())) {
            throw Error(ErrorKind::Config, "unknown config key '" +
                                               (where.empty() ? "" : where + ".") + item.key() + "'");
        }
    }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorKind::Config, "config key '" + where + "." + key + "' has the wrong type");
    }
}

std::string scale_name(MseScale s) { return s == MseScale::Byte ? "byte" : "unit"; }

}  // namespace

RunConfig RunConfig::preset(const std::string& name) {
    RunConfig cfg;
    cfg.catalog = name;
    if (name == "lol") {
        cfg.round.search.c = 10.0;
        cfg.round.train.steps_per_round = 160;
    } else if (name == "fivek") {
        cfg.round.search.c = 4.0;
        cfg.round.train.steps_per_round = 70;
    } else {
        throw Error(ErrorKind::Config, "unknown preset '" + name + "' (expected lol or fivek)");
    }
    cfg.round.search.ret = {0.05, MseScale::Byte};
    cfg.round.search.max_depth = 10;
    cfg.round.search.iterations = 1000;
    cfg.round.search.episode_iterations = 10000;
    cfg.round.images_per_round = 100;
    cfg.round.triplets_per_tree = 10;
    cfg.round.parallel_trees = 4;
    cfg.round.rounds = 10;
    cfg.round.train.learning_rate = 1e-3;
    cfg.round.train.weight_decay = 1e-2;
    cfg.network.dropout_p = 0.6f;
    return cfg;
}

RunConfig RunConfig::from_json(const json& j, RunConfig cfg) {
    reject_unknown(j, "", {"catalog", "seed", "search", "return", "train", "rounds", "augmentation",
                           "network", "inference"});
    read(j, "catalog", cfg.catalog, "");
    read(j, "seed", cfg.seed, "");
    if (j.contains("search")) {
        const json& s = j["search"];
        reject_unknown(s, "search", {"c", "max_depth", "iterations", "episode_iterations",
                                     "dirichlet_epsilon", "dirichlet_alpha", "reuse_subtree"});
        SearchConfig& sc = cfg.round.search;
        read(s, "c", sc.c, "search");
        read(s, "max_depth", sc.max_depth, "search");
        read(s, "iterations", sc.iterations, "search");
        read(s, "episode_iterations", sc.episode_iterations, "search");
        read(s, "dirichlet_epsilon", sc.dirichlet_epsilon, "search");
        read(s, "dirichlet_alpha", sc.dirichlet_alpha, "search");
        read(s, "reuse_subtree", sc.reuse_subtree, "search");
    }
    if (j.contains("return")) {
        const json& r = j["return"];
        reject_unknown(r, "return", {"alpha", "mse_scale"});
        read(r, "alpha", cfg.round.search.ret.alpha, "return");
        if (r.contains("mse_scale")) {
            std::string scale;
            read(r, "mse_scale", scale, "return");
            if (scale == "byte") {
                cfg.round.search.ret.mse_scale = MseScale::Byte;
            } else if (scale == "unit") {
                cfg.round.search.ret.mse_scale = MseScale::Unit;
            } else {
                throw Error(ErrorKind::Config, "return.mse_scale must be 'byte' or 'unit'");
            }
        }
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        reject_unknown(t, "train", {"lambda", "learning_rate", "weight_decay", "steps_per_round",
                                    "batch_size"});
        TrainConfig& tc = cfg.round.train;
        read(t, "lambda", tc.lambda, "train");
        read(t, "learning_rate", tc.learning_rate, "train");
        read(t, "weight_decay", tc.weight_decay, "train");
        read(t, "steps_per_round", tc.steps_per_round, "train");
        read(t, "batch_size", tc.batch_size, "train");
    }
    if (j.contains("rounds")) {
        const json& r = j["rounds"];
        reject_unknown(r, "rounds", {"rounds", "images_per_round", "triplets_per_tree",
                                     "parallel_trees", "replay_across_rounds"});
        read(r, "rounds", cfg.round.rounds, "rounds");
        read(r, "images_per_round", cfg.round.images_per_round, "rounds");
        read(r, "triplets_per_tree", cfg.round.triplets_per_tree, "rounds");
        read(r, "parallel_trees", cfg.round.parallel_trees, "rounds");
        read(r, "replay_across_rounds", cfg.round.replay_across_rounds, "rounds");
    }
    if (j.contains("augmentation")) {
        const json& a = j["augmentation"];
        reject_unknown(a, "augmentation",
                       {"flip_prob", "crop_scale_min", "crop_scale_max", "target_resolution"});
        AugmentConfig& ac = cfg.round.augmentation;
        read(a, "flip_prob", ac.flip_prob, "augmentation");
        read(a, "crop_scale_min", ac.crop_scale_min, "augmentation");
        read(a, "crop_scale_max", ac.crop_scale_max, "augmentation");
        read(a, "target_resolution", ac.target_resolution, "augmentation");
    }
    if (j.contains("network")) {
        const json& n = j["network"];
        reject_unknown(n, "network", {"input_size", "widths", "hidden", "dropout_p"});
        read(n, "input_size", cfg.network.input_size, "network");
        read(n, "widths", cfg.network.widths, "network");
        read(n, "hidden", cfg.network.hidden, "network");
        read(n, "dropout_p", cfg.network.dropout_p, "network");
    }
    if (j.contains("inference")) {
        const json& i = j["inference"];
        reject_unknown(i, "inference", {"working_resolution", "tree_iterations", "policy_max_steps",
                                        "guided_moves", "guided_c"});
        InferenceConfig& ic = cfg.inference;
        read(i, "working_resolution", ic.working_resolution, "inference");
        read(i, "tree_iterations", ic.tree_iterations, "inference");
        read(i, "policy_max_steps", ic.policy_max_steps, "inference");
        read(i, "guided_moves", ic.guided_moves, "inference");
        read(i, "guided_c", ic.guided_c, "inference");
    }

    try {
        cfg.round.validate();
        (void)trenh::catalog(cfg.catalog);
    } catch (const Error& e) {
        throw Error(ErrorKind::Config, e.what());
    }
    if (cfg.network.widths.empty() || cfg.network.hidden == 0 || cfg.network.input_size == 0 ||
        !(cfg.network.dropout_p >= 0.0f && cfg.network.dropout_p < 1.0f)) {
        throw Error(ErrorKind::Config, "network section has invalid dimensions");
    }
    if (cfg.inference.working_resolution == 0 || cfg.inference.guided_moves == 0) {
        throw Error(ErrorKind::Config, "inference section has invalid values");
    }
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot read config file " + path.string());
    json j;
    try {
        j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Config, path.string() + ": " + e.what());
    }
    return from_json(j, std::move(base));
}

json RunConfig::to_json() const {
    const SearchConfig& s = round.search;
    const TrainConfig& t = round.train;
    const AugmentConfig& a = round.augmentation;
    return {
        {"catalog", catalog},
        {"seed", seed},
        {"search",
         {{"c", s.c},
          {"max_depth", s.max_depth},
          {"iterations", s.iterations},
          {"episode_iterations", s.episode_iterations},
          {"dirichlet_epsilon", s.dirichlet_epsilon},
          {"dirichlet_alpha", s.dirichlet_alpha},
          {"reuse_subtree", s.reuse_subtree}}},
        {"return", {{"alpha", s.ret.alpha}, {"mse_scale", scale_name(s.ret.mse_scale)}}},
        {"train",
         {{"lambda", t.lambda},
          {"learning_rate", t.learning_rate},
          {"weight_decay", t.weight_decay},
          {"steps_per_round", t.steps_per_round},
          {"batch_size", t.batch_size}}},
        {"rounds",
         {{"rounds", round.rounds},
          {"images_per_round", round.images_per_round},
          {"triplets_per_tree", round.triplets_per_tree},
          {"parallel_trees", round.parallel_trees},
          {"replay_across_rounds", round.replay_across_rounds}}},
        {"augmentation",
         {{"flip_prob", a.flip_prob},
          {"crop_scale_min", a.crop_scale_min},
          {"crop_scale_max", a.crop_scale_max},
          {"target_resolution", a.target_resolution}}},
        {"network",
         {{"input_size", network.input_size},
          {"widths", network.widths},
          {"hidden", network.hidden},
          {"dropout_p", network.dropout_p}}},
        {"inference",
         {{"working_resolution", inference.working_resolution},
          {"tree_iterations", inference.tree_iterations},
          {"policy_max_steps", inference.policy_max_steps},
          {"guided_moves", inference.guided_moves},
          {"guided_c", inference.guided_c}}},
    };
}

Architecture RunConfig::architecture() const {
    Architecture arch = network;
    arch.catalog = catalog;
    arch.num_actions = trenh::catalog(catalog).size();
    return arch;
}

SearchConfig RunConfig::guided_search(std::size_t budget) const {
    SearchConfig sc = round.search;
    sc.mode = SearchMode::Guided;
    sc.c = inference.guided_c;
    sc.episode_iterations = std::max<std::size_t>(budget, 1);
    sc.iterations = (sc.episode_iterations + inference.guided_moves - 1) / inference.guided_moves;
    return sc;
}

}  // namespace trenh
