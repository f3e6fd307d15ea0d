#include "treenhance/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "treenhance/config.hpp"
#include "treenhance/dataset.hpp"
#include "treenhance/error.hpp"
#include "treenhance/evaluator.hpp"
#include "treenhance/metrics.hpp"
#include "treenhance/ops.hpp"
#include "treenhance/pipeline.hpp"

namespace trenh {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config:
        case ErrorKind::UnknownCatalog:
        case ErrorKind::InvalidArgument:
            return 2;
        case ErrorKind::Dataset:
        case ErrorKind::DimensionMismatch:
            return 3;
        default:
            return 1;
    }
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback) {
    if (flag) return *flag;
    if (const char* env = std::getenv("TRENH_SEED"); env != nullptr && *env != '\0') {
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(env, &used);
            if (used != std::string(env).size()) throw std::invalid_argument(env);
            return v;
        } catch (const std::exception&) {
            throw Error(ErrorKind::Config, std::string("TRENH_SEED is not an unsigned integer: ") + env);
        }
    }
    return fallback;
}

RunConfig resolve_config(const std::string& preset, const std::string& config_path) {
    RunConfig cfg = RunConfig::preset(preset.empty() ? "lol" : preset);
    if (!config_path.empty()) cfg = RunConfig::load(config_path, std::move(cfg));
    return cfg;
}

Catalog resolve_catalog(const std::string& name, const std::string& catalog_file) {
    if (catalog_file.empty()) return catalog(name);
    std::ifstream in(catalog_file);
    if (!in) throw Error(ErrorKind::Config, "cannot read catalog file " + catalog_file);
    try {
        return catalog_from_json(json::parse(in), "custom");
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Config, catalog_file + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

Image working_copy(const Image& img, std::size_t resolution) {
    if (img.height() == resolution && img.width() == resolution) return img;
    return resize(img, resolution, resolution);
}

// Replays the sequence on the full-resolution input and swaps it into the
// result so that OUT is reproducible with `ops apply`.
void finalize_full_resolution(EnhanceResult& result, const Catalog& cat, const Image& full) {
    result.image = apply_sequence(cat, result.sequence, full);
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string data;
    std::string config;
    std::string preset;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 0;
};

int cmd_train(const TrainArgs& args) {
    RunConfig cfg = resolve_config(args.preset, args.config);
    cfg.seed = resolve_seed(args.seed, cfg.seed);
    cfg.round.seed = cfg.seed;
    if (args.jobs > 0) cfg.round.parallel_trees = args.jobs;

    const Catalog cat = catalog(cfg.catalog);
    std::vector<NamedPair> pairs = load_pairs(args.data, "low", "high");
    std::vector<PairedImages> dataset;
    dataset.reserve(pairs.size());
    for (NamedPair& p : pairs) dataset.push_back(std::move(p.images));

    const fs::path model_path(args.out);
    const fs::path log_path = fs::path(args.out + ".log.jsonl");
    std::ofstream log(log_path, std::ios::binary | std::ios::trunc);
    if (!log) throw Error(ErrorKind::Io, "cannot write " + log_path.string());

    EvaluatorParams initial = init_params(cfg.architecture(), derive_seed(cfg.seed, 0x1417));
    TrainResult result = train(dataset, cat, std::move(initial), cfg.round, [&](const RoundLog& r) {
        log << r.to_json().dump() << '\n';
        log.flush();
        std::cerr << "round " << r.round << ": mean_return=" << r.mean_return
                  << " loss=" << r.mean_loss << " triplets=" << r.triplets << '\n';
    });
    save_params(result.params, model_path);
    return 0;
}

// ---------------------------------------------------------------- enhance

struct EnhanceArgs {
    std::string model;
    std::string mode = "tree";
    std::optional<std::size_t> steps;
    std::optional<std::size_t> max_depth;
    std::string emit_sequence;
    std::string config;
    std::string catalog_file;
    std::optional<std::uint64_t> seed;
    std::string in;
    std::string out;
};

int cmd_enhance(const EnhanceArgs& args) {
    RunConfig cfg = args.config.empty() ? RunConfig{} : RunConfig::load(args.config, RunConfig{});
    const std::uint64_t seed = resolve_seed(args.seed, cfg.seed);

    auto params = std::make_shared<const EvaluatorParams>(load_params(args.model));
    const Catalog cat = resolve_catalog(params->arch.catalog, args.catalog_file);
    check_catalog(*params, cat);
    const NetworkEvaluator evaluator(params);

    const Image input = load_image(args.in);
    const Image work = working_copy(input, cfg.inference.working_resolution);
    const std::size_t max_depth = args.max_depth.value_or(cfg.round.search.max_depth);

    EnhanceResult result;
    if (args.mode == "tree") {
        SearchConfig sc = cfg.round.search;
        sc.mode = SearchMode::Infer;
        sc.iterations = args.steps.value_or(cfg.inference.tree_iterations);
        sc.max_depth = max_depth;
        sc.seed = seed;
        result = infer_tree(work, cat, evaluator, sc);
    } else if (args.mode == "policy") {
        const std::size_t steps = args.steps.value_or(std::min(cfg.inference.policy_max_steps, max_depth));
        result = infer_policy(work, cat, evaluator, std::min(steps, max_depth));
    } else {
        throw Error(ErrorKind::Config, "--mode must be 'tree' or 'policy'");
    }
    finalize_full_resolution(result, cat, input);
    save_image(result.image, args.out);
    if (!args.emit_sequence.empty()) {
        write_text(args.emit_sequence,
                   sequence_to_json(cat, fs::path(args.in).filename().string(), result).dump(2) + "\n");
    }
    return 0;
}

// ---------------------------------------------------------------- guided

struct GuidedArgs {
    std::string model;
    std::string target;
    std::size_t steps = 5000;
    std::string emit_sequence;
    std::string config;
    std::string catalog_name;
    std::string catalog_file;
    std::optional<std::uint64_t> seed;
    std::string in;
    std::string out;
};

int cmd_guided(const GuidedArgs& args) {
    RunConfig cfg = args.config.empty() ? RunConfig{} : RunConfig::load(args.config, RunConfig{});
    const std::uint64_t seed = resolve_seed(args.seed, cfg.seed);

    std::shared_ptr<const EvaluatorParams> params;
    std::string cat_name = args.catalog_name.empty() ? cfg.catalog : args.catalog_name;
    if (!args.model.empty()) {
        params = std::make_shared<const EvaluatorParams>(load_params(args.model));
        if (args.catalog_name.empty()) cat_name = params->arch.catalog;
    }
    const Catalog cat = resolve_catalog(cat_name, args.catalog_file);
    std::unique_ptr<NetworkEvaluator> evaluator;
    if (params) {
        check_catalog(*params, cat);
        evaluator = std::make_unique<NetworkEvaluator>(params);
    }

    const Image input = load_image(args.in);
    const Image target = load_image(args.target);
    if (!input.same_shape(target)) {
        throw Error(ErrorKind::DimensionMismatch, "input and target dimensions differ");
    }
    const std::size_t res = cfg.inference.working_resolution;
    const bool shrink = input.height() > res || input.width() > res;
    const Image work_in = shrink ? resize(input, res, res) : input;
    const Image work_gt = shrink ? resize(target, res, res) : target;

    SearchConfig sc = cfg.guided_search(args.steps);
    sc.seed = seed;
    EnhanceResult result = infer_guided(work_in, work_gt, cat, evaluator.get(), sc);
    finalize_full_resolution(result, cat, input);
    save_image(result.image, args.out);

    const double ret = return_r(result.image, target, sc.ret);
    const double p = psnr(result.image, target);
    const json metrics = {{"return", ret}, {"psnr", p}};
    const json doc = sequence_to_json(cat, fs::path(args.in).filename().string(), result, metrics);
    if (!args.emit_sequence.empty()) write_text(args.emit_sequence, doc.dump(2) + "\n");

    json summary = {{"output", args.out}, {"sequence", result.sequence}, {"return", ret}, {"psnr", p},
                    {"operations", doc["operations"]}};
    std::cout << summary.dump() << '\n';
    return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    std::string pairs;
    std::string metrics = "psnr,ssim,delta_e,mse";
};

int cmd_eval(const EvalArgs& args) {
    std::vector<std::string> names;
    {
        std::stringstream ss(args.metrics);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item.empty()) continue;
            if (item != "psnr" && item != "ssim" && item != "delta_e" && item != "mse") {
                throw Error(ErrorKind::Config, "unknown metric '" + item + "'");
            }
            names.push_back(item);
        }
    }
    if (names.empty()) throw Error(ErrorKind::Config, "--metrics is empty");

    const std::vector<NamedPair> pairs = load_pairs(args.pairs, "output", "target");
    std::vector<double> sums(names.size(), 0.0);
    std::ostringstream csv;
    csv.precision(10);
    csv << "file";
    for (const auto& n : names) csv << ',' << n;
    csv << '\n';
    for (const NamedPair& p : pairs) {
        csv << p.name;
        for (std::size_t i = 0; i < names.size(); ++i) {
            const Image& a = p.images.input;
            const Image& b = p.images.target;
            double v = 0.0;
            if (names[i] == "psnr") v = psnr(a, b);
            else if (names[i] == "ssim") v = ssim(a, b);
            else if (names[i] == "delta_e") v = delta_e(a, b);
            else v = mse(a, b);
            sums[i] += v;
            csv << ',' << v;
        }
        csv << '\n';
    }
    csv << "mean";
    for (double s : sums) csv << ',' << s / static_cast<double>(pairs.size());
    csv << '\n';
    std::cout << csv.str();
    return 0;
}

// ---------------------------------------------------------------- ops

int cmd_ops_list(const std::string& name, const std::string& catalog_file) {
    std::cout << catalog_to_json(resolve_catalog(name, catalog_file)).dump(2) << '\n';
    return 0;
}

int cmd_ops_apply(const std::string& name, const std::string& catalog_file,
                  const std::string& sequence_path, const std::string& in, const std::string& out) {
    std::ifstream seq_in(sequence_path);
    if (!seq_in) throw Error(ErrorKind::Io, "cannot read sequence file " + sequence_path);
    json doc;
    try {
        doc = json::parse(seq_in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, sequence_path + ": " + e.what());
    }
    std::string cat_name = name;
    if (cat_name.empty()) {
        cat_name = doc.is_object() && doc.contains("catalog") ? doc["catalog"].get<std::string>() : "lol";
    }
    const Catalog cat = resolve_catalog(cat_name, catalog_file);
    const std::vector<int> ids = sequence_from_json(doc, cat);
    save_image(apply_sequence(cat, ids, load_image(in)), out);
    return 0;
}

int cmd_stats(const std::string& name, const std::vector<std::string>& files) {
    const Catalog cat = catalog(name);
    std::vector<EnhanceResult> results;
    for (const std::string& f : files) {
        std::ifstream in(f);
        if (!in) throw Error(ErrorKind::Io, "cannot read sequence file " + f);
        EnhanceResult r;
        try {
            r.sequence = sequence_from_json(json::parse(in), cat);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::InvalidArgument, f + ": " + e.what());
        }
        results.push_back(std::move(r));
    }
    std::cout << sequence_stats_csv(sequence_stats(results, cat.size()), cat);
    return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Image enhancement by tree search over editing operations", "trenh"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "Train an evaluator on a paired dataset");
    train_cmd->add_option("--data", train_args.data, "Directory with low/ and high/")->required();
    train_cmd->add_option("--config", train_args.config, "JSON run configuration");
    train_cmd->add_option("--preset", train_args.preset, "Hyperparameter preset (lol or fivek)");
    train_cmd->add_option("--out", train_args.out, "Output model file")->required();
    train_cmd->add_option("--seed", train_args.seed, "Random seed (falls back to TRENH_SEED)");
    train_cmd->add_option("--jobs", train_args.jobs, "Maximum number of parallel trees");

    EnhanceArgs enh;
    auto* enhance_cmd = app.add_subcommand("enhance", "Enhance an image with a trained model");
    enhance_cmd->add_option("--model", enh.model, "Model file")->required();
    enhance_cmd->add_option("--mode", enh.mode, "tree or policy")->check(CLI::IsMember({"tree", "policy"}));
    enhance_cmd->add_option("--steps", enh.steps, "Tree iterations, or policy step cap");
    enhance_cmd->add_option("--max-depth", enh.max_depth, "Maximum sequence depth");
    enhance_cmd->add_option("--emit-sequence", enh.emit_sequence, "Write the sequence JSON here");
    enhance_cmd->add_option("--config", enh.config, "JSON run configuration");
    enhance_cmd->add_option("--catalog-file", enh.catalog_file, "Custom catalog JSON");
    enhance_cmd->add_option("--seed", enh.seed, "Random seed");
    enhance_cmd->add_option("IN", enh.in, "Input image")->required();
    enhance_cmd->add_option("OUT", enh.out, "Output image")->required();

    GuidedArgs gd;
    auto* guided_cmd = app.add_subcommand("guided", "Recover an edit sequence towards a target");
    guided_cmd->add_option("--model", gd.model, "Optional model file");
    guided_cmd->add_option("--target", gd.target, "Target image")->required();
    guided_cmd->add_option("--steps", gd.steps, "Total search iterations");
    guided_cmd->add_option("--emit-sequence", gd.emit_sequence, "Write the sequence JSON here");
    guided_cmd->add_option("--config", gd.config, "JSON run configuration");
    guided_cmd->add_option("--catalog", gd.catalog_name, "Catalog name when no model is given");
    guided_cmd->add_option("--catalog-file", gd.catalog_file, "Custom catalog JSON");
    guided_cmd->add_option("--seed", gd.seed, "Random seed");
    guided_cmd->add_option("IN", gd.in, "Input image")->required();
    guided_cmd->add_option("OUT", gd.out, "Output image")->required();

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Score output/ against target/ images");
    eval_cmd->add_option("--pairs", ev.pairs, "Directory with output/ and target/")->required();
    eval_cmd->add_option("--metrics", ev.metrics, "Comma-separated: psnr,ssim,delta_e,mse");

    std::string ops_catalog;
    std::string ops_catalog_file;
    auto* ops_cmd = app.add_subcommand("ops", "Inspect the catalog or replay a sequence");
    ops_cmd->require_subcommand(1);
    auto* list_cmd = ops_cmd->add_subcommand("list", "Print the catalog as JSON");
    list_cmd->add_option("--catalog", ops_catalog, "lol or fivek");
    list_cmd->add_option("--catalog-file", ops_catalog_file, "Custom catalog JSON");
    std::string seq_file;
    std::string apply_in;
    std::string apply_out;
    auto* apply_cmd = ops_cmd->add_subcommand("apply", "Replay a sequence file on an image");
    apply_cmd->add_option("--sequence", seq_file, "Sequence JSON")->required();
    apply_cmd->add_option("--catalog", ops_catalog, "Override the catalog named in the file");
    apply_cmd->add_option("--catalog-file", ops_catalog_file, "Custom catalog JSON");
    apply_cmd->add_option("IN", apply_in, "Input image")->required();
    apply_cmd->add_option("OUT", apply_out, "Output image")->required();

    std::string stats_catalog = "lol";
    std::vector<std::string> stats_files;
    auto* stats_cmd = app.add_subcommand("stats", "Operation frequency CSV over sequence files");
    stats_cmd->add_option("--catalog", stats_catalog, "lol or fivek");
    stats_cmd->add_option("FILES", stats_files, "Sequence JSON files")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "trenh: usage error: " << e.what() << '\n';
        return 2;
    }

    std::string command = app.get_subcommands().front()->get_name();
    try {
        if (*train_cmd) return cmd_train(train_args);
        if (*enhance_cmd) return cmd_enhance(enh);
        if (*guided_cmd) return cmd_guided(gd);
        if (*eval_cmd) return cmd_eval(ev);
        if (*stats_cmd) return cmd_stats(stats_catalog, stats_files);
        if (*list_cmd) {
            command = "ops list";
            return cmd_ops_list(ops_catalog.empty() ? "lol" : ops_catalog, ops_catalog_file);
        }
        command = "ops apply";
        return cmd_ops_apply(ops_catalog, ops_catalog_file, seq_file, apply_in, apply_out);
    } catch (const Error& e) {
        std::cerr << "trenh " << command << ": error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "trenh " << command << ": error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace trenh
