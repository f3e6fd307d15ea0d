#include "treenhance/mcts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <deque>

#include "treenhance/error.hpp"

namespace trenh {

void SearchConfig::validate() const {
    if (!(c >= 0.0)) throw Error(ErrorKind::InvalidArgument, "exploration coefficient c must be >= 0");
    if (iterations < 1) throw Error(ErrorKind::InvalidArgument, "iterations must be >= 1");
    if (max_depth < 1) throw Error(ErrorKind::InvalidArgument, "max_depth must be >= 1");
    if (!(dirichlet_epsilon >= 0.0 && dirichlet_epsilon <= 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "dirichlet_epsilon must lie in [0,1]");
    }
    if (!(dirichlet_alpha > 0.0)) throw Error(ErrorKind::InvalidArgument, "dirichlet_alpha must be > 0");
    if (!(ret.alpha > 0.0)) throw Error(ErrorKind::InvalidArgument, "return alpha must be > 0");
}

double ucb(const Node& child, const Node& parent, double c) noexcept {
    return child.mean_return() + c * static_cast<double>(child.prior) *
                                     std::sqrt(static_cast<double>(parent.visits)) /
                                     (static_cast<double>(child.visits) + 1.0);
}

std::size_t select_child(const Node& parent, double c) noexcept {
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < parent.children.size(); ++i) {
        const double score = ucb(parent.children[i], parent, c);
        if (score > best_score) {
            best_score = score;
            best = i;
        }
    }
    return best;
}

std::vector<Node*> select_leaf(Node& root, const SearchConfig& cfg) {
    std::vector<Node*> path{&root};
    Node* node = &root;
    while (node->expanded && !node->is_terminal()) {
        node = &node->children[select_child(*node, cfg.c)];
        path.push_back(node);
    }
    return path;
}

void materialize(Node& child, const Node& parent, const Catalog& cat) {
    if (child.image) return;
    if (!parent.image) throw Error(ErrorKind::InvalidArgument, "parent node has no image");
    const Operation& op = cat[static_cast<std::size_t>(child.action)];
    if (op.terminal) {
        child.image = parent.image;
    } else {
        child.image = std::make_shared<const Image>(apply(op, *parent.image));
    }
}

void add_dirichlet_noise(Node& node, double epsilon, double alpha, std::mt19937_64& rng) {
    if (node.children.empty() || epsilon <= 0.0) return;
    std::gamma_distribution<double> gamma(alpha, 1.0);
    std::vector<double> d(node.children.size());
    double sum = 0.0;
    for (double& x : d) {
        x = gamma(rng);
        sum += x;
    }
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double noise = sum > 0.0 ? d[i] / sum : 1.0 / static_cast<double>(d.size());
        Node& ch = node.children[i];
        ch.prior = static_cast<float>((1.0 - epsilon) * ch.prior + epsilon * noise);
    }
}

LeafEvaluation expand_and_evaluate(Node& leaf, bool is_root, const Evaluator& evaluator,
                                   const Image* target, const SearchConfig& cfg,
                                   const Catalog& cat, std::mt19937_64& rng) {
    ++leaf.self_evaluations;
    const bool infer = cfg.mode == SearchMode::Infer;
    if (!infer && target == nullptr) {
        throw Error(ErrorKind::InvalidArgument, "train and guided search need a target image");
    }
    LeafEvaluation result;
    if (leaf.is_terminal()) {
        if (!leaf.terminal_value) {
            if (leaf.terminal == TerminalKind::DepthExceeded && !infer) {
                leaf.terminal_value = 0.0;
            } else if (infer) {
                leaf.terminal_value = evaluator.evaluate(*leaf.image).value;
                result.called_evaluator = true;
            } else {
                leaf.terminal_value = return_r(*leaf.image, *target, cfg.ret);
            }
        }
        result.value = *leaf.terminal_value;
        return result;
    }

    const EvaluatorOutput out = evaluator.evaluate(*leaf.image);
    result.called_evaluator = true;
    if (out.policy.size() != cat.size()) {
        throw Error(ErrorKind::CatalogMismatch,
                    "evaluator returned " + std::to_string(out.policy.size()) +
                        " priors for a catalog of " + std::to_string(cat.size()));
    }
    leaf.children.resize(cat.size());
    for (std::size_t a = 0; a < cat.size(); ++a) {
        Node& ch = leaf.children[a];
        ch.action = static_cast<int>(a);
        ch.prior = out.policy[a];
        ch.depth = leaf.depth + 1;
        if (cat[a].terminal) {
            ch.terminal = TerminalKind::Stopped;
            ch.image = leaf.image;
        } else if (ch.depth >= cfg.max_depth) {
            ch.terminal = TerminalKind::DepthExceeded;
        }
    }
    leaf.expanded = true;
    if (is_root && cfg.mode == SearchMode::Train) {
        add_dirichlet_noise(leaf, cfg.dirichlet_epsilon, cfg.dirichlet_alpha, rng);
    }
    result.value = out.value;
    return result;
}

void backup(std::span<Node* const> path, double r) noexcept {
    for (Node* node : path) {
        ++node->visits;
        node->total_return += r;
    }
}

std::vector<float> root_policy(const Node& root) {
    double total = 0.0;
    for (const Node& ch : root.children) total += ch.visits;
    if (total <= 0.0) {
        throw Error(ErrorKind::InvalidArgument, "root policy undefined: children have no visits");
    }
    std::vector<float> rho(root.children.size());
    for (std::size_t a = 0; a < rho.size(); ++a) {
        rho[a] = static_cast<float>(root.children[a].visits / total);
    }
    return rho;
}

Node advance_root(Node&& root, int action, bool reuse_subtree) {
    if (!root.expanded || action < 0 || static_cast<std::size_t>(action) >= root.children.size()) {
        throw Error(ErrorKind::InvalidArgument,
                    "cannot advance: action " + std::to_string(action) + " is not expanded");
    }
    Node child = std::move(root.children[static_cast<std::size_t>(action)]);
    root.children.clear();
    if (!reuse_subtree) {
        child.visits = 0;
        child.total_return = 0.0;
        child.children.clear();
        child.expanded = false;
        child.terminal_value.reset();
        child.self_evaluations = 0;
    }
    return child;
}

std::size_t count_nodes(const Node& root) noexcept {
    std::size_t n = 1;
    for (const Node& ch : root.children) n += count_nodes(ch);
    return n;
}

nlohmann::json dump_tree(const Node& root) {
    auto nodes = nlohmann::json::array();
    std::deque<std::pair<const Node*, long>> queue{{&root, -1}};
    long next_id = 0;
    while (!queue.empty()) {
        const auto [node, parent] = queue.front();
        queue.pop_front();
        const long id = next_id++;
        nodes.push_back({{"id", id},
                         {"parent", parent},
                         {"action", node->action},
                         {"N", node->visits},
                         {"W", node->total_return},
                         {"prior", node->prior},
                         {"depth", node->depth}});
        for (const Node& ch : node->children) {
            if (ch.visits > 0) queue.emplace_back(&ch, id);
        }
    }
    return {{"nodes", std::move(nodes)}};
}

Search::Search(const Catalog& cat, const Evaluator& evaluator, SearchConfig cfg,
               const Image* target)
    : cat_(cat), evaluator_(evaluator), cfg_(cfg), target_(target), rng_(cfg.seed) {
    cfg_.validate();
    if (evaluator.num_actions() != cat.size()) {
        throw Error(ErrorKind::CatalogMismatch,
                    "evaluator has " + std::to_string(evaluator.num_actions()) +
                        " actions, catalog '" + cat.name() + "' has " + std::to_string(cat.size()));
    }
    if (cfg_.mode != SearchMode::Infer && target_ == nullptr) {
        throw Error(ErrorKind::InvalidArgument, "train and guided search need a target image");
    }
}

void Search::reset(Image root_image) {
    if (target_ && !root_image.same_shape(*target_)) {
        throw Error(ErrorKind::DimensionMismatch, "search input and target differ in size");
    }
    root_ = Node{};
    root_.image = std::make_shared<const Image>(std::move(root_image));
    taken_.clear();
    best_ = TerminalRecord{};
    evaluator_calls_ = 0;
    iterations_run_ = 0;
    finished_ = false;
}

void Search::iterate() {
    const auto path = select_leaf(root_, cfg_);
    Node& leaf = *path.back();
    const bool needs_image =
        !(leaf.terminal == TerminalKind::DepthExceeded && cfg_.mode != SearchMode::Infer);
    if (path.size() >= 2 && needs_image) materialize(leaf, *path[path.size() - 2], cat_);
    const LeafEvaluation ev =
        expand_and_evaluate(leaf, path.size() == 1, evaluator_, target_, cfg_, cat_, rng_);
    if (ev.called_evaluator) ++evaluator_calls_;
    if (leaf.terminal == TerminalKind::Stopped && cfg_.mode != SearchMode::Infer &&
        ev.value > best_.ret) {
        best_.ret = ev.value;
        best_.sequence = taken_;
        for (std::size_t i = 1; i + 1 < path.size(); ++i) best_.sequence.push_back(path[i]->action);
        best_.image = leaf.image;
    }
    backup(path, ev.value);
    ++iterations_run_;
}

void Search::run(std::size_t iterations) {
    for (std::size_t i = 0; i < iterations; ++i) {
        if (finished_ || root_.is_terminal() || iterations_run_ >= cfg_.episode_iterations) break;
        iterate();
    }
}

void Search::advance(int action) {
    if (action == cat_.stop_id()) {
        finished_ = true;
        return;
    }
    if (!root_.expanded || action < 0 || static_cast<std::size_t>(action) >= root_.children.size()) {
        throw Error(ErrorKind::InvalidArgument,
                    "cannot advance: action " + std::to_string(action) + " is not expanded");
    }
    Node& child = root_.children[static_cast<std::size_t>(action)];
    if (child.terminal != TerminalKind::DepthExceeded || cfg_.mode == SearchMode::Infer) {
        materialize(child, root_, cat_);
    }
    root_ = advance_root(std::move(root_), action, cfg_.reuse_subtree);
    taken_.push_back(action);
    if (root_.is_terminal()) {
        finished_ = true;
        return;
    }
    if (root_.expanded && cfg_.mode == SearchMode::Train) {
        add_dirichlet_noise(root_, cfg_.dirichlet_epsilon, cfg_.dirichlet_alpha, rng_);
    }
}

SearchResult run_search(const Image& root_image, const Catalog& cat, const Evaluator& evaluator,
                        const Image* target, const SearchConfig& cfg) {
    Search search(cat, evaluator, cfg, target);
    search.reset(root_image);
    search.run(cfg.iterations);
    SearchResult result{std::move(search.root()), {}};
    const bool any_child_visit = std::any_of(result.root.children.begin(), result.root.children.end(),
                                             [](const Node& ch) { return ch.visits > 0; });
    if (any_child_visit) result.rho = root_policy(result.root);
    return result;
}

}  // namespace trenh
