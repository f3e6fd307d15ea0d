#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "treenhance/evaluator.hpp"
#include "treenhance/image.hpp"
#include "treenhance/metrics.hpp"
#include "treenhance/ops.hpp"

namespace trenh {

/// train: terminal returns from the target, Dirichlet noise at the root.
/// infer: terminal returns estimated by the evaluator value, no noise.
/// guided: terminal returns from the target, no noise.
enum class SearchMode { Train, Infer, Guided };

enum class TerminalKind { None, Stopped, DepthExceeded };

struct SearchConfig {
    double c = 10.0;
    std::size_t max_depth = 10;
    /// Iterations run per root move.
    std::size_t iterations = 1000;
    /// Cap on iterations across all moves of one episode.
    std::size_t episode_iterations = 10000;
    double dirichlet_epsilon = 0.25;
    double dirichlet_alpha = 0.3;
    std::uint64_t seed = 0;
    SearchMode mode = SearchMode::Train;
    ReturnConfig ret{};
    bool reuse_subtree = true;

    void validate() const;
};

/// Search-tree vertex. Child images are materialized lazily, the first time
/// the child is reached by selection, so a tree of N iterations holds at most
/// N images. STOP children share their parent's image.
struct Node {
    std::shared_ptr<const Image> image;
    std::uint32_t visits = 0;
    double total_return = 0.0;
    float prior = 0.0f;
    int action = -1;
    std::size_t depth = 0;
    TerminalKind terminal = TerminalKind::None;
    bool expanded = false;
    std::optional<double> terminal_value;
    /// Number of times this node was the evaluated leaf of an iteration.
    std::uint32_t self_evaluations = 0;
    std::vector<Node> children;

    double mean_return() const noexcept {
        return visits == 0 ? 0.0 : total_return / static_cast<double>(visits);
    }
    bool is_terminal() const noexcept { return terminal != TerminalKind::None; }
};

/// r_mean + c * prior * sqrt(N_parent) / (N_child + 1); r_mean is 0 for an
/// unvisited child.
double ucb(const Node& child, const Node& parent, double c) noexcept;

/// Index of the child with the highest bound; ties go to the lowest id.
std::size_t select_child(const Node& parent, double c) noexcept;

/// Root-to-leaf path following select_child until an unexpanded or terminal
/// node is reached.
std::vector<Node*> select_leaf(Node& root, const SearchConfig& cfg);

/// Computes `child`'s image from its parent if it has none yet.
void materialize(Node& child, const Node& parent, const Catalog& cat);

struct LeafEvaluation {
    double value = 0.0;
    bool called_evaluator = false;
};

/// Evaluates a selected leaf (image already materialized unless it is a
/// depth-exceeded node outside infer mode). Non-terminal leaves are expanded
/// with one child per catalog action. `target` is required outside infer
/// mode. `root_noise` is used only when the leaf is the root in train mode.
LeafEvaluation expand_and_evaluate(Node& leaf, bool is_root, const Evaluator& evaluator,
                                   const Image* target, const SearchConfig& cfg,
                                   const Catalog& cat, std::mt19937_64& rng);

void backup(std::span<Node* const> path, double r) noexcept;

/// Normalized visit distribution over the root's children.
std::vector<float> root_policy(const Node& root);

/// Detaches the chosen child as the new root. Without reuse, its statistics
/// and subtree are reset.
Node advance_root(Node&& root, int action, bool reuse_subtree = true);

/// Mixes symmetric Dirichlet noise into a node's child priors.
void add_dirichlet_noise(Node& node, double epsilon, double alpha, std::mt19937_64& rng);

std::size_t count_nodes(const Node& root) noexcept;

/// Visited nodes in breadth-first order: id, parent, action, N, W, prior, depth.
nlohmann::json dump_tree(const Node& root);

/// Best STOP terminal evaluated so far, with the full operation sequence
/// from the episode's original image.
struct TerminalRecord {
    double ret = -1.0;
    std::vector<int> sequence;
    std::shared_ptr<const Image> image;
};

/// One search tree: owns the root, the rng and bookkeeping across moves.
class Search {
public:
    Search(const Catalog& cat, const Evaluator& evaluator, SearchConfig cfg,
           const Image* target = nullptr);

    void reset(Image root_image);
    void run(std::size_t iterations);
    /// One select / expand-evaluate / backup round.
    void iterate();
    void advance(int action);

    Node& root() noexcept { return root_; }
    const Node& root() const noexcept { return root_; }
    std::vector<float> policy() const { return root_policy(root_); }
    const std::vector<int>& taken() const noexcept { return taken_; }
    const TerminalRecord& best_terminal() const noexcept { return best_; }
    std::size_t evaluator_calls() const noexcept { return evaluator_calls_; }
    std::size_t iterations_run() const noexcept { return iterations_run_; }
    bool finished() const noexcept { return finished_; }
    const SearchConfig& config() const noexcept { return cfg_; }
    std::mt19937_64& rng() noexcept { return rng_; }

private:
    const Catalog& cat_;
    const Evaluator& evaluator_;
    SearchConfig cfg_;
    const Image* target_;
    std::mt19937_64 rng_;
    Node root_;
    std::vector<int> taken_;
    TerminalRecord best_;
    std::size_t evaluator_calls_ = 0;
    std::size_t iterations_run_ = 0;
    bool finished_ = false;
};

/// `rho` is empty when no child of the root has been visited yet.
struct SearchResult {
    Node root;
    std::vector<float> rho;
};

SearchResult run_search(const Image& root_image, const Catalog& cat, const Evaluator& evaluator,
                        const Image* target, const SearchConfig& cfg);

}  // namespace trenh
