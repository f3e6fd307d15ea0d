#include <doctest.h>

#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "support/synthetic.hpp"
#include "treenhance/error.hpp"
#include "treenhance/mcts.hpp"
#include "treenhance/metrics.hpp"

using namespace trenh;

namespace {

/// Fixed priors and value regardless of the image.
class FixedEvaluator final : public Evaluator {
public:
    FixedEvaluator(std::vector<float> priors, float value) : priors_(std::move(priors)), value_(value) {}
    std::size_t num_actions() const override { return priors_.size(); }
    EvaluatorOutput evaluate(const Image&) const override { return {priors_, value_}; }

private:
    std::vector<float> priors_;
    float value_;
};

Catalog toy_catalog() {
    return Catalog("custom", {{0, Family::Stop, ChannelMask::All, 0.0f, true},
                              {1, Family::Brightness, ChannelMask::All, 0.1f, false},
                              {2, Family::Brightness, ChannelMask::All, -0.1f, false},
                              {3, Family::Gamma, ChannelMask::All, 0.6f, false}});
}

Node parent_with_children(std::vector<float> priors, std::uint32_t parent_visits) {
    Node parent;
    parent.visits = parent_visits;
    parent.expanded = true;
    for (std::size_t i = 0; i < priors.size(); ++i) {
        Node ch;
        ch.action = static_cast<int>(i);
        ch.prior = priors[i];
        parent.children.push_back(ch);
    }
    return parent;
}

void check_invariants(const Node& node) {
    std::uint32_t child_visits = 0;
    double prior_sum = 0.0;
    for (const Node& ch : node.children) {
        child_visits += ch.visits;
        prior_sum += ch.prior;
        CHECK(ch.depth == node.depth + 1);
        check_invariants(ch);
    }
    if (!node.children.empty()) {
        CHECK(node.visits == child_visits + node.self_evaluations);
        CHECK(prior_sum == doctest::Approx(1.0).epsilon(1e-5));
    }
    CHECK(node.mean_return() >= 0.0);
    CHECK(node.mean_return() <= 1.0 + 1e-12);
    if (node.is_terminal()) CHECK(node.children.empty());
}

bool same_tree(const Node& a, const Node& b) {
    if (a.visits != b.visits || a.total_return != b.total_return || a.children.size() != b.children.size())
        return false;
    for (std::size_t i = 0; i < a.children.size(); ++i)
        if (!same_tree(a.children[i], b.children[i])) return false;
    return true;
}

}  // namespace

TEST_CASE("ucb score") {
    Node parent = parent_with_children({0.5f, 0.5f}, 4);
    CHECK(ucb(parent.children[0], parent, 10.0) == doctest::Approx(10.0));
    parent.children[0].visits = 3;
    parent.children[0].total_return = 1.5;
    CHECK(ucb(parent.children[0], parent, 0.0) == doctest::Approx(0.5));
    parent.children[1].visits = 1;
    parent.children[1].total_return = 0.5;
    CHECK(ucb(parent.children[1], parent, 1.0) > ucb(parent.children[0], parent, 1.0));
}

TEST_CASE("selection breaks ties by lowest id and is shift invariant") {
    Node parent = parent_with_children({0.25f, 0.25f, 0.25f, 0.25f}, 1);
    CHECK(select_child(parent, 1.0) == 0);
    for (Node& ch : parent.children) {
        ch.visits = 1;
        ch.total_return = 0.3;
    }
    parent.visits = 5;
    CHECK(select_child(parent, 1.0) == 0);
    parent.children[2].total_return = 0.4;
    CHECK(select_child(parent, 1.0) == 2);
}

TEST_CASE("second iteration follows the strongest prior") {
    const Catalog cat("custom", {{0, Family::Stop, ChannelMask::All, 0.0f, true},
                                 {1, Family::Brightness, ChannelMask::All, 0.1f, false},
                                 {2, Family::Brightness, ChannelMask::All, -0.1f, false}});
    const FixedEvaluator ev({0.1f, 0.7f, 0.2f}, 0.0f);
    SearchConfig cfg;
    cfg.mode = SearchMode::Infer;
    Search search(cat, ev, cfg);
    search.reset(Image(2, 2, 0.5f));
    CHECK(select_leaf(search.root(), cfg).size() == 1);
    search.run(1);
    CHECK(search.root().visits == 1);
    CHECK(search.root().expanded);
    const auto path = select_leaf(search.root(), cfg);
    REQUIRE(path.size() == 2);
    CHECK(path[1]->action == 1);
}

TEST_CASE("expansion and terminal rules") {
    const Catalog cat = toy_catalog();
    const UniformEvaluator ev(cat.size());
    const Image img(2, 2, 0.5f);
    SearchConfig cfg;
    cfg.mode = SearchMode::Guided;
    cfg.max_depth = 2;
    std::mt19937_64 rng(0);

    Node root;
    root.image = std::make_shared<const Image>(img);
    const LeafEvaluation first = expand_and_evaluate(root, true, ev, &img, cfg, cat, rng);
    CHECK(first.value == 0.5);
    REQUIRE(root.children.size() == cat.size());
    CHECK(root.children[0].terminal == TerminalKind::Stopped);
    CHECK(expand_and_evaluate(root.children[0], false, ev, &img, cfg, cat, rng).value == 1.0);

    Node& child = root.children[1];
    materialize(child, root, cat);
    expand_and_evaluate(child, false, ev, &img, cfg, cat, rng);
    CHECK(child.children[0].terminal == TerminalKind::Stopped);
    CHECK(child.children[2].terminal == TerminalKind::DepthExceeded);
    const LeafEvaluation deep = expand_and_evaluate(child.children[2], false, ev, &img, cfg, cat, rng);
    CHECK(deep.value == 0.0);
    CHECK(child.children[2].children.empty());
}

TEST_CASE("dirichlet noise keeps the prior simplex, train mode root only") {
    const Catalog cat = toy_catalog();
    const UniformEvaluator ev(cat.size());
    const Image img(2, 2, 0.5f);
    SearchConfig cfg;
    cfg.mode = SearchMode::Train;
    std::mt19937_64 rng(3);
    Node root;
    root.image = std::make_shared<const Image>(img);
    expand_and_evaluate(root, true, ev, &img, cfg, cat, rng);
    double sum = 0.0;
    bool changed = false;
    for (const Node& ch : root.children) {
        sum += ch.prior;
        changed = changed || std::fabs(ch.prior - 0.25f) > 1e-6f;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(changed);

    cfg.mode = SearchMode::Guided;
    Node plain;
    plain.image = root.image;
    expand_and_evaluate(plain, true, ev, &img, cfg, cat, rng);
    for (const Node& ch : plain.children) CHECK(ch.prior == 0.25f);
}

TEST_CASE("backup and root policy") {
    Node a, b, c;
    Node* path[] = {&a, &b, &c};
    backup(path, 1.0);
    for (Node* n : path) {
        CHECK(n->visits == 1);
        CHECK(n->total_return == 1.0);
    }
    Node root = parent_with_children({0.3f, 0.3f, 0.4f}, 101);
    root.children[0].visits = 10;
    root.children[1].visits = 30;
    root.children[2].visits = 60;
    const auto rho = root_policy(root);
    CHECK(rho[0] == doctest::Approx(0.1));
    CHECK(rho[1] == doctest::Approx(0.3));
    CHECK(rho[2] == doctest::Approx(0.6));
    Node empty = parent_with_children({0.5f, 0.5f}, 1);
    CHECK_THROWS_AS(root_policy(empty), Error);
}

TEST_CASE("search invariants, determinism and node bound") {
    const Catalog cat = catalog("fivek");
    const auto ic = testing::fivek_inverse_case(3, 12);
    const UniformEvaluator ev(cat.size());
    SearchConfig cfg;
    cfg.mode = SearchMode::Train;
    cfg.iterations = 300;
    cfg.seed = 17;
    const SearchResult a = run_search(ic.input, cat, ev, &ic.target, cfg);
    const SearchResult b = run_search(ic.input, cat, ev, &ic.target, cfg);
    CHECK(a.root.visits == 300);
    CHECK(same_tree(a.root, b.root));
    CHECK(a.rho == b.rho);
    CHECK(std::accumulate(a.rho.begin(), a.rho.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));
    check_invariants(a.root);
    CHECK(count_nodes(a.root) <= 1 + cfg.iterations * cat.size());

    const auto dump = dump_tree(a.root);
    REQUIRE(dump["nodes"].is_array());
    CHECK(dump["nodes"][0]["N"] == 300);
    CHECK(dump["nodes"][0]["parent"] == -1);
}

TEST_CASE("root advance reuses the subtree") {
    const Catalog cat = toy_catalog();
    const UniformEvaluator ev(cat.size());
    const Image img(3, 3, 0.4f);
    const Image target = apply(cat[1], img);
    SearchConfig cfg;
    cfg.mode = SearchMode::Guided;
    cfg.iterations = 200;
    Search search(cat, ev, cfg, &target);
    search.reset(img);
    search.run(200);
    const std::uint32_t child_visits = search.root().children[1].visits;
    search.advance(1);
    CHECK(search.root().visits == child_visits);
    CHECK(search.root().depth == 1);
    CHECK(search.taken() == std::vector<int>{1});
    CHECK(*search.root().image == target);
    search.advance(0);
    CHECK(search.finished());
    CHECK(search.best_terminal().ret == 1.0);
    CHECK(search.best_terminal().sequence == std::vector<int>{1});

    Node fresh;
    CHECK_THROWS_AS(advance_root(std::move(fresh), 0), Error);
}

TEST_CASE("search without reuse starts the new root fresh") {
    const Catalog cat = toy_catalog();
    const UniformEvaluator ev(cat.size());
    const Image img(3, 3, 0.4f);
    SearchConfig cfg;
    cfg.mode = SearchMode::Guided;
    cfg.reuse_subtree = false;
    Search search(cat, ev, cfg, &img);
    search.reset(img);
    search.run(50);
    search.advance(2);
    CHECK(search.root().visits == 0);
    CHECK_FALSE(search.root().expanded);
}

TEST_CASE("config validation and catalog checks") {
    SearchConfig bad;
    bad.max_depth = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = {};
    bad.c = -1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    const Catalog cat = toy_catalog();
    const UniformEvaluator wrong(7);
    CHECK_THROWS_AS(Search(cat, wrong, SearchConfig{}), Error);
    const UniformEvaluator ok(cat.size());
    SearchConfig guided;
    guided.mode = SearchMode::Guided;
    CHECK_THROWS_AS(Search(cat, ok, guided), Error);
    const Image target(2, 2);
    Search sized(cat, ok, guided, &target);
    CHECK_THROWS_AS(sized.reset(Image(3, 3)), Error);
}
