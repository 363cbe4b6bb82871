#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <vector>

#include <rlf/inference.hpp>
#include <rlf/train.hpp>

#include "support/synthetic.hpp"

using namespace rlf;
using train::NodePartition;
using train::SplitCandidate;

namespace {

Dataset make_random_dataset(std::size_t n, std::uint32_t d, std::uint32_t nc,
                            std::uint64_t seed) {
    Dataset ds;
    ds.num_samples = n;
    ds.feature_dim = d;
    ds.num_classes = nc;
    SplitMix64 rng(seed);
    ds.features.resize(n * d);
    for (auto& v : ds.features) v = rng.next_open01();
    ds.labels.resize(n);
    for (auto& lab : ds.labels) lab = static_cast<std::int32_t>(rng.next_below(nc));
    return ds;
}

NodePartition all_samples(const Dataset& ds, std::size_t node_id = 0) {
    NodePartition part;
    part.node_id = node_id;
    part.sample_ids.resize(ds.num_samples);
    for (std::size_t n = 0; n < ds.num_samples; ++n)
        part.sample_ids[n] = static_cast<std::uint32_t>(n);
    return part;
}

// 4 samples on one feature at exactly 0 and 1: every threshold drawn from the
// open range (0, 1) separates them perfectly.
Dataset make_separable() {
    Dataset ds;
    ds.num_samples = 4;
    ds.feature_dim = 1;
    ds.num_classes = 2;
    ds.features = {0.0, 0.0, 1.0, 1.0};
    ds.labels = {0, 0, 1, 1};
    return ds;
}

}  // namespace

TEST_CASE("sample_candidates draws pool x thresholds from node-local open ranges", "[train]") {
    const auto ds = make_random_dataset(30, 16, 2, 41);
    const auto part = all_samples(ds);
    TrainConfig cfg;  // feature_pool auto -> ceil(sqrt(16)) = 4

    auto rng = derive_stream(7, StreamPurpose::kSplitSearch, 0, 0, 0);
    const auto cands = train::sample_candidates(part, ds, cfg, rng);
    REQUIRE(cands.size() == 40);

    std::set<std::int32_t> features;
    for (const auto& c : cands) {
        REQUIRE(c.valid);
        features.insert(c.feature_index);
        REQUIRE(c.feature_index >= 0);
        REQUIRE(c.feature_index < 16);
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto id : part.sample_ids) {
            const double v = ds.features[id * 16 + c.feature_index];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        REQUIRE(c.threshold > lo);
        REQUIRE(c.threshold < hi);
    }
    REQUIRE(features.size() == 4);

    // same derived stream, same candidates
    auto rng2 = derive_stream(7, StreamPurpose::kSplitSearch, 0, 0, 0);
    const auto again = train::sample_candidates(part, ds, cfg, rng2);
    REQUIRE(again.size() == cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) {
        REQUIRE(again[i].feature_index == cands[i].feature_index);
        REQUIRE(again[i].threshold == cands[i].threshold);
        REQUIRE(again[i].valid == cands[i].valid);
    }
}

TEST_CASE("constant features yield only invalid candidates", "[train]") {
    Dataset ds;
    ds.num_samples = 5;
    ds.feature_dim = 2;
    ds.num_classes = 2;
    ds.features.assign(10, 3.25);
    ds.labels = {0, 1, 0, 1, 0};

    TrainConfig cfg;
    cfg.feature_pool = 2;
    auto rng = derive_stream(1, StreamPurpose::kSplitSearch, 0, 0, 0);
    const auto cands = train::sample_candidates(all_samples(ds), ds, cfg, rng);
    REQUIRE(cands.size() == 20);
    for (const auto& c : cands) {
        REQUIRE_FALSE(c.valid);
        REQUIRE(c.threshold == 3.25);
    }
    REQUIRE_THROWS_AS(train::candidate_loss(cands[0], all_samples(ds), ds,
                                            PriorState(5, 2), cfg),
                      ValidationError);
}

TEST_CASE("splitting a balanced node into balanced children gains nothing", "[train]") {
    Dataset ds;
    ds.num_samples = 4;
    ds.feature_dim = 1;
    ds.num_classes = 2;
    ds.features = {0.0, 0.0, 1.0, 1.0};
    ds.labels = {0, 1, 0, 1};  // every threshold leaves both children 1:1

    TrainConfig cfg;
    const PriorState prior(4, 2);
    const SplitCandidate cand{0, 0.5, true};
    const auto score = train::candidate_loss(cand, all_samples(ds), ds, prior, cfg);

    // each child fits the neutral residual q = 1, so the node contributes the
    // unsplit uniform loss 4 * log 2 and the leaf rows are exactly zero
    REQUIRE(std::abs(score.loss_contribution - 4.0 * std::log(2.0)) < 1e-12);
    for (const double v : score.left_log_residual) REQUIRE(v == 0.0);
    for (const double v : score.right_log_residual) REQUIRE(v == 0.0);

    // no strict improvement means the level keeps the node inactive
    const auto level = train::grow_tree_level({all_samples(ds)}, ds, prior, cfg, 0, 0);
    REQUIRE(level.nodes[0].feature_index == kInactive);
    REQUIRE(level.next_partitions.size() == 1);
    REQUIRE(level.next_partitions[0].node_id == 1);  // samples flow to the left child
    REQUIRE(level.next_partitions[0].sample_ids == all_samples(ds).sample_ids);
}

TEST_CASE("a class-separating candidate drives the loss contribution to ~0", "[train]") {
    const auto ds = make_separable();
    TrainConfig cfg;
    const PriorState prior(4, 2);
    const auto score =
        train::candidate_loss(SplitCandidate{0, 0.5, true}, all_samples(ds), ds, prior, cfg);
    REQUIRE(score.loss_contribution < 1e-5);
    REQUIRE(score.loss_contribution >= 0.0);
    REQUIRE(score.left_log_residual[0] == std::log(2.0));
    REQUIRE(score.left_log_residual[1] == std::log(1e-6));
    REQUIRE(score.right_log_residual[0] == std::log(1e-6));
    REQUIRE(score.right_log_residual[1] == std::log(2.0));
}

TEST_CASE("fitted candidates never exceed the unsplit node loss", "[train]") {
    SplitMix64 seeds(2024);
    for (int rep = 0; rep < 100; ++rep) {
        const std::uint32_t nc = 2 + static_cast<std::uint32_t>(seeds.next_below(3));
        const std::size_t m = 2 + seeds.next_below(29);
        const auto ds = make_random_dataset(m, 3, nc, seeds.next());

        PriorState prior(m, nc);
        for (auto& v : prior.log_prior) v = seeds.next_in_open(-2.0, 2.0);

        // unsplit reference: members scored by their prior posteriors alone
        double prior_loss = 0.0;
        for (std::size_t n = 0; n < m; ++n) {
            const auto p = normalize_posterior(prior.row(n));
            prior_loss -= std::log(std::max(p[ds.labels[n]], kProbFloor));
        }

        TrainConfig cfg;
        cfg.residual_iterations = 300;
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t n = 0; n < m; ++n) {
            lo = std::min(lo, ds.features[n * 3]);
            hi = std::max(hi, ds.features[n * 3]);
        }
        if (!(hi > lo)) continue;
        const SplitCandidate cand{0, seeds.next_in_open(lo, hi), true};
        const auto score = train::candidate_loss(cand, all_samples(ds), ds, prior, cfg);
        REQUIRE(score.loss_contribution <= prior_loss + 1e-9);
    }
}

TEST_CASE("exact ties resolve to the lowest feature then lowest threshold", "[train]") {
    // two identical feature columns: every candidate of either feature induces
    // the same perfect split, so all 20 scores tie bitwise
    Dataset ds;
    ds.num_samples = 4;
    ds.feature_dim = 2;
    ds.num_classes = 2;
    ds.features = {0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0};  // rows (0,0),(0,0),(1,1),(1,1)
    ds.labels = {0, 0, 1, 1};

    TrainConfig cfg;
    cfg.max_depth = 1;
    cfg.seed = 5;

    // replicate the root's candidate stream to learn the drawn thresholds
    auto rng = derive_stream(cfg.seed, StreamPurpose::kSplitSearch, 0, 0, 0);
    const auto cands = train::sample_candidates(all_samples(ds), ds, cfg, rng);
    double min_t0 = std::numeric_limits<double>::infinity();
    for (const auto& c : cands)
        if (c.feature_index == 0) min_t0 = std::min(min_t0, c.threshold);
    REQUIRE(std::isfinite(min_t0));

    const auto tree = train::train_tree(ds, PriorState(4, 2), cfg, 0);
    REQUIRE(tree.nodes[0].feature_index == 0);
    REQUIRE(tree.nodes[0].threshold == min_t0);
}

TEST_CASE("train_tree on separable data produces pure leaves", "[train]") {
    const auto ds = make_separable();
    TrainConfig cfg;
    cfg.max_depth = 1;

    const auto tree = train::train_tree(ds, PriorState(4, 2), cfg, 0);
    REQUIRE(tree.nodes.size() == 1);
    REQUIRE(tree.leaf_count() == 2);
    REQUIRE(tree.nodes[0].feature_index == 0);
    REQUIRE(tree.nodes[0].threshold > 0.0);
    REQUIRE(tree.nodes[0].threshold < 1.0);

    const auto left = tree.leaf_row(0);
    const auto right = tree.leaf_row(1);
    REQUIRE(left[0] == std::log(2.0));
    REQUIRE(left[1] == std::log(1e-6));
    REQUIRE(right[0] == std::log(1e-6));
    REQUIRE(right[1] == std::log(2.0));

    // deterministic repeat is bitwise identical
    const auto tree2 = train::train_tree(ds, PriorState(4, 2), cfg, 0);
    REQUIRE(tree2.leaf_log_residuals == tree.leaf_log_residuals);
    REQUIRE(tree2.nodes[0].threshold == tree.nodes[0].threshold);
}

TEST_CASE("an unsplittable tree routes everything to leaf 0", "[train]") {
    Dataset ds;
    ds.num_samples = 6;
    ds.feature_dim = 2;
    ds.num_classes = 2;
    ds.features.assign(12, 1.0);
    ds.labels = {0, 0, 0, 0, 1, 1};

    TrainConfig cfg;
    cfg.max_depth = 3;
    const auto tree = train::train_tree(ds, PriorState(6, 2), cfg, 0);
    for (const auto& node : tree.nodes) REQUIRE(node.feature_index == kInactive);

    // leaf 0 holds the whole-set residual (counts 4:2 under uniform priors);
    // unreachable leaves stay neutral
    REQUIRE(tree.leaf_row(0)[0] == std::log(2.0 * 4.0 / 6.0));
    REQUIRE(tree.leaf_row(0)[1] == std::log(2.0 * 2.0 / 6.0));
    for (std::size_t leaf = 1; leaf < tree.leaf_count(); ++leaf) {
        REQUIRE(tree.leaf_row(leaf)[0] == 0.0);
        REQUIRE(tree.leaf_row(leaf)[1] == 0.0);
    }
    for (std::size_t n = 0; n < ds.num_samples; ++n)
        REQUIRE(infer::route(tree, ds.row(n)) == 0);
}

TEST_CASE("update_priors adds the routed leaf row in place", "[train]") {
    const auto ds = make_separable();
    TrainConfig cfg;
    cfg.max_depth = 1;
    const auto tree = train::train_tree(ds, PriorState(4, 2), cfg, 0);

    // a neutral tree: all-inactive nodes with zero leaves leaves priors alone
    TreeModel neutral;
    neutral.depth = 2;
    neutral.num_classes = 2;
    neutral.nodes.assign(neutral.node_count(), DecisionNode{});
    neutral.leaf_log_residuals.assign(neutral.leaf_count() * 2, 0.0);

    PriorState prior(4, 2);
    for (std::size_t i = 0; i < prior.log_prior.size(); ++i)
        prior.log_prior[i] = 0.125 * static_cast<double>(i);
    const auto before = prior.log_prior;
    train::update_priors(prior, neutral, ds);
    REQUIRE(prior.log_prior == before);

    train::update_priors(prior, tree, ds);
    for (std::size_t n = 0; n < 4; ++n) {
        const auto leaf = tree.leaf_row(infer::route(tree, ds.row(n)));
        for (std::uint32_t j = 0; j < 2; ++j)
            REQUIRE(prior.log_prior[n * 2 + j] == before[n * 2 + j] + leaf[j]);
    }

    // order of accumulation across trees does not matter
    PriorState ab(4, 2), ba(4, 2);
    train::update_priors(ab, tree, ds);
    train::update_priors(ab, neutral, ds);
    train::update_priors(ba, neutral, ds);
    train::update_priors(ba, tree, ds);
    REQUIRE(ab.log_prior == ba.log_prior);

    PriorState wrong(3, 2);
    REQUIRE_THROWS_AS(train::update_priors(wrong, tree, ds), ValidationError);
}

TEST_CASE("train_forest traces one loss per tree and matches inference", "[train]") {
    const auto ds = testsupport::make_gaussian_mixture(200, 4, 3, 17);
    TrainConfig cfg;
    cfg.num_trees = 5;
    cfg.max_depth = 3;
    cfg.seed = 3;

    const auto result = train::train_forest(ds, cfg);
    REQUIRE(result.loss_trace.size() == 5);
    REQUIRE(result.forest.trees.size() == 5);
    REQUIRE(result.forest.kind == ForestKind::RLF);

    // the recorded training loss equals the loss recomputed through inference
    std::vector<double> post(ds.num_samples * 3);
    for (std::size_t n = 0; n < ds.num_samples; ++n) {
        const auto p = infer::predict_proba(result.forest, ds.row(n));
        std::copy(p.begin(), p.end(), post.begin() + n * 3);
    }
    const double replayed = cross_entropy_loss(post, ds.num_samples, 3, ds.labels);
    REQUIRE(std::abs(replayed - result.loss_trace.back()) < 1e-12);

    // reruns are bit-identical
    const auto rerun = train::train_forest(ds, cfg);
    REQUIRE(rerun.loss_trace == result.loss_trace);
    for (std::size_t t = 0; t < 5; ++t) {
        REQUIRE(rerun.forest.trees[t].leaf_log_residuals ==
                result.forest.trees[t].leaf_log_residuals);
    }
}

TEST_CASE("training loss never increases tree over tree", "[train]") {
    for (const std::uint64_t seed : {1ull, 2ull}) {
        const auto ds = testsupport::make_gaussian_mixture(400, 5, 3, seed);
        TrainConfig cfg;
        cfg.num_trees = 8;
        cfg.max_depth = 4;
        cfg.residual_iterations = 64;
        cfg.seed = seed;
        const auto result = train::train_forest(ds, cfg);
        for (std::size_t t = 1; t < result.loss_trace.size(); ++t)
            REQUIRE(result.loss_trace[t] <= result.loss_trace[t - 1] + 1e-9);
    }
}

TEST_CASE("train_forest validates dataset and config", "[train]") {
    const auto ds = make_separable();
    TrainConfig cfg;
    cfg.num_trees = 0;
    REQUIRE_THROWS_AS(train::train_forest(ds, cfg), ValidationError);

    cfg = TrainConfig{};
    cfg.epsilon = 1.0;
    REQUIRE_THROWS_AS(train::train_forest(ds, cfg), ValidationError);

    Dataset bad = ds;
    bad.labels[0] = 9;
    REQUIRE_THROWS_AS(train::train_forest(bad, TrainConfig{}), ValidationError);
}
