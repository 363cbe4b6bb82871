#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "rlf/common.hpp"
#include "rlf/dataset.hpp"
#include "rlf/model.hpp"
#include "rlf/rng.hpp"
#include "rlf/train.hpp"

namespace rlf::baseline {

inline double gini_impurity(const std::vector<std::uint32_t>& class_counts) {
    std::uint64_t total = 0;
    for (const auto c : class_counts) total += c;
    if (total == 0) throw ValidationError("gini_impurity: all counts zero");
    double acc = 0.0;
    for (const auto c : class_counts) {
        const double f = static_cast<double>(c) / static_cast<double>(total);
        acc += f * f;
    }
    return 1.0 - acc;
}

// Same candidate scheme as the residual trainer, scored by size-weighted
// child Gini. Returns nothing when the node is pure or no candidate strictly
// improves on the parent impurity; ties break on lowest (feature, threshold).
inline std::optional<train::SplitCandidate> best_gini_split(const train::NodePartition& partition,
                                                            const Dataset& ds,
                                                            const TrainConfig& cfg,
                                                            SplitMix64& rng) {
    if (partition.sample_ids.empty())
        throw ValidationError("best_gini_split: empty partition");
    const std::uint32_t nc = ds.num_classes;
    std::vector<std::uint32_t> parent_counts(nc, 0);
    for (const auto id : partition.sample_ids) ++parent_counts[ds.labels[id]];
    const double parent = gini_impurity(parent_counts);
    if (parent == 0.0) return std::nullopt;  // pure node

    const auto cands = train::sample_candidates(partition, ds, cfg, rng);
    const double total = static_cast<double>(partition.sample_ids.size());

    bool found = false;
    double best_score = std::numeric_limits<double>::infinity();
    train::SplitCandidate best{};
    std::vector<std::uint32_t> left_counts(nc), right_counts(nc);
    for (const auto& cand : cands) {
        if (!cand.valid) continue;
        std::fill(left_counts.begin(), left_counts.end(), 0u);
        std::fill(right_counts.begin(), right_counts.end(), 0u);
        std::uint32_t n_left = 0;
        for (const auto id : partition.sample_ids) {
            const double v =
                ds.features[std::size_t{id} * ds.feature_dim + cand.feature_index];
            if (v < cand.threshold) {
                ++left_counts[ds.labels[id]];
                ++n_left;
            } else {
                ++right_counts[ds.labels[id]];
            }
        }
        const auto n_right = static_cast<std::uint32_t>(partition.sample_ids.size()) - n_left;
        if (n_left == 0 || n_right == 0) continue;
        const double score = (n_left * gini_impurity(left_counts) +
                              n_right * gini_impurity(right_counts)) /
                             total;
        const bool better =
            score < best_score ||
            (score == best_score &&
             (cand.feature_index < best.feature_index ||
              (cand.feature_index == best.feature_index && cand.threshold < best.threshold)));
        if (better) {
            found = true;
            best_score = score;
            best = cand;
        }
    }
    if (!found || !(best_score < parent)) return std::nullopt;
    return best;
}

// One CART tree to max_depth on a bootstrap resample (N draws with
// replacement) unless bagging is disabled. Leaves store the log of
// Laplace-smoothed class frequencies; empty leaves store the uniform
// distribution.
inline TreeModel train_rf_tree(const Dataset& ds, const TrainConfig& cfg,
                               std::uint32_t tree_index) {
    const std::uint32_t nc = ds.num_classes;
    TreeModel tree;
    tree.depth = cfg.max_depth;
    tree.num_classes = nc;
    tree.nodes.assign(tree.node_count(), DecisionNode{});

    std::vector<train::NodePartition> parts(1);
    parts[0].node_id = 0;
    parts[0].sample_ids.resize(ds.num_samples);
    if (cfg.rf_bagging) {
        auto boot = derive_stream(cfg.seed, StreamPurpose::kBootstrap, tree_index);
        for (auto& id : parts[0].sample_ids)
            id = static_cast<std::uint32_t>(boot.next_below(ds.num_samples));
    } else {
        for (std::size_t n = 0; n < ds.num_samples; ++n)
            parts[0].sample_ids[n] = static_cast<std::uint32_t>(n);
    }

    for (std::uint32_t level = 0; level < cfg.max_depth; ++level) {
        std::vector<train::NodePartition> next;
        for (const auto& part : parts) {
            auto rng = derive_stream(cfg.seed, StreamPurpose::kSplitSearch, tree_index, level,
                                     part.node_id);
            const auto chosen = best_gini_split(part, ds, cfg, rng);
            const std::size_t left_id = 2 * part.node_id + 1;
            const std::size_t right_id = 2 * part.node_id + 2;
            if (chosen) {
                tree.nodes[part.node_id] =
                    DecisionNode{chosen->feature_index, chosen->threshold};
                train::NodePartition lp{left_id, {}}, rp{right_id, {}};
                for (const auto id : part.sample_ids) {
                    const double v =
                        ds.features[std::size_t{id} * ds.feature_dim + chosen->feature_index];
                    (v < chosen->threshold ? lp.sample_ids : rp.sample_ids).push_back(id);
                }
                next.push_back(std::move(lp));
                next.push_back(std::move(rp));
            } else {
                next.push_back(train::NodePartition{left_id, part.sample_ids});
            }
        }
        parts = std::move(next);
    }

    // leaves: Laplace-smoothed frequencies, alpha = 1
    tree.leaf_log_residuals.assign(tree.leaf_count() * nc,
                                   std::log(1.0 / static_cast<double>(nc)));
    const std::size_t leaf_base = tree.node_count();
    for (const auto& part : parts) {
        std::vector<std::uint32_t> counts(nc, 0);
        for (const auto id : part.sample_ids) ++counts[ds.labels[id]];
        const double denom = static_cast<double>(part.sample_ids.size() + nc);
        const auto leaf = tree.leaf_row(part.node_id - leaf_base);
        for (std::uint32_t j = 0; j < nc; ++j)
            leaf[j] = std::log(static_cast<double>(counts[j] + 1) / denom);
    }
    return tree;
}

inline ForestModel train_rf(const Dataset& ds, const TrainConfig& cfg) {
    validate_dataset(ds);
    validate_config(cfg);
    if (ds.num_samples == 0) throw ValidationError("train_rf: empty dataset");
    ForestModel forest;
    forest.kind = ForestKind::RF;
    forest.num_classes = ds.num_classes;
    forest.feature_dim = ds.feature_dim;
    for (std::uint32_t t = 0; t < cfg.num_trees; ++t)
        forest.trees.push_back(train_rf_tree(ds, cfg, t));
    return forest;
}

}  // namespace rlf::baseline
