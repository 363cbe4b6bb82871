#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rlf/common.hpp"

namespace rlf {

enum class ForestKind : std::uint8_t { RLF = 0, RF = 1 };

inline const char* kind_name(ForestKind k) { return k == ForestKind::RLF ? "rlf" : "rf"; }

// One decision-node slot of a complete binary tree. An inactive node routes
// every sample to its left child.
struct DecisionNode {
    std::int32_t feature_index = kInactive;
    double threshold = 0.0;
};

// Complete binary tree of depth D: 2^D - 1 nodes in breadth-first order and
// 2^D leaf rows of per-class values in the natural-log domain. RLF trees
// store log-residuals; RF trees store log class distributions.
struct TreeModel {
    std::uint32_t depth = 1;
    std::uint32_t num_classes = 0;
    std::vector<DecisionNode> nodes;
    std::vector<double> leaf_log_residuals;  // leaf_count() * num_classes

    std::size_t node_count() const { return (std::size_t{1} << depth) - 1; }
    std::size_t leaf_count() const { return std::size_t{1} << depth; }

    std::span<const double> leaf_row(std::size_t leaf) const {
        return {leaf_log_residuals.data() + leaf * num_classes, num_classes};
    }
    std::span<double> leaf_row(std::size_t leaf) {
        return {leaf_log_residuals.data() + leaf * num_classes, num_classes};
    }
};

struct ForestModel {
    ForestKind kind = ForestKind::RLF;
    std::uint32_t num_classes = 0;
    std::uint32_t feature_dim = 0;
    std::vector<TreeModel> trees;
};

// Per-sample accumulated log-prior over classes. Rows carry an arbitrary
// additive gauge; normalize_posterior is the canonical observable.
struct PriorState {
    std::size_t num_samples = 0;
    std::uint32_t num_classes = 0;
    std::vector<double> log_prior;  // num_samples * num_classes, starts at zero

    PriorState() = default;
    PriorState(std::size_t n, std::uint32_t nc)
        : num_samples(n), num_classes(nc), log_prior(n * nc, 0.0) {}

    std::span<const double> row(std::size_t n) const {
        return {log_prior.data() + n * num_classes, num_classes};
    }
    std::span<double> row(std::size_t n) {
        return {log_prior.data() + n * num_classes, num_classes};
    }
};

// feature_pool value requesting ceil(sqrt(feature_dim)) features per node.
inline constexpr std::uint32_t kAutoFeaturePool = 0;

struct TrainConfig {
    std::uint32_t num_trees = 100;
    std::uint32_t max_depth = 15;
    std::uint32_t feature_pool = kAutoFeaturePool;
    std::uint32_t thresholds_per_feature = 10;
    std::uint32_t residual_iterations = 1;
    double epsilon = 1e-6;
    std::uint64_t seed = 0;
    bool rf_bagging = true;  // baseline forest only; the residual trainer never resamples
};

inline std::uint32_t resolve_feature_pool(const TrainConfig& cfg, std::uint32_t feature_dim) {
    const std::uint32_t pool =
        cfg.feature_pool == kAutoFeaturePool ? ceil_sqrt(feature_dim) : cfg.feature_pool;
    return std::min(pool, feature_dim);
}

inline void validate_config(const TrainConfig& cfg) {
    if (cfg.num_trees < 1) throw ValidationError("config: num_trees must be >= 1");
    if (cfg.max_depth < 1) throw ValidationError("config: max_depth must be >= 1");
    if (cfg.thresholds_per_feature < 1)
        throw ValidationError("config: thresholds_per_feature must be >= 1");
    if (cfg.residual_iterations < 1)
        throw ValidationError("config: residual_iterations must be >= 1");
    if (!(cfg.epsilon > 0.0) || !(cfg.epsilon < 1.0))
        throw ValidationError("config: epsilon must lie in (0, 1)");
}

inline void validate_forest(const ForestModel& forest) {
    for (const auto& tree : forest.trees) {
        if (tree.depth < 1) throw ValidationError("forest: tree depth must be >= 1");
        if (tree.num_classes != forest.num_classes)
            throw ValidationError("forest: tree num_classes mismatch");
        if (tree.nodes.size() != tree.node_count())
            throw ValidationError("forest: node array size mismatch");
        if (tree.leaf_log_residuals.size() != tree.leaf_count() * tree.num_classes)
            throw ValidationError("forest: leaf matrix size mismatch");
        for (const auto& node : tree.nodes) {
            if (node.feature_index == kInactive) continue;
            if (node.feature_index < 0 ||
                static_cast<std::uint32_t>(node.feature_index) >= forest.feature_dim)
                throw ValidationError("forest: node feature index out of range");
            if (!std::isfinite(node.threshold))
                throw ValidationError("forest: non-finite threshold");
        }
        for (double v : tree.leaf_log_residuals) {
            if (!std::isfinite(v)) throw ValidationError("forest: non-finite leaf value");
        }
    }
}

}  // namespace rlf
