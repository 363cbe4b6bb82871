#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "rlf/common.hpp"
#include "rlf/dataset.hpp"
#include "rlf/math.hpp"
#include "rlf/model.hpp"

namespace rlf::infer {

// Walk from the root: active node sends x left iff x[f] < t (ties go right),
// inactive nodes always send left. Returns the depth-D leaf index.
inline std::size_t route(const TreeModel& tree, std::span<const double> x) {
    std::size_t node = 0;
    for (std::uint32_t level = 0; level < tree.depth; ++level) {
        const auto& n = tree.nodes[node];
        bool right = false;
        if (n.feature_index != kInactive) {
            if (static_cast<std::size_t>(n.feature_index) >= x.size())
                throw ValidationError("route: feature index exceeds input dimension");
            right = !(x[n.feature_index] < n.threshold);
        }
        node = 2 * node + (right ? 2 : 1);
    }
    return node - (tree.node_count());
}

inline std::vector<double> predict_proba(const ForestModel& forest, std::span<const double> x) {
    if (x.size() != forest.feature_dim)
        throw ValidationError("predict_proba: input dimension mismatch");
    const std::uint32_t nc = forest.num_classes;
    if (forest.trees.empty()) {
        return std::vector<double>(nc, 1.0 / nc);
    }
    if (forest.kind == ForestKind::RLF) {
        // product of residuals = sum of logs, one normalization at the end
        std::vector<double> acc(nc, 0.0);
        for (const auto& tree : forest.trees) {
            const auto row = tree.leaf_row(route(tree, x));
            for (std::uint32_t j = 0; j < nc; ++j) acc[j] += row[j];
        }
        return normalize_posterior(std::span<const double>(acc));
    }
    // RF: average the per-tree leaf distributions
    std::vector<double> acc(nc, 0.0);
    for (const auto& tree : forest.trees) {
        const auto row = tree.leaf_row(route(tree, x));
        for (std::uint32_t j = 0; j < nc; ++j) acc[j] += std::exp(row[j]);
    }
    const double inv = 1.0 / static_cast<double>(forest.trees.size());
    for (auto& v : acc) v *= inv;
    return acc;
}

inline std::int32_t predict_class(const ForestModel& forest, std::span<const double> x) {
    const auto p = predict_proba(forest, x);
    std::int32_t best = 0;
    for (std::uint32_t j = 1; j < p.size(); ++j) {
        if (p[j] > p[best]) best = static_cast<std::int32_t>(j);
    }
    return best;
}

inline std::vector<std::int32_t> batch_predict(const ForestModel& forest, const Dataset& ds) {
    if (ds.feature_dim != forest.feature_dim)
        throw ValidationError("batch_predict: dataset dimension mismatch");
    std::vector<std::int32_t> out(ds.num_samples);
    for (std::size_t n = 0; n < ds.num_samples; ++n) out[n] = predict_class(forest, ds.row(n));
    return out;
}

}  // namespace rlf::infer
