#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "rlf/common.hpp"
#include "rlf/dataset.hpp"
#include "rlf/inference.hpp"
#include "rlf/math.hpp"
#include "rlf/model.hpp"
#include "rlf/residual.hpp"
#include "rlf/rng.hpp"

namespace rlf::train {

struct SplitCandidate {
    std::int32_t feature_index = kInactive;
    double threshold = 0.0;
    bool valid = false;
};

// Samples currently routed to one tree node. node_id indexes the breadth-first
// node array; children of node i are 2i+1 and 2i+2.
struct NodePartition {
    std::size_t node_id = 0;
    std::vector<std::uint32_t> sample_ids;
};

// Per node: `feature_pool` distinct features, each with
// `thresholds_per_feature` thresholds drawn uniformly from the open interval
// between the node-local minimum and maximum of that feature. Features with a
// degenerate range yield candidates marked invalid.
inline std::vector<SplitCandidate> sample_candidates(const NodePartition& partition,
                                                     const Dataset& ds, const TrainConfig& cfg,
                                                     SplitMix64& rng) {
    if (partition.sample_ids.empty())
        throw ValidationError("sample_candidates: empty partition");
    const std::uint32_t pool = resolve_feature_pool(cfg, ds.feature_dim);
    const auto features = sample_without_replacement(ds.feature_dim, pool, rng);

    std::vector<SplitCandidate> cands;
    cands.reserve(std::size_t{pool} * cfg.thresholds_per_feature);
    for (const auto f : features) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (const auto id : partition.sample_ids) {
            const double v = ds.features[std::size_t{id} * ds.feature_dim + f];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (!(hi > lo)) {
            for (std::uint32_t t = 0; t < cfg.thresholds_per_feature; ++t)
                cands.push_back({static_cast<std::int32_t>(f), lo, false});
            continue;
        }
        for (std::uint32_t t = 0; t < cfg.thresholds_per_feature; ++t)
            cands.push_back({static_cast<std::int32_t>(f), rng.next_in_open(lo, hi), true});
    }
    return cands;
}

namespace detail {

// Node-local view used to score every candidate of one node: member
// posteriors under the current ensemble prior, labels, and the loss the node
// contributes if left unsplit (both children neutral, q = 1).
struct NodeCache {
    std::size_t m = 0;
    std::uint32_t nc = 0;
    std::vector<double> posteriors;    // m x nc
    std::vector<std::int32_t> labels;  // m
    double prior_loss = 0.0;
};

inline NodeCache build_node_cache(const NodePartition& partition, const Dataset& ds,
                                  const PriorState& prior) {
    NodeCache cache;
    cache.m = partition.sample_ids.size();
    cache.nc = prior.num_classes;
    std::vector<double> gathered(cache.m * cache.nc);
    cache.labels.resize(cache.m);
    for (std::size_t i = 0; i < cache.m; ++i) {
        const auto id = partition.sample_ids[i];
        const auto row = prior.row(id);
        std::copy(row.begin(), row.end(), gathered.begin() + i * cache.nc);
        cache.labels[i] = ds.labels[id];
    }
    cache.posteriors = member_posteriors(gathered, cache.m, cache.nc);
    for (std::size_t i = 0; i < cache.m; ++i) {
        cache.prior_loss -=
            std::log(std::max(cache.posteriors[i * cache.nc + cache.labels[i]], kProbFloor));
    }
    return cache;
}

struct SplitScore {
    double loss = 0.0;
    bool left_empty = false;
    bool right_empty = false;
    std::vector<double> left_q;   // linear domain, epsilon-floored
    std::vector<double> right_q;  // linear domain, epsilon-floored
};

// Loss of one child: members' posteriors reweighted by the floored residual.
inline double child_loss(const std::vector<double>& posteriors,
                         const std::vector<std::int32_t>& labels,
                         const std::vector<std::size_t>& members, std::uint32_t nc,
                         const std::vector<double>& q) {
    double loss = 0.0;
    for (const auto i : members) {
        const double* p = posteriors.data() + i * nc;
        double s = 0.0;
        for (std::uint32_t k = 0; k < nc; ++k) s += p[k] * q[k];
        const double v = p[labels[i]] * q[labels[i]];
        loss += std::log(s) - std::log(std::max(v, kProbFloor));
    }
    return loss;
}

inline std::vector<double> child_residual(const NodeCache& cache,
                                          const std::vector<std::size_t>& members,
                                          const TrainConfig& cfg) {
    const std::uint32_t nc = cache.nc;
    std::vector<double> p(members.size() * nc);
    std::vector<std::uint32_t> counts(nc, 0);
    for (std::size_t i = 0; i < members.size(); ++i) {
        const double* src = cache.posteriors.data() + members[i] * nc;
        std::copy(src, src + nc, p.begin() + i * nc);
        ++counts[cache.labels[members[i]]];
    }
    auto q = residual_fixed_point(p, members.size(), nc, counts, cfg.residual_iterations);
    for (auto& v : q) v = std::max(v, cfg.epsilon);
    return q;
}

inline SplitScore score_candidate(const NodeCache& cache, const Dataset& ds,
                                  const std::vector<std::uint32_t>& sample_ids,
                                  const SplitCandidate& cand, const TrainConfig& cfg) {
    SplitScore score;
    std::vector<std::size_t> left, right;
    for (std::size_t i = 0; i < sample_ids.size(); ++i) {
        const double v =
            ds.features[std::size_t{sample_ids[i]} * ds.feature_dim + cand.feature_index];
        (v < cand.threshold ? left : right).push_back(i);
    }
    score.left_empty = left.empty();
    score.right_empty = right.empty();
    score.left_q = left.empty() ? std::vector<double>(cache.nc, 1.0)
                                : child_residual(cache, left, cfg);
    score.right_q = right.empty() ? std::vector<double>(cache.nc, 1.0)
                                  : child_residual(cache, right, cfg);
    const double left_loss = child_loss(cache.posteriors, cache.labels, left, cache.nc, score.left_q);
    const double right_loss =
        child_loss(cache.posteriors, cache.labels, right, cache.nc, score.right_q);
    score.loss = left_loss + right_loss;
    return score;
}

}  // namespace detail

struct CandidateScore {
    double loss_contribution = 0.0;
    std::vector<double> left_log_residual;
    std::vector<double> right_log_residual;
};

// Routes the partition by the candidate, fits each child's residual, and
// returns the node's additive contribution to the global cross-entropy loss
// (the other nodes' terms are unaffected by this node's choice). An empty
// child keeps the neutral residual q = 1.
inline CandidateScore candidate_loss(const SplitCandidate& cand, const NodePartition& partition,
                                     const Dataset& ds, const PriorState& prior,
                                     const TrainConfig& cfg) {
    if (!cand.valid) throw ValidationError("candidate_loss: invalid candidate");
    const auto cache = detail::build_node_cache(partition, ds, prior);
    auto score = detail::score_candidate(cache, ds, partition.sample_ids, cand, cfg);
    CandidateScore out;
    out.loss_contribution = score.loss;
    out.left_log_residual = std::move(score.left_q);
    out.right_log_residual = std::move(score.right_q);
    for (auto& v : out.left_log_residual) v = std::log(v);
    for (auto& v : out.right_log_residual) v = std::log(v);
    return out;
}

struct LevelResult {
    std::vector<DecisionNode> nodes;  // one per input partition, same order
    std::vector<NodePartition> next_partitions;
};

// One level of induction. Each node independently evaluates its candidates
// and keeps the loss-minimizing one (ties: lowest (feature_index, threshold)).
// A node with no valid candidate, or whose best candidate does not strictly
// improve on the no-split reference, stays inactive and passes its samples to
// the left child. Candidates that leave a child empty are never selected.
inline LevelResult grow_tree_level(const std::vector<NodePartition>& partitions,
                                   const Dataset& ds, const PriorState& prior,
                                   const TrainConfig& cfg, std::uint32_t tree_index,
                                   std::uint32_t level) {
    LevelResult result;
    result.nodes.resize(partitions.size());
    for (std::size_t pi = 0; pi < partitions.size(); ++pi) {
        const auto& part = partitions[pi];
        auto rng = derive_stream(cfg.seed, StreamPurpose::kSplitSearch, tree_index, level,
                                 part.node_id);
        const auto cands = sample_candidates(part, ds, cfg, rng);
        const auto cache = detail::build_node_cache(part, ds, prior);

        bool found = false;
        double best_loss = std::numeric_limits<double>::infinity();
        SplitCandidate best{};
        for (const auto& cand : cands) {
            if (!cand.valid) continue;
            const auto score = detail::score_candidate(cache, ds, part.sample_ids, cand, cfg);
            if (score.left_empty || score.right_empty) continue;
            const bool better =
                score.loss < best_loss ||
                (score.loss == best_loss &&
                 (cand.feature_index < best.feature_index ||
                  (cand.feature_index == best.feature_index && cand.threshold < best.threshold)));
            if (better) {
                found = true;
                best_loss = score.loss;
                best = cand;
            }
        }

        const std::size_t left_id = 2 * part.node_id + 1;
        const std::size_t right_id = 2 * part.node_id + 2;
        if (found && best_loss < cache.prior_loss) {
            result.nodes[pi] = DecisionNode{best.feature_index, best.threshold};
            NodePartition lp{left_id, {}}, rp{right_id, {}};
            for (const auto id : part.sample_ids) {
                const double v =
                    ds.features[std::size_t{id} * ds.feature_dim + best.feature_index];
                (v < best.threshold ? lp.sample_ids : rp.sample_ids).push_back(id);
            }
            result.next_partitions.push_back(std::move(lp));
            result.next_partitions.push_back(std::move(rp));
        } else {
            result.nodes[pi] = DecisionNode{};  // inactive: samples flow left
            result.next_partitions.push_back(NodePartition{left_id, part.sample_ids});
        }
    }
    return result;
}

// Grows max_depth levels, then recomputes residuals once at the frontier and
// copies them into the leaves. Leaves no sample reaches keep the neutral
// residual (all-zero log row). Does not mutate the prior state.
inline TreeModel train_tree(const Dataset& ds, const PriorState& prior, const TrainConfig& cfg,
                            std::uint32_t tree_index) {
    TreeModel tree;
    tree.depth = cfg.max_depth;
    tree.num_classes = ds.num_classes;
    tree.nodes.assign(tree.node_count(), DecisionNode{});
    tree.leaf_log_residuals.assign(tree.leaf_count() * ds.num_classes, 0.0);

    std::vector<NodePartition> parts(1);
    parts[0].node_id = 0;
    parts[0].sample_ids.resize(ds.num_samples);
    for (std::size_t n = 0; n < ds.num_samples; ++n)
        parts[0].sample_ids[n] = static_cast<std::uint32_t>(n);

    for (std::uint32_t level = 0; level < cfg.max_depth; ++level) {
        auto lr = grow_tree_level(parts, ds, prior, cfg, tree_index, level);
        for (std::size_t pi = 0; pi < parts.size(); ++pi)
            tree.nodes[parts[pi].node_id] = lr.nodes[pi];
        parts = std::move(lr.next_partitions);
    }

    const std::size_t leaf_base = tree.node_count();
    std::vector<double> gathered;
    std::vector<std::int32_t> labels;
    for (const auto& part : parts) {
        const std::size_t m = part.sample_ids.size();
        gathered.resize(m * ds.num_classes);
        labels.resize(m);
        for (std::size_t i = 0; i < m; ++i) {
            const auto row = prior.row(part.sample_ids[i]);
            std::copy(row.begin(), row.end(), gathered.begin() + i * ds.num_classes);
            labels[i] = ds.labels[part.sample_ids[i]];
        }
        const auto q = compute_leaf_residual(gathered, labels, ds.num_classes,
                                             cfg.residual_iterations, cfg.epsilon);
        const auto leaf = tree.leaf_row(part.node_id - leaf_base);
        std::copy(q.begin(), q.end(), leaf.begin());
    }
    return tree;
}

// Accumulates the tree's leaf log-residual into each sample's prior row.
inline void update_priors(PriorState& prior, const TreeModel& tree, const Dataset& ds) {
    if (prior.num_samples != ds.num_samples || prior.num_classes != ds.num_classes ||
        tree.num_classes != ds.num_classes)
        throw ValidationError("update_priors: dimension mismatch");
    for (std::size_t n = 0; n < ds.num_samples; ++n) {
        const auto leaf = tree.leaf_row(infer::route(tree, ds.row(n)));
        const auto row = prior.row(n);
        for (std::uint32_t j = 0; j < ds.num_classes; ++j) row[j] += leaf[j];
    }
}

struct TrainResult {
    ForestModel forest;
    std::vector<double> loss_trace;  // training cross-entropy after each tree
};

inline TrainResult train_forest(const Dataset& ds, const TrainConfig& cfg) {
    validate_dataset(ds);
    validate_config(cfg);
    if (ds.num_samples == 0) throw ValidationError("train_forest: empty dataset");

    TrainResult result;
    result.forest.kind = ForestKind::RLF;
    result.forest.num_classes = ds.num_classes;
    result.forest.feature_dim = ds.feature_dim;
    result.loss_trace.reserve(cfg.num_trees);

    PriorState prior(ds.num_samples, ds.num_classes);
    std::vector<double> posteriors(ds.num_samples * ds.num_classes);
    for (std::uint32_t t = 0; t < cfg.num_trees; ++t) {
        auto tree = train_tree(ds, prior, cfg, t);
        update_priors(prior, tree, ds);
        result.forest.trees.push_back(std::move(tree));
        for (std::size_t n = 0; n < ds.num_samples; ++n)
            softmax_into(prior.row(n), {posteriors.data() + n * ds.num_classes, ds.num_classes});
        result.loss_trace.push_back(
            cross_entropy_loss(posteriors, ds.num_samples, ds.num_classes, ds.labels));
    }
    return result;
}

}  // namespace rlf::train
