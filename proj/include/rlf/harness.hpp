#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "rlf/common.hpp"
#include "rlf/dataset.hpp"
#include "rlf/inference.hpp"
#include "rlf/model.hpp"
#include "rlf/random_forest.hpp"
#include "rlf/train.hpp"

namespace rlf::harness {

inline constexpr const char* kCsvHeader =
    "method,depth,trees,seed_base,runs,mean_error,std_error,leaf_count,wall_time_s";

// Aggregate over num_runs independently seeded trainings of one configuration.
// leaf counts follow the populated-leaf capacity definition below.
struct ExperimentResult {
    ForestKind method = ForestKind::RLF;
    TrainConfig config;
    std::vector<double> run_errors;
    std::vector<std::uint64_t> run_leaf_counts;
    std::vector<double> run_wall_s;
    double mean_error = 0.0;
    double std_error = 0.0;  // population standard deviation
    double mean_leaf_count = 0.0;
    double mean_wall_s = 0.0;
};

inline double evaluate_error(const ForestModel& forest, const Dataset& test) {
    if (test.num_samples == 0) throw ValidationError("evaluate_error: empty test set");
    const auto predicted = infer::batch_predict(forest, test);
    std::size_t wrong = 0;
    for (std::size_t n = 0; n < test.num_samples; ++n)
        if (predicted[n] != test.labels[n]) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(test.num_samples);
}

// Model capacity: leaves reached by at least one training sample, summed over
// trees. Allocated-but-unreachable slots of the complete trees do not count.
inline std::uint64_t populated_leaf_count(const ForestModel& forest, const Dataset& train) {
    std::uint64_t total = 0;
    std::vector<bool> hit;
    for (const auto& tree : forest.trees) {
        hit.assign(tree.leaf_count(), false);
        for (std::size_t n = 0; n < train.num_samples; ++n)
            hit[infer::route(tree, train.row(n))] = true;
        for (const bool h : hit)
            if (h) ++total;
    }
    return total;
}

inline ExperimentResult run_experiment(const Dataset& train, const Dataset& test,
                                       const TrainConfig& config, ForestKind method,
                                       std::uint32_t num_runs) {
    if (num_runs < 1) throw ValidationError("run_experiment: num_runs must be >= 1");
    ExperimentResult result;
    result.method = method;
    result.config = config;
    for (std::uint32_t r = 0; r < num_runs; ++r) {
        TrainConfig cfg = config;
        cfg.seed = config.seed + r;
        const auto t0 = std::chrono::steady_clock::now();
        ForestModel model = method == ForestKind::RLF
                                ? train::train_forest(train, cfg).forest
                                : baseline::train_rf(train, cfg);
        const auto t1 = std::chrono::steady_clock::now();
        result.run_wall_s.push_back(std::chrono::duration<double>(t1 - t0).count());
        result.run_errors.push_back(evaluate_error(model, test));
        result.run_leaf_counts.push_back(populated_leaf_count(model, train));
    }
    for (const double e : result.run_errors) result.mean_error += e;
    result.mean_error /= num_runs;
    double var = 0.0;
    for (const double e : result.run_errors) var += (e - result.mean_error) * (e - result.mean_error);
    result.std_error = std::sqrt(var / num_runs);
    for (const auto c : result.run_leaf_counts) result.mean_leaf_count += static_cast<double>(c);
    result.mean_leaf_count /= num_runs;
    for (const double w : result.run_wall_s) result.mean_wall_s += w;
    result.mean_wall_s /= num_runs;
    return result;
}

// One run_experiment cell per (depth, trees) grid point.
inline std::vector<ExperimentResult> learning_curve(const Dataset& train, const Dataset& test,
                                                    const TrainConfig& config, ForestKind method,
                                                    const std::vector<std::uint32_t>& tree_counts,
                                                    const std::vector<std::uint32_t>& depths,
                                                    std::uint32_t num_runs) {
    if (tree_counts.empty() || depths.empty())
        throw ValidationError("learning_curve: empty grid");
    std::vector<ExperimentResult> cells;
    cells.reserve(tree_counts.size() * depths.size());
    for (const auto depth : depths) {
        for (const auto trees : tree_counts) {
            TrainConfig cfg = config;
            cfg.max_depth = depth;
            cfg.num_trees = trees;
            cells.push_back(run_experiment(train, test, cfg, method, num_runs));
        }
    }
    return cells;
}

// Capacity of the reference model relative to the subject, in populated leaves.
inline double compression_ratio(const ExperimentResult& reference,
                                const ExperimentResult& subject) {
    if (!(subject.mean_leaf_count > 0.0))
        throw ValidationError("compression_ratio: subject has zero capacity");
    if (!(reference.mean_leaf_count > 0.0))
        throw ValidationError("compression_ratio: reference has zero capacity");
    return reference.mean_leaf_count / subject.mean_leaf_count;
}

inline void write_csv(std::ostream& out, const std::vector<ExperimentResult>& cells) {
    out << kCsvHeader << "\n";
    char line[256];
    for (const auto& c : cells) {
        std::snprintf(line, sizeof(line), "%s,%u,%u,%llu,%zu,%.6f,%.6f,%.2f,%.4f",
                      kind_name(c.method), c.config.max_depth, c.config.num_trees,
                      static_cast<unsigned long long>(c.config.seed), c.run_errors.size(),
                      c.mean_error, c.std_error, c.mean_leaf_count, c.mean_wall_s);
        out << line << "\n";
    }
}

}  // namespace rlf::harness
