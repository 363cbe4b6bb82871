#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "rlf/common.hpp"
#include "rlf/math.hpp"

namespace rlf::train {

// Row-wise softmax of an M x N_c matrix of log-priors: each member's
// normalized class distribution before the new leaf contributes.
inline std::vector<double> member_posteriors(const std::vector<double>& member_log_priors,
                                             std::size_t m, std::uint32_t nc) {
    std::vector<double> p(m * nc);
    for (std::size_t n = 0; n < m; ++n) {
        softmax_into({member_log_priors.data() + n * nc, nc}, {p.data() + n * nc, nc});
    }
    return p;
}

// Multiplicative fixed-point update on the raw (linear-domain) residual:
//
//   q_j <- q_j * N_j / sum_n P+_{n,j},   P+_{n,.} = normalize(p_n .* q)
//
// run exactly `iterations` times from q = 1. Classes with zero count go to
// exactly zero on the first iteration and stay there. The stationary point
// satisfies sum_n P+_{n,j} = N_j for every present class.
inline std::vector<double> residual_fixed_point(const std::vector<double>& posteriors,
                                                std::size_t m, std::uint32_t nc,
                                                const std::vector<std::uint32_t>& counts,
                                                std::uint32_t iterations) {
    std::vector<double> q(nc, 1.0);
    std::vector<double> sums(nc);
    for (std::uint32_t it = 0; it < iterations; ++it) {
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t n = 0; n < m; ++n) {
            const double* p = posteriors.data() + n * nc;
            double s = 0.0;
            for (std::uint32_t k = 0; k < nc; ++k) s += p[k] * q[k];
            for (std::uint32_t k = 0; k < nc; ++k) sums[k] += p[k] * q[k] / s;
        }
        for (std::uint32_t k = 0; k < nc; ++k) {
            if (counts[k] == 0) {
                q[k] = 0.0;
            } else if (sums[k] > 0.0) {
                q[k] *= static_cast<double>(counts[k]) / sums[k];
            }
        }
    }
    return q;
}

inline std::vector<std::uint32_t> class_counts(const std::vector<std::int32_t>& labels,
                                               std::uint32_t nc) {
    std::vector<std::uint32_t> counts(nc, 0);
    for (auto lab : labels) {
        if (lab < 0 || static_cast<std::uint32_t>(lab) >= nc)
            throw ValidationError("class_counts: label out of range");
        ++counts[lab];
    }
    return counts;
}

// Leaf residual for M members: iterate the fixed-point update, floor at
// epsilon (absent classes land exactly there), and return natural logs.
inline std::vector<double> compute_leaf_residual(const std::vector<double>& member_log_priors,
                                                 const std::vector<std::int32_t>& member_labels,
                                                 std::uint32_t num_classes,
                                                 std::uint32_t iterations, double epsilon) {
    const std::size_t m = member_labels.size();
    if (m == 0) throw ValidationError("compute_leaf_residual: empty leaf");
    if (iterations < 1) throw ValidationError("compute_leaf_residual: iterations must be >= 1");
    if (member_log_priors.size() != m * num_classes)
        throw ValidationError("compute_leaf_residual: prior matrix shape mismatch");

    const auto p = member_posteriors(member_log_priors, m, num_classes);
    const auto counts = class_counts(member_labels, num_classes);
    auto q = residual_fixed_point(p, m, num_classes, counts, iterations);
    for (auto& v : q) v = std::log(std::max(v, epsilon));
    return q;
}

}  // namespace rlf::train
