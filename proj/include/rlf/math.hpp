#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "rlf/common.hpp"

namespace rlf {

// Probability floor applied before logarithms in the loss.
inline constexpr double kProbFloor = 1e-300;

inline double log_sum_exp(std::span<const double> v) {
    double mx = v[0];
    for (double x : v) mx = std::max(mx, x);
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

// Shared softmax kernel: subtract the row max, exponentiate, normalize.
// No input checking; callers that accept external data validate first.
inline void softmax_into(std::span<const double> log_scores, std::span<double> out) {
    double mx = log_scores[0];
    for (double x : log_scores) mx = std::max(mx, x);
    double sum = 0.0;
    for (std::size_t j = 0; j < log_scores.size(); ++j) {
        out[j] = std::exp(log_scores[j] - mx);
        sum += out[j];
    }
    for (std::size_t j = 0; j < log_scores.size(); ++j) out[j] /= sum;
}

inline void normalize_posterior_into(std::span<const double> log_scores, std::span<double> out) {
    if (log_scores.empty()) throw ValidationError("normalize_posterior: empty input");
    if (out.size() != log_scores.size())
        throw ValidationError("normalize_posterior: output size mismatch");
    for (double x : log_scores) {
        if (!std::isfinite(x)) throw ValidationError("normalize_posterior: non-finite input");
    }
    softmax_into(log_scores, out);
}

inline std::vector<double> normalize_posterior(std::span<const double> log_scores) {
    std::vector<double> out(log_scores.size());
    normalize_posterior_into(log_scores, out);
    return out;
}

inline std::vector<double> normalize_posterior(const std::vector<double>& log_scores) {
    return normalize_posterior(std::span<const double>(log_scores));
}

// Total negative log-likelihood of the true labels under row-stochastic
// posteriors (num_samples x num_classes, row-major).
inline double cross_entropy_loss(const std::vector<double>& posteriors,
                                 std::size_t num_samples, std::uint32_t num_classes,
                                 const std::vector<std::int32_t>& labels,
                                 double floor = kProbFloor) {
    if (posteriors.size() != num_samples * num_classes)
        throw ValidationError("cross_entropy_loss: posterior matrix shape mismatch");
    if (labels.size() != num_samples)
        throw ValidationError("cross_entropy_loss: label count mismatch");
    double loss = 0.0;
    for (std::size_t n = 0; n < num_samples; ++n) {
        const auto lab = labels[n];
        if (lab < 0 || static_cast<std::uint32_t>(lab) >= num_classes)
            throw ValidationError("cross_entropy_loss: label out of range");
        loss -= std::log(std::max(posteriors[n * num_classes + lab], floor));
    }
    return loss;
}

}  // namespace rlf
