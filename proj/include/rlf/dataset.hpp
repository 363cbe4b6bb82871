#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rlf/common.hpp"

namespace rlf {

// Dense row-major feature matrix with integer class labels in [0, num_classes).
// class_values records the original label value behind each dense class index
// when a loader had to remap labels; empty means identity.
struct Dataset {
    std::size_t num_samples = 0;
    std::uint32_t feature_dim = 0;
    std::uint32_t num_classes = 0;
    std::vector<double> features;      // num_samples * feature_dim
    std::vector<std::int32_t> labels;  // num_samples
    std::vector<double> class_values;

    std::span<const double> row(std::size_t n) const {
        return {features.data() + n * feature_dim, feature_dim};
    }
};

inline void validate_dataset(const Dataset& ds) {
    if (ds.feature_dim < 1) throw ValidationError("dataset: feature_dim must be >= 1");
    if (ds.num_classes < 2) throw ValidationError("dataset: num_classes must be >= 2");
    if (ds.features.size() != ds.num_samples * ds.feature_dim)
        throw ValidationError("dataset: feature matrix shape mismatch");
    if (ds.labels.size() != ds.num_samples)
        throw ValidationError("dataset: label count mismatch");
    for (std::size_t n = 0; n < ds.num_samples; ++n) {
        const auto lab = ds.labels[n];
        if (lab < 0 || static_cast<std::uint32_t>(lab) >= ds.num_classes)
            throw ValidationError("dataset: label out of range at sample " + std::to_string(n));
    }
    for (double v : ds.features) {
        if (!std::isfinite(v)) throw ValidationError("dataset: non-finite feature value");
    }
}

}  // namespace rlf
