#pragma once

// Synthetic Gaussian-mixture classification data used by tests: each class is
// a mixture of spherical Gaussian components with means drawn uniformly from
// [-1, 1]^d. With one component per class every class is a single blob that a
// shallow axis-aligned tree separates easily; more components per class make
// individual trees underfit, which is the regime ensemble combination rules
// actually differ in.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include <rlf/dataset.hpp>
#include <rlf/rng.hpp>

namespace rlf::testsupport {

inline double next_gaussian(SplitMix64& rng) {
    const double u1 = rng.next_open01();
    const double u2 = rng.next_open01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline Dataset make_gaussian_mixture(std::size_t n, std::uint32_t d, std::uint32_t num_classes,
                                     std::uint64_t seed, double spread = 0.45,
                                     std::uint32_t components_per_class = 1) {
    Dataset ds;
    ds.num_samples = n;
    ds.feature_dim = d;
    ds.num_classes = num_classes;
    ds.features.reserve(n * d);
    ds.labels.reserve(n);

    auto rng = derive_stream(seed, StreamPurpose::kSynthetic);
    std::vector<double> means(std::size_t{components_per_class} * num_classes * d);
    for (auto& m : means) m = rng.next_in_open(-1.0, 1.0);

    for (std::size_t i = 0; i < n; ++i) {
        const auto label = static_cast<std::int32_t>(rng.next_below(num_classes));
        ds.labels.push_back(label);
        std::size_t component = 0;
        if (components_per_class > 1) component = rng.next_below(components_per_class);
        const std::size_t base =
            (component * num_classes + static_cast<std::size_t>(label)) * d;
        for (std::uint32_t j = 0; j < d; ++j)
            ds.features.push_back(means[base + j] + spread * next_gaussian(rng));
    }
    return ds;
}

}  // namespace rlf::testsupport
