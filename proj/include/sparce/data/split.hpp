#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "sparce/rng.hpp"
#include "sparce/types.hpp"

namespace sparce {

/// Train/validation/test split by fractions (summing to <= 1; any remainder
/// is dropped) applied after a seeded shuffle.
struct SplitSpec {
    double train = 1.0;
    double validation = 0.0;
    double test = 0.0;
    std::uint64_t seed = 0;
};

struct SplitIndices {
    std::vector<Index> train, validation, test;
};

inline SplitIndices split(Index n_samples, const SplitSpec& spec) {
    require(n_samples >= 1, "split: empty dataset");
    require(spec.train >= 0 && spec.validation >= 0 && spec.test >= 0,
            "split: fractions must be nonnegative");
    require(spec.train + spec.validation + spec.test <= 1.0 + 1e-12,
            "split: fractions must sum to <= 1");
    std::vector<Index> order(static_cast<std::size_t>(n_samples));
    std::iota(order.begin(), order.end(), Index(0));
    auto engine = make_engine(derive_seed(spec.seed, "data.split"));
    std::shuffle(order.begin(), order.end(), engine);

    const auto n_train = static_cast<std::size_t>(spec.train * static_cast<double>(n_samples));
    const auto n_val = static_cast<std::size_t>(spec.validation * static_cast<double>(n_samples));
    // when the fractions sum to one, the test split absorbs rounding so the
    // three splits cover the dataset exactly
    const bool full_cover = spec.train + spec.validation + spec.test >= 1.0 - 1e-12;
    const auto n_test = full_cover
                            ? static_cast<std::size_t>(n_samples) - n_train - n_val
                            : static_cast<std::size_t>(spec.test * static_cast<double>(n_samples));
    SplitIndices out;
    auto it = order.begin();
    out.train.assign(it, it + static_cast<std::ptrdiff_t>(n_train));
    it += static_cast<std::ptrdiff_t>(n_train);
    out.validation.assign(it, it + static_cast<std::ptrdiff_t>(n_val));
    it += static_cast<std::ptrdiff_t>(n_val);
    out.test.assign(it, it + static_cast<std::ptrdiff_t>(n_test));
    return out;
}

}  // namespace sparce
