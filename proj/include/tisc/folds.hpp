#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "tisc/common.hpp"
#include "tisc/rng.hpp"

namespace tisc {

// Stratified split: `test` holds the untouched evaluation indices, `folds`
// are k disjoint validation folds partitioning the remainder. Class balance
// per fold stays within one sample of proportional.
struct FoldPlan {
    std::vector<std::size_t> test;
    std::vector<std::vector<std::size_t>> folds;

    std::vector<std::size_t> train_indices(std::size_t validation_fold) const {
        std::vector<std::size_t> out;
        for (std::size_t f = 0; f < folds.size(); ++f) {
            if (f == validation_fold) continue;
            out.insert(out.end(), folds[f].begin(), folds[f].end());
        }
        return out;
    }
};

inline FoldPlan make_folds(const std::vector<std::size_t>& labels, std::size_t k,
                           double test_fraction, std::uint64_t seed) {
    if (k < 2) throw config_error("make_folds: need at least 2 folds");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw config_error("make_folds: test_fraction must lie in (0, 1)");
    }
    std::size_t n_classes = 0;
    for (std::size_t l : labels) n_classes = std::max(n_classes, l + 1);
    if (n_classes == 0) throw config_error("make_folds: empty label set");
    if (labels.size() < k * n_classes) {
        throw config_error("make_folds: too few samples per class (" +
                           std::to_string(labels.size()) + " samples, " +
                           std::to_string(k) + " folds, " + std::to_string(n_classes) +
                           " classes)");
    }

    std::vector<std::vector<std::size_t>> by_class(n_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (by_class[c].empty()) {
            throw config_error("make_folds: class " + std::to_string(c) + " has no samples");
        }
    }

    Rng rng(mix_seed(seed, 0xF01D5));
    FoldPlan plan;
    plan.folds.resize(k);
    // rotating fold cursor keeps fold sizes within one of each other even
    // though each class is dealt independently
    std::size_t cursor = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        auto& idx = by_class[c];
        rng.shuffle(idx);
        const std::size_t n_test = std::size_t(double(idx.size()) * test_fraction + 0.5);
        if (n_test >= idx.size()) {
            throw config_error("make_folds: class " + std::to_string(c) +
                               " has no training samples left after the test split");
        }
        for (std::size_t i = 0; i < n_test; ++i) plan.test.push_back(idx[i]);
        for (std::size_t i = n_test; i < idx.size(); ++i) {
            plan.folds[cursor % k].push_back(idx[i]);
            ++cursor;
        }
    }
    for (const auto& fold : plan.folds) {
        if (fold.empty()) throw config_error("make_folds: a fold came out empty");
    }
    return plan;
}

// Subsamples every class down to the minority count, without replacement;
// returns the kept indices sorted ascending.
inline std::vector<std::size_t> balance(const std::vector<std::size_t>& labels,
                                        std::size_t n_classes, std::uint64_t seed) {
    if (n_classes == 0) throw data_error("balance: no classes");
    std::vector<std::vector<std::size_t>> by_class(n_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= n_classes) {
            throw data_error("balance: label " + std::to_string(labels[i]) +
                             " >= n_classes " + std::to_string(n_classes));
        }
        by_class[labels[i]].push_back(i);
    }
    std::size_t minority = labels.size();
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (by_class[c].empty()) {
            throw data_error("balance: class " + std::to_string(c) + " is empty");
        }
        minority = std::min(minority, by_class[c].size());
    }
    Rng rng(mix_seed(seed, 0xBA1A7CE));
    std::vector<std::size_t> kept;
    for (auto& idx : by_class) {
        rng.shuffle(idx);
        kept.insert(kept.end(), idx.begin(), idx.begin() + std::ptrdiff_t(minority));
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

}  // namespace tisc
