#pragma once

// Brute-force reference for multilabel Hamming loss: each label set becomes a
// bitmask and the per-row distance is the popcount of the XOR.

#include <bit>
#include <cstdint>
#include <random>
#include <vector>

#include "tmc/evaluation.hpp"

namespace tmc::testing {

inline std::uint32_t to_mask(const LabelIndexSet& s) {
    std::uint32_t m = 0;
    for (auto i : s) m |= 1u << i;
    return m;
}

inline double oracle_hamming(const std::vector<LabelIndexSet>& pred, const std::vector<LabelIndexSet>& gold,
                             std::size_t universe) {
    double sum = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        sum += static_cast<double>(std::popcount(to_mask(pred[i]) ^ to_mask(gold[i]))) /
               static_cast<double>(universe);
    }
    return sum / static_cast<double>(pred.size());
}

inline LabelIndexSet random_label_set(std::mt19937& rng, std::size_t universe) {
    LabelIndexSet s;
    std::bernoulli_distribution coin(0.5);
    for (std::size_t i = 0; i < universe; ++i) {
        if (coin(rng)) s.push_back(i);
    }
    return s;
}

inline LabelIndexSet complement(const LabelIndexSet& s, std::size_t universe) {
    auto mask = to_mask(s);
    LabelIndexSet out;
    for (std::size_t i = 0; i < universe; ++i) {
        if (!(mask & (1u << i))) out.push_back(i);
    }
    return out;
}

}  // namespace tmc::testing
