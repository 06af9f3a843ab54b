// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <concepts>
#include <cstddef>
#include <span>
#include <vector>

#include "xici/trace_model.hpp"

namespace xici {

/// Dense gate output: length E, exactly k nonzero entries summing to one.
using GatingWeights = std::vector<double>;
/// Per-(sequence, layer) mean of gate outputs over tokens.
using ResponsibilityVector = std::vector<double>;

/// One selected expert and its renormalized weight.
struct GateEntry {
    int expert;
    double weight;
};

/// Top-k selection with renormalized weights, written to `out` (size k) in
/// descending logit order. Ties in logit value go to the lower expert index.
///
/// The weight of a selected expert e is f(z)_e / sum_{j in top-k} f(z)_j where f is
/// softmax over all E logits or the elementwise sigmoid. Throws ConfigError when
/// k is outside [1, E] and DataError on non-finite logits.
template <std::floating_point T>
void gate_topk(std::span<const T> logits, int k, GatingKind kind, std::span<GateEntry> out);

template <std::floating_point T>
GatingWeights gate(std::span<const T> logits, int k, GatingKind kind);

inline GatingWeights gate(const std::vector<double>& logits, int k, GatingKind kind) {
    return gate(std::span<const double>(logits), k, kind);
}

/// (1/L) * sum_t gate(z_t) for one MoE layer (given by layer index, not position).
ResponsibilityVector sequence_responsibility(const SequenceTrace& trace, int layer,
                                             const TraceMeta& meta);

} // namespace xici
