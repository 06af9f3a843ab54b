// SPDX-License-Identifier: Apache-2.0
#include "xici/gating.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xici/errors.hpp"

namespace xici {

namespace {

double stable_sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace

template <std::floating_point T>
void gate_topk(std::span<const T> logits, int k, GatingKind kind, std::span<GateEntry> out) {
    const int n = static_cast<int>(logits.size());
    if (k < 1 || k > n)
        throw ConfigError("top-k must satisfy 1 <= k <= E (k=" + std::to_string(k) +
                          ", E=" + std::to_string(n) + ")");
    if (out.size() != static_cast<std::size_t>(k))
        throw ConfigError("gate output span must have length k");

    // Insertion into a sorted buffer of size k; k is small (8 for the target models).
    int filled = 0;
    for (int e = 0; e < n; ++e) {
        const double z = static_cast<double>(logits[e]);
        if (!std::isfinite(z)) throw DataError("non-finite router logit");
        if (filled == k && !(z > out[k - 1].weight)) continue;
        int pos = filled < k ? filled++ : k - 1;
        // Strict comparison keeps earlier (lower-index) experts ahead on ties.
        while (pos > 0 && z > out[pos - 1].weight) {
            out[pos] = out[pos - 1];
            --pos;
        }
        out[pos] = GateEntry{e, z};
    }

    // The softmax normalizer over all E logits cancels under renormalization, so
    // only exp(z - z_max) of the selected experts is needed.
    double total = 0.0;
    if (kind == GatingKind::SoftmaxRenorm) {
        const double zmax = out[0].weight;
        for (auto& g : out) {
            g.weight = std::exp(g.weight - zmax);
            total += g.weight;
        }
    } else {
        for (auto& g : out) {
            g.weight = stable_sigmoid(g.weight);
            total += g.weight;
        }
    }
    for (auto& g : out) g.weight /= total;
}

template <std::floating_point T>
GatingWeights gate(std::span<const T> logits, int k, GatingKind kind) {
    if (k < 1 || static_cast<std::size_t>(k) > logits.size())
        throw ConfigError("top-k must satisfy 1 <= k <= E");
    std::vector<GateEntry> sel(static_cast<std::size_t>(k));
    gate_topk<T>(logits, k, kind, sel);
    GatingWeights w(logits.size(), 0.0);
    for (const auto& g : sel) w[static_cast<std::size_t>(g.expert)] = g.weight;
    return w;
}

template void gate_topk<float>(std::span<const float>, int, GatingKind, std::span<GateEntry>);
template void gate_topk<double>(std::span<const double>, int, GatingKind, std::span<GateEntry>);
template GatingWeights gate<float>(std::span<const float>, int, GatingKind);
template GatingWeights gate<double>(std::span<const double>, int, GatingKind);

ResponsibilityVector sequence_responsibility(const SequenceTrace& trace, int layer,
                                             const TraceMeta& meta) {
    const int pos = meta.layer_position(layer);
    if (pos < 0) throw ConfigError("layer " + std::to_string(layer) + " is not an MoE layer");
    ResponsibilityVector p(static_cast<std::size_t>(meta.experts_per_layer), 0.0);
    std::vector<GateEntry> sel(static_cast<std::size_t>(meta.top_k));
    for (std::size_t t = 0; t < trace.token_count; ++t) {
        gate_topk<float>(trace.token_logits(meta, static_cast<std::size_t>(pos), t), meta.top_k,
                         meta.gating, sel);
        for (const auto& g : sel) p[static_cast<std::size_t>(g.expert)] += g.weight;
    }
    const double inv = 1.0 / static_cast<double>(trace.token_count);
    for (double& v : p) v *= inv;
    return p;
}

} // namespace xici
