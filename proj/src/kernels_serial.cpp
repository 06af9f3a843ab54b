// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <functional>

#include "xici/errors.hpp"
#include "xici/gating.hpp"
#include "xici/kernels.hpp"
#include "xici/stats.hpp"

namespace xici::kernels {

namespace detail {

void fill_routing_row(const TraceSet& set, std::size_t seq, std::size_t layer_pos,
                      RoutingStat stat, std::span<double> out) {
    const auto& meta = set.meta;
    const auto& trace = set.sequences[seq];
    std::fill(out.begin(), out.end(), 0.0);
    GateEntry sel[64];
    std::vector<GateEntry> big;
    std::span<GateEntry> buf;
    if (meta.top_k <= 64) {
        buf = std::span<GateEntry>(sel, static_cast<std::size_t>(meta.top_k));
    } else {
        big.resize(static_cast<std::size_t>(meta.top_k));
        buf = big;
    }
    for (std::size_t t = 0; t < trace.token_count; ++t) {
        gate_topk<float>(trace.token_logits(meta, layer_pos, t), meta.top_k, meta.gating, buf);
        for (const auto& g : buf)
            out[static_cast<std::size_t>(g.expert)] += stat == RoutingStat::Weight ? g.weight : 1.0;
    }
    const double inv = 1.0 / static_cast<double>(trace.token_count);
    for (double& v : out) v *= inv;
}

std::size_t top_count(std::size_t pool, double top_fraction) {
    if (pool == 0) return 0;
    const double raw = std::ceil(top_fraction * static_cast<double>(pool) - 1e-9);
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)), 1, pool);
}

void mark_sequence(const RoutingTable& table, std::size_t seq,
                   std::span<const std::size_t> layer_positions, std::size_t n_top,
                   std::vector<double>& scratch, std::span<std::uint32_t> counts) {
    if (n_top == 0) return;
    scratch.clear();
    for (std::size_t lp : layer_positions) {
        auto row = table.row(seq, lp);
        scratch.insert(scratch.end(), row.begin(), row.end());
    }
    auto nth = scratch.begin() + static_cast<std::ptrdiff_t>(n_top - 1);
    std::nth_element(scratch.begin(), nth, scratch.end(), std::greater<>());
    const double cutoff = *nth;
    for (std::size_t lp : layer_positions) {
        auto row = table.row(seq, lp);
        for (std::size_t e = 0; e < row.size(); ++e)
            if (row[e] > 0.0 && row[e] >= cutoff) ++counts[lp * table.num_experts + e];
    }
}

ExpertTest test_one(const QuestionDeltas& deltas, std::size_t flat_expert,
                    std::vector<double>& correct_buf, std::vector<double>& wrong_buf) {
    correct_buf.clear();
    wrong_buf.clear();
    for (std::size_t v = 0; v < deltas.num_variants; ++v)
        (deltas.is_correct[v] ? correct_buf : wrong_buf).push_back(deltas.at(v, flat_expert));
    const auto mwu = mwu_one_tailed(correct_buf, wrong_buf);
    ExpertTest r;
    r.u = mwu.u;
    r.p = mwu.p;
    r.median_diff = median_inplace(correct_buf) - median_inplace(wrong_buf);
    return r;
}

} // namespace detail

namespace serial {

RoutingTable routing_table(const TraceSet& set, RoutingStat stat) {
    set.validate();
    RoutingTable t;
    t.num_sequences = set.sequences.size();
    t.num_layers = set.meta.num_moe_layers();
    t.num_experts = static_cast<std::size_t>(set.meta.experts_per_layer);
    t.values.assign(t.num_sequences * t.num_layers * t.num_experts, 0.0);
    for (std::size_t s = 0; s < t.num_sequences; ++s)
        for (std::size_t l = 0; l < t.num_layers; ++l)
            detail::fill_routing_row(set, s, l, stat, t.row(s, l));
    return t;
}

std::vector<std::uint32_t> top_fraction_marks(const RoutingTable& table,
                                              std::span<const std::size_t> layer_positions,
                                              double top_fraction) {
    std::vector<std::uint32_t> counts(table.num_layers * table.num_experts, 0);
    const std::size_t n_top =
        detail::top_count(layer_positions.size() * table.num_experts, top_fraction);
    std::vector<double> scratch;
    for (std::size_t s = 0; s < table.num_sequences; ++s)
        detail::mark_sequence(table, s, layer_positions, n_top, scratch, counts);
    return counts;
}

std::vector<ExpertTest> expert_tests(const QuestionDeltas& deltas,
                                     std::span<const std::size_t> candidates) {
    std::vector<ExpertTest> out(candidates.size());
    std::vector<double> cbuf, wbuf;
    for (std::size_t i = 0; i < candidates.size(); ++i)
        out[i] = detail::test_one(deltas, candidates[i], cbuf, wbuf);
    return out;
}

} // namespace serial

} // namespace xici::kernels
