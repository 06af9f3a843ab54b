// SPDX-License-Identifier: Apache-2.0
#include <algorithm>

#include "xici/kernels.hpp"

namespace xici::kernels {

RoutingTable routing_table(const TraceSet& set, RoutingStat stat) {
    set.validate();
    RoutingTable t;
    t.num_sequences = set.sequences.size();
    t.num_layers = set.meta.num_moe_layers();
    t.num_experts = static_cast<std::size_t>(set.meta.experts_per_layer);
    t.values.assign(t.num_sequences * t.num_layers * t.num_experts, 0.0);
    const auto cells = static_cast<std::ptrdiff_t>(t.num_sequences * t.num_layers);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < cells; ++c) {
        const auto s = static_cast<std::size_t>(c) / t.num_layers;
        const auto l = static_cast<std::size_t>(c) % t.num_layers;
        detail::fill_routing_row(set, s, l, stat, t.row(s, l));
    }
    return t;
}

std::vector<std::uint32_t> top_fraction_marks(const RoutingTable& table,
                                              std::span<const std::size_t> layer_positions,
                                              double top_fraction) {
    std::vector<std::uint32_t> counts(table.num_layers * table.num_experts, 0);
    const std::size_t n_top =
        detail::top_count(layer_positions.size() * table.num_experts, top_fraction);
    const auto n = static_cast<std::ptrdiff_t>(table.num_sequences);

#pragma omp parallel
    {
        std::vector<std::uint32_t> local(counts.size(), 0);
        std::vector<double> scratch;
#pragma omp for schedule(static) nowait
        for (std::ptrdiff_t s = 0; s < n; ++s)
            detail::mark_sequence(table, static_cast<std::size_t>(s), layer_positions, n_top,
                                  scratch, local);
        // Integer sums, so the merge order cannot change the result.
#pragma omp critical(xici_marks_merge)
        for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += local[i];
    }
    return counts;
}

std::vector<ExpertTest> expert_tests(const QuestionDeltas& deltas,
                                     std::span<const std::size_t> candidates) {
    std::vector<ExpertTest> out(candidates.size());
    const auto n = static_cast<std::ptrdiff_t>(candidates.size());

#pragma omp parallel
    {
        std::vector<double> cbuf, wbuf;
#pragma omp for schedule(dynamic, 64)
        for (std::ptrdiff_t i = 0; i < n; ++i)
            out[static_cast<std::size_t>(i)] =
                detail::test_one(deltas, candidates[static_cast<std::size_t>(i)], cbuf, wbuf);
    }
    return out;
}

} // namespace xici::kernels
