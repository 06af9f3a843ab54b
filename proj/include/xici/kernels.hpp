// SPDX-License-Identifier: Apache-2.0
//
// Data-parallel inner loops of the analysis. Every kernel has an OpenMP
// version in xici::kernels and a plain serial version in xici::kernels::serial
// with the identical contract; the serial one is the reference that tests and
// the benchmark compare against. Outputs never depend on the thread schedule.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "xici/trace_model.hpp"

namespace xici::kernels {

/// What the routing table accumulates per token.
enum class RoutingStat {
    Weight,             // renormalized gate weight (responsibility)
    SelectionFrequency, // 1 when the expert is in the top-k, else 0
};

/// Per-sequence, per-layer-position vectors of length E, mean over tokens.
struct RoutingTable {
    std::size_t num_sequences = 0;
    std::size_t num_layers = 0;
    std::size_t num_experts = 0;
    std::vector<double> values; // [sequence][layer_pos][expert]

    std::span<const double> row(std::size_t seq, std::size_t layer_pos) const {
        return std::span<const double>(values).subspan((seq * num_layers + layer_pos) * num_experts,
                                                       num_experts);
    }
    std::span<double> row(std::size_t seq, std::size_t layer_pos) {
        return std::span<double>(values).subspan((seq * num_layers + layer_pos) * num_experts,
                                                 num_experts);
    }
};

/// Delta values of one question, one slot per variant that has a trace.
struct QuestionDeltas {
    std::size_t num_variants = 0;
    std::size_t num_layers = 0;
    std::size_t num_experts = 0;
    std::vector<double> values;    // [variant slot][layer_pos][expert]
    std::vector<char> is_correct;  // per variant slot

    double at(std::size_t slot, std::size_t flat_expert) const {
        return values[slot * num_layers * num_experts + flat_expert];
    }
};

struct ExpertTest {
    double u = 0.0;
    double p = 1.0;
    double median_diff = 0.0;
};

RoutingTable routing_table(const TraceSet& set, RoutingStat stat = RoutingStat::Weight);

/// For every sequence, pools (layer_pos, expert) cells over `layer_positions` and
/// marks those whose value is at least the ceil(top_fraction * pool)-th largest
/// (ties at the cutoff included, zeros never marked). Returns per-cell counts of
/// marking sequences, indexed layer_pos * E + expert over all table layers.
std::vector<std::uint32_t> top_fraction_marks(const RoutingTable& table,
                                              std::span<const std::size_t> layer_positions,
                                              double top_fraction);

/// One-tailed MWU (correct > wrong) and median difference for each candidate
/// flat index layer_pos * E + expert.
std::vector<ExpertTest> expert_tests(const QuestionDeltas& deltas,
                                     std::span<const std::size_t> candidates);

namespace serial {

RoutingTable routing_table(const TraceSet& set, RoutingStat stat = RoutingStat::Weight);
std::vector<std::uint32_t> top_fraction_marks(const RoutingTable& table,
                                              std::span<const std::size_t> layer_positions,
                                              double top_fraction);
std::vector<ExpertTest> expert_tests(const QuestionDeltas& deltas,
                                     std::span<const std::size_t> candidates);

} // namespace serial

namespace detail {

// Shared per-item bodies; the two namespaces differ only in how they iterate.
void fill_routing_row(const TraceSet& set, std::size_t seq, std::size_t layer_pos,
                      RoutingStat stat, std::span<double> out);
void mark_sequence(const RoutingTable& table, std::size_t seq,
                   std::span<const std::size_t> layer_positions, std::size_t n_top,
                   std::vector<double>& scratch, std::span<std::uint32_t> counts);
std::size_t top_count(std::size_t pool, double top_fraction);
ExpertTest test_one(const QuestionDeltas& deltas, std::size_t flat_expert,
                    std::vector<double>& correct_buf, std::vector<double>& wrong_buf);

} // namespace detail

} // namespace xici::kernels
