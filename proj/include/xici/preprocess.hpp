// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "xici/gating.hpp"
#include "xici/kernels.hpp"
#include "xici/trace_model.hpp"

namespace xici {

using DeltaVector = std::vector<double>;

enum class Preset { GlmAir, Qwen3_30B, Custom };

Preset parse_preset(const std::string& s);
std::string to_string(Preset p);

/// How sequences rank experts when building the blacklist.
enum class BlacklistRanking { Weight, SelectionFrequency };

struct FilterConfig {
    std::set<int> excluded_layers;
    double blacklist_top_fraction = 0.01;
    double blacklist_frequency_threshold = 0.05;
    BlacklistRanking ranking = BlacklistRanking::Weight;

    void validate(const TraceMeta& meta) const;
};

/// Layers excluded by a model preset. Non-MoE layers are always part of the
/// result. Qwen3-30B: first and last 6 of 48 MoE layers. GLM-4.5-Air: the dense
/// layer 0 plus the first and last 5 of 45 MoE layers. Custom: nothing.
std::set<int> default_excluded_layers(const TraceMeta& meta, Preset preset);

/// Magnitude threshold tau associated with a preset (custom falls back to 0.01).
double default_tau(Preset preset);

/// Positions (into moe_layer_indices) of MoE layers not in `excluded`.
std::vector<std::size_t> included_layer_positions(const TraceMeta& meta,
                                                  const std::set<int>& excluded);

ResponsibilityVector variant_mean(const TraceSet& set, const std::string& variant, int layer);

DeltaVector delta(std::span<const double> p, std::span<const double> mean);

Blacklist build_blacklist(const TraceSet& set, const FilterConfig& cfg);
/// Same, reusing a precomputed responsibility table for weight ranking.
Blacklist build_blacklist(const TraceSet& set, const kernels::RoutingTable& responsibilities,
                          const FilterConfig& cfg);

/// Responsibilities of every sequence plus the per-variant dataset means that
/// delta values are centered on. Built once per trace set and shared by all
/// per-question analyses.
class RoutingAnalysis {
public:
    explicit RoutingAnalysis(const TraceSet& set);

    const TraceSet& traces() const { return *set_; }
    const kernels::RoutingTable& responsibilities() const { return table_; }
    const std::vector<std::string>& variants() const { return variants_; }

    std::span<const double> variant_mean(std::size_t variant_index, std::size_t layer_pos) const;
    /// Sequence indices of a question, ordered by variant id. Empty if unknown.
    const std::vector<std::size_t>& question_sequences(const std::string& question) const;
    /// Delta values for all variants of `question` over all MoE layers.
    kernels::QuestionDeltas question_deltas(const std::string& question,
                                            std::vector<std::string>* variant_ids = nullptr) const;

private:
    const TraceSet* set_;
    kernels::RoutingTable table_;
    std::vector<std::string> variants_;
    std::map<std::string, std::size_t> variant_index_;
    std::map<std::string, std::vector<std::size_t>> by_question_;
    std::vector<double> means_; // [variant][layer_pos][expert]
};

} // namespace xici
