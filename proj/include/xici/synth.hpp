// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "xici/trace_model.hpp"

namespace xici {

/// Synthetic routing traces with planted ground truth.
///
/// Every logit is noise_std * N(0, 1). Generalists get +generalist_boost in every
/// sequence; a question's planted experts get +plant_boost on every token of its
/// correct variants only. Planted experts come from non-excluded layers and are
/// never generalists or part of the noise-free default top-k of their layer.
struct SynthConfig {
    TraceMeta meta;
    std::set<int> excluded_layers;
    std::size_t n_questions = 50;
    std::size_t n_variants = 12;
    std::size_t tokens_per_sequence = 8;
    std::size_t planted_per_question = 10;
    double plant_boost = 0.5;
    std::size_t n_generalists = 0;
    double generalist_boost = 3.0;
    double correct_fraction = 0.5;
    double noise_std = 0.0;
    /// toy_answer is correct iff the mean planted gate weight reaches this.
    double answer_threshold = 0.1;
    /// When false, planted sets of different questions are disjoint.
    bool allow_plant_overlap = false;
    std::uint64_t seed = 0;

    void validate() const;
};

struct GroundTruth {
    std::map<std::string, std::set<ExpertRef>> planted;
    std::set<ExpertRef> generalists;
    double answer_threshold = 0.1;

    bool operator==(const GroundTruth&) const = default;
};

struct SynthOutput {
    TraceSet traces;
    GroundTruth truth;
};

/// Meta matching the two reference topologies (48 MoE layers, or a dense layer 0
/// plus 45 MoE layers), E=128, k=8.
TraceMeta qwen3_30b_meta();
TraceMeta glm_air_meta();

SynthOutput generate(const SynthConfig& cfg);

/// Simulated re-ask: gates every token of the layers holding the question's
/// planted experts after deactivating `intervention`, and answers correctly iff
/// (1/L) sum_t sum_planted weight / |planted| >= truth.answer_threshold.
bool toy_answer(const SequenceTrace& trace, const GroundTruth& truth, const TraceMeta& meta,
                const std::set<ExpertRef>& intervention = {});

struct SimulatedAblation {
    OutcomeMatrix pre;  // recorded labels
    OutcomeMatrix post; // toy_answer under the plan
};

/// Re-asks every sequence of `questions`; questions absent from the plan are
/// re-asked without intervention.
SimulatedAblation simulate_ablation(const TraceSet& set, const GroundTruth& truth,
                                    const std::map<std::string, std::set<ExpertRef>>& plan,
                                    const std::set<std::string>& questions);

} // namespace xici
