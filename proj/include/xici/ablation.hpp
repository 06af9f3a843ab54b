// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xici/identify.hpp"
#include "xici/trace_model.hpp"

namespace xici {

/// question_id -> experts deactivated together when re-asking that question.
using AblationPlan = std::map<std::string, std::set<ExpertRef>>;

struct MetricsReport {
    /// Rates are empty when their denominator is zero.
    std::optional<double> ablation_success_rate;
    std::optional<double> spurious_gain_rate;
    std::optional<double> rate_difference;
    std::size_t questions_all_incorrect_after = 0;
    std::size_t n_originally_correct_pairs = 0;
    std::size_t n_originally_wrong_pairs = 0;
    std::size_t n_correct_to_wrong = 0;
    std::size_t n_wrong_to_correct = 0;
    std::size_t n_questions = 0;

    bool operator==(const MetricsReport&) const = default;
};

/// Sets every target logit to the minimum of the original vector.
template <std::floating_point T>
std::vector<T> deactivate_logits(std::span<const T> logits, const std::set<int>& targets);

inline std::vector<double> deactivate_logits(const std::vector<double>& logits,
                                             const std::set<int>& targets) {
    return deactivate_logits(std::span<const double>(logits), targets);
}

/// In-place variant; the minimum is taken before any target is overwritten.
template <std::floating_point T>
void deactivate_in_place(std::span<T> logits, std::span<const int> targets);

MetricsReport ablation_metrics(const OutcomeMatrix& pre, const OutcomeMatrix& post);

/// Pools counts across datasets.
MetricsReport pool_metrics(std::span<const MetricsReport> reports);

/// Plan with one entry per result that has at least one finding.
AblationPlan plan_from_results(std::span<const IdentificationResult> results);

/// Per question, a uniformly random expert set of the same size drawn from
/// MoE layers outside `excluded` (blacklisted experts are eligible).
AblationPlan baseline_random_same_size(const AblationPlan& plan, const TraceMeta& meta,
                                       const std::set<int>& excluded, std::uint64_t seed);

enum class ShuffleMode {
    Derangement, // bijective reassignment with no fixed point
    Independent, // each question independently draws another question's set
};

/// Question i is given the expert set identified for some question j != i.
AblationPlan baseline_question_shuffle(const AblationPlan& plan, std::uint64_t seed,
                                       ShuffleMode mode = ShuffleMode::Derangement);

/// Number of findings per MoE layer, one entry per layer of `meta` in order.
/// Every occurrence counts, including the same expert found for several questions.
std::vector<std::pair<int, std::size_t>> layer_distribution_report(
    std::span<const IdentificationResult> results, const TraceMeta& meta);

} // namespace xici
