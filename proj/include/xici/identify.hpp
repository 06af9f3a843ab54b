// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "xici/preprocess.hpp"
#include "xici/trace_model.hpp"

namespace xici {

struct IdentifyConfig {
    double p_threshold = 0.05;
    double tau = 0.01;
    std::size_t max_experts = 25;
    /// Replace the fixed p threshold by the Benjamini-Hochberg cutoff at level
    /// p_threshold over every hypothesis tested for the question.
    bool bh_correction = false;

    void validate() const;
};

struct ExpertFinding {
    ExpertRef expert;
    double u_statistic = 0.0;
    double p_value = 1.0;
    double median_diff = 0.0;
    /// Sum of the average rank by ascending p and by descending median_diff.
    double combined_score = 0.0;
    /// 1-based position after ordering by combined score.
    std::size_t rank = 0;

    bool operator==(const ExpertFinding&) const = default;
};

struct IdentificationResult {
    std::string question_id;
    std::vector<std::string> correct_variants;
    std::vector<std::string> wrong_variants;
    std::vector<ExpertFinding> findings;
    /// Experts that passed both thresholds before the max_experts cap.
    std::size_t survivors = 0;

    bool operator==(const IdentificationResult&) const = default;
};

/// Orders threshold survivors by combined rank (ties: lower p, then lower
/// (layer, expert)), assigns scores and ranks, and keeps the first `max_experts`.
std::vector<ExpertFinding> rank_findings(std::vector<ExpertFinding> survivors,
                                         std::size_t max_experts);

/// Contrasts delta values of correct against wrong variants of one mixed
/// question for every non-excluded, non-blacklisted expert. Throws
/// NotApplicableError when the question is not mixed and DataError when it has
/// no sequences.
IdentificationResult identify_experts(const RoutingAnalysis& analysis, const std::string& question,
                                      const Blacklist& blacklist, const FilterConfig& fcfg,
                                      const IdentifyConfig& icfg);

IdentificationResult identify_experts(const TraceSet& set, const std::string& question,
                                      const Blacklist& blacklist, const FilterConfig& fcfg,
                                      const IdentifyConfig& icfg);

} // namespace xici
