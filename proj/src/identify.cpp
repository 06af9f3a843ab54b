// SPDX-License-Identifier: Apache-2.0
#include "xici/identify.hpp"

#include <algorithm>
#include <numeric>

#include "xici/errors.hpp"
#include "xici/kernels.hpp"
#include "xici/stats.hpp"

namespace xici {

namespace {

// Average (fractional) ranks, 1-based, of `keys` under `less`.
template <typename Less>
std::vector<double> average_ranks(std::size_t n, Less less) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), less);
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        while (j < n && !less(order[i], order[j]) && !less(order[j], order[i])) ++j;
        const double avg = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t t = i; t < j; ++t) ranks[order[t]] = avg;
        i = j;
    }
    return ranks;
}

} // namespace

void IdentifyConfig::validate() const {
    if (!(p_threshold > 0.0 && p_threshold < 1.0)) throw ConfigError("p_threshold must lie in (0, 1)");
    if (!(tau >= 0.0)) throw ConfigError("tau must be >= 0");
    if (max_experts < 1) throw ConfigError("max_experts must be >= 1");
}

std::vector<ExpertFinding> rank_findings(std::vector<ExpertFinding> survivors,
                                         std::size_t max_experts) {
    const std::size_t n = survivors.size();
    const auto by_p = average_ranks(n, [&](std::size_t a, std::size_t b) {
        return survivors[a].p_value < survivors[b].p_value;
    });
    const auto by_md = average_ranks(n, [&](std::size_t a, std::size_t b) {
        return survivors[a].median_diff > survivors[b].median_diff;
    });
    for (std::size_t i = 0; i < n; ++i) survivors[i].combined_score = by_p[i] + by_md[i];
    std::sort(survivors.begin(), survivors.end(), [](const ExpertFinding& a, const ExpertFinding& b) {
        if (a.combined_score != b.combined_score) return a.combined_score < b.combined_score;
        if (a.p_value != b.p_value) return a.p_value < b.p_value;
        return a.expert < b.expert;
    });
    if (survivors.size() > max_experts) survivors.resize(max_experts);
    for (std::size_t i = 0; i < survivors.size(); ++i) survivors[i].rank = i + 1;
    return survivors;
}

IdentificationResult identify_experts(const RoutingAnalysis& analysis, const std::string& question,
                                      const Blacklist& blacklist, const FilterConfig& fcfg,
                                      const IdentifyConfig& icfg) {
    const auto& set = analysis.traces();
    const auto& meta = set.meta;
    fcfg.validate(meta);
    icfg.validate();

    std::vector<std::string> variant_ids;
    const auto deltas = analysis.question_deltas(question, &variant_ids);
    if (deltas.num_variants == 0) throw DataError("no sequences for question '" + question + "'");

    IdentificationResult result;
    result.question_id = question;
    for (std::size_t v = 0; v < variant_ids.size(); ++v)
        (deltas.is_correct[v] ? result.correct_variants : result.wrong_variants)
            .push_back(variant_ids[v]);
    if (result.correct_variants.empty() || result.wrong_variants.empty())
        throw NotApplicableError("question '" + question +
                                 "' is not mixed; identification needs both correct and wrong variants");

    const auto experts = deltas.num_experts;
    std::vector<std::size_t> candidates;
    for (std::size_t lp : included_layer_positions(meta, fcfg.excluded_layers))
        for (std::size_t e = 0; e < experts; ++e)
            if (!blacklist.count(ExpertRef{meta.moe_layer_indices[lp], static_cast<int>(e)}))
                candidates.push_back(lp * experts + e);

    const auto tests = kernels::expert_tests(deltas, candidates);

    double p_cut = icfg.p_threshold;
    if (icfg.bh_correction) {
        std::vector<double> ps(tests.size());
        std::transform(tests.begin(), tests.end(), ps.begin(), [](const auto& t) { return t.p; });
        p_cut = bh_cutoff(ps, icfg.p_threshold);
    }

    std::vector<ExpertFinding> survivors;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& t = tests[i];
        if (!(t.p <= p_cut && t.median_diff > icfg.tau)) continue;
        ExpertFinding f;
        f.expert = ExpertRef{meta.moe_layer_indices[candidates[i] / experts],
                             static_cast<int>(candidates[i] % experts)};
        f.u_statistic = t.u;
        f.p_value = t.p;
        f.median_diff = t.median_diff;
        survivors.push_back(f);
    }
    result.survivors = survivors.size();
    result.findings = rank_findings(std::move(survivors), icfg.max_experts);
    return result;
}

IdentificationResult identify_experts(const TraceSet& set, const std::string& question,
                                      const Blacklist& blacklist, const FilterConfig& fcfg,
                                      const IdentifyConfig& icfg) {
    const RoutingAnalysis analysis(set);
    return identify_experts(analysis, question, blacklist, fcfg, icfg);
}

} // namespace xici
