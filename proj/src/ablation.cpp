// SPDX-License-Identifier: Apache-2.0
#include "xici/ablation.hpp"

#include <algorithm>
#include <numeric>

#include "xici/errors.hpp"
#include "xici/rng.hpp"

namespace xici {

template <std::floating_point T>
std::vector<T> deactivate_logits(std::span<const T> logits, const std::set<int>& targets) {
    std::vector<T> out(logits.begin(), logits.end());
    if (targets.empty()) return out;
    const int n = static_cast<int>(logits.size());
    if (*targets.begin() < 0 || *targets.rbegin() >= n)
        throw ConfigError("deactivation target outside [0, E)");
    const T lowest = *std::min_element(logits.begin(), logits.end());
    for (int e : targets) out[static_cast<std::size_t>(e)] = lowest;
    return out;
}

template <std::floating_point T>
void deactivate_in_place(std::span<T> logits, std::span<const int> targets) {
    if (targets.empty()) return;
    const T lowest = *std::min_element(logits.begin(), logits.end());
    for (int e : targets) {
        if (e < 0 || static_cast<std::size_t>(e) >= logits.size())
            throw ConfigError("deactivation target outside [0, E)");
        logits[static_cast<std::size_t>(e)] = lowest;
    }
}

template std::vector<float> deactivate_logits<float>(std::span<const float>, const std::set<int>&);
template std::vector<double> deactivate_logits<double>(std::span<const double>, const std::set<int>&);
template void deactivate_in_place<float>(std::span<float>, std::span<const int>);
template void deactivate_in_place<double>(std::span<double>, std::span<const int>);

namespace {

void finish_rates(MetricsReport& r) {
    r.ablation_success_rate.reset();
    r.spurious_gain_rate.reset();
    r.rate_difference.reset();
    if (r.n_originally_correct_pairs > 0)
        r.ablation_success_rate = static_cast<double>(r.n_correct_to_wrong) /
                                  static_cast<double>(r.n_originally_correct_pairs);
    if (r.n_originally_wrong_pairs > 0)
        r.spurious_gain_rate = static_cast<double>(r.n_wrong_to_correct) /
                               static_cast<double>(r.n_originally_wrong_pairs);
    if (r.ablation_success_rate && r.spurious_gain_rate)
        r.rate_difference = *r.ablation_success_rate - *r.spurious_gain_rate;
}

} // namespace

MetricsReport ablation_metrics(const OutcomeMatrix& pre, const OutcomeMatrix& post) {
    if (pre.size() != post.size())
        throw DataError("pre- and post-ablation outcome matrices cover different cells");
    MetricsReport r;
    std::map<std::string, std::pair<bool, bool>> per_question; // correct anywhere pre, post
    auto it_post = post.cells().begin();
    for (const auto& [key, was] : pre.cells()) {
        if (it_post->first != key)
            throw DataError("pre- and post-ablation outcome matrices cover different cells");
        const bool now = it_post->second;
        ++it_post;
        auto& q = per_question[key.first];
        q.first = q.first || was;
        q.second = q.second || now;
        if (was) {
            ++r.n_originally_correct_pairs;
            if (!now) ++r.n_correct_to_wrong;
        } else {
            ++r.n_originally_wrong_pairs;
            if (now) ++r.n_wrong_to_correct;
        }
    }
    r.n_questions = per_question.size();
    for (const auto& [q, s] : per_question)
        if (s.first && !s.second) ++r.questions_all_incorrect_after;
    finish_rates(r);
    return r;
}

MetricsReport pool_metrics(std::span<const MetricsReport> reports) {
    MetricsReport total;
    for (const auto& r : reports) {
        total.questions_all_incorrect_after += r.questions_all_incorrect_after;
        total.n_originally_correct_pairs += r.n_originally_correct_pairs;
        total.n_originally_wrong_pairs += r.n_originally_wrong_pairs;
        total.n_correct_to_wrong += r.n_correct_to_wrong;
        total.n_wrong_to_correct += r.n_wrong_to_correct;
        total.n_questions += r.n_questions;
    }
    finish_rates(total);
    return total;
}

AblationPlan plan_from_results(std::span<const IdentificationResult> results) {
    AblationPlan plan;
    for (const auto& r : results) {
        if (r.findings.empty()) continue;
        auto& s = plan[r.question_id];
        for (const auto& f : r.findings) s.insert(f.expert);
    }
    return plan;
}

AblationPlan baseline_random_same_size(const AblationPlan& plan, const TraceMeta& meta,
                                       const std::set<int>& excluded, std::uint64_t seed) {
    if (plan.empty()) throw ConfigError("random baseline needs a nonempty plan");
    std::vector<ExpertRef> pool;
    for (int layer : meta.moe_layer_indices) {
        if (excluded.count(layer)) continue;
        for (int e = 0; e < meta.experts_per_layer; ++e) pool.push_back(ExpertRef{layer, e});
    }
    AblationPlan out;
    std::vector<std::size_t> idx(pool.size());
    for (const auto& [question, experts] : plan) {
        const std::size_t want = experts.size();
        if (want > pool.size())
            throw ConfigError("question '" + question + "' needs " + std::to_string(want) +
                              " random experts but only " + std::to_string(pool.size()) +
                              " are eligible");
        Rng rng(seed, "random-same-size/" + question);
        std::iota(idx.begin(), idx.end(), 0);
        auto& chosen = out[question];
        // Partial Fisher-Yates: the first `want` slots form a uniform sample.
        for (std::size_t i = 0; i < want; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
            std::swap(idx[i], idx[j]);
            chosen.insert(pool[idx[i]]);
        }
    }
    return out;
}

AblationPlan baseline_question_shuffle(const AblationPlan& plan, std::uint64_t seed,
                                       ShuffleMode mode) {
    if (plan.size() < 2) throw ConfigError("question shuffling needs at least two questions");
    std::vector<const std::string*> questions;
    std::vector<const std::set<ExpertRef>*> sets;
    for (const auto& [q, s] : plan) {
        questions.push_back(&q);
        sets.push_back(&s);
    }
    const std::size_t n = questions.size();
    std::vector<std::size_t> source(n);
    Rng rng(seed, "question-shuffle");

    if (mode == ShuffleMode::Derangement) {
        // Rejection sampling over uniform permutations gives a uniform derangement.
        bool fixed_point = true;
        while (fixed_point) {
            std::iota(source.begin(), source.end(), 0);
            for (std::size_t i = n - 1; i > 0; --i)
                std::swap(source[i], source[static_cast<std::size_t>(rng.below(i + 1))]);
            fixed_point = false;
            for (std::size_t i = 0; i < n && !fixed_point; ++i) fixed_point = source[i] == i;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t j = static_cast<std::size_t>(rng.below(n - 1));
            source[i] = j >= i ? j + 1 : j;
        }
    }

    AblationPlan out;
    for (std::size_t i = 0; i < n; ++i) out[*questions[i]] = *sets[source[i]];
    return out;
}

std::vector<std::pair<int, std::size_t>> layer_distribution_report(
    std::span<const IdentificationResult> results, const TraceMeta& meta) {
    std::vector<std::pair<int, std::size_t>> hist;
    for (int l : meta.moe_layer_indices) hist.emplace_back(l, 0);
    for (const auto& r : results)
        for (const auto& f : r.findings) {
            const int pos = meta.layer_position(f.expert.layer);
            if (pos < 0)
                throw DataError("finding on layer " + std::to_string(f.expert.layer) +
                                " which is not an MoE layer");
            ++hist[static_cast<std::size_t>(pos)].second;
        }
    return hist;
}

} // namespace xici
