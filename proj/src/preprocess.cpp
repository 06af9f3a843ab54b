// SPDX-License-Identifier: Apache-2.0
#include "xici/preprocess.hpp"

#include <algorithm>

#include "xici/errors.hpp"

namespace xici {

Preset parse_preset(const std::string& s) {
    if (s == "glm-air") return Preset::GlmAir;
    if (s == "qwen3-30b") return Preset::Qwen3_30B;
    if (s == "custom") return Preset::Custom;
    throw ConfigError("unknown preset '" + s + "' (expected glm-air, qwen3-30b or custom)");
}

std::string to_string(Preset p) {
    switch (p) {
    case Preset::GlmAir: return "glm-air";
    case Preset::Qwen3_30B: return "qwen3-30b";
    case Preset::Custom: return "custom";
    }
    return "custom";
}

void FilterConfig::validate(const TraceMeta& meta) const {
    if (!(blacklist_top_fraction > 0.0 && blacklist_top_fraction < 1.0))
        throw ConfigError("blacklist_top_fraction must lie in (0, 1)");
    if (!(blacklist_frequency_threshold > 0.0 && blacklist_frequency_threshold < 1.0))
        throw ConfigError("blacklist_frequency_threshold must lie in (0, 1)");
    for (int l : excluded_layers)
        if (l < 0 || l >= meta.num_layers_total)
            throw ConfigError("excluded layer " + std::to_string(l) + " is not a model layer");
}

std::set<int> default_excluded_layers(const TraceMeta& meta, Preset preset) {
    if (preset == Preset::Custom) return {};
    std::size_t head = 0, tail = 0;
    if (preset == Preset::Qwen3_30B) {
        if (meta.num_moe_layers() != 48)
            throw ConfigError("qwen3-30b preset expects 48 MoE layers, trace has " +
                              std::to_string(meta.num_moe_layers()));
        head = tail = 6;
    } else {
        if (meta.num_moe_layers() != 45 || meta.is_moe_layer(0))
            throw ConfigError("glm-air preset expects a dense layer 0 followed by 45 MoE layers");
        head = tail = 5;
    }
    std::set<int> out;
    for (int l = 0; l < meta.num_layers_total; ++l)
        if (!meta.is_moe_layer(l)) out.insert(l);
    const auto& moe = meta.moe_layer_indices;
    for (std::size_t i = 0; i < head; ++i) out.insert(moe[i]);
    for (std::size_t i = moe.size() - tail; i < moe.size(); ++i) out.insert(moe[i]);
    return out;
}

double default_tau(Preset preset) {
    switch (preset) {
    case Preset::GlmAir: return 0.01;
    case Preset::Qwen3_30B: return 0.005;
    case Preset::Custom: return 0.01;
    }
    return 0.01;
}

std::vector<std::size_t> included_layer_positions(const TraceMeta& meta,
                                                  const std::set<int>& excluded) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < meta.moe_layer_indices.size(); ++i)
        if (!excluded.count(meta.moe_layer_indices[i])) out.push_back(i);
    return out;
}

ResponsibilityVector variant_mean(const TraceSet& set, const std::string& variant, int layer) {
    if (!set.meta.is_moe_layer(layer))
        throw ConfigError("layer " + std::to_string(layer) + " is not an MoE layer");
    ResponsibilityVector mean(static_cast<std::size_t>(set.meta.experts_per_layer), 0.0);
    std::size_t n = 0;
    for (const auto& s : set.sequences) {
        if (s.variant_id != variant) continue;
        const auto p = sequence_responsibility(s, layer, set.meta);
        for (std::size_t e = 0; e < mean.size(); ++e) mean[e] += p[e];
        ++n;
    }
    if (n == 0) throw ConfigError("unknown variant '" + variant + "'");
    for (double& v : mean) v /= static_cast<double>(n);
    return mean;
}

DeltaVector delta(std::span<const double> p, std::span<const double> mean) {
    if (p.size() != mean.size()) throw ConfigError("delta: dimension mismatch");
    DeltaVector d(p.size());
    for (std::size_t e = 0; e < p.size(); ++e) d[e] = p[e] - mean[e];
    return d;
}

Blacklist build_blacklist(const TraceSet& set, const FilterConfig& cfg) {
    if (set.sequences.empty()) throw DataError("cannot build a blacklist from an empty trace set");
    if (cfg.ranking == BlacklistRanking::Weight)
        return build_blacklist(set, kernels::routing_table(set, kernels::RoutingStat::Weight), cfg);
    return build_blacklist(set, kernels::RoutingTable{}, cfg);
}

Blacklist build_blacklist(const TraceSet& set, const kernels::RoutingTable& responsibilities,
                          const FilterConfig& cfg) {
    if (set.sequences.empty()) throw DataError("cannot build a blacklist from an empty trace set");
    cfg.validate(set.meta);
    const auto positions = included_layer_positions(set.meta, cfg.excluded_layers);

    kernels::RoutingTable freq;
    const kernels::RoutingTable* table = &responsibilities;
    if (cfg.ranking == BlacklistRanking::SelectionFrequency) {
        freq = kernels::routing_table(set, kernels::RoutingStat::SelectionFrequency);
        table = &freq;
    }
    if (table->num_sequences != set.sequences.size())
        throw ConfigError("responsibility table does not match the trace set");

    const auto counts = kernels::top_fraction_marks(*table, positions, cfg.blacklist_top_fraction);
    const double limit =
        cfg.blacklist_frequency_threshold * static_cast<double>(set.sequences.size()) + 1e-9;
    Blacklist out;
    const auto experts = table->num_experts;
    for (std::size_t lp : positions)
        for (std::size_t e = 0; e < experts; ++e)
            if (static_cast<double>(counts[lp * experts + e]) > limit)
                out.insert(ExpertRef{set.meta.moe_layer_indices[lp], static_cast<int>(e)});
    return out;
}

RoutingAnalysis::RoutingAnalysis(const TraceSet& set)
    : set_(&set), table_(kernels::routing_table(set, kernels::RoutingStat::Weight)) {
    std::set<std::string> vs;
    for (const auto& s : set.sequences) vs.insert(s.variant_id);
    variants_.assign(vs.begin(), vs.end());
    for (std::size_t i = 0; i < variants_.size(); ++i) variant_index_[variants_[i]] = i;

    for (std::size_t i = 0; i < set.sequences.size(); ++i)
        by_question_[set.sequences[i].question_id].push_back(i);
    for (auto& [q, idx] : by_question_)
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return set.sequences[a].variant_id < set.sequences[b].variant_id;
        });

    const std::size_t row = table_.num_layers * table_.num_experts;
    means_.assign(variants_.size() * row, 0.0);
    std::vector<std::size_t> n(variants_.size(), 0);
    for (std::size_t s = 0; s < set.sequences.size(); ++s) {
        const std::size_t v = variant_index_.at(set.sequences[s].variant_id);
        const double* src = table_.values.data() + s * row;
        double* dst = means_.data() + v * row;
        for (std::size_t i = 0; i < row; ++i) dst[i] += src[i];
        ++n[v];
    }
    for (std::size_t v = 0; v < variants_.size(); ++v)
        for (std::size_t i = 0; i < row; ++i) means_[v * row + i] /= static_cast<double>(n[v]);
}

std::span<const double> RoutingAnalysis::variant_mean(std::size_t variant_index,
                                                      std::size_t layer_pos) const {
    return std::span<const double>(means_).subspan(
        (variant_index * table_.num_layers + layer_pos) * table_.num_experts, table_.num_experts);
}

const std::vector<std::size_t>& RoutingAnalysis::question_sequences(
    const std::string& question) const {
    static const std::vector<std::size_t> empty;
    auto it = by_question_.find(question);
    return it == by_question_.end() ? empty : it->second;
}

kernels::QuestionDeltas RoutingAnalysis::question_deltas(const std::string& question,
                                                         std::vector<std::string>* variant_ids) const {
    const auto& seqs = question_sequences(question);
    kernels::QuestionDeltas d;
    d.num_variants = seqs.size();
    d.num_layers = table_.num_layers;
    d.num_experts = table_.num_experts;
    const std::size_t row = d.num_layers * d.num_experts;
    d.values.resize(d.num_variants * row);
    d.is_correct.resize(d.num_variants);
    if (variant_ids) variant_ids->clear();
    for (std::size_t slot = 0; slot < seqs.size(); ++slot) {
        const auto& seq = set_->sequences[seqs[slot]];
        const std::size_t v = variant_index_.at(seq.variant_id);
        const double* p = table_.values.data() + seqs[slot] * row;
        const double* m = means_.data() + v * row;
        double* out = d.values.data() + slot * row;
        for (std::size_t i = 0; i < row; ++i) out[i] = p[i] - m[i];
        d.is_correct[slot] = seq.correct ? 1 : 0;
        if (variant_ids) variant_ids->push_back(seq.variant_id);
    }
    return d;
}

} // namespace xici
