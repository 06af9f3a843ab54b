// SPDX-License-Identifier: Apache-2.0
#include "xici/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "xici/ablation.hpp"
#include "xici/errors.hpp"
#include "xici/gating.hpp"
#include "xici/rng.hpp"

namespace xici {

namespace {

constexpr std::array<const char*, 42> kLanguageCodes = {
    "en", "fr", "de", "es", "it", "pt", "ru", "zh", "ja", "ko", "ar", "hi", "bn", "id",
    "tr", "vi", "th", "pl", "nl", "sv", "uk", "el", "he", "fa", "cs", "ro", "hu", "fi",
    "da", "no", "ms", "sw", "yo", "ha", "ig", "am", "te", "ta", "mr", "ne", "si", "ky"};

std::string variant_name(std::size_t i) {
    if (i < kLanguageCodes.size()) return kLanguageCodes[i];
    char buf[32];
    std::snprintf(buf, sizeof buf, "v%03zu", i);
    return buf;
}

std::string question_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "q%04zu", i);
    return buf;
}

} // namespace

TraceMeta qwen3_30b_meta() {
    TraceMeta m;
    m.model_id = "synthetic-qwen3-30b-a3b";
    m.num_layers_total = 48;
    for (int l = 0; l < 48; ++l) m.moe_layer_indices.push_back(l);
    m.experts_per_layer = 128;
    m.top_k = 8;
    m.gating = GatingKind::SoftmaxRenorm;
    return m;
}

TraceMeta glm_air_meta() {
    TraceMeta m;
    m.model_id = "synthetic-glm-4.5-air";
    m.num_layers_total = 46;
    for (int l = 1; l < 46; ++l) m.moe_layer_indices.push_back(l);
    m.experts_per_layer = 128;
    m.top_k = 8;
    m.gating = GatingKind::SigmoidRenorm;
    m.has_shared_expert = true;
    return m;
}

void SynthConfig::validate() const {
    meta.validate();
    if (n_questions < 1 || n_variants < 2) throw ConfigError("need >= 1 question and >= 2 variants");
    if (tokens_per_sequence < 1) throw ConfigError("tokens_per_sequence must be >= 1");
    if (planted_per_question < 1) throw ConfigError("planted_per_question must be >= 1");
    if (!(correct_fraction > 0.0 && correct_fraction < 1.0))
        throw ConfigError("correct_fraction must lie in (0, 1)");
    if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
    for (int l : excluded_layers)
        if (l < 0 || l >= meta.num_layers_total)
            throw ConfigError("excluded layer " + std::to_string(l) + " is not a model layer");
}

SynthOutput generate(const SynthConfig& cfg) {
    cfg.validate();
    const auto& meta = cfg.meta;
    const int experts = meta.experts_per_layer;
    const std::size_t n_layers = meta.num_moe_layers();

    std::vector<ExpertRef> eligible;
    for (int layer : meta.moe_layer_indices)
        if (!cfg.excluded_layers.count(layer))
            for (int e = 0; e < experts; ++e) eligible.push_back(ExpertRef{layer, e});

    SynthOutput out;
    out.truth.answer_threshold = cfg.answer_threshold;

    Rng structure(cfg.seed, "structure");
    auto draw_from = [&](std::vector<ExpertRef>& pool, std::size_t count, const char* what) {
        if (count > pool.size())
            throw ConfigError(std::string("not enough experts outside the excluded layers to draw ") +
                              what);
        std::vector<ExpertRef> picked;
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(structure.below(pool.size() - i));
            std::swap(pool[i], pool[j]);
            picked.push_back(pool[i]);
        }
        return picked;
    };

    {
        auto pool = eligible;
        for (const auto& g : draw_from(pool, cfg.n_generalists, "generalists"))
            out.truth.generalists.insert(g);
    }

    // Per-layer boosts shared by all sequences, and the noise-free top-k they induce.
    std::vector<double> base(n_layers * static_cast<std::size_t>(experts), 0.0);
    for (const auto& g : out.truth.generalists)
        base[static_cast<std::size_t>(meta.layer_position(g.layer)) * experts + g.expert] +=
            cfg.generalist_boost;
    std::set<ExpertRef> routine;
    for (std::size_t lp = 0; lp < n_layers; ++lp) {
        const auto w = gate(std::span<const double>(base).subspan(lp * experts, experts),
                            meta.top_k, meta.gating);
        for (int e = 0; e < experts; ++e)
            if (w[static_cast<std::size_t>(e)] > 0.0)
                routine.insert(ExpertRef{meta.moe_layer_indices[lp], e});
    }

    std::vector<ExpertRef> plant_pool;
    for (const auto& r : eligible)
        if (!out.truth.generalists.count(r) && !routine.count(r)) plant_pool.push_back(r);

    std::vector<std::string> variants(cfg.n_variants);
    for (std::size_t v = 0; v < cfg.n_variants; ++v) variants[v] = variant_name(v);
    const auto n_correct = static_cast<std::size_t>(std::clamp<double>(
        std::round(cfg.correct_fraction * static_cast<double>(cfg.n_variants)), 1.0,
        static_cast<double>(cfg.n_variants - 1)));

    struct Cell {
        std::string question;
        std::string variant;
        bool correct;
    };
    std::vector<Cell> cells;
    for (std::size_t q = 0; q < cfg.n_questions; ++q) {
        const auto qid = question_name(q);
        std::vector<ExpertRef> planted;
        if (cfg.allow_plant_overlap) {
            auto pool = plant_pool;
            planted = draw_from(pool, cfg.planted_per_question, "planted experts");
        } else {
            planted = draw_from(plant_pool, cfg.planted_per_question, "disjoint planted experts");
            plant_pool.erase(plant_pool.begin(),
                             plant_pool.begin() + static_cast<std::ptrdiff_t>(planted.size()));
        }
        out.truth.planted[qid].insert(planted.begin(), planted.end());

        Rng labels(cfg.seed, "labels/" + qid);
        std::vector<std::size_t> order(cfg.n_variants);
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size() - 1; i > 0; --i)
            std::swap(order[i], order[static_cast<std::size_t>(labels.below(i + 1))]);
        std::vector<char> correct(cfg.n_variants, 0);
        for (std::size_t i = 0; i < n_correct; ++i) correct[order[i]] = 1;
        for (std::size_t v = 0; v < cfg.n_variants; ++v)
            cells.push_back(Cell{qid, variants[v], correct[v] != 0});
    }

    auto& set = out.traces;
    set.meta = meta;
    set.sequences.resize(cells.size());
    const std::size_t tokens = cfg.tokens_per_sequence;
    const std::size_t row = tokens * static_cast<std::size_t>(experts);

#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(cells.size()); ++i) {
        const auto& cell = cells[static_cast<std::size_t>(i)];
        auto& s = set.sequences[static_cast<std::size_t>(i)];
        s.question_id = cell.question;
        s.variant_id = cell.variant;
        s.correct = cell.correct;
        s.token_count = tokens;
        s.logits.assign(n_layers * row, 0.0f);
        std::vector<double> boost(base);
        if (cell.correct)
            for (const auto& p : out.truth.planted.at(cell.question))
                boost[static_cast<std::size_t>(meta.layer_position(p.layer)) * experts + p.expert] +=
                    cfg.plant_boost;
        Rng noise(cfg.seed, "sequence/" + cell.question + "/" + cell.variant);
        for (std::size_t lp = 0; lp < n_layers; ++lp)
            for (std::size_t t = 0; t < tokens; ++t)
                for (std::size_t e = 0; e < static_cast<std::size_t>(experts); ++e) {
                    double z = boost[lp * experts + e];
                    if (cfg.noise_std > 0.0) z += cfg.noise_std * noise.normal();
                    s.logits[lp * row + t * experts + e] = static_cast<float>(z);
                }
    }
    return out;
}

bool toy_answer(const SequenceTrace& trace, const GroundTruth& truth, const TraceMeta& meta,
                const std::set<ExpertRef>& intervention) {
    auto it = truth.planted.find(trace.question_id);
    if (it == truth.planted.end() || it->second.empty())
        throw DataError("no planted experts for question '" + trace.question_id + "'");
    const auto& planted = it->second;

    std::map<int, std::pair<std::vector<int>, std::vector<int>>> layers; // planted, targets
    for (const auto& p : planted) layers[p.layer].first.push_back(p.expert);
    for (const auto& x : intervention)
        if (auto l = layers.find(x.layer); l != layers.end()) l->second.second.push_back(x.expert);

    std::vector<float> buf(static_cast<std::size_t>(meta.experts_per_layer));
    std::vector<GateEntry> sel(static_cast<std::size_t>(meta.top_k));
    double total = 0.0;
    for (const auto& [layer, lists] : layers) {
        const int pos = meta.layer_position(layer);
        if (pos < 0) throw DataError("planted expert on non-MoE layer " + std::to_string(layer));
        const auto& [planted_here, targets] = lists;
        for (std::size_t t = 0; t < trace.token_count; ++t) {
            const auto z = trace.token_logits(meta, static_cast<std::size_t>(pos), t);
            std::copy(z.begin(), z.end(), buf.begin());
            deactivate_in_place<float>(buf, targets);
            gate_topk<float>(buf, meta.top_k, meta.gating, sel);
            for (const auto& g : sel)
                if (std::find(planted_here.begin(), planted_here.end(), g.expert) != planted_here.end())
                    total += g.weight;
        }
    }
    const double aggregate =
        total / static_cast<double>(trace.token_count) / static_cast<double>(planted.size());
    return aggregate >= truth.answer_threshold;
}

SimulatedAblation simulate_ablation(const TraceSet& set, const GroundTruth& truth,
                                    const std::map<std::string, std::set<ExpertRef>>& plan,
                                    const std::set<std::string>& questions) {
    std::vector<std::size_t> selected;
    for (std::size_t i = 0; i < set.sequences.size(); ++i)
        if (questions.count(set.sequences[i].question_id)) selected.push_back(i);
    auto check = [&](const ExpertRef& r) {
        if (!set.meta.is_moe_layer(r.layer) || r.expert < 0 || r.expert >= set.meta.experts_per_layer)
            throw DataError("expert (" + std::to_string(r.layer) + ", " + std::to_string(r.expert) +
                            ") does not exist in this topology");
    };
    for (const auto& q : questions) {
        auto it = truth.planted.find(q);
        if (it == truth.planted.end() || it->second.empty())
            throw DataError("ground truth has no planted experts for question '" + q + "'");
        for (const auto& r : it->second) check(r);
    }
    for (const auto& [q, experts] : plan)
        for (const auto& r : experts) check(r);

    static const std::set<ExpertRef> none;
    std::vector<char> answers(selected.size(), 0);
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(selected.size()); ++i) {
        const auto& s = set.sequences[selected[static_cast<std::size_t>(i)]];
        auto it = plan.find(s.question_id);
        answers[static_cast<std::size_t>(i)] =
            toy_answer(s, truth, set.meta, it == plan.end() ? none : it->second) ? 1 : 0;
    }

    SimulatedAblation out;
    for (std::size_t i = 0; i < selected.size(); ++i) {
        const auto& s = set.sequences[selected[i]];
        out.pre.set(s.question_id, s.variant_id, s.correct);
        out.post.set(s.question_id, s.variant_id, answers[i] != 0);
    }
    return out;
}

} // namespace xici
