// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "xici/ablation.hpp"
#include "xici/errors.hpp"
#include "xici/gating.hpp"
#include "xici/parallel.hpp"
#include "xici/preprocess.hpp"
#include "xici/rng.hpp"
#include "xici/synth.hpp"

using namespace xici;

namespace {

SynthConfig small_cfg(std::uint64_t seed = 1) {
    SynthConfig cfg;
    cfg.meta = qwen3_30b_meta();
    cfg.excluded_layers = default_excluded_layers(cfg.meta, Preset::Qwen3_30B);
    cfg.n_questions = 6;
    cfg.tokens_per_sequence = 3;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("generator structure") {
    auto cfg = small_cfg();
    cfg.n_generalists = 12;
    const auto out = generate(cfg);
    CHECK(out.traces.sequences.size() == 6 * 12);
    CHECK_NOTHROW(out.traces.validate());
    const auto classes = classify_questions(out.traces.outcomes());
    CHECK(classes.mixed.size() == 6);

    std::set<ExpertRef> all;
    for (const auto& [q, planted] : out.truth.planted) {
        CHECK(planted.size() == 10);
        for (const auto& p : planted) {
            CHECK(cfg.excluded_layers.count(p.layer) == 0);
            CHECK(out.truth.generalists.count(p) == 0);
            CHECK(all.insert(p).second); // disjoint across questions
        }
    }
    CHECK(out.truth.generalists.size() == 12);
    for (const auto& g : out.truth.generalists) CHECK(cfg.excluded_layers.count(g.layer) == 0);
}

TEST_CASE("generation is deterministic per seed and independent of thread count") {
    auto cfg = small_cfg(4);
    cfg.noise_std = 0.7;
    set_thread_count(1);
    const auto a = generate(cfg);
    set_thread_count(4);
    const auto b = generate(cfg);
    set_thread_count(1);
    CHECK(a.traces == b.traces);
    CHECK(a.truth == b.truth);
    cfg.seed = 5;
    CHECK_FALSE(generate(cfg).traces == a.traces);
}

TEST_CASE("noiseless planted experts are in the top-k exactly for correct variants") {
    const auto cfg = small_cfg(2);
    const auto out = generate(cfg);
    const auto& meta = out.traces.meta;
    for (const auto& s : out.traces.sequences) {
        for (const auto& p : out.truth.planted.at(s.question_id)) {
            const auto r = sequence_responsibility(s, p.layer, meta);
            CHECK((r[static_cast<std::size_t>(p.expert)] > 0.0) == s.correct);
        }
    }
}

TEST_CASE("toy answer model") {
    const auto cfg = small_cfg(3);
    const auto out = generate(cfg);
    const auto& meta = out.traces.meta;
    Rng rng(0, "test");
    for (const auto& s : out.traces.sequences) {
        CHECK(toy_answer(s, out.truth, meta) == s.correct);
        const auto& planted = out.truth.planted.at(s.question_id);
        CHECK_FALSE(toy_answer(s, out.truth, meta, planted));

        // Same-size non-planted set drawn from the planted layers leaves the answer alone.
        std::set<ExpertRef> other;
        for (const auto& p : planted) {
            ExpertRef x;
            do {
                x = ExpertRef{p.layer, static_cast<int>(rng.below(128))};
            } while (planted.count(x) || other.count(x));
            other.insert(x);
        }
        CHECK(toy_answer(s, out.truth, meta, other) == s.correct);
    }
}

TEST_CASE("sigmoid-gated topology works end to end") {
    SynthConfig cfg;
    cfg.meta = glm_air_meta();
    cfg.excluded_layers = default_excluded_layers(cfg.meta, Preset::GlmAir);
    cfg.n_questions = 4;
    cfg.tokens_per_sequence = 2;
    cfg.plant_boost = 2.0;
    const auto out = generate(cfg);
    for (const auto& s : out.traces.sequences) {
        CHECK(toy_answer(s, out.truth, cfg.meta) == s.correct);
        CHECK_FALSE(toy_answer(s, out.truth, cfg.meta, out.truth.planted.at(s.question_id)));
        for (const auto& p : out.truth.planted.at(s.question_id)) CHECK(p.layer >= 6);
    }
}

TEST_CASE("simulate_ablation covers the requested questions only") {
    const auto out = generate(small_cfg(6));
    AblationPlan plan{{"q0000", out.truth.planted.at("q0000")}};
    const auto sim = simulate_ablation(out.traces, out.truth, plan, {"q0000", "q0001"});
    CHECK(sim.pre.size() == 24);
    const auto m = ablation_metrics(sim.pre, sim.post);
    CHECK(m.n_correct_to_wrong == 6);
    CHECK(m.n_wrong_to_correct == 0);
    CHECK(m.questions_all_incorrect_after == 1);

    const auto none = simulate_ablation(out.traces, out.truth, {}, {"q0000"});
    CHECK(none.pre == none.post);

    AblationPlan bad{{"q0000", {ExpertRef{99, 0}}}};
    CHECK_THROWS_AS(simulate_ablation(out.traces, out.truth, bad, {"q0000"}), DataError);
}

TEST_CASE("invalid generator configs") {
    auto cfg = small_cfg();
    cfg.correct_fraction = 1.0;
    CHECK_THROWS_AS(generate(cfg), ConfigError);
    cfg = small_cfg();
    cfg.n_questions = 1000; // 10 disjoint plants each cannot fit
    CHECK_THROWS_AS(generate(cfg), ConfigError);
    cfg = small_cfg();
    cfg.excluded_layers = {77};
    CHECK_THROWS_AS(generate(cfg), ConfigError);
}
