// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "xici/errors.hpp"
#include "xici/gating.hpp"
#include "xici/preprocess.hpp"
#include "xici/synth.hpp"

using namespace xici;

namespace {

std::set<int> range(int lo, int hi) {
    std::set<int> s;
    for (int i = lo; i <= hi; ++i) s.insert(i);
    return s;
}

} // namespace

TEST_CASE("preset layer exclusions") {
    auto q = range(0, 5);
    for (int i = 42; i <= 47; ++i) q.insert(i);
    CHECK(default_excluded_layers(qwen3_30b_meta(), Preset::Qwen3_30B) == q);

    auto g = range(0, 5);
    for (int i = 41; i <= 45; ++i) g.insert(i);
    CHECK(default_excluded_layers(glm_air_meta(), Preset::GlmAir) == g);

    CHECK(default_excluded_layers(qwen3_30b_meta(), Preset::Custom).empty());
    CHECK_THROWS_AS(default_excluded_layers(glm_air_meta(), Preset::Qwen3_30B), ConfigError);
    CHECK_THROWS_AS(default_excluded_layers(qwen3_30b_meta(), Preset::GlmAir), ConfigError);

    CHECK(default_tau(Preset::GlmAir) == 0.01);
    CHECK(default_tau(Preset::Qwen3_30B) == 0.005);
    CHECK(parse_preset("glm-air") == Preset::GlmAir);
    CHECK_THROWS_AS(parse_preset("llama"), ConfigError);
}

TEST_CASE("variant_mean examples and oracle") {
    const auto one = oracle::random_traceset(1, 2, 6, 2, 1, 2);
    CHECK(variant_mean(one, "v0", 1) == sequence_responsibility(one.sequences[0], 1, one.meta));

    const auto two = oracle::random_traceset(2, 2, 6, 2, 2, 1);
    const auto u = sequence_responsibility(two.sequences[0], 0, two.meta);
    const auto v = sequence_responsibility(two.sequences[1], 0, two.meta);
    const auto m = variant_mean(two, "v0", 0);
    for (std::size_t e = 0; e < 6; ++e) CHECK(m[e] == doctest::Approx((u[e] + v[e]) / 2).epsilon(1e-15));

    const auto five = oracle::random_traceset(3, 3, 8, 3, 5, 1, GatingKind::SigmoidRenorm);
    for (int layer = 0; layer < 3; ++layer) {
        std::vector<double> want(8, 0.0);
        for (const auto& s : five.sequences) {
            for (std::size_t t = 0; t < s.token_count; ++t) {
                std::vector<double> z(8);
                for (std::size_t e = 0; e < 8; ++e)
                    z[e] = s.logits[(static_cast<std::size_t>(layer) * s.token_count + t) * 8 + e];
                const auto w = oracle::gate(z, 3, GatingKind::SigmoidRenorm);
                for (std::size_t e = 0; e < 8; ++e) want[e] += w[e] / static_cast<double>(s.token_count) / 5.0;
            }
        }
        const auto got = variant_mean(five, "v0", layer);
        for (std::size_t e = 0; e < 8; ++e) CHECK(std::abs(got[e] - want[e]) <= 1e-12);
    }
    CHECK_THROWS_AS(variant_mean(five, "nope", 0), ConfigError);
    CHECK_THROWS_AS(variant_mean(five, "v0", 9), ConfigError);
}

TEST_CASE("delta examples") {
    CHECK(delta(std::vector<double>{1, 0}, std::vector<double>{0.5, 0.5}) == std::vector<double>{0.5, -0.5});
    const std::vector<double> p{0.2, 0.3, 0.5};
    CHECK(delta(p, p) == std::vector<double>{0, 0, 0});
    CHECK_THROWS_AS(delta(p, std::vector<double>{1}), ConfigError);

    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> ud(0, 1);
    std::vector<double> a(50), b(50);
    for (std::size_t i = 0; i < 50; ++i) {
        a[i] = ud(gen);
        b[i] = ud(gen);
    }
    const auto d = delta(a, b);
    for (std::size_t i = 0; i < 50; ++i) CHECK(d[i] == a[i] - b[i]);
}

TEST_CASE("deltas over the full dataset sum to zero per variant and layer") {
    const auto set = oracle::random_traceset(8, 3, 10, 2, 7, 4);
    const RoutingAnalysis analysis(set);
    const std::size_t row = 3 * 10;
    std::map<std::string, std::vector<double>> sums;
    for (int q = 0; q < 7; ++q) {
        std::vector<std::string> ids;
        const auto d = analysis.question_deltas("q" + std::to_string(q), &ids);
        for (std::size_t slot = 0; slot < ids.size(); ++slot) {
            auto& s = sums[ids[slot]];
            s.resize(row, 0.0);
            for (std::size_t i = 0; i < row; ++i) {
                s[i] += d.at(slot, i);
                CHECK(d.at(slot, i) >= -1.0);
                CHECK(d.at(slot, i) <= 1.0);
            }
        }
    }
    CHECK(sums.size() == 4);
    for (const auto& [v, s] : sums)
        for (double x : s) CHECK(std::abs(x) <= 1e-9);

    // Cached means agree with the direct definition.
    for (std::size_t vi = 0; vi < analysis.variants().size(); ++vi)
        for (int layer = 0; layer < 3; ++layer) {
            const auto direct = variant_mean(set, analysis.variants()[vi], layer);
            const auto cached = analysis.variant_mean(vi, static_cast<std::size_t>(layer));
            for (std::size_t e = 0; e < 10; ++e) CHECK(cached[e] == doctest::Approx(direct[e]).epsilon(1e-14));
        }
}

TEST_CASE("an expert uniquely on top in 10% of sequences is blacklisted") {
    auto set = oracle::random_traceset(10, 1, 100, 1, 20, 1);
    for (std::size_t i = 0; i < set.sequences.size(); ++i) {
        auto& s = set.sequences[i];
        for (std::size_t t = 0; t < s.token_count; ++t) {
            s.logits[t * 100 + 3] = -10.0f; // never on top
            s.logits[t * 100 + 7] = i % 10 == 0 ? 10.0f : -10.0f;
        }
    }
    FilterConfig cfg;
    cfg.blacklist_top_fraction = 0.01; // 1 of 100 cells
    const auto bl = build_blacklist(set, cfg);
    CHECK(bl.count(ExpertRef{0, 7}) == 1);
    CHECK(bl.count(ExpertRef{0, 3}) == 0);

    cfg.blacklist_frequency_threshold = 0.1; // 2 of 20 is not strictly more than 10%
    CHECK(build_blacklist(set, cfg).count(ExpertRef{0, 7}) == 0);
}

TEST_CASE("blacklist is monotone in the frequency threshold and respects exclusions") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto set = oracle::random_traceset(100 + seed, 4, 16, 2, 6, 5);
        FilterConfig cfg;
        cfg.excluded_layers = {static_cast<int>(seed % 4)};
        cfg.blacklist_top_fraction = 0.05;
        Blacklist prev;
        bool first = true;
        for (double thr : {0.01, 0.03, 0.05, 0.1, 0.2, 0.4, 0.8}) {
            cfg.blacklist_frequency_threshold = thr;
            const auto bl = build_blacklist(set, cfg);
            for (const auto& x : bl) {
                CHECK(x.layer != static_cast<int>(seed % 4));
                if (!first) CHECK(prev.count(x) == 1);
            }
            prev = bl;
            first = false;
        }
    }
}

TEST_CASE("blacklist by selection frequency") {
    auto set = oracle::random_traceset(12, 2, 20, 2, 10, 2);
    for (auto& s : set.sequences)
        for (std::size_t t = 0; t < s.token_count; ++t) s.logits[t * 20 + 5] = 50.0f;
    FilterConfig cfg;
    cfg.ranking = BlacklistRanking::SelectionFrequency;
    cfg.blacklist_top_fraction = 0.02;
    const auto bl = build_blacklist(set, cfg);
    CHECK(bl.count(ExpertRef{0, 5}) == 1);
}

TEST_CASE("blacklist rejects empty sets and bad fractions") {
    TraceSet empty;
    empty.meta = oracle::random_traceset(0, 1, 4, 1, 1, 1).meta;
    CHECK_THROWS_AS(build_blacklist(empty, FilterConfig{}), DataError);
    const auto set = oracle::random_traceset(0, 1, 4, 1, 1, 1);
    FilterConfig cfg;
    cfg.blacklist_top_fraction = 1.5;
    CHECK_THROWS_AS(build_blacklist(set, cfg), ConfigError);
    cfg = FilterConfig{};
    cfg.excluded_layers = {7};
    CHECK_THROWS_AS(build_blacklist(set, cfg), ConfigError);
}
