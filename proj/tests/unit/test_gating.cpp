// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "xici/errors.hpp"
#include "xici/gating.hpp"

using namespace xici;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace

TEST_CASE("uniform logits split weight over the lowest indices") {
    for (auto kind : {GatingKind::SoftmaxRenorm, GatingKind::SigmoidRenorm}) {
        const auto w = gate(std::vector<double>{0, 0, 0, 0}, 2, kind);
        CHECK(w == std::vector<double>{0.5, 0.5, 0.0, 0.0});
    }
}

TEST_CASE("hand-computed softmax and sigmoid examples") {
    const std::vector<double> z{2, 1, 0, -1};
    const auto ws = gate(z, 2, GatingKind::SoftmaxRenorm);
    const double e2 = std::exp(2.0), e1 = std::exp(1.0);
    CHECK(ws[0] == doctest::Approx(e2 / (e2 + e1)).epsilon(1e-12));
    CHECK(ws[1] == doctest::Approx(e1 / (e2 + e1)).epsilon(1e-12));
    CHECK(ws[0] == doctest::Approx(0.7311).epsilon(1e-4));
    CHECK(ws[2] == 0.0);
    CHECK(ws[3] == 0.0);

    const auto wg = gate(z, 2, GatingKind::SigmoidRenorm);
    CHECK(wg[0] == doctest::Approx(sig(2) / (sig(2) + sig(1))).epsilon(1e-12));
    CHECK(wg[1] == doctest::Approx(sig(1) / (sig(2) + sig(1))).epsilon(1e-12));
    CHECK(wg[2] == 0.0);
}

TEST_CASE("gate matches an independent dense oracle") {
    std::mt19937_64 gen(1);
    std::normal_distribution<double> nd(0, 3);
    for (int trial = 0; trial < 2000; ++trial) {
        const int e = 2 + static_cast<int>(gen() % 40);
        const int k = 1 + static_cast<int>(gen() % static_cast<unsigned>(e));
        std::vector<double> z(static_cast<std::size_t>(e));
        for (auto& v : z) v = std::round(nd(gen) * 2) / 2; // coarse grid forces ties
        const auto kind = trial % 2 ? GatingKind::SigmoidRenorm : GatingKind::SoftmaxRenorm;
        const auto got = gate(z, k, kind);
        const auto want = oracle::gate(z, k, kind);
        for (int i = 0; i < e; ++i) {
            CHECK((got[i] == 0.0) == (want[i] == 0.0));
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("invalid gate arguments") {
    CHECK_THROWS_AS(gate(std::vector<double>{1, 2}, 3, GatingKind::SoftmaxRenorm), ConfigError);
    CHECK_THROWS_AS(gate(std::vector<double>{1, 2}, 0, GatingKind::SoftmaxRenorm), ConfigError);
    CHECK_THROWS_AS(gate(std::vector<double>{1, NAN}, 1, GatingKind::SoftmaxRenorm), DataError);
    CHECK_THROWS_AS(gate(std::vector<double>{1, INFINITY}, 1, GatingKind::SigmoidRenorm), DataError);
}

TEST_CASE("sigmoid-renorm support is shift invariant but weights are not") {
    const std::vector<double> z{1.5, -0.3, 0.7, 2.2, -1.0};
    std::vector<double> shifted(z);
    for (auto& v : shifted) v += 3.0;
    const auto a = gate(z, 3, GatingKind::SigmoidRenorm);
    const auto b = gate(shifted, 3, GatingKind::SigmoidRenorm);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK((a[i] == 0.0) == (b[i] == 0.0));
    CHECK(std::abs(a[3] - b[3]) > 1e-3);
}

TEST_CASE("sequence_responsibility examples") {
    TraceMeta meta{"m", 3, {0, 2}, 4, 1, GatingKind::SoftmaxRenorm, false};
    SequenceTrace s{"q", "v", true, 2, {}};
    // layer position 0 tokens: argmax 0 then 1; layer position 1 tokens irrelevant
    s.logits = {5, 0, 0, 0, 0, 5, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1};
    const auto p = sequence_responsibility(s, 0, meta);
    CHECK(p == std::vector<double>{0.5, 0.5, 0.0, 0.0});
    CHECK_THROWS_AS(sequence_responsibility(s, 1, meta), ConfigError);

    SequenceTrace one{"q", "v", true, 1, {0.3f, -1.0f, 2.0f, 0.1f}};
    TraceMeta m1{"m", 1, {0}, 4, 2, GatingKind::SigmoidRenorm, false};
    const auto r = sequence_responsibility(one, 0, m1);
    const auto g = gate(std::span<const float>(one.logits), 2, GatingKind::SigmoidRenorm);
    CHECK(r == g);
}

TEST_CASE("sequence_responsibility matches a per-token gate-then-average oracle") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto set = oracle::random_traceset(seed, 2, 9, 3, 1, 1,
                                                 seed % 2 ? GatingKind::SigmoidRenorm : GatingKind::SoftmaxRenorm);
        const auto& s = set.sequences[0];
        for (int layer = 0; layer < 2; ++layer) {
            std::vector<double> want(9, 0.0);
            for (std::size_t t = 0; t < s.token_count; ++t) {
                std::vector<double> z(9);
                for (std::size_t e = 0; e < 9; ++e)
                    z[e] = s.logits[(static_cast<std::size_t>(layer) * s.token_count + t) * 9 + e];
                const auto w = oracle::gate(z, 3, set.meta.gating);
                for (std::size_t e = 0; e < 9; ++e) want[e] += w[e] / static_cast<double>(s.token_count);
            }
            const auto got = sequence_responsibility(s, layer, set.meta);
            double sum = 0;
            for (std::size_t e = 0; e < 9; ++e) {
                CHECK(got[e] == doctest::Approx(want[e]).epsilon(1e-12));
                CHECK(got[e] >= 0.0);
                CHECK(got[e] <= 1.0);
                sum += got[e];
            }
            CHECK(std::abs(sum - 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("sequence_responsibility is token-order invariant and expert-permutation equivariant") {
    const auto set = oracle::random_traceset(42, 1, 6, 2, 1, 1);
    auto s = set.sequences[0];
    s.token_count = 3;
    s.logits.resize(18);
    for (std::size_t i = 0; i < 18; ++i) s.logits[i] = static_cast<float>((i * 7 % 11) * 0.3 - 1.0);
    const auto base = sequence_responsibility(s, 0, set.meta);

    auto reversed = s;
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t e = 0; e < 6; ++e) reversed.logits[t * 6 + e] = s.logits[(2 - t) * 6 + e];
    const auto r = sequence_responsibility(reversed, 0, set.meta);
    for (std::size_t e = 0; e < 6; ++e) CHECK(r[e] == doctest::Approx(base[e]).epsilon(1e-14));

    // Rotating expert ids by one is safe here: the logits have no ties.
    auto rotated = s;
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t e = 0; e < 6; ++e) rotated.logits[t * 6 + (e + 1) % 6] = s.logits[t * 6 + e];
    const auto p = sequence_responsibility(rotated, 0, set.meta);
    for (std::size_t e = 0; e < 6; ++e) CHECK(p[(e + 1) % 6] == doctest::Approx(base[e]).epsilon(1e-14));
}
