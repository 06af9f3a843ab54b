// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <numeric>

#include "oracles.hpp"
#include "xici/kernels.hpp"
#include "xici/parallel.hpp"
#include "xici/preprocess.hpp"

using namespace xici;

TEST_CASE("OpenMP kernels equal the serial reference for every thread count") {
    const auto set = oracle::random_traceset(77, 5, 24, 3, 9, 6, GatingKind::SigmoidRenorm);
    const RoutingAnalysis analysis(set);
    std::vector<std::size_t> positions{0, 2, 3, 4};
    std::vector<std::size_t> cells(5 * 24);
    std::iota(cells.begin(), cells.end(), std::size_t{0});

    for (auto stat : {kernels::RoutingStat::Weight, kernels::RoutingStat::SelectionFrequency}) {
        const auto ref = kernels::serial::routing_table(set, stat);
        for (int threads : {1, 2, 3, 8}) {
            set_thread_count(threads);
            const auto got = kernels::routing_table(set, stat);
            CHECK(got.values == ref.values);
            for (double frac : {0.01, 0.05, 0.3})
                CHECK(kernels::top_fraction_marks(got, positions, frac) ==
                      kernels::serial::top_fraction_marks(ref, positions, frac));
        }
    }
    for (const auto& q : {"q0", "q4", "q8"}) {
        const auto d = analysis.question_deltas(q);
        const auto ref = kernels::serial::expert_tests(d, cells);
        for (int threads : {1, 2, 3, 8}) {
            set_thread_count(threads);
            const auto got = kernels::expert_tests(d, cells);
            REQUIRE(got.size() == ref.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i].u == ref[i].u);
                CHECK(got[i].p == ref[i].p);
                CHECK(got[i].median_diff == ref[i].median_diff);
            }
        }
    }
    set_thread_count(1);
}

TEST_CASE("selection-frequency table counts top-k membership") {
    const auto set = oracle::random_traceset(5, 2, 10, 3, 3, 3);
    const auto t = kernels::serial::routing_table(set, kernels::RoutingStat::SelectionFrequency);
    for (std::size_t s = 0; s < t.num_sequences; ++s)
        for (std::size_t l = 0; l < t.num_layers; ++l) {
            const auto row = t.row(s, l);
            CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(3.0));
        }
}

TEST_CASE("top-fraction marks include ties at the cutoff and never zeros") {
    kernels::RoutingTable t;
    t.num_sequences = 1;
    t.num_layers = 2;
    t.num_experts = 4;
    t.values = {0.5, 0.2, 0.2, 0.0, 0.2, 0.1, 0.0, 0.0};
    const std::vector<std::size_t> both{0, 1};
    // ceil(0.25 * 8) = 2 -> cutoff is the 2nd largest (0.2), all three 0.2 cells marked
    CHECK(kernels::serial::top_fraction_marks(t, both, 0.25) ==
          std::vector<std::uint32_t>{1, 1, 1, 0, 1, 0, 0, 0});
    // Very wide fraction: zeros stay unmarked
    CHECK(kernels::serial::top_fraction_marks(t, both, 0.99) ==
          std::vector<std::uint32_t>{1, 1, 1, 0, 1, 1, 0, 0});
    // Only layer position 1 is pooled
    const std::vector<std::size_t> second{1};
    CHECK(kernels::serial::top_fraction_marks(t, second, 0.25) ==
          std::vector<std::uint32_t>{0, 0, 0, 0, 1, 0, 0, 0});
}
