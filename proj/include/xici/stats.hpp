// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace xici {

struct MwuResult {
    double u = 0.0;
    double p = 1.0;
    bool exact = false;
};

/// Pairs (g, l) with g > l count 1, ties count 1/2.
double mwu_u_statistic(std::span<const double> greater, std::span<const double> lesser);

/// One-tailed test that `greater` is stochastically larger than `lesser`;
/// p = P(U' >= U) under the null. Exact permutation distribution when
/// n1 * n2 <= kMwuExactLimit and no value repeats in the pooled sample,
/// otherwise the tie-corrected normal approximation with continuity correction.
MwuResult mwu_one_tailed(std::span<const double> greater, std::span<const double> lesser);

inline constexpr std::size_t kMwuExactLimit = 200;

/// Exact upper-tail probability P(U' >= u) for tie-free samples of sizes n1, n2.
double mwu_exact_upper_p(std::size_t n1, std::size_t n2, double u);

/// Normal approximation of P(U' >= u). `tie_term` is sum over tie groups of t^3 - t.
double mwu_normal_upper_p(std::size_t n1, std::size_t n2, double u, double tie_term);

/// Sum of t^3 - t over groups of equal values in the pooled sample.
double tie_term(std::span<const double> a, std::span<const double> b);

/// Median; the even-length case averages the two middle values. Reorders `values`.
double median_inplace(std::span<double> values);
double median(std::span<const double> values);

/// median(correct) - median(wrong).
double median_diff(std::span<const double> correct_vals, std::span<const double> wrong_vals);

/// Benjamini-Hochberg step-up cutoff at level q: the largest p_(i) with
/// p_(i) <= i * q / m, or a negative value when no hypothesis is rejected.
double bh_cutoff(std::span<const double> p_values, double q);

} // namespace xici
