// SPDX-License-Identifier: Apache-2.0
#include "xici/stats.hpp"

#include <algorithm>
#include <cmath>

#include "xici/errors.hpp"

namespace xici {

double mwu_u_statistic(std::span<const double> greater, std::span<const double> lesser) {
    double u = 0.0;
    for (double g : greater)
        for (double l : lesser) u += g > l ? 1.0 : (g == l ? 0.5 : 0.0);
    return u;
}

double tie_term(std::span<const double> a, std::span<const double> b) {
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    std::sort(pooled.begin(), pooled.end());
    double term = 0.0;
    for (std::size_t i = 0; i < pooled.size();) {
        std::size_t j = i + 1;
        while (j < pooled.size() && pooled[j] == pooled[i]) ++j;
        const double t = static_cast<double>(j - i);
        term += t * t * t - t;
        i = j;
    }
    return term;
}

double mwu_exact_upper_p(std::size_t n1, std::size_t n2, double u) {
    if (n1 == 0 || n2 == 0) throw ConfigError("MWU requires nonempty samples");
    // counts[i][j][s]: labelings of i "greater" and j "lesser" items with U = s,
    // built from the recurrence on which group holds the largest item.
    const std::size_t umax = n1 * n2;
    std::vector<std::vector<std::vector<double>>> counts(
        n1 + 1, std::vector<std::vector<double>>(n2 + 1));
    for (std::size_t i = 0; i <= n1; ++i) {
        for (std::size_t j = 0; j <= n2; ++j) {
            auto& c = counts[i][j];
            c.assign(i * j + 1, 0.0);
            if (i == 0 || j == 0) {
                c[0] = 1.0;
                continue;
            }
            const auto& top_greater = counts[i - 1][j]; // largest item in group 1: +j pairs
            for (std::size_t s = 0; s < top_greater.size(); ++s) c[s + j] += top_greater[s];
            const auto& top_lesser = counts[i][j - 1];
            for (std::size_t s = 0; s < top_lesser.size(); ++s) c[s] += top_lesser[s];
        }
    }
    const auto& dist = counts[n1][n2];
    double total = 0.0, tail = 0.0;
    const double threshold = std::ceil(u - 1e-9);
    for (std::size_t s = 0; s <= umax; ++s) {
        total += dist[s];
        if (static_cast<double>(s) >= threshold) tail += dist[s];
    }
    return tail / total;
}

double mwu_normal_upper_p(std::size_t n1, std::size_t n2, double u, double ties) {
    const double a = static_cast<double>(n1), b = static_cast<double>(n2);
    const double n = a + b;
    const double mu = a * b / 2.0;
    const double var = a * b / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if (!(var > 0.0)) return u >= mu ? 1.0 : 0.0;
    const double z = (u - mu - 0.5) / std::sqrt(var);
    return std::clamp(0.5 * std::erfc(z / std::sqrt(2.0)), 0.0, 1.0);
}

MwuResult mwu_one_tailed(std::span<const double> greater, std::span<const double> lesser) {
    if (greater.empty() || lesser.empty()) throw ConfigError("MWU requires nonempty samples");
    MwuResult r;
    r.u = mwu_u_statistic(greater, lesser);
    const double ties = tie_term(greater, lesser);
    const std::size_t n1 = greater.size(), n2 = lesser.size();
    if (n1 * n2 <= kMwuExactLimit && ties == 0.0) {
        r.p = mwu_exact_upper_p(n1, n2, r.u);
        r.exact = true;
    } else {
        r.p = mwu_normal_upper_p(n1, n2, r.u, ties);
    }
    return r;
}

double median_inplace(std::span<double> values) {
    if (values.empty()) throw ConfigError("median of an empty sample");
    const std::size_t n = values.size();
    const auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(values.begin(), mid, values.end());
    if (n % 2 == 1) return *mid;
    const double upper = *mid;
    const double lower = *std::max_element(values.begin(), mid);
    return 0.5 * (lower + upper);
}

double median(std::span<const double> values) {
    std::vector<double> copy(values.begin(), values.end());
    return median_inplace(copy);
}

double median_diff(std::span<const double> correct_vals, std::span<const double> wrong_vals) {
    return median(correct_vals) - median(wrong_vals);
}

double bh_cutoff(std::span<const double> p_values, double q) {
    std::vector<double> sorted(p_values.begin(), p_values.end());
    std::sort(sorted.begin(), sorted.end());
    const double m = static_cast<double>(sorted.size());
    for (std::size_t i = sorted.size(); i > 0; --i)
        if (sorted[i - 1] <= static_cast<double>(i) * q / m) return sorted[i - 1];
    return -1.0;
}

} // namespace xici
