#pragma once
// Statistical primitives shared by cluster validation, the evaluation
// metrics, and the substitution frontier.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace mealeng::stats {

double mean(std::span<const double> x);
// Sample variance (n - 1 denominator); 0 for fewer than two values.
double variance(std::span<const double> x);
double median(std::span<const double> x);

// Linear-interpolation quantile (Hyndman-Fan type 7) of unsorted data.
double quantile(std::span<const double> x, double q);
// Same, for data already sorted ascending.
double quantile_sorted(std::span<const double> sorted, double q);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

// Percentile bootstrap CI of a statistic over one sample, resampling with
// replacement. Deterministic for a fixed seed.
Interval bootstrap_ci(std::span<const double> x,
                      const std::function<double(std::span<const double>)>& statistic,
                      std::size_t resamples, double level, std::uint64_t seed);

struct TwoSampleBootstrap {
    double observed = 0.0;       // statistic(a) - statistic(b) on the full samples
    Interval ci;                 // percentile interval of the resampled difference
    double p_two_sided = 1.0;    // 2 * min(P(diff <= 0), P(diff >= 0)), capped at 1
};

// Bootstrap of statistic(a) - statistic(b), each cohort resampled
// independently with replacement.
TwoSampleBootstrap bootstrap_difference(
    std::span<const double> a, std::span<const double> b,
    const std::function<double(std::span<const double>)>& statistic, std::size_t resamples,
    double level, std::uint64_t seed);

double log_choose(double n, double k);

// Two-sided Fisher exact test on [[a, b], [c, d]]: sums the probabilities of
// all tables with the same margins that are no more likely than the observed
// one (relative tolerance 1e-7).
double fisher_exact_two_sided(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d);

struct MannWhitney {
    double u = 0.0;  // U statistic of the first sample
    double p = 1.0;  // two-sided
    bool exact = false;
};

// Two-sided Mann-Whitney U. Exact permutation distribution (mid-ranks for
// ties) when both samples have at most exact_max values; otherwise the normal
// approximation with tie and continuity corrections.
MannWhitney mann_whitney(std::span<const double> a, std::span<const double> b,
                         std::size_t exact_max = 12);

double normal_sf(double z);  // P(Z > z)

struct FdrResult {
    std::vector<bool> reject;
    std::vector<double> q_values;
};

// Benjamini-Hochberg step-up. q_values are the monotone adjusted p-values
// min_{j >= i} p_(j) * m / j, capped at 1. Ties are ordered stably.
FdrResult bh_fdr(std::span<const double> p_values, double q);

// (mean_a - mean_b) / pooled sd with n - 1 denominators. A zero pooled sd
// yields 0 when the means are equal and a signed infinity otherwise.
double cohens_d(std::span<const double> a, std::span<const double> b);

}  // namespace mealeng::stats
