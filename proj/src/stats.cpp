#include "mealeng/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mealeng/errors.hpp"
#include "mealeng/random.hpp"

namespace mealeng::stats {

double mean(std::span<const double> x) {
    if (x.empty()) return 0.0;
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw ValidationError("quantile of empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

double quantile(std::span<const double> x, double q) {
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    return quantile_sorted(s, q);
}

double median(std::span<const double> x) { return quantile(x, 0.5); }

namespace {

void resample_into(std::span<const double> x, std::vector<double>& out, Rng& rng) {
    out.resize(x.size());
    for (auto& v : out) v = x[rng.below(x.size())];
}

}  // namespace

Interval bootstrap_ci(std::span<const double> x,
                      const std::function<double(std::span<const double>)>& statistic,
                      std::size_t resamples, double level, std::uint64_t seed) {
    if (x.empty()) throw ValidationError("bootstrap of empty sample");
    Rng rng(seed);
    std::vector<double> buf;
    std::vector<double> stat(resamples);
    for (std::size_t b = 0; b < resamples; ++b) {
        resample_into(x, buf, rng);
        stat[b] = statistic(buf);
    }
    std::sort(stat.begin(), stat.end());
    const double tail = (1.0 - level) / 2.0;
    return {quantile_sorted(stat, tail), quantile_sorted(stat, 1.0 - tail)};
}

TwoSampleBootstrap bootstrap_difference(
    std::span<const double> a, std::span<const double> b,
    const std::function<double(std::span<const double>)>& statistic, std::size_t resamples,
    double level, std::uint64_t seed) {
    if (a.empty() || b.empty()) throw ValidationError("bootstrap of empty cohort");
    TwoSampleBootstrap out;
    out.observed = statistic(a) - statistic(b);
    Rng rng(seed);
    std::vector<double> ba, bb;
    std::vector<double> diff(resamples);
    std::size_t le0 = 0, ge0 = 0;
    for (std::size_t r = 0; r < resamples; ++r) {
        resample_into(a, ba, rng);
        resample_into(b, bb, rng);
        diff[r] = statistic(ba) - statistic(bb);
        if (diff[r] <= 0.0) ++le0;
        if (diff[r] >= 0.0) ++ge0;
    }
    std::sort(diff.begin(), diff.end());
    const double tail = (1.0 - level) / 2.0;
    out.ci = {quantile_sorted(diff, tail), quantile_sorted(diff, 1.0 - tail)};
    const double n = static_cast<double>(resamples);
    out.p_two_sided = std::min(1.0, 2.0 * std::min(le0 / n, ge0 / n));
    return out;
}

double log_choose(double n, double k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double fisher_exact_two_sided(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
    const double row1 = static_cast<double>(a + b);
    const double col1 = static_cast<double>(a + c);
    const double n = static_cast<double>(a + b + c + d);
    if (n == 0.0) return 1.0;
    const double log_denom = log_choose(n, row1);
    auto log_p = [&](double x) {
        return log_choose(col1, x) + log_choose(n - col1, row1 - x) - log_denom;
    };
    const auto lo = static_cast<std::uint64_t>(std::max(0.0, row1 + col1 - n));
    const auto hi = static_cast<std::uint64_t>(std::min(row1, col1));
    const double lp_obs = log_p(static_cast<double>(a));
    double p = 0.0;
    for (std::uint64_t x = lo; x <= hi; ++x) {
        const double lp = log_p(static_cast<double>(x));
        if (lp <= lp_obs + 1e-7) p += std::exp(lp);
    }
    return std::min(1.0, p);
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

namespace {

// Mid-ranks of the pooled sample, doubled so they are integers.
std::vector<long long> doubled_midranks(std::span<const double> pooled) {
    const std::size_t n = pooled.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });
    std::vector<long long> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
        // positions i..j (0-based) share rank ((i+1)+(j+1))/2; doubled: i+j+2
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = static_cast<long long>(i + j + 2);
        i = j + 1;
    }
    return ranks;
}

}  // namespace

MannWhitney mann_whitney(std::span<const double> a, std::span<const double> b,
                         std::size_t exact_max) {
    MannWhitney out;
    const std::size_t n1 = a.size(), n2 = b.size();
    if (n1 == 0 || n2 == 0) return out;
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    const std::size_t n = pooled.size();
    const auto ranks = doubled_midranks(pooled);
    long long s_obs = 0;
    for (std::size_t i = 0; i < n1; ++i) s_obs += ranks[i];
    const double r1 = static_cast<double>(s_obs) / 2.0;
    out.u = r1 - static_cast<double>(n1 * (n1 + 1)) / 2.0;

    if (n1 <= exact_max && n2 <= exact_max) {
        // counts[j][s]: subsets of size j with doubled rank sum s.
        long long max_sum = 0;
        for (auto r : ranks) max_sum += r;
        std::vector<std::vector<double>> counts(n1 + 1,
                                                std::vector<double>(static_cast<std::size_t>(max_sum) + 1, 0.0));
        counts[0][0] = 1.0;
        for (std::size_t item = 0; item < n; ++item) {
            const auto r = static_cast<std::size_t>(ranks[item]);
            for (std::size_t j = std::min(item + 1, n1); j >= 1; --j) {
                auto& dst = counts[j];
                const auto& src = counts[j - 1];
                for (std::size_t s = dst.size(); s-- > r;) dst[s] += src[s - r];
            }
        }
        const long long expected = static_cast<long long>(n1) * static_cast<long long>(n + 1);
        const long long dev_obs = std::llabs(s_obs - expected);
        double total = 0.0, extreme = 0.0;
        for (std::size_t s = 0; s < counts[n1].size(); ++s) {
            const double c = counts[n1][s];
            if (c == 0.0) continue;
            total += c;
            if (std::llabs(static_cast<long long>(s) - expected) >= dev_obs) extreme += c;
        }
        out.p = std::min(1.0, extreme / total);
        out.exact = true;
        return out;
    }

    // Normal approximation with tie correction.
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && sorted[j] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        i = j;
    }
    const double dn = static_cast<double>(n);
    const double mu = static_cast<double>(n1) * static_cast<double>(n2) / 2.0;
    const double var = static_cast<double>(n1) * static_cast<double>(n2) / 12.0 *
                       ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
    if (var <= 0.0) {
        out.p = 1.0;
        return out;
    }
    const double z = std::max(0.0, std::abs(out.u - mu) - 0.5) / std::sqrt(var);
    out.p = std::min(1.0, 2.0 * normal_sf(z));
    return out;
}

FdrResult bh_fdr(std::span<const double> p_values, double q) {
    const std::size_t m = p_values.size();
    FdrResult out{std::vector<bool>(m, false), std::vector<double>(m, 1.0)};
    if (m == 0) return out;
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return p_values[i] < p_values[j]; });
    const double dm = static_cast<double>(m);
    std::size_t last_reject = 0;  // 1-based rank, 0 = none
    for (std::size_t r = 1; r <= m; ++r) {
        if (p_values[order[r - 1]] <= static_cast<double>(r) * q / dm) last_reject = r;
    }
    double running = 1.0;
    for (std::size_t r = m; r >= 1; --r) {
        const std::size_t i = order[r - 1];
        running = std::min(running, p_values[i] * dm / static_cast<double>(r));
        out.q_values[i] = std::min(1.0, running);
        out.reject[i] = r <= last_reject;
    }
    return out;
}

double cohens_d(std::span<const double> a, std::span<const double> b) {
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double diff = mean(a) - mean(b);
    double pooled_var = 0.0;
    if (na + nb > 2.0) {
        pooled_var = ((na - 1.0) * variance(a) + (nb - 1.0) * variance(b)) / (na + nb - 2.0);
    }
    if (pooled_var <= 0.0) {
        if (diff == 0.0) return 0.0;
        return diff > 0 ? std::numeric_limits<double>::infinity()
                        : -std::numeric_limits<double>::infinity();
    }
    return diff / std::sqrt(pooled_var);
}

}  // namespace mealeng::stats
