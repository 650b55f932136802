#include <doctest.h>

#include <cmath>
#include <vector>

#include "mealeng/random.hpp"
#include "mealeng/stats.hpp"
#include "oracles/stats_oracle.hpp"

using namespace mealeng;

TEST_CASE("quantile and median") {
    const std::vector<double> x = {3, 1, 2, 4};
    CHECK(stats::median(x) == doctest::Approx(2.5));
    CHECK(stats::quantile(x, 0.0) == 1.0);
    CHECK(stats::quantile(x, 1.0) == 4.0);
    CHECK(stats::variance(std::vector<double>{1, 3}) == doctest::Approx(2.0));
}

TEST_CASE("bh_fdr examples") {
    auto r = stats::bh_fdr(std::vector<double>{0.005}, 0.01);
    CHECK(r.reject[0]);
    r = stats::bh_fdr(std::vector<double>{0.002, 0.009, 0.02}, 0.01);
    CHECK(r.reject == std::vector<bool>{true, false, false});
    r = stats::bh_fdr(std::vector<double>{1, 1, 1}, 0.05);
    CHECK(r.reject == std::vector<bool>{false, false, false});
}

TEST_CASE("bh_fdr matches brute force on random vectors with ties") {
    Rng rng(7);
    for (int rep = 0; rep < 500; ++rep) {
        const std::size_t m = 1 + rng.below(12);
        std::vector<double> p(m);
        for (auto& v : p) v = rng.below(4) == 0 ? 0.01 * static_cast<double>(rng.below(5)) : rng.uniform() * 0.2;
        const double q = rng.uniform(0.001, 0.2);
        const auto got = stats::bh_fdr(p, q);
        const auto want = oracle::bh(p, q);
        CHECK(got.reject == want.reject);
        for (std::size_t i = 0; i < m; ++i) CHECK(got.q_values[i] == doctest::Approx(want.q_values[i]).epsilon(1e-12));
    }
}

TEST_CASE("bh_fdr rejects a superset as q grows") {
    Rng rng(11);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> p(30);
        for (auto& v : p) v = std::pow(rng.uniform(), 3.0);
        std::vector<bool> prev(p.size(), false);
        for (int g = 1; g <= 20; ++g) {
            const auto r = stats::bh_fdr(p, 0.01 * g);
            for (std::size_t i = 0; i < p.size(); ++i) CHECK((!prev[i] || r.reject[i]));
            prev = r.reject;
        }
    }
}

TEST_CASE("fisher exact matches hypergeometric enumeration") {
    for (unsigned a = 0; a <= 6; ++a)
        for (unsigned b = 0; b <= 6; ++b)
            for (unsigned c = 0; c <= 6; ++c)
                for (unsigned d = 0; d <= 6; ++d) {
                    if (a + b + c + d == 0) continue;
                    CHECK(stats::fisher_exact_two_sided(a, b, c, d) ==
                          doctest::Approx(oracle::fisher(a, b, c, d)).epsilon(1e-9));
                }
    // 20/20 non-zero vs 1/20
    CHECK(stats::fisher_exact_two_sided(20, 0, 1, 19) < 1e-6);
}

TEST_CASE("mann-whitney exact matches enumeration") {
    Rng rng(3);
    for (int rep = 0; rep < 60; ++rep) {
        const std::size_t n1 = 1 + rng.below(8), n2 = 1 + rng.below(8);
        std::vector<double> a(n1), b(n2);
        for (auto& v : a) v = static_cast<double>(rng.below(6));
        for (auto& v : b) v = static_cast<double>(rng.below(6)) + 0.5 * static_cast<double>(rng.below(2));
        const auto got = stats::mann_whitney(a, b);
        CHECK(got.exact);
        CHECK(got.p == doctest::Approx(oracle::mann_whitney_exact(a, b)).epsilon(1e-9));
    }
}

TEST_CASE("mann-whitney identical samples") {
    std::vector<double> a(30), b(30);
    for (int i = 0; i < 30; ++i) a[i] = b[i] = 1.0 + i;
    const auto r = stats::mann_whitney(a, b);
    CHECK_FALSE(r.exact);
    CHECK(r.p == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(stats::mann_whitney(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}).p == doctest::Approx(1.0));
}

TEST_CASE("cohens d") {
    const std::vector<double> a = {1, 2, 3}, b = {1, 2, 3};
    CHECK(stats::cohens_d(a, b) == 0.0);
    // means 1 vs 0, both sd 1
    const std::vector<double> x = {0, 1, 2}, y = {-1, 0, 1};
    CHECK(stats::cohens_d(x, y) == doctest::Approx(1.0));
    CHECK(stats::cohens_d(y, x) == doctest::Approx(-1.0));
    CHECK(std::isinf(stats::cohens_d(std::vector<double>{2, 2}, std::vector<double>{1, 1})));
}

TEST_CASE("bootstrap is deterministic per seed") {
    std::vector<double> x(50);
    Rng rng(1);
    for (auto& v : x) v = rng.normal();
    auto mean_fn = [](std::span<const double> s) { return stats::mean(s); };
    const auto a = stats::bootstrap_ci(x, mean_fn, 500, 0.95, 9);
    const auto b = stats::bootstrap_ci(x, mean_fn, 500, 0.95, 9);
    CHECK(a.lo == b.lo);
    CHECK(a.hi == b.hi);
    CHECK(a.lo < stats::mean(x));
    CHECK(a.hi > stats::mean(x));
}
