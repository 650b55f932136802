#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mealeng/cluster_validation.hpp"
#include "mealeng/errors.hpp"
#include "mealeng/features.hpp"
#include "mealeng/random.hpp"
#include "mealeng/stats.hpp"
#include "oracles/stats_oracle.hpp"

using namespace mealeng;
namespace ft = mealeng::features;
namespace cl = mealeng::clusters;

namespace {

FoodRecord macro_food(std::string code, std::string main, double p, double c, double f) {
    FoodRecord r;
    r.food_code = std::move(code);
    r.name = r.food_code;
    r.main_category = std::move(main);
    r.sub_category = "breads_rolls";
    r.nutrients_per_100g[idx(Nutrient::protein)] = p;
    r.nutrients_per_100g[idx(Nutrient::carbohydrate)] = c;
    r.nutrients_per_100g[idx(Nutrient::total_fat)] = f;
    r.nutrients_per_100g[idx(Nutrient::energy)] = 4 * p + 4 * c + 9 * f;
    return r;
}

double at(const ft::FeatureVector& v, const char* name) { return v[ft::feature_index(name)]; }

}  // namespace

TEST_CASE("feature layout") {
    CHECK(ft::feature_names().size() == 84);
    CHECK_THROWS_AS(ft::feature_index("nope"), LookupError);
}

TEST_CASE("feature examples") {
    const FoodTable foods({macro_food("G", "grains", 20, 50, 10), macro_food("V", "vegetables", 2, 5, 0)});
    const auto v = ft::extract_features(Meal{"m", MealType::lunch, {{"G", 100}}, {}}, foods);
    CHECK(at(v, "protein_ratio") == doctest::Approx(80.0 / 370.0).epsilon(1e-12));
    CHECK(at(v, "ingredient_count") == 1.0);
    CHECK(at(v, "portion_variability") == 0.0);
    CHECK(at(v, "grain_ratio") == doctest::Approx(1.0));
    CHECK(at(v, "main_grains_g") == doctest::Approx(100.0));
    CHECK(at(v, "main_vegetables_g") == 0.0);
    CHECK(at(v, "log_protein_g") == doctest::Approx(std::log1p(20.0)));

    const Meal a{"a", MealType::lunch, {{"G", 80}}, {}};
    const Meal b{"b", MealType::lunch, {{"V", 150}}, {}};
    const Meal ab{"ab", MealType::lunch, {{"G", 80}, {"V", 150}}, {}};
    const auto fa = ft::extract_features(a, foods), fb = ft::extract_features(b, foods),
               fab = ft::extract_features(ab, foods);
    double main_sum = 0.0;
    for (std::size_t i = 0; i < ft::kFeatureCount; ++i) {
        const auto& n = ft::feature_names()[i];
        if (n.rfind("main_", 0) == 0) {
            main_sum += fab[i];
            CHECK(fab[i] == doctest::Approx(fa[i] + fb[i]));
        }
        if (n.rfind("sub_", 0) == 0) CHECK(fab[i] == doctest::Approx(fa[i] + fb[i]));
    }
    CHECK(main_sum == doctest::Approx(230.0).epsilon(1e-9));
}

TEST_CASE("standardize drops constant and mostly-zero features") {
    Matrix x;
    std::vector<MealType> types;
    Rng rng(2);
    for (int r = 0; r < 100; ++r) {
        std::vector<double> row = {5.0, r < 4 ? 1.0 : 0.0, rng.normal() * 3 + 1};
        x.push_row(row);
        types.push_back(MealType::dinner);
    }
    const auto blocks = ft::standardize(x, types);
    REQUIRE(blocks.size() == 1);
    const auto& b = blocks[0];
    CHECK(b.kept == std::vector<std::size_t>{2});
    CHECK(b.dropped.size() == 2);
    const auto z = b.z.column(0);
    CHECK(std::abs(stats::mean(z)) < 1e-9);
    double ss = 0.0;
    for (double v : z) ss += v * v;
    CHECK(std::sqrt(ss / z.size()) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("merge plan") {
    std::map<int, cl::Centroid> c;
    c[0] = {{1.0, 0.0, 0.0}, 100};
    c[1] = {{0.0, 1.0, 0.0}, 100};
    c[2] = {{0.8, 0.6, 0.0}, 5};    // cos 0.8 to A, 0.6 to B
    c[3] = {{0.2, 0.1, 1.0}, 5};    // max cosine < 0.7 -> Euclidean nearest
    c[4] = {{1.0, 0.0, 0.0}, 3};    // identical to A
    const auto plan = cl::merge_plan(c, 50);
    CHECK(plan.at(2) == 0);
    CHECK(plan.at(4) == 0);
    const double d0 = std::hypot(0.8, 0.1, 1.0), d1 = std::hypot(0.2, 0.9, 1.0);
    CHECK(plan.at(3) == (d0 < d1 ? 0 : 1));
    std::map<int, cl::Centroid> small;
    small[0] = {{1.0}, 2};
    CHECK_THROWS_AS(cl::merge_plan(small, 50), ValidationError);
}

TEST_CASE("hurdle test examples") {
    const std::vector<double> zeros(10, 0.0);
    const auto none = cl::hurdle_test(zeros, zeros);
    CHECK_FALSE(none.tested);
    CHECK(none.p == 1.0);
    std::vector<double> in(20, 0.0), out(20, 0.0);
    for (int i = 0; i < 20; ++i) in[i] = 1.0 + i;
    out[0] = 3.0;
    const auto r = cl::hurdle_test(in, out);
    CHECK(r.p_prevalence < 1e-6);
    CHECK(r.p < 1e-5);
}

TEST_CASE("hurdle test matches exact enumeration for groups up to 12") {
    Rng rng(12);
    for (int rep = 0; rep < 150; ++rep) {
        const std::size_t n1 = 1 + rng.below(12), n2 = 1 + rng.below(12);
        std::vector<double> a(n1), b(n2);
        for (auto& v : a) v = rng.below(3) == 0 ? 0.0 : static_cast<double>(1 + rng.below(6));
        for (auto& v : b) v = rng.below(2) == 0 ? 0.0 : static_cast<double>(2 + rng.below(6));
        const auto got = cl::hurdle_test(a, b);
        std::vector<double> nza, nzb;
        for (double v : a)
            if (v != 0) nza.push_back(v);
        for (double v : b)
            if (v != 0) nzb.push_back(v);
        if (nza.empty() && nzb.empty()) {
            CHECK(got.p == 1.0);
            continue;
        }
        const double pf = oracle::fisher(nza.size(), n1 - nza.size(), nzb.size(), n2 - nzb.size());
        const double pm = nza.empty() || nzb.empty() ? 1.0 : oracle::mann_whitney_exact(nza, nzb);
        CHECK(got.p == doctest::Approx(std::min(1.0, 2 * std::min(pf, pm))).epsilon(1e-9));
    }
}

TEST_CASE("classify") {
    cl::ClusterConfig cfg;
    auto f = cl::classify(0.18, 0.001, cfg);
    CHECK(f.significant);
    CHECK_FALSE(f.distinctive);
    f = cl::classify(0.5, 0.02, cfg);
    CHECK_FALSE(f.significant);
    f = cl::classify(-0.3, 0.001, cfg);
    CHECK(f.distinctive);
}

TEST_CASE("profile clusters: identical clusters and relabeling") {
    Matrix x;
    std::vector<MealType> types;
    std::vector<int> labels;
    Rng rng(6);
    for (int r = 0; r < 120; ++r) {
        const double v = static_cast<double>(r % 10);  // both clusters repeat one 30-row pattern
        x.push_row(std::vector<double>{v, v * v, r % 30 < 10 ? 0.0 : v + 1});
        types.push_back(MealType::lunch);
        labels.push_back(r < 60 ? 0 : 1);
    }
    const auto blocks = ft::standardize(x, types);
    cl::ClusterConfig cfg;
    for (const auto& p : cl::profile_clusters(labels, blocks[0], cfg)) {
        for (const auto& f : p.features) CHECK_FALSE(f.significant);
    }

    // planted shift on feature 0 for cluster 7; relabel 7 <-> 3
    Matrix y;
    std::vector<int> l1, l2;
    for (int r = 0; r < 200; ++r) {
        const bool hit = r < 50;
        y.push_row(std::vector<double>{rng.normal() + (hit ? 2.0 : 0.0), rng.normal(), rng.normal()});
        l1.push_back(hit ? 7 : 3);
        l2.push_back(hit ? 3 : 7);
    }
    const auto by = ft::standardize(y, std::vector<MealType>(200, MealType::lunch));
    const auto p1 = cl::profile_clusters(l1, by[0], cfg);
    const auto p2 = cl::profile_clusters(l2, by[0], cfg);
    const auto find = [](const std::vector<cl::ClusterProfile>& ps, int id) {
        return *std::find_if(ps.begin(), ps.end(), [&](const auto& p) { return p.cluster_id == id; });
    };
    const auto a = find(p1, 7), b = find(p2, 3);
    CHECK(a.features[0].distinctive);
    for (std::size_t i = 0; i < a.features.size(); ++i) {
        CHECK(a.features[i].p_value == doctest::Approx(b.features[i].p_value));
        CHECK(a.features[i].q_value == doctest::Approx(b.features[i].q_value));
        CHECK(a.features[i].significant == b.features[i].significant);
    }
}
