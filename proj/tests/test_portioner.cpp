#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mealeng/errors.hpp"
#include "mealeng/portioner.hpp"
#include "mealeng/rdi.hpp"
#include "mealeng/synthetic.hpp"
#include "oracles/portion_oracle.hpp"

using namespace mealeng;
namespace po = mealeng::portioner;

namespace {

FoodRecord food(std::string code, std::string main, double kcal, bool beverage = false) {
    FoodRecord f;
    f.food_code = std::move(code);
    f.name = f.food_code;
    f.main_category = std::move(main);
    f.sub_category = f.main_category;
    f.is_beverage = beverage;
    f.is_solid = !beverage;
    f.nutrients_per_100g[idx(Nutrient::energy)] = kcal;
    f.nutrients_per_100g[idx(Nutrient::protein)] = kcal / 40.0;
    f.nutrients_per_100g[idx(Nutrient::carbohydrate)] = kcal / 8.0;
    return f;
}

po::PortionSolution manual(const std::vector<FoodRecord>& foods, std::vector<double> grams) {
    po::PortionSolution s;
    for (const auto& f : foods) s.food_codes.push_back(f.food_code);
    s.grams = std::move(grams);
    return s;
}

double energy(const std::vector<double>& x, const std::vector<FoodRecord>& foods) {
    return po::nutrient_totals(x, foods)[idx(Nutrient::energy)];
}

bool has(const std::vector<std::string>& v, const char* s) { return std::find(v.begin(), v.end(), s) != v.end(); }

MealType type_for(std::uint64_t seed) { return static_cast<MealType>(seed % 3); }

}  // namespace

TEST_CASE("per-kcal and meal targets") {
    const auto p = RdiProfile::standard();
    const auto t = per_kcal_targets(p);
    CHECK(t[idx(Nutrient::protein)] == doctest::Approx(0.025));
    CHECK(t[idx(Nutrient::energy)] == doctest::Approx(1.0));
    CHECK(t[idx(Nutrient::sodium)] == doctest::Approx(1.15));
    CHECK(convert_vitamin_d(800, VitaminDUnit::iu) == doctest::Approx(20.0));
    CHECK(convert_vitamin_d(0, VitaminDUnit::iu) == 0.0);
    CHECK(convert_vitamin_d(40, VitaminDUnit::iu) == doctest::Approx(1.0));
    CHECK(meal_targets(p, MealType::breakfast)[idx(Nutrient::fiber)] == doctest::Approx(7.0));
    CHECK(meal_targets(p, MealType::dinner)[idx(Nutrient::energy)] == doctest::Approx(800.0));
    CHECK(meal_targets(p, MealType::lunch)[idx(Nutrient::protein)] == doctest::Approx(17.5));
}

TEST_CASE("nutrient totals") {
    const std::vector<FoodRecord> foods = {food("A", "grains", 200), food("B", "vegetables", 30)};
    const auto zero = po::nutrient_totals({0, 0}, foods);
    for (double v : zero) CHECK(v == 0.0);
    CHECK(po::nutrient_totals({100, 0}, foods) == foods[0].nutrients_per_100g);
    const auto a = po::nutrient_totals({30, 70}, foods), b = po::nutrient_totals({60, 140}, foods);
    for (std::size_t k = 0; k < kNutrientCount; ++k) CHECK(b[k] == doctest::Approx(2 * a[k]));
}

TEST_CASE("objective orientation") {
    const auto p = RdiProfile::standard();
    const auto targets = meal_targets(p, MealType::lunch);
    auto totals = targets;
    CHECK(po::portion_objective(totals, targets, p) == doctest::Approx(0.0));
    totals[idx(Nutrient::protein)] = targets[idx(Nutrient::protein)] / 2;  // one bit short
    CHECK(po::portion_objective(totals, targets, p) == doctest::Approx(2.0));
    po::SolverOptions lit;
    lit.orientation = po::Orientation::formula_literal;
    CHECK(po::portion_objective(totals, targets, p, lit) == doctest::Approx(1.5));
    totals = targets;
    totals[idx(Nutrient::sodium)] = 2 * targets[idx(Nutrient::sodium)];
    CHECK(po::portion_objective(totals, targets, p) == doctest::Approx(3.0));
    totals[idx(Nutrient::sodium)] = targets[idx(Nutrient::sodium)] / 4;  // under a cap is free
    CHECK(po::portion_objective(totals, targets, p) == doctest::Approx(0.0));
}

TEST_CASE("a food matching the targets is portioned to the energy target") {
    const auto p = RdiProfile::standard();
    const auto t = per_kcal_targets(p);
    FoodRecord f = food("M", "mixed_dishes", 250);
    for (std::size_t k = 0; k < kNutrientCount; ++k) f.nutrients_per_100g[k] = t[k] * 250.0;
    po::PortionConstraints c;
    c.min_solid_items = {1, 1, 1};
    const auto s = po::solve_portions({f}, p, MealType::breakfast, c, 1);
    REQUIRE(s.grams.size() == 1);
    CHECK(s.grams[0] == doctest::Approx(200.0).epsilon(1e-6));
    CHECK(s.objective < 1e-9);
}

TEST_CASE("solutions are feasible and beat random search") {
    const auto p = RdiProfile::standard();
    const po::PortionConstraints c;
    std::size_t solved = 0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto type = type_for(seed);
        const auto foods = synthetic::random_instance(4 + seed % 5, c.min_solids(type), seed);
        po::PortionSolution s;
        try {
            s = po::solve_portions(foods, p, type, c, seed);
        } catch (const InfeasibleError&) {
            continue;
        }
        ++solved;
        const double target = meal_targets(p, type)[idx(Nutrient::energy)];
        CHECK(po::violations(s.grams, foods, type, target, c).empty());
        CHECK(oracle::feasible(s.grams, foods, type));
        CHECK(s.objective == doctest::Approx(oracle::objective(s.grams, foods, p, type)).epsilon(1e-9));
        if (seed < 6) {
            const auto rs = oracle::random_search(foods, p, type, 2000, seed + 100);
            if (rs.accepted > 0) CHECK(s.objective <= rs.best + 1e-9);
        }
    }
    CHECK(solved >= 20);
}

TEST_CASE("solver is deterministic") {
    const auto p = RdiProfile::standard();
    const auto foods = synthetic::random_instance(6, 3, 4);
    const auto a = po::solve_portions(foods, p, MealType::dinner, {}, 9);
    const auto b = po::solve_portions(foods, p, MealType::dinner, {}, 9);
    CHECK(a.grams == b.grams);
}

TEST_CASE("unreachable energy is reported as infeasible") {
    const auto p = RdiProfile::standard();
    const std::vector<FoodRecord> foods = {food("L1", "vegetables", 10), food("L2", "vegetables", 10)};
    CHECK_THROWS_WITH_AS(po::solve_portions(foods, p, MealType::breakfast, {}, 0),
                         doctest::Contains("per_solid_item_max"), InfeasibleError);
    // too few solids is a precondition failure
    CHECK_THROWS_AS(po::solve_portions({food("A", "grains", 300)}, p, MealType::breakfast, {}, 0),
                    ValidationError);
}

TEST_CASE("reproject") {
    const auto p = RdiProfile::standard();
    const po::PortionConstraints c;

    SUBCASE("feasible input is returned unchanged") {
        const auto foods = synthetic::random_instance(5, 3, 2);
        const auto s = po::solve_portions(foods, p, MealType::lunch, c, 2);
        const auto r = po::reproject(s, foods, MealType::lunch, c, p);
        CHECK(r.grams == s.grams);
        CHECK_FALSE(has(r.flags, "reprojected"));
    }
    SUBCASE("sugars clamped to 12 g, others restore energy") {
        const std::vector<FoodRecord> foods = {food("S", "sugars", 400), food("G", "grains", 300),
                                               food("V", "vegetables", 30)};
        const auto r = po::reproject(manual(foods, {15, 140, 200.0 / 3}), foods, MealType::breakfast, c, p);
        CHECK(r.grams[0] == doctest::Approx(12.0));
        CHECK(energy(r.grams, foods) == doctest::Approx(500.0));
        CHECK(has(r.flags, "reprojected"));
        CHECK_FALSE(has(r.flags, "best_effort"));
        CHECK(r.grams[1] / r.grams[2] == doctest::Approx(140.0 / (200.0 / 3)));
    }
    SUBCASE("beverage energy share reduced to 25%") {
        const std::vector<FoodRecord> foods = {food("D", "beverages", 50, true), food("G", "grains", 300),
                                               food("H", "grains", 300)};
        const auto r = po::reproject(manual(foods, {300, 175.0 / 3, 175.0 / 3}), foods, MealType::breakfast, c, p);
        CHECK(r.grams[0] == doctest::Approx(250.0));
        CHECK(energy(r.grams, foods) == doctest::Approx(500.0));
        CHECK(po::violations(r.grams, foods, MealType::breakfast, 500.0, c).empty());
    }
    SUBCASE("total grams scaled down to 900 even at the cost of energy") {
        const std::vector<FoodRecord> foods = {food("G", "grains", 150), food("V", "vegetables", 30),
                                               food("F", "fruits", 40), food("D", "beverages", 40, true)};
        const auto r = po::reproject(manual(foods, {300, 300, 300, 100}), foods, MealType::lunch, c, p);
        CHECK(std::accumulate(r.grams.begin(), r.grams.end(), 0.0) <= 900.0 + 1e-9);
        CHECK(has(r.flags, "reprojected"));
        CHECK(has(r.flags, "best_effort"));
    }
}

TEST_CASE("raising the sodium weight never raises sodium") {
    const auto base = RdiProfile::standard();
    const po::PortionConstraints c;
    std::size_t checked = 0;
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        const auto type = type_for(seed);
        const auto foods = synthetic::random_instance(5 + seed % 3, c.min_solids(type), seed + 50);
        double prev = 1e300;
        try {
            for (double w : {1.0, 3.0, 10.0, 30.0}) {
                auto p = base;
                p[Nutrient::sodium].weight_over = w;
                const auto s = po::solve_portions(foods, p, type, c, seed);
                const double na = s.nutrient_totals[idx(Nutrient::sodium)];
                CHECK(na <= prev * (1 + 1e-6) + 1e-9);
                prev = na;
            }
            ++checked;
        } catch (const InfeasibleError&) {
        }
    }
    CHECK(checked >= 6);
}

TEST_CASE("objective is invariant under density rescaling") {
    const auto p = RdiProfile::standard();
    const po::PortionConstraints c;
    std::size_t checked = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto type = type_for(seed);
        const auto foods = synthetic::random_instance(5, c.min_solids(type), seed + 200);
        po::PortionSolution s;
        try {
            s = po::solve_portions(foods, p, type, c, seed);
        } catch (const InfeasibleError&) {
            continue;
        }
        const double target = meal_targets(p, type)[idx(Nutrient::energy)];
        for (double k : {0.5, 2.0, 3.0}) {
            auto scaled = foods;
            for (auto& v : scaled[0].nutrients_per_100g) v *= k;
            auto x = s.grams;
            x[0] /= k;
            const auto a = po::nutrient_totals(s.grams, foods), b = po::nutrient_totals(x, scaled);
            for (std::size_t n = 0; n < kNutrientCount; ++n) CHECK(b[n] == doctest::Approx(a[n]).epsilon(1e-12));
            CHECK(oracle::objective(x, scaled, p, type) == doctest::Approx(s.objective).epsilon(1e-12));
            // shrinking grams only loosens gram caps
            if (k > 1.0 && x[0] >= c.min_item_grams) CHECK(po::violations(x, scaled, type, target, c).empty());
        }
        ++checked;
    }
    CHECK(checked >= 5);
}

TEST_CASE("portioned meals json round trip") {
    const auto p = RdiProfile::standard();
    const auto foods = synthetic::random_instance(5, 3, 8);
    po::PortionedMeal m{"g1", MealType::dinner, 4, po::solve_portions(foods, p, MealType::dinner, {}, 8)};
    const auto back = po::portioned_meals_from_json(po::portioned_meals_to_json({m}));
    REQUIRE(back.size() == 1);
    CHECK(back[0].meal_id == "g1");
    CHECK(back[0].cluster_id == 4);
    CHECK(back[0].solution.grams == m.solution.grams);
    CHECK(back[0].solution.food_codes == m.solution.food_codes);
    CHECK(back[0].solution.objective == m.solution.objective);
    CHECK_THROWS_AS(po::portioned_meals_from_json("{"), ValidationError);
}
