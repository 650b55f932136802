#include <doctest.h>

#include <algorithm>
#include <vector>

#include "mealeng/errors.hpp"
#include "mealeng/pricing.hpp"
#include "mealeng/random.hpp"

using namespace mealeng;
namespace pr = mealeng::pricing;

namespace {

FoodRecord food(std::string code, std::string main, std::string sub) {
    FoodRecord f;
    f.food_code = std::move(code);
    f.name = f.food_code;
    f.main_category = std::move(main);
    f.sub_category = std::move(sub);
    return f;
}

FoodTable table() {
    return FoodTable({food("SOUP1", "mixed_dishes", "soups"), food("SOUP2", "mixed_dishes", "soups"),
                      food("SIDE", "vegetables", "sides"), food("MAIN", "mixed_dishes", "mixed_meat_dishes"),
                      food("APPLE", "fruits", "fruit"), food("NOPRICE", "fruits", "fruit")});
}

pr::PriceBook book() {
    pr::PriceBook b;
    b.portions["SOUP1"] = {350, 4.0, std::nullopt};
    b.portions["SOUP2"] = {300, 3.0, std::nullopt};
    b.portions["SIDE"] = {100, 2.0, std::nullopt};
    b.portions["MAIN"] = {250, 8.0, std::nullopt};
    b.fallback_per_100g["APPLE"] = 0.5;
    return b;
}

}  // namespace

TEST_CASE("portion multiplier") {
    CHECK(pr::portion_multiplier(700, 350, 1.0) == 1.0);
    CHECK(pr::portion_multiplier(150, 100, 2.0) == 1.5);
    CHECK(pr::portion_multiplier(0, 100, 2.0) == 0.0);
}

TEST_CASE("category caps resolve entry, sub, main, default") {
    auto b = book();
    const auto foods = table();
    CHECK(b.cap_for(foods.at("SOUP1")) == 1.0);
    CHECK(b.cap_for(foods.at("SIDE")) == 2.0);
    CHECK(b.cap_for(foods.at("MAIN")) == 1.5);
    CHECK(b.cap_for(foods.at("APPLE")) == 3.0);
    b.portions["SIDE"].cap = 0.5;
    CHECK(b.cap_for(foods.at("SIDE")) == 0.5);
}

TEST_CASE("meal cost examples") {
    const auto foods = table();
    auto b = book();
    CHECK(pr::meal_cost(Meal{"e", MealType::lunch, {}, {}}, foods, b) == 2.0);
    b.portions["ONE"] = {100, 3.0, std::nullopt};
    const FoodTable with_one({food("ONE", "grains", "breads_rolls")});
    CHECK(pr::meal_cost(Meal{"o", MealType::lunch, {{"ONE", 100}}, {}}, with_one, b) == doctest::Approx(5.0));
    // two soups of one bowl each: one bowl charged, the pricier one
    const Meal soups{"s", MealType::lunch, {{"SOUP1", 350}, {"SOUP2", 300}}, {}};
    CHECK(pr::meal_cost(soups, foods, b) == doctest::Approx(2.0 + 4.0));
    // fallback is uncapped grams/100 x price
    CHECK(pr::meal_cost(Meal{"f", MealType::lunch, {{"APPLE", 1000}}, {}}, foods, b) == doctest::Approx(2.0 + 5.0));
    CHECK_THROWS_WITH_AS(pr::meal_cost(Meal{"n", MealType::lunch, {{"NOPRICE", 10}}, {}}, foods, b),
                         doctest::Contains("NOPRICE"), PricingError);
}

TEST_CASE("category multipliers scale prices") {
    const auto foods = table();
    auto b = book();
    b.category_multipliers["sides"] = 1.5;
    CHECK(pr::meal_cost(Meal{"m", MealType::lunch, {{"SIDE", 100}}, {}}, foods, b) == doctest::Approx(2.0 + 3.0));
}

TEST_CASE("cost delta") {
    auto d = pr::cost_delta(10, 8);
    CHECK(d.saving == doctest::Approx(20.0));
    CHECK(d.increase == 0.0);
    d = pr::cost_delta(10, 10);
    CHECK(d.saving == 0.0);
    CHECK(d.increase == 0.0);
    d = pr::cost_delta(10, 12);
    CHECK(d.saving == 0.0);
    CHECK(d.increase == doctest::Approx(20.0));
    CHECK_THROWS_AS(pr::cost_delta(0, 5), PricingError);
}

TEST_CASE("meal cost is monotone in grams, order-invariant and capped") {
    const auto foods = table();
    const auto b = book();
    const std::vector<std::string> codes = {"SOUP1", "SOUP2", "SIDE", "MAIN", "APPLE"};
    Rng rng(21);
    for (int rep = 0; rep < 300; ++rep) {
        Meal m{"r", MealType::dinner, {}, {}};
        for (const auto& c : codes)
            if (rng.below(2)) m.items.push_back({c, rng.uniform(1, 800)});
        if (m.items.empty()) continue;
        const double base = pr::meal_cost(m, foods, b);
        Meal rev = m;
        std::reverse(rev.items.begin(), rev.items.end());
        CHECK(pr::meal_cost(rev, foods, b) == doctest::Approx(base).epsilon(1e-12));
        Meal more = m;
        more.items[rng.below(more.items.size())].grams += rng.uniform(0, 300);
        CHECK(pr::meal_cost(more, foods, b) >= base - 1e-12);
    }
    // beyond cap x portion grams the contribution is flat
    const double at_cap = pr::meal_cost(Meal{"c", MealType::lunch, {{"SIDE", 200}}, {}}, foods, b);
    CHECK(pr::meal_cost(Meal{"c", MealType::lunch, {{"SIDE", 900}}, {}}, foods, b) == at_cap);
}

TEST_CASE("price book parsing") {
    const auto b = pr::parse_price_book(R"({
        "portions": [{"food_code": "X", "grams_per_portion": 120, "price": 2.5, "cap": 2}],
        "fallback_per_100g": [{"food_code": "Y", "price": 0.4}],
        "overhead": 1.0
    })");
    CHECK(b.portions.at("X").grams_per_portion == 120);
    CHECK(*b.portions.at("X").cap == 2);
    CHECK(b.fallback_per_100g.at("Y") == 0.4);
    CHECK(b.overhead == 1.0);
    CHECK(b.category_caps.at("soups") == 1.0);
    CHECK_THROWS_AS(pr::parse_price_book(R"({"portions": [{"food_code": "X", "grams_per_portion": 0, "price": 1}]})"),
                    ValidationError);
    CHECK_THROWS_AS(pr::parse_price_book("not json"), ValidationError);
}
