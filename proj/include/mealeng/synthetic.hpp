#pragma once
// Seeded synthetic food/meal corpus with planted meal archetypes, used for
// the bundled demo data and for randomized tests.

#include <cstdint>
#include <string>
#include <vector>

#include "mealeng/food.hpp"
#include "mealeng/random.hpp"

namespace mealeng::synthetic {

// Nutrient template for a family of foods (per 100 g, panel order).
struct FoodTemplate {
    std::string key;  // e.g. "cereals"
    std::string main_category;
    std::string sub_category;
    bool is_beverage = false;
    bool is_solid = true;
    std::size_t variants = 1;
    NutrientVector per_100g{};
    double portion_grams = 100.0;  // typical serving
    double portion_price = 2.0;    // typical price of that serving
};

const std::vector<FoodTemplate>& food_templates();

// One food drawn from a template: every nutrient multiplied by an
// independent log-normal factor (sd `spread`), energy recomputed from the
// macronutrients with the 4/4/9 factors when the template has energy.
FoodRecord random_food(const FoodTemplate& tpl, const std::string& code, Rng& rng, double spread = 0.15);

// All template variants; codes are stable for a given seed.
std::vector<FoodRecord> make_foods(std::uint64_t seed);

struct CorpusConfig {
    std::uint64_t seed = 42;
    std::size_t meals_per_cluster = 170;
    std::size_t outlier_meals = 6;
    std::size_t renamed_codes = 3;  // foods referenced by a retired code in meals.csv
    // Log-normal sd of a per-meal factor scaling every portion (meal-size
    // variability between eating occasions); 0 disables it.
    double meal_size_sd = 0.45;
};

struct SyntheticCorpus {
    std::vector<FoodRecord> foods;
    std::vector<Meal> meals;  // cluster labels attached; outliers carry -1
    std::vector<std::string> codemap_rows;  // "old,new,reason"
    std::string pricebook_json;
};

SyntheticCorpus make_corpus(const CorpusConfig& cfg);

// Writes foods.csv, meals.csv, labels.csv, codemap.csv and pricebook.json.
void write_corpus(const SyntheticCorpus& corpus, const std::string& dir);

// Random portioning instance: `n_foods` distinct foods (water excluded) with
// at least `min_solids` solids and at most one beverage.
std::vector<FoodRecord> random_instance(std::size_t n_foods, std::size_t min_solids, std::uint64_t seed);

}  // namespace mealeng::synthetic
