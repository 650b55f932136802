#pragma once
// WWEIA category vocabulary and the category-derived roles used by the
// portioner, the feature extractor and the substitution search.

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

#include "mealeng/food.hpp"

namespace mealeng::categories {

inline constexpr std::size_t kMainCount = 24;
inline constexpr std::size_t kSubCount = 29;

// Main-category gram features. Main categories outside this list are
// accumulated into "other".
inline constexpr std::array<std::string_view, kMainCount> kMain = {
    "milk_dairy",    "mixed_dishes",   "grains",         "snacks_sweets",
    "fruits",        "vegetables",     "beverages",      "alcoholic_beverages",
    "water",         "condiments_sauces", "sugars",      "baby_foods",
    "other",         "milk",           "flavored_milk",  "dairy_drinks",
    "cooked_grains", "savory_snacks",  "diet_beverages", "sweetened_beverages",
    "plain_water",   "flavored_water", "baby_beverages", "human_milk",
};

// Subcategory gram features. Unlisted subcategories contribute nothing here.
inline constexpr std::array<std::string_view, kSubCount> kSub = {
    "protein_foods",     "fats_oils",          "cheese",        "yogurt",
    "meats",             "poultry",            "seafood",       "eggs",
    "cured_meats",       "plant_proteins",     "mixed_meat_dishes",
    "mixed_bean_dishes", "mixed_grain_dishes", "asian_dishes",  "mexican_dishes",
    "pizza",             "sandwiches",         "soups",         "breads_rolls",
    "quick_breads",      "cereals",            "crackers",      "snack_bars",
    "sweet_bakery",      "candy",              "desserts",      "juice",
    "coffee_tea",        "infant_formulas",
};

// Index into kMain; unknown main categories map to "other".
std::size_t main_feature_index(std::string_view main_category);
std::optional<std::size_t> sub_feature_index(std::string_view sub_category);

bool is_grain(const FoodRecord& f);
bool is_vegetable(const FoodRecord& f);
bool is_fruit(const FoodRecord& f);
bool is_dairy(const FoodRecord& f);
bool is_mixed_dish(const FoodRecord& f);

// Discretionary groups with absolute gram caps during portioning.
enum class CapGroup { sugars, fats_oils, condiments_sauces, snacks_sweets };
inline constexpr std::array<CapGroup, 4> kCapGroups = {CapGroup::sugars, CapGroup::fats_oils,
                                                       CapGroup::condiments_sauces,
                                                       CapGroup::snacks_sweets};
std::optional<CapGroup> cap_group(const FoodRecord& f);
std::string_view to_string(CapGroup g);

}  // namespace mealeng::categories
