#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mealeng {

// Nutrient panel. The order is the column order of foods.csv and of every
// nutrient vector in the library. The first twelve carry explicit weights in
// the default RDI profile; the remainder are the micronutrients the adequacy
// metric needs and are treated as neutral by the portioner.
enum class Nutrient : std::size_t {
    energy,
    protein,
    carbohydrate,
    total_fat,
    fiber,
    sodium,
    saturated_fat,
    added_sugars,
    potassium,
    calcium,
    iron,
    vitamin_d,
    zinc,
    vitamin_a,
    vitamin_c,
    vitamin_b6,
    vitamin_b12,
    thiamin,
    riboflavin,
    niacin,
    folate,
};

inline constexpr std::size_t kNutrientCount = 21;

using NutrientVector = std::array<double, kNutrientCount>;

constexpr std::size_t idx(Nutrient n) { return static_cast<std::size_t>(n); }

struct NutrientInfo {
    std::string_view name;
    std::string_view unit;
    std::string_view csv_column;
};

const std::array<NutrientInfo, kNutrientCount>& nutrient_table();
std::string_view nutrient_name(Nutrient n);
std::optional<Nutrient> nutrient_from_name(std::string_view name);

enum class MealType { breakfast, lunch, dinner };

inline constexpr std::array<MealType, 3> kMealTypes = {MealType::breakfast, MealType::lunch,
                                                       MealType::dinner};

std::string_view to_string(MealType t);
MealType meal_type_from_string(std::string_view s);  // throws ValidationError

struct FoodRecord {
    std::string food_code;
    std::string name;
    std::string main_category;
    std::string sub_category;
    NutrientVector nutrients_per_100g{};
    bool is_beverage = false;
    bool is_solid = true;

    double energy_density() const { return nutrients_per_100g[idx(Nutrient::energy)] / 100.0; }
    // Fluid dairy may carry both flags; it is then counted as a beverage.
    bool counts_as_beverage() const { return is_beverage; }
    bool counts_as_solid() const { return is_solid && !is_beverage; }
};

// Throws ValidationError when nutrient densities are negative or the
// solid/beverage flags are inconsistent.
void validate_food(const FoodRecord& food);

struct MealItem {
    std::string food_code;
    double grams = 0.0;

    friend bool operator==(const MealItem&, const MealItem&) = default;
};

struct Meal {
    std::string meal_id;
    MealType meal_type = MealType::breakfast;
    std::vector<MealItem> items;
    std::optional<int> cluster_label;

    double total_grams() const;
    bool contains(std::string_view code) const;
    const MealItem* find(std::string_view code) const;

    friend bool operator==(const Meal&, const Meal&) = default;
};

// Throws ValidationError on duplicate codes or non-positive/non-finite grams.
void validate_meal(const Meal& meal);

// Merge duplicate codes (grams summed), keeping first-occurrence order.
std::vector<MealItem> merge_duplicate_items(const std::vector<MealItem>& items);

// Immutable lookup over food records.
class FoodTable {
public:
    FoodTable() = default;
    explicit FoodTable(std::vector<FoodRecord> foods);

    const FoodRecord& at(std::string_view code) const;  // throws LookupError
    const FoodRecord* find(std::string_view code) const;
    bool contains(std::string_view code) const { return find(code) != nullptr; }

    const std::vector<FoodRecord>& foods() const { return foods_; }
    std::size_t size() const { return foods_.size(); }

private:
    std::vector<FoodRecord> foods_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Nutrient totals of a meal: sum over items of grams/100 * per-100 g row.
NutrientVector meal_nutrients(const Meal& meal, const FoodTable& foods);

}  // namespace mealeng
