#include "mealeng/food.hpp"

#include <cmath>
#include <unordered_set>

#include "mealeng/errors.hpp"

namespace mealeng {

const std::array<NutrientInfo, kNutrientCount>& nutrient_table() {
    static const std::array<NutrientInfo, kNutrientCount> table = {{
        {"energy", "kcal", "energy_kcal_100g"},
        {"protein", "g", "protein_g_100g"},
        {"carbohydrate", "g", "carbohydrate_g_100g"},
        {"total_fat", "g", "total_fat_g_100g"},
        {"fiber", "g", "fiber_g_100g"},
        {"sodium", "mg", "sodium_mg_100g"},
        {"saturated_fat", "g", "saturated_fat_g_100g"},
        {"added_sugars", "g", "added_sugars_g_100g"},
        {"potassium", "mg", "potassium_mg_100g"},
        {"calcium", "mg", "calcium_mg_100g"},
        {"iron", "mg", "iron_mg_100g"},
        {"vitamin_d", "ug", "vitamin_d_ug_100g"},
        {"zinc", "mg", "zinc_mg_100g"},
        {"vitamin_a", "ug", "vitamin_a_ug_100g"},
        {"vitamin_c", "mg", "vitamin_c_mg_100g"},
        {"vitamin_b6", "mg", "vitamin_b6_mg_100g"},
        {"vitamin_b12", "ug", "vitamin_b12_ug_100g"},
        {"thiamin", "mg", "thiamin_mg_100g"},
        {"riboflavin", "mg", "riboflavin_mg_100g"},
        {"niacin", "mg", "niacin_mg_100g"},
        {"folate", "ug", "folate_ug_100g"},
    }};
    return table;
}

std::string_view nutrient_name(Nutrient n) { return nutrient_table()[idx(n)].name; }

std::optional<Nutrient> nutrient_from_name(std::string_view name) {
    const auto& t = nutrient_table();
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i].name == name) return static_cast<Nutrient>(i);
    }
    return std::nullopt;
}

std::string_view to_string(MealType t) {
    switch (t) {
        case MealType::breakfast: return "breakfast";
        case MealType::lunch: return "lunch";
        case MealType::dinner: return "dinner";
    }
    return "breakfast";
}

MealType meal_type_from_string(std::string_view s) {
    if (s == "breakfast") return MealType::breakfast;
    if (s == "lunch") return MealType::lunch;
    if (s == "dinner") return MealType::dinner;
    throw ValidationError("unknown meal type '" + std::string(s) + "'");
}

namespace {

bool is_fluid_dairy(const FoodRecord& f) {
    return f.main_category == "milk" || f.main_category == "flavored_milk" ||
           f.main_category == "dairy_drinks" || f.main_category == "milk_dairy";
}

}  // namespace

void validate_food(const FoodRecord& food) {
    if (food.food_code.empty()) throw ValidationError("food with empty code");
    for (std::size_t k = 0; k < kNutrientCount; ++k) {
        const double v = food.nutrients_per_100g[k];
        if (!std::isfinite(v) || v < 0.0) {
            throw ValidationError("food " + food.food_code + ": nutrient " +
                                  std::string(nutrient_table()[k].name) +
                                  " must be finite and >= 0");
        }
    }
    if (food.is_beverage == food.is_solid && !(food.is_beverage && is_fluid_dairy(food))) {
        throw ValidationError("food " + food.food_code +
                              ": exactly one of is_beverage/is_solid must be set "
                              "(both allowed only for fluid dairy)");
    }
}

double Meal::total_grams() const {
    double s = 0.0;
    for (const auto& it : items) s += it.grams;
    return s;
}

const MealItem* Meal::find(std::string_view code) const {
    for (const auto& it : items) {
        if (it.food_code == code) return &it;
    }
    return nullptr;
}

bool Meal::contains(std::string_view code) const { return find(code) != nullptr; }

void validate_meal(const Meal& meal) {
    std::unordered_set<std::string> seen;
    for (const auto& it : meal.items) {
        if (!seen.insert(it.food_code).second) {
            throw ValidationError("meal " + meal.meal_id + ": duplicate food code " + it.food_code);
        }
        if (!std::isfinite(it.grams) || it.grams <= 0.0) {
            throw ValidationError("meal " + meal.meal_id + ": grams for " + it.food_code +
                                  " must be finite and positive");
        }
    }
}

std::vector<MealItem> merge_duplicate_items(const std::vector<MealItem>& items) {
    std::vector<MealItem> out;
    std::unordered_map<std::string, std::size_t> pos;
    for (const auto& it : items) {
        auto [where, inserted] = pos.try_emplace(it.food_code, out.size());
        if (inserted) {
            out.push_back(it);
        } else {
            out[where->second].grams += it.grams;
        }
    }
    return out;
}

FoodTable::FoodTable(std::vector<FoodRecord> foods) : foods_(std::move(foods)) {
    index_.reserve(foods_.size());
    for (std::size_t i = 0; i < foods_.size(); ++i) {
        if (!index_.emplace(foods_[i].food_code, i).second) {
            throw ValidationError("duplicate food code " + foods_[i].food_code);
        }
    }
}

const FoodRecord* FoodTable::find(std::string_view code) const {
    auto it = index_.find(std::string(code));
    return it == index_.end() ? nullptr : &foods_[it->second];
}

const FoodRecord& FoodTable::at(std::string_view code) const {
    const FoodRecord* f = find(code);
    if (f == nullptr) throw LookupError("unknown food code " + std::string(code));
    return *f;
}

NutrientVector meal_nutrients(const Meal& meal, const FoodTable& foods) {
    NutrientVector total{};
    for (const auto& it : meal.items) {
        const auto& row = foods.at(it.food_code).nutrients_per_100g;
        for (std::size_t k = 0; k < kNutrientCount; ++k) total[k] += it.grams / 100.0 * row[k];
    }
    return total;
}

}  // namespace mealeng
