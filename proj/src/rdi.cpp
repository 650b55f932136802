#include "mealeng/rdi.hpp"

#include <cmath>
#include <string>

#include "mealeng/errors.hpp"

namespace mealeng {

std::string_view to_string(ConstraintType c) {
    switch (c) {
        case ConstraintType::equality: return "equality";
        case ConstraintType::adequacy: return "adequacy";
        case ConstraintType::upper_bound: return "upper_bound";
        case ConstraintType::neutral: return "neutral";
    }
    return "neutral";
}

double convert_vitamin_d(double value, VitaminDUnit unit) {
    if (!(value >= 0.0)) throw ValidationError("vitamin D amount must be >= 0");
    return unit == VitaminDUnit::iu ? value / 40.0 : value;
}

VitaminDUnit vitamin_d_unit_from_string(std::string_view s) {
    if (s == "IU" || s == "iu") return VitaminDUnit::iu;
    if (s == "ug" || s == "μg" || s == "mcg") return VitaminDUnit::ug;
    throw ValidationError("unknown vitamin D unit '" + std::string(s) + "'");
}

RdiProfile RdiProfile::standard() {
    RdiProfile p;
    auto set = [&](Nutrient n, double rdi, double under, double over, ConstraintType type) {
        p[n] = {rdi, rdi / p.reference_energy, under, over, type};
    };
    using C = ConstraintType;
    set(Nutrient::energy, 2000.0, 2.0, 2.0, C::equality);
    set(Nutrient::protein, 50.0, 2.0, 1.5, C::adequacy);
    set(Nutrient::carbohydrate, 275.0, 1.5, 1.5, C::adequacy);
    set(Nutrient::total_fat, 78.0, 1.5, 1.5, C::adequacy);
    set(Nutrient::fiber, 28.0, 2.0, 1.0, C::adequacy);
    set(Nutrient::sodium, 2300.0, 1.0, 3.0, C::upper_bound);
    set(Nutrient::saturated_fat, 20.0, 1.0, 3.0, C::upper_bound);
    set(Nutrient::added_sugars, 50.0, 1.0, 3.0, C::upper_bound);
    set(Nutrient::potassium, 4700.0, 2.0, 1.0, C::adequacy);
    set(Nutrient::calcium, 1300.0, 2.0, 1.0, C::adequacy);
    set(Nutrient::iron, 18.0, 2.0, 1.0, C::adequacy);
    set(Nutrient::vitamin_d, convert_vitamin_d(800.0, VitaminDUnit::iu), 1.5, 1.0, C::adequacy);
    set(Nutrient::zinc, 11.0, 1.0, 1.0, C::neutral);
    set(Nutrient::vitamin_a, 900.0, 1.0, 1.0, C::neutral);
    set(Nutrient::vitamin_c, 90.0, 1.0, 1.0, C::neutral);
    set(Nutrient::vitamin_b6, 1.7, 1.0, 1.0, C::neutral);
    set(Nutrient::vitamin_b12, 2.4, 1.0, 1.0, C::neutral);
    set(Nutrient::thiamin, 1.2, 1.0, 1.0, C::neutral);
    set(Nutrient::riboflavin, 1.3, 1.0, 1.0, C::neutral);
    set(Nutrient::niacin, 16.0, 1.0, 1.0, C::neutral);
    set(Nutrient::folate, 400.0, 1.0, 1.0, C::neutral);
    return p;
}

void RdiProfile::validate() const {
    if (!(reference_energy > 0.0)) throw ConfigError("reference energy must be > 0");
    std::size_t equality = 0;
    for (std::size_t k = 0; k < kNutrientCount; ++k) {
        const auto& t = nutrients[k];
        const std::string name(nutrient_table()[k].name);
        if (!(t.daily_rdi > 0.0)) throw ConfigError("RDI for " + name + " must be > 0");
        if (!(t.weight_under > 0.0) || !(t.weight_over > 0.0)) {
            throw ConfigError("weights for " + name + " must be > 0");
        }
        if (std::abs(t.per_kcal - t.daily_rdi / reference_energy) > 1e-12 * t.daily_rdi) {
            throw ConfigError("per-kcal target for " + name + " must equal RDI / reference energy");
        }
        if (t.type == ConstraintType::equality) ++equality;
    }
    if (equality != 1 || nutrients[idx(Nutrient::energy)].type != ConstraintType::equality) {
        throw ConfigError("energy must be the single equality nutrient");
    }
}

NutrientVector per_kcal_targets(const RdiProfile& profile) {
    if (!(profile.reference_energy > 0.0)) throw ConfigError("reference energy must be > 0");
    NutrientVector t{};
    for (std::size_t k = 0; k < kNutrientCount; ++k) {
        t[k] = profile.nutrients[k].daily_rdi / profile.reference_energy;
    }
    return t;
}

double MealEnergyPlan::fraction(MealType t) const {
    switch (t) {
        case MealType::breakfast: return breakfast;
        case MealType::lunch: return lunch;
        case MealType::dinner: return dinner;
    }
    return breakfast;
}

void MealEnergyPlan::validate() const {
    if (breakfast <= 0 || lunch <= 0 || dinner <= 0 ||
        std::abs(breakfast + lunch + dinner - 1.0) > 1e-9) {
        throw ConfigError("meal energy fractions must be positive and sum to 1");
    }
}

NutrientVector meal_targets(const RdiProfile& profile, MealType type, const MealEnergyPlan& plan) {
    const NutrientVector t = per_kcal_targets(profile);
    const double kcal = plan.fraction(type) * profile.reference_energy;
    NutrientVector r{};
    for (std::size_t k = 0; k < kNutrientCount; ++k) r[k] = t[k] * kcal;
    return r;
}

}  // namespace mealeng
