#pragma once
// Daily reference intakes, per-kcal targets, and meal energy allocation.

#include <array>
#include <string_view>

#include "mealeng/food.hpp"

namespace mealeng {

enum class ConstraintType { equality, adequacy, upper_bound, neutral };

std::string_view to_string(ConstraintType c);

struct NutrientTarget {
    double daily_rdi = 0.0;      // in the panel unit (vitamin D in ug)
    double per_kcal = 0.0;       // daily_rdi / reference_energy
    double weight_under = 1.0;   // shortfall penalty
    double weight_over = 1.0;    // excess penalty
    ConstraintType type = ConstraintType::neutral;
};

struct RdiProfile {
    double reference_energy = 2000.0;
    std::array<NutrientTarget, kNutrientCount> nutrients{};

    const NutrientTarget& operator[](Nutrient n) const { return nutrients[idx(n)]; }
    NutrientTarget& operator[](Nutrient n) { return nutrients[idx(n)]; }

    // FDA/USDA daily values for a 2,000 kcal diet with the default portioner weights;
    // nutrients without listed weights are neutral (1 / 1).
    static RdiProfile standard();

    // Throws ConfigError unless per_kcal == daily_rdi / reference_energy,
    // weights > 0 and energy is the only equality nutrient.
    void validate() const;
};

enum class VitaminDUnit { iu, ug };

// 40 IU = 1 ug.
double convert_vitamin_d(double value, VitaminDUnit unit);
VitaminDUnit vitamin_d_unit_from_string(std::string_view s);  // throws ValidationError

// t_k = R_k / R_energy.
NutrientVector per_kcal_targets(const RdiProfile& profile);

struct MealEnergyPlan {
    double breakfast = 0.25;
    double lunch = 0.35;
    double dinner = 0.40;

    double fraction(MealType t) const;
    double target_kcal(MealType t, double reference_energy = 2000.0) const {
        return fraction(t) * reference_energy;
    }
    void validate() const;  // fractions sum to 1
};

// r_k = t_k * f_m * R_energy.
NutrientVector meal_targets(const RdiProfile& profile, MealType type,
                            const MealEnergyPlan& plan = {});

}  // namespace mealeng
