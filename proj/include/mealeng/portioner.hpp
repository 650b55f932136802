#pragma once
// Gram portions for a fixed food combination.
//
// Minimizes the asymmetric squared log2 deviation of meal nutrient totals from
// meal-scaled per-kcal targets, subject to an energy band and realism caps.
// Every constraint is linear in grams, so the solver is an active-set
// gradient projection that keeps iterates exactly feasible, restarted from a
// deterministic start plus seeded random feasible starts.

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mealeng/categories.hpp"
#include "mealeng/food.hpp"
#include "mealeng/rdi.hpp"

namespace mealeng::portioner {

struct PortionConstraints {
    double total_grams_max = 900.0;
    double beverage_kcal_frac_max = 0.25;
    std::array<double, 3> beverage_gram_cap = {300.0, 350.0, 350.0};
    std::map<categories::CapGroup, double> category_caps = {
        {categories::CapGroup::sugars, 12.0},
        {categories::CapGroup::fats_oils, 20.0},
        {categories::CapGroup::condiments_sauces, 20.0},
        {categories::CapGroup::snacks_sweets, 60.0},
    };
    double per_solid_item_max = 300.0;
    std::array<std::size_t, 3> min_solid_items = {2, 3, 3};
    double energy_tolerance = 0.01;  // relative band around the meal target
    double min_item_grams = 1.0;     // every selected food keeps at least this much

    double beverage_cap(MealType t) const { return beverage_gram_cap[static_cast<std::size_t>(t)]; }
    std::size_t min_solids(MealType t) const { return min_solid_items[static_cast<std::size_t>(t)]; }
    void validate() const;  // throws ConfigError
};

enum class Orientation {
    labels,           // weight_under penalizes shortfall, weight_over excess
    formula_literal,  // the two weights swapped
};

struct SolverOptions {
    Orientation orientation = Orientation::labels;
    bool include_neutral = true;
    double log_floor_frac = 0.001;  // log argument floor as a fraction of the target
    std::size_t starts = 8;         // 1 deterministic + (starts - 1) seeded
    std::size_t max_iterations = 3000;
    double tolerance = 1e-12;
};

struct PortionSolution {
    std::vector<std::string> food_codes;
    std::vector<double> grams;
    NutrientVector nutrient_totals{};
    double objective = 0.0;
    double target_kcal = 0.0;
    std::vector<std::string> binding_constraints;
    std::size_t iterations = 0;
    std::vector<std::string> flags;

    double total_grams() const;
};

// Meal-level objective for given nutrient totals and targets.
double portion_objective(const NutrientVector& totals, const NutrientVector& targets,
                         const RdiProfile& profile, const SolverOptions& options = {});

// (x / 100)^T A_100g.
NutrientVector nutrient_totals(const std::vector<double>& grams, const std::vector<FoodRecord>& foods);

// Feasibility of x under every cap and the energy band. Returns the names of
// violated constraints (empty when feasible).
std::vector<std::string> violations(const std::vector<double>& grams, const std::vector<FoodRecord>& foods,
                                    MealType type, double target_kcal, const PortionConstraints& c,
                                    double slack = 1e-6);

// Throws ValidationError on precondition failures and InfeasibleError (naming
// the blocking constraints) when no portioning meets the energy band.
PortionSolution solve_portions(const std::vector<FoodRecord>& foods, const RdiProfile& profile,
                               MealType type, const PortionConstraints& constraints,
                               std::uint64_t seed, const MealEnergyPlan& plan = {},
                               const SolverOptions& options = {});

// Clamp groups that exceed their caps (category groups, beverage grams and
// beverage energy share, per-item and total grams), then rescale the
// remaining items to restore the energy target. Adds "reprojected" when
// anything changed and "best_effort" when energy or a cap could not be met.
PortionSolution reproject(const PortionSolution& solution, const std::vector<FoodRecord>& foods,
                          MealType type, const PortionConstraints& constraints,
                          const RdiProfile& profile, const MealEnergyPlan& plan = {},
                          const SolverOptions& options = {});

// portioned_meals.json content.
struct PortionedMeal {
    std::string meal_id;
    MealType meal_type = MealType::breakfast;
    int cluster_id = -1;
    PortionSolution solution;
};

std::string portioned_meals_to_json(const std::vector<PortionedMeal>& meals);
std::vector<PortionedMeal> portioned_meals_from_json(std::string_view text);

}  // namespace mealeng::portioner
