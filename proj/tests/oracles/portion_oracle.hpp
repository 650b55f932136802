#pragma once
// Random-search reference for the portion problem. Written directly from the
// objective and cap definitions, without the library's solver helpers.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "mealeng/categories.hpp"
#include "mealeng/food.hpp"
#include "mealeng/portioner.hpp"
#include "mealeng/random.hpp"
#include "mealeng/rdi.hpp"

namespace oracle {

using mealeng::FoodRecord;
using mealeng::MealType;

inline double objective(const std::vector<double>& x, const std::vector<FoodRecord>& foods,
                        const mealeng::RdiProfile& profile, MealType type) {
    const double frac = mealeng::MealEnergyPlan{}.fraction(type);
    double f = 0.0;
    for (std::size_t k = 0; k < mealeng::kNutrientCount; ++k) {
        const auto& t = profile.nutrients[k];
        const double r = t.daily_rdi / profile.reference_energy * frac * profile.reference_energy;
        double y = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) y += x[i] * foods[i].nutrients_per_100g[k] / 100.0;
        y = std::max(y, 0.001 * r);
        const double under = std::max(0.0, std::log2(r / y));
        const double over = std::max(0.0, std::log2(y / r));
        if (t.type != mealeng::ConstraintType::upper_bound) f += t.weight_under * under * under;
        f += t.weight_over * over * over;
    }
    return f;
}

inline bool feasible(const std::vector<double>& x, const std::vector<FoodRecord>& foods, MealType type) {
    const double target = mealeng::MealEnergyPlan{}.fraction(type) * 2000.0;
    const double bev_cap = type == MealType::breakfast ? 300.0 : 350.0;
    double grams = 0, kcal = 0, bev_kcal = 0, bev_g = 0, sugars = 0, fats = 0, cond = 0, snacks = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto& f = foods[i];
        if (x[i] < 1.0) return false;
        const double e = x[i] * f.nutrients_per_100g[0] / 100.0;
        grams += x[i];
        kcal += e;
        if (f.is_beverage) {
            bev_kcal += e;
            bev_g += x[i];
        } else if (x[i] > 300.0) {
            return false;
        }
        auto in = [&](const char* s) { return f.main_category == s || f.sub_category == s; };
        if (in("sugars")) sugars += x[i];
        else if (in("fats_oils")) fats += x[i];
        else if (in("condiments_sauces")) cond += x[i];
        else if (in("snacks_sweets")) snacks += x[i];
    }
    return grams <= 900.0 && bev_g <= bev_cap && bev_kcal <= 0.25 * kcal && sugars <= 12.0 && fats <= 20.0 &&
           cond <= 20.0 && snacks <= 60.0 && std::abs(kcal - target) <= 0.01 * target;
}

struct SearchResult {
    double best = std::numeric_limits<double>::infinity();
    std::size_t accepted = 0;
    std::size_t attempts = 0;
};

// Best objective over `samples` feasible random portionings: energy shares
// from a flat Dirichlet, beverages uniform up to their cap, energy scaled
// uniformly within the band.
inline SearchResult random_search(const std::vector<FoodRecord>& foods, const mealeng::RdiProfile& profile,
                                  MealType type, std::size_t samples, std::uint64_t seed,
                                  std::size_t max_attempts = 5'000'000) {
    mealeng::Rng rng(seed);
    const double target = mealeng::MealEnergyPlan{}.fraction(type) * 2000.0;
    const double bev_cap = type == MealType::breakfast ? 300.0 : 350.0;
    SearchResult r;
    std::vector<double> x(foods.size());
    while (r.accepted < samples && r.attempts < max_attempts) {
        ++r.attempts;
        double bev_kcal = 0.0;
        std::vector<double> share(foods.size(), 0.0);
        double share_sum = 0.0;
        for (std::size_t i = 0; i < foods.size(); ++i) {
            if (foods[i].is_beverage) {
                x[i] = rng.uniform(1.0, bev_cap);
                bev_kcal += x[i] * foods[i].nutrients_per_100g[0] / 100.0;
            } else {
                share[i] = -std::log(1.0 - rng.uniform());
                share_sum += share[i];
            }
        }
        const double kcal = target * rng.uniform(0.99, 1.01) - bev_kcal;
        if (kcal <= 0.0) continue;
        for (std::size_t i = 0; i < foods.size(); ++i) {
            if (!foods[i].is_beverage) x[i] = kcal * share[i] / share_sum / (foods[i].nutrients_per_100g[0] / 100.0);
        }
        if (!feasible(x, foods, type)) continue;
        ++r.accepted;
        r.best = std::min(r.best, objective(x, foods, profile, type));
    }
    return r;
}

}  // namespace oracle
