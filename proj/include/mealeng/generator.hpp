#pragma once
// Cluster-conditioned food-combination sampling.
//
// A PresenceModel carries one probability per food for a (meal type, cluster)
// pair. Models come either from fit_empirical_presence (within-cluster
// frequencies) or from an external probability export file.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mealeng/food.hpp"

namespace mealeng::generator {

struct PresenceModel {
    MealType meal_type = MealType::breakfast;
    int cluster_id = 0;
    std::vector<std::string> food_codes;
    std::vector<double> base_prob;        // within-cluster presence probability
    std::vector<double> background_prob;  // meal-type-wide presence probability
    std::vector<double> pair_prior;       // log-odds offset for this (meal type, cluster)
    std::vector<bool> allowed_mask;
    std::string source = "empirical";

    std::size_t size() const { return food_codes.size(); }

    // 0 for masked foods; otherwise sigmoid(logit(background) + pair_prior),
    // which is exactly background when the prior is 0.
    double effective(std::size_t i) const;

    void validate() const;  // throws ValidationError
};

struct CombinationConstraints {
    double prob_threshold = 0.02;
    std::size_t max_items = 12;
    std::array<std::size_t, 3> min_solids = {2, 3, 3};
    std::size_t max_beverages = 1;

    std::size_t min_solid(MealType t) const { return min_solids[static_cast<std::size_t>(t)]; }
    void validate() const;  // throws ConfigError
};

inline constexpr double kPairPriorClamp = 5.0;

// `meal_type_meals` are all meals of one meal type; the cluster's meals are
// those whose label equals cluster_id. Food codes follow the food table order.
// Throws ValidationError when the cluster has no meals.
PresenceModel fit_empirical_presence(const std::vector<Meal>& meal_type_meals, int cluster_id,
                                     const FoodTable& foods);

// One model per (meal type, cluster label) present in `meals`, ordered by
// meal type then cluster id. Unlabelled and noise meals are ignored.
std::vector<PresenceModel> fit_all_presence(const std::vector<Meal>& meals, const FoodTable& foods);

// Accepts one record, an array of records, or {"records": [...]}. Rows are
// 1-based positions in a record's aligned arrays.
std::vector<PresenceModel> parse_probability_export(std::string_view json_text, const FoodTable& foods,
                                                    std::string_view source = "<memory>");
std::vector<PresenceModel> load_probability_export(const std::filesystem::path& path,
                                                   const FoodTable& foods);

// Writes models in the export schema with effective probabilities, so that a
// reload samples identically.
std::string models_to_export_json(const std::vector<PresenceModel>& models);

// Independent Bernoulli draws over foods with effective probability at or
// above the threshold, then in order: trim to max_items by probability, keep
// the highest-probability beverage(s), top up solids greedily. Output follows
// model food order. Throws InfeasibleError ("infeasible cluster") when too few
// solid foods pass the threshold.
std::vector<std::string> sample_combination(const PresenceModel& model, const FoodTable& foods,
                                            const CombinationConstraints& constraints,
                                            std::uint64_t seed);

}  // namespace mealeng::generator
