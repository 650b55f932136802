#pragma once
// 84-dimensional hybrid meal features and within-meal-type standardization.
//
// Layout: 5 core nutrient totals, 16 derived nutritional features, 24
// main-category gram amounts, 29 subcategory gram amounts, 5 composition
// features, 5 log-transformed totals.
//
// Two derived features have no published definition and use documented
// proxies: meal_balance_score is the share of protein/fat/carbohydrate energy
// ratios inside their acceptable ranges, and nutritional_balance is the
// Shannon evenness (entropy / ln 3) of the three macronutrient energy shares.

#include <array>
#include <span>
#include <string>
#include <vector>

#include "mealeng/food.hpp"
#include "mealeng/matrix.hpp"

namespace mealeng::features {

inline constexpr std::size_t kFeatureCount = 84;

const std::array<std::string, kFeatureCount>& feature_names();
std::size_t feature_index(std::string_view name);  // throws LookupError

using FeatureVector = std::array<double, kFeatureCount>;

// Quartile cut points per meal type for the protein/carbohydrate/fat/energy
// "level" features.
struct LevelBins {
    // [meal type][protein, carbohydrate, fat, energy][q25, q50, q75]
    std::array<std::array<std::array<double, 3>, 4>, 3> cuts{};
    std::array<bool, 3> fitted{};
};

LevelBins fit_level_bins(const std::vector<Meal>& meals, const FoodTable& foods);

// Bin index 0..3 for a value given ascending cut points.
int level_bin(double value, const std::array<double, 3>& cuts);

// Level features are 0 when bins are absent or not fitted for the meal type.
FeatureVector extract_features(const Meal& meal, const FoodTable& foods,
                               const LevelBins* bins = nullptr);

// Fits level bins on `meals` and extracts one row per meal.
Matrix feature_matrix(const std::vector<Meal>& meals, const FoodTable& foods);

std::string features_to_csv(const std::vector<Meal>& meals, const Matrix& features);

struct DroppedFeature {
    std::string name;
    std::string reason;  // "near_zero_variance" or "mostly_zero"
};

// One meal type's standardized block.
struct StandardizedBlock {
    MealType meal_type = MealType::breakfast;
    std::vector<std::size_t> rows;         // indices into the input matrix
    std::vector<std::size_t> kept;         // retained feature indices
    std::vector<std::string> kept_names;
    Matrix raw;                            // rows x kept, unstandardized
    Matrix z;                              // rows x kept, z-scored (population sd)
    std::vector<DroppedFeature> dropped;
};

struct StandardizeConfig {
    double min_variance = 1e-12;
    double max_zero_fraction = 0.95;
};

// Meal types with fewer than two rows are skipped.
std::vector<StandardizedBlock> standardize(const Matrix& features, std::span<const MealType> types,
                                           const StandardizeConfig& cfg = {});

}  // namespace mealeng::features
