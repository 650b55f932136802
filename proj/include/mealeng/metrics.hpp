#pragma once
// Meal quality metrics and generated-vs-real cohort comparison.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mealeng/food.hpp"
#include "mealeng/rdi.hpp"

namespace mealeng::metrics {

struct AmdrBounds {
    double lo = 0.0;  // percent of energy
    double hi = 0.0;
};

struct MetricConfig {
    // Daily upper limits, scaled by the meal fraction for per-meal use.
    std::vector<std::pair<Nutrient, double>> upper_limits = {
        {Nutrient::sodium, 2300.0}, {Nutrient::saturated_fat, 20.0}, {Nutrient::added_sugars, 50.0}};
    std::vector<Nutrient> micronutrients = {
        Nutrient::calcium,    Nutrient::iron,        Nutrient::zinc,    Nutrient::vitamin_a,
        Nutrient::vitamin_c,  Nutrient::vitamin_b6,  Nutrient::vitamin_b12, Nutrient::thiamin,
        Nutrient::riboflavin, Nutrient::niacin,      Nutrient::folate};
    // protein, fat, carbohydrate
    std::array<AmdrBounds, 3> amdr = {{{10.0, 35.0}, {20.0, 35.0}, {45.0, 65.0}}};
    double hill_q = 1.0;
};

// (1/K) sum I_k / L_k.
double mer(std::span<const double> intakes, std::span<const double> limits);

// Mean of min(1, I_n / RDI_n).
double mar(std::span<const double> intakes, std::span<const double> rdis);

// Share of (protein, fat, carbohydrate) energy percentages inside their
// bounds, inclusive.
double amdr_composite(const std::array<double, 3>& energy_pcts,
                      const std::array<AmdrBounds, 3>& bounds = MetricConfig{}.amdr);

// Hill number of order q; q = 1 is exp(Shannon entropy). Proportions within
// 1e-6 of summing to 1 are renormalized. Throws ValidationError when all are
// zero or the sum is off by more than 1e-6.
double hill_diversity(std::span<const double> proportions, double q = 1.0);

// kcal per gram; throws ValidationError for grams <= 0.
double energy_density(double kcal, double grams);

// Mean of |total_k / r_k - 1| * 100 over the included nutrients.
double rdi_deviation(std::span<const double> totals, std::span<const double> targets);

// Over the non-neutral nutrients of `profile`.
double rdi_deviation(const NutrientVector& totals, const NutrientVector& targets, const RdiProfile& profile);

struct MealMetrics {
    double mer = 0.0;
    double mar = 0.0;
    double amdr = 0.0;
    double hill = 0.0;
    double energy_density = 0.0;
    double rdi_deviation = 0.0;
    NutrientVector totals{};
};

// Metrics of one meal against meal-scaled limits and targets. Hill
// proportions are gram shares per main category; AMDR percentages use
// 4/9/4 kcal per gram of protein/fat/carbohydrate over the macro energy.
MealMetrics meal_metrics(const Meal& meal, const FoodTable& foods, const RdiProfile& profile,
                         const MetricConfig& cfg = {}, const MealEnergyPlan& plan = {});

// Names and directions of the metrics compared between cohorts.
enum class Direction { lower_is_better, higher_is_better };

struct MetricSpec {
    std::string name;
    Direction direction = Direction::lower_is_better;
};

// rdi_deviation, mer, mar, amdr, hill, energy_density, then one
// dev_<nutrient> per non-neutral nutrient.
std::vector<MetricSpec> default_metric_specs(const RdiProfile& profile);

// Values of default_metric_specs for one meal, in the same order.
std::vector<double> metric_values(const MealMetrics& m, const NutrientVector& targets, const RdiProfile& profile);

struct CohortValues {
    int cluster_id = 0;
    // [metric][meal]
    std::vector<std::vector<double>> generated;
    std::vector<std::vector<double>> real;
};

struct ComparisonRow {
    int cluster_id = 0;
    std::string metric;
    Direction direction = Direction::lower_is_better;
    std::size_t n_generated = 0;
    std::size_t n_real = 0;
    double mean_generated = 0.0;
    double mean_real = 0.0;
    double median_generated = 0.0;
    double median_real = 0.0;
    double diff = 0.0;  // mean generated - mean real
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double p_value = 1.0;
    double q_value = 1.0;
    double cohens_d = 0.0;
    bool improved = false;
    bool skipped = false;  // fewer than 2 meals in a cohort
};

struct CompareConfig {
    std::size_t resamples = 1000;
    double level = 0.95;
    double fdr_q = 0.05;
    std::uint64_t seed = 0;
};

// Per cluster x metric bootstrap of the mean difference (cohorts resampled
// independently). Improvement: the whole interval below 0 for
// lower-is-better metrics, above 0 for higher-is-better. BH over every
// non-skipped comparison. Each cluster draws from its own derived seed.
std::vector<ComparisonRow> compare_cohorts(const std::vector<CohortValues>& cohorts,
                                           const std::vector<MetricSpec>& specs, const CompareConfig& cfg);

// evaluation_report.csv (non-skipped rows) and evaluation_summary.csv (all).
std::string report_to_csv(const std::vector<ComparisonRow>& rows);
std::string summary_to_csv(const std::vector<ComparisonRow>& rows);

// 1 - median(generated) / median(real); 0 when the real median is 0.
double median_reduction(std::span<const double> generated, std::span<const double> real);

}  // namespace mealeng::metrics
