#include "mealeng/metrics.hpp"

#include <cmath>
#include <map>

#include "mealeng/errors.hpp"
#include "mealeng/io.hpp"
#include "mealeng/random.hpp"
#include "mealeng/stats.hpp"

namespace mealeng::metrics {

double mer(std::span<const double> intakes, std::span<const double> limits) {
    if (intakes.size() != limits.size() || limits.empty()) throw ValidationError("mer: size mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < limits.size(); ++k) {
        if (!(limits[k] > 0.0)) throw ValidationError("mer: limits must be > 0");
        s += intakes[k] / limits[k];
    }
    return s / static_cast<double>(limits.size());
}

double mar(std::span<const double> intakes, std::span<const double> rdis) {
    if (intakes.size() != rdis.size() || rdis.empty()) throw ValidationError("mar: size mismatch");
    double s = 0.0;
    for (std::size_t n = 0; n < rdis.size(); ++n) {
        if (!(rdis[n] > 0.0)) throw ValidationError("mar: RDIs must be > 0");
        s += std::min(1.0, intakes[n] / rdis[n]);
    }
    return s / static_cast<double>(rdis.size());
}

double amdr_composite(const std::array<double, 3>& energy_pcts, const std::array<AmdrBounds, 3>& bounds) {
    int inside = 0;
    for (std::size_t m = 0; m < 3; ++m) {
        if (energy_pcts[m] >= bounds[m].lo && energy_pcts[m] <= bounds[m].hi) ++inside;
    }
    return inside / 3.0;
}

double hill_diversity(std::span<const double> proportions, double q) {
    double total = 0.0;
    for (double p : proportions) {
        if (!(p >= 0.0)) throw ValidationError("hill_diversity: proportions must be >= 0");
        total += p;
    }
    if (total <= 0.0) throw ValidationError("hill_diversity: all proportions are zero");
    if (std::abs(total - 1.0) > 1e-6) throw ValidationError("hill_diversity: proportions do not sum to 1");
    if (std::abs(q - 1.0) < 1e-12) {
        double h = 0.0;
        for (double p : proportions) {
            if (p > 0.0) h -= (p / total) * std::log(p / total);
        }
        return std::exp(h);
    }
    double s = 0.0;
    for (double p : proportions) {
        if (p > 0.0) s += std::pow(p / total, q);
    }
    return std::pow(s, 1.0 / (1.0 - q));
}

double energy_density(double kcal, double grams) {
    if (!(grams > 0.0)) throw ValidationError("energy_density: grams must be > 0");
    return kcal / grams;
}

double rdi_deviation(std::span<const double> totals, std::span<const double> targets) {
    if (totals.size() != targets.size() || targets.empty()) throw ValidationError("rdi_deviation: size mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < targets.size(); ++k) {
        if (!(targets[k] > 0.0)) throw ValidationError("rdi_deviation: targets must be > 0");
        s += std::abs(totals[k] / targets[k] - 1.0) * 100.0;
    }
    return s / static_cast<double>(targets.size());
}

double rdi_deviation(const NutrientVector& totals, const NutrientVector& targets, const RdiProfile& profile) {
    std::vector<double> t, r;
    for (std::size_t k = 0; k < kNutrientCount; ++k) {
        if (profile.nutrients[k].type == ConstraintType::neutral) continue;
        t.push_back(totals[k]);
        r.push_back(targets[k]);
    }
    return rdi_deviation(t, r);
}

MealMetrics meal_metrics(const Meal& meal, const FoodTable& foods, const RdiProfile& profile,
                         const MetricConfig& cfg, const MealEnergyPlan& plan) {
    MealMetrics m;
    m.totals = meal_nutrients(meal, foods);
    const double frac = plan.fraction(meal.meal_type);

    std::vector<double> in, lim;
    for (const auto& [n, limit] : cfg.upper_limits) {
        in.push_back(m.totals[idx(n)]);
        lim.push_back(limit * frac);
    }
    m.mer = mer(in, lim);

    in.clear();
    std::vector<double> rdi;
    for (Nutrient n : cfg.micronutrients) {
        in.push_back(m.totals[idx(n)]);
        rdi.push_back(profile[n].daily_rdi * frac);
    }
    m.mar = mar(in, rdi);

    const double p_kcal = 4.0 * m.totals[idx(Nutrient::protein)];
    const double f_kcal = 9.0 * m.totals[idx(Nutrient::total_fat)];
    const double c_kcal = 4.0 * m.totals[idx(Nutrient::carbohydrate)];
    const double macro = p_kcal + f_kcal + c_kcal;
    std::array<double, 3> pct{};
    if (macro > 0.0) pct = {100.0 * p_kcal / macro, 100.0 * f_kcal / macro, 100.0 * c_kcal / macro};
    m.amdr = amdr_composite(pct, cfg.amdr);

    std::map<std::string, double> by_main;
    for (const auto& it : meal.items) by_main[foods.at(it.food_code).main_category] += it.grams;
    const double grams = meal.total_grams();
    std::vector<double> props;
    for (const auto& [_, g] : by_main) props.push_back(g / grams);
    m.hill = grams > 0.0 ? hill_diversity(props, cfg.hill_q) : 0.0;
    m.energy_density = energy_density(m.totals[idx(Nutrient::energy)], grams);
    m.rdi_deviation = rdi_deviation(m.totals, meal_targets(profile, meal.meal_type, plan), profile);
    return m;
}

std::vector<MetricSpec> default_metric_specs(const RdiProfile& profile) {
    using D = Direction;
    std::vector<MetricSpec> s = {{"rdi_deviation", D::lower_is_better}, {"mer", D::lower_is_better},
                                 {"mar", D::higher_is_better},          {"amdr", D::higher_is_better},
                                 {"hill", D::higher_is_better},         {"energy_density", D::lower_is_better}};
    for (std::size_t k = 0; k < kNutrientCount; ++k) {
        if (profile.nutrients[k].type == ConstraintType::neutral) continue;
        s.push_back({"dev_" + std::string(nutrient_table()[k].name), D::lower_is_better});
    }
    return s;
}

std::vector<double> metric_values(const MealMetrics& m, const NutrientVector& targets, const RdiProfile& profile) {
    std::vector<double> v = {m.rdi_deviation, m.mer, m.mar, m.amdr, m.hill, m.energy_density};
    for (std::size_t k = 0; k < kNutrientCount; ++k) {
        if (profile.nutrients[k].type == ConstraintType::neutral) continue;
        v.push_back(std::abs(m.totals[k] / targets[k] - 1.0) * 100.0);
    }
    return v;
}

std::vector<ComparisonRow> compare_cohorts(const std::vector<CohortValues>& cohorts,
                                           const std::vector<MetricSpec>& specs, const CompareConfig& cfg) {
    std::vector<ComparisonRow> rows;
    const auto mean_fn = [](std::span<const double> x) { return stats::mean(x); };
    for (const auto& c : cohorts) {
        if (c.generated.size() != specs.size() || c.real.size() != specs.size()) {
            throw ValidationError("compare_cohorts: cohort metrics do not match the metric list");
        }
        for (std::size_t j = 0; j < specs.size(); ++j) {
            ComparisonRow r;
            r.cluster_id = c.cluster_id;
            r.metric = specs[j].name;
            r.direction = specs[j].direction;
            const auto& g = c.generated[j];
            const auto& e = c.real[j];
            r.n_generated = g.size();
            r.n_real = e.size();
            if (g.size() < 2 || e.size() < 2) {
                r.skipped = true;
                rows.push_back(std::move(r));
                continue;
            }
            r.mean_generated = stats::mean(g);
            r.mean_real = stats::mean(e);
            r.median_generated = stats::median(g);
            r.median_real = stats::median(e);
            const std::uint64_t seed =
                derive_seed(cfg.seed, "compare:" + std::to_string(c.cluster_id) + ":" + specs[j].name);
            const auto b = stats::bootstrap_difference(g, e, mean_fn, cfg.resamples, cfg.level, seed);
            r.diff = b.observed;
            r.ci_lo = b.ci.lo;
            r.ci_hi = b.ci.hi;
            r.p_value = b.p_two_sided;
            r.cohens_d = stats::cohens_d(g, e);
            r.improved = specs[j].direction == Direction::lower_is_better ? r.ci_hi < 0.0 : r.ci_lo > 0.0;
            rows.push_back(std::move(r));
        }
    }
    std::vector<double> p;
    for (const auto& r : rows) {
        if (!r.skipped) p.push_back(r.p_value);
    }
    if (!p.empty()) {
        const auto fdr = stats::bh_fdr(p, cfg.fdr_q);
        std::size_t k = 0;
        for (auto& r : rows) {
            if (!r.skipped) r.q_value = fdr.q_values[k++];
        }
    }
    return rows;
}

std::string report_to_csv(const std::vector<ComparisonRow>& rows) {
    std::string out = io::csv_row({"cluster_id", "metric", "cohort_mean_gen", "cohort_mean_real", "diff", "ci_lo",
                                   "ci_hi", "q_value", "improved"});
    for (const auto& r : rows) {
        if (r.skipped) continue;
        out += io::csv_row({std::to_string(r.cluster_id), r.metric, io::fmt_double(r.mean_generated),
                            io::fmt_double(r.mean_real), io::fmt_double(r.diff), io::fmt_double(r.ci_lo),
                            io::fmt_double(r.ci_hi), io::fmt_double(r.q_value), r.improved ? "1" : "0"});
    }
    return out;
}

std::string summary_to_csv(const std::vector<ComparisonRow>& rows) {
    std::string out = io::csv_row({"cluster_id", "metric", "direction", "n_gen", "n_real", "median_gen",
                                   "median_real", "cohens_d", "p_value", "skipped"});
    for (const auto& r : rows) {
        out += io::csv_row({std::to_string(r.cluster_id), r.metric,
                            r.direction == Direction::lower_is_better ? "lower" : "higher",
                            std::to_string(r.n_generated), std::to_string(r.n_real),
                            io::fmt_double(r.median_generated), io::fmt_double(r.median_real),
                            io::fmt_double(r.cohens_d), io::fmt_double(r.p_value), r.skipped ? "1" : "0"});
    }
    return out;
}

double median_reduction(std::span<const double> generated, std::span<const double> real) {
    const double mr = stats::median(real);
    if (mr == 0.0) return 0.0;
    return 1.0 - stats::median(generated) / mr;
}

}  // namespace mealeng::metrics
