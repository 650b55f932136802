#include "mealeng/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mealeng/categories.hpp"
#include "mealeng/errors.hpp"
#include "mealeng/io.hpp"
#include "mealeng/stats.hpp"

namespace mealeng::features {

namespace {

constexpr std::size_t kCore = 0;
constexpr std::size_t kDerived = 5;
constexpr std::size_t kMainBase = 21;
constexpr std::size_t kSubBase = kMainBase + categories::kMainCount;  // 45
constexpr std::size_t kComposition = kSubBase + categories::kSubCount;  // 74
constexpr std::size_t kLog = kComposition + 5;  // 79

static_assert(kLog + 5 == kFeatureCount);

double shannon_hill(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (total <= 0.0) return 0.0;
    double h = 0.0;
    for (double w : weights) {
        if (w > 0.0) {
            const double p = w / total;
            h -= p * std::log(p);
        }
    }
    return std::exp(h);
}

double pair_balance(double a, double b) {
    if (a + b <= 0.0) return 0.0;
    return 1.0 - std::abs(a - b) / (a + b);
}

std::size_t type_index(MealType t) { return static_cast<std::size_t>(t); }

struct MacroTotals {
    double protein, carbohydrate, fat, energy;
};

MacroTotals macro_totals(const NutrientVector& n) {
    return {n[idx(Nutrient::protein)], n[idx(Nutrient::carbohydrate)],
            n[idx(Nutrient::total_fat)], n[idx(Nutrient::energy)]};
}

}  // namespace

const std::array<std::string, kFeatureCount>& feature_names() {
    static const std::array<std::string, kFeatureCount> names = [] {
        std::array<std::string, kFeatureCount> n;
        const char* fixed_head[] = {
            "protein_g", "carbohydrate_g", "fat_g", "fiber_g", "energy_kcal",
            "protein_ratio", "carbohydrate_ratio", "fat_ratio",
            "protein_level", "carbohydrate_level", "fat_level", "energy_level",
            "protein_carbohydrate_balance", "protein_fat_balance", "carbohydrate_fat_balance",
            "meal_balance_score", "nutritional_balance",
            "grain_ratio", "vegetable_ratio", "fruit_ratio", "dairy_ratio"};
        std::size_t i = 0;
        for (const char* s : fixed_head) n[i++] = s;
        for (auto s : categories::kMain) n[i++] = "main_" + std::string(s) + "_g";
        for (auto s : categories::kSub) n[i++] = "sub_" + std::string(s) + "_g";
        const char* tail[] = {"macronutrient_diversity", "food_category_diversity",
                              "ingredient_count", "portion_variability", "calorie_density",
                              "log_protein_g", "log_carbohydrate_g", "log_fat_g",
                              "log_energy_kcal", "log_fiber_g"};
        for (const char* s : tail) n[i++] = s;
        return n;
    }();
    return names;
}

std::size_t feature_index(std::string_view name) {
    const auto& n = feature_names();
    auto it = std::find(n.begin(), n.end(), name);
    if (it == n.end()) throw LookupError("unknown feature " + std::string(name));
    return static_cast<std::size_t>(it - n.begin());
}

int level_bin(double value, const std::array<double, 3>& cuts) {
    int bin = 0;
    for (double c : cuts) {
        if (value > c) ++bin;
    }
    return bin;
}

LevelBins fit_level_bins(const std::vector<Meal>& meals, const FoodTable& foods) {
    LevelBins bins;
    std::array<std::array<std::vector<double>, 4>, 3> values;
    for (const auto& m : meals) {
        const auto t = macro_totals(meal_nutrients(m, foods));
        auto& v = values[type_index(m.meal_type)];
        v[0].push_back(t.protein);
        v[1].push_back(t.carbohydrate);
        v[2].push_back(t.fat);
        v[3].push_back(t.energy);
    }
    for (std::size_t ti = 0; ti < 3; ++ti) {
        if (values[ti][0].empty()) continue;
        bins.fitted[ti] = true;
        for (std::size_t f = 0; f < 4; ++f) {
            auto& col = values[ti][f];
            std::sort(col.begin(), col.end());
            bins.cuts[ti][f] = {stats::quantile_sorted(col, 0.25), stats::quantile_sorted(col, 0.5),
                                stats::quantile_sorted(col, 0.75)};
        }
    }
    return bins;
}

FeatureVector extract_features(const Meal& meal, const FoodTable& foods, const LevelBins* bins) {
    FeatureVector f{};
    const NutrientVector n = meal_nutrients(meal, foods);
    const auto macro = macro_totals(n);
    const double fiber = n[idx(Nutrient::fiber)];

    f[kCore + 0] = macro.protein;
    f[kCore + 1] = macro.carbohydrate;
    f[kCore + 2] = macro.fat;
    f[kCore + 3] = fiber;
    f[kCore + 4] = macro.energy;

    const double p_kcal = 4.0 * macro.protein;
    const double c_kcal = 4.0 * macro.carbohydrate;
    const double fat_kcal = 9.0 * macro.fat;
    const double macro_kcal = p_kcal + c_kcal + fat_kcal;
    const double pr = macro_kcal > 0.0 ? p_kcal / macro_kcal : 0.0;
    const double cr = macro_kcal > 0.0 ? c_kcal / macro_kcal : 0.0;
    const double fr = macro_kcal > 0.0 ? fat_kcal / macro_kcal : 0.0;
    f[kDerived + 0] = pr;
    f[kDerived + 1] = cr;
    f[kDerived + 2] = fr;

    if (bins != nullptr && bins->fitted[type_index(meal.meal_type)]) {
        const auto& cuts = bins->cuts[type_index(meal.meal_type)];
        f[kDerived + 3] = level_bin(macro.protein, cuts[0]);
        f[kDerived + 4] = level_bin(macro.carbohydrate, cuts[1]);
        f[kDerived + 5] = level_bin(macro.fat, cuts[2]);
        f[kDerived + 6] = level_bin(macro.energy, cuts[3]);
    }

    f[kDerived + 7] = pair_balance(pr, cr);
    f[kDerived + 8] = pair_balance(pr, fr);
    f[kDerived + 9] = pair_balance(cr, fr);
    if (macro_kcal > 0.0) {
        const double in_range = (pr >= 0.10 && pr <= 0.35 ? 1.0 : 0.0) +
                                (fr >= 0.20 && fr <= 0.35 ? 1.0 : 0.0) +
                                (cr >= 0.45 && cr <= 0.65 ? 1.0 : 0.0);
        f[kDerived + 10] = in_range / 3.0;
        const std::array<double, 3> shares = {pr, cr, fr};
        f[kDerived + 11] = std::log(shannon_hill(shares)) / std::log(3.0);
    }

    const double grams = meal.total_grams();
    std::map<std::string, double> by_main;
    double grain = 0, veg = 0, fruit = 0, dairy = 0;
    for (const auto& it : meal.items) {
        const FoodRecord& food = foods.at(it.food_code);
        f[kMainBase + categories::main_feature_index(food.main_category)] += it.grams;
        if (auto s = categories::sub_feature_index(food.sub_category)) f[kSubBase + *s] += it.grams;
        by_main[food.main_category] += it.grams;
        if (categories::is_grain(food)) grain += it.grams;
        if (categories::is_vegetable(food)) veg += it.grams;
        if (categories::is_fruit(food)) fruit += it.grams;
        if (categories::is_dairy(food)) dairy += it.grams;
    }
    if (grams > 0.0) {
        f[kDerived + 12] = grain / grams;
        f[kDerived + 13] = veg / grams;
        f[kDerived + 14] = fruit / grams;
        f[kDerived + 15] = dairy / grams;
    }

    const std::array<double, 3> macro_shares = {p_kcal, c_kcal, fat_kcal};
    f[kComposition + 0] = shannon_hill(macro_shares);
    std::vector<double> main_grams;
    for (const auto& [_, g] : by_main) main_grams.push_back(g);
    f[kComposition + 1] = shannon_hill(main_grams);
    f[kComposition + 2] = static_cast<double>(meal.items.size());
    if (!meal.items.empty() && grams > 0.0) {
        const double mu = grams / static_cast<double>(meal.items.size());
        double ss = 0.0;
        for (const auto& it : meal.items) ss += (it.grams - mu) * (it.grams - mu);
        f[kComposition + 3] = std::sqrt(ss / static_cast<double>(meal.items.size())) / mu;
        f[kComposition + 4] = macro.energy / grams;
    }

    f[kLog + 0] = std::log1p(macro.protein);
    f[kLog + 1] = std::log1p(macro.carbohydrate);
    f[kLog + 2] = std::log1p(macro.fat);
    f[kLog + 3] = std::log1p(macro.energy);
    f[kLog + 4] = std::log1p(fiber);
    return f;
}

Matrix feature_matrix(const std::vector<Meal>& meals, const FoodTable& foods) {
    const LevelBins bins = fit_level_bins(meals, foods);
    Matrix x(meals.size(), kFeatureCount);
    for (std::size_t r = 0; r < meals.size(); ++r) {
        const auto v = extract_features(meals[r], foods, &bins);
        std::copy(v.begin(), v.end(), x.row(r).begin());
    }
    return x;
}

std::string features_to_csv(const std::vector<Meal>& meals, const Matrix& features) {
    std::vector<std::string> header = {"meal_id"};
    for (const auto& n : feature_names()) header.push_back(n);
    std::string out = io::csv_row(header);
    for (std::size_t r = 0; r < meals.size(); ++r) {
        std::vector<std::string> row = {meals[r].meal_id};
        for (double v : features.row(r)) row.push_back(io::fmt_double(v));
        out += io::csv_row(row);
    }
    return out;
}

std::vector<StandardizedBlock> standardize(const Matrix& features, std::span<const MealType> types,
                                           const StandardizeConfig& cfg) {
    if (types.size() != features.rows()) {
        throw ValidationError("standardize: meal type partition does not match feature rows");
    }
    std::vector<StandardizedBlock> blocks;
    const auto& names = feature_names();
    for (MealType t : kMealTypes) {
        StandardizedBlock b;
        b.meal_type = t;
        for (std::size_t r = 0; r < types.size(); ++r) {
            if (types[r] == t) b.rows.push_back(r);
        }
        if (b.rows.size() < 2) continue;
        const double n = static_cast<double>(b.rows.size());
        std::vector<double> means, sds;
        for (std::size_t c = 0; c < features.cols(); ++c) {
            double sum = 0.0, zeros = 0.0;
            for (auto r : b.rows) {
                sum += features(r, c);
                if (features(r, c) == 0.0) zeros += 1.0;
            }
            const double mu = sum / n;
            double ss = 0.0;
            for (auto r : b.rows) ss += (features(r, c) - mu) * (features(r, c) - mu);
            const double var = ss / n;
            const std::string name = c < names.size() ? names[c] : "f" + std::to_string(c);
            if (var < cfg.min_variance) {
                b.dropped.push_back({name, "near_zero_variance"});
            } else if (zeros / n > cfg.max_zero_fraction) {
                b.dropped.push_back({name, "mostly_zero"});
            } else {
                b.kept.push_back(c);
                b.kept_names.push_back(name);
                means.push_back(mu);
                sds.push_back(std::sqrt(var));
            }
        }
        b.raw = Matrix(b.rows.size(), b.kept.size());
        b.z = Matrix(b.rows.size(), b.kept.size());
        for (std::size_t i = 0; i < b.rows.size(); ++i) {
            for (std::size_t j = 0; j < b.kept.size(); ++j) {
                const double v = features(b.rows[i], b.kept[j]);
                b.raw(i, j) = v;
                b.z(i, j) = (v - means[j]) / sds[j];
            }
        }
        blocks.push_back(std::move(b));
    }
    return blocks;
}

}  // namespace mealeng::features
