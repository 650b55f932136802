#include <algorithm>
#include <set>

#include "mealeng/corpus.hpp"
#include "mealeng/errors.hpp"
#include "mealeng/random.hpp"
#include "mealeng/stats.hpp"

namespace mealeng::corpus {

PresenceFilterResult bootstrap_presence_filter(const std::vector<Meal>& meals,
                                               std::size_t resamples, double level,
                                               std::uint64_t seed) {
    if (resamples < 100) throw ConfigError("presence filter needs >= 100 resamples");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must be in (0, 1)");
    PresenceFilterResult out;
    if (meals.empty()) return out;

    std::set<std::string> code_set;
    for (const auto& m : meals) {
        for (const auto& it : m.items) code_set.insert(it.food_code);
    }
    const std::vector<std::string> codes(code_set.begin(), code_set.end());
    std::vector<std::vector<std::size_t>> meal_foods(meals.size());
    for (std::size_t i = 0; i < meals.size(); ++i) {
        for (const auto& it : meals[i].items) {
            meal_foods[i].push_back(static_cast<std::size_t>(
                std::lower_bound(codes.begin(), codes.end(), it.food_code) - codes.begin()));
        }
    }

    const std::size_t n = meals.size();
    const std::size_t f = codes.size();
    // means[food][resample]
    std::vector<std::vector<double>> means(f, std::vector<double>(resamples, 0.0));
    std::vector<std::size_t> counts(f);
    Rng rng(seed);
    for (std::size_t b = 0; b < resamples; ++b) {
        std::fill(counts.begin(), counts.end(), std::size_t{0});
        for (std::size_t draw = 0; draw < n; ++draw) {
            for (auto food : meal_foods[rng.below(n)]) ++counts[food];
        }
        for (std::size_t j = 0; j < f; ++j) {
            means[j][b] = static_cast<double>(counts[j]) / static_cast<double>(n);
        }
    }

    const double tail = (1.0 - level) / 2.0;
    std::set<std::string> retained;
    for (std::size_t j = 0; j < f; ++j) {
        std::sort(means[j].begin(), means[j].end());
        const double lb = stats::quantile_sorted(means[j], tail);
        out.lower_bounds[codes[j]] = lb;
        if (lb > 0.0) {
            out.retained.push_back(codes[j]);
            retained.insert(codes[j]);
        } else {
            out.removed.push_back(codes[j]);
        }
    }
    for (const auto& m : meals) {
        Meal kept = m;
        std::erase_if(kept.items, [&](const MealItem& it) { return !retained.count(it.food_code); });
        if (!kept.items.empty()) out.meals.push_back(std::move(kept));
    }
    return out;
}

}  // namespace mealeng::corpus
