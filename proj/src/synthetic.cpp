#include "mealeng/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include <json.hpp>

#include "mealeng/errors.hpp"
#include "mealeng/io.hpp"

namespace mealeng::synthetic {

namespace {

// energy, protein, carb, fat, fiber, sodium, sat fat, added sugars, potassium,
// calcium, iron, vit D, zinc, vit A, vit C, B6, B12, thiamin, riboflavin,
// niacin, folate
using P = NutrientVector;

FoodTemplate T(std::string key, std::string main, std::string sub, bool bev, bool solid, std::size_t variants,
               P n, double portion_g, double price) {
    return {std::move(key), std::move(main), std::move(sub), bev, solid, variants, n, portion_g, price};
}

}  // namespace

const std::vector<FoodTemplate>& food_templates() {
    static const std::vector<FoodTemplate> t = {
        T("breads", "grains", "breads_rolls", false, true, 3,
          P{265, 9, 49, 3.2, 2.7, 490, 0.7, 5, 115, 150, 3.6, 0, 0.8, 0, 0, 0.1, 0, 0.5, 0.3, 4.8, 110}, 60, 1.2),
        T("cereals", "grains", "cereals", false, true, 2,
          P{370, 8, 82, 2.5, 7, 500, 0.5, 15, 300, 100, 20, 2, 6, 700, 10, 1.8, 5, 1.2, 1.4, 17, 600}, 50, 1.5),
        T("rice", "grains", "cooked_grains", false, true, 2,
          P{130, 2.7, 28, 0.3, 0.4, 1, 0.1, 0, 35, 10, 1.2, 0, 0.5, 0, 0, 0.1, 0, 0.16, 0.01, 1.5, 58}, 150, 1.5),
        T("poultry", "protein_foods", "poultry", false, true, 3,
          P{165, 31, 0, 3.6, 0, 74, 1, 0, 256, 15, 1, 0.1, 1, 6, 0, 0.6, 0.3, 0.07, 0.1, 13.7, 4}, 120, 4.5),
        T("meats", "protein_foods", "meats", false, true, 3,
          P{250, 26, 0, 15, 0, 72, 6, 0, 318, 18, 2.6, 0.1, 6.3, 0, 0, 0.4, 2.6, 0.05, 0.2, 5.4, 9}, 120, 5.5),
        T("eggs", "protein_foods", "eggs", false, true, 2,
          P{155, 13, 1.1, 11, 0, 124, 3.3, 0, 126, 50, 1.2, 2, 1.3, 160, 0, 0.1, 1.1, 0.07, 0.5, 0.1, 44}, 100, 2.0),
        T("seafood", "protein_foods", "seafood", false, true, 2,
          P{206, 22, 0, 12, 0, 61, 2.5, 0, 384, 15, 0.3, 13, 0.4, 58, 0, 0.6, 3, 0.2, 0.1, 8, 25}, 120, 7.0),
        T("beans", "protein_foods", "plant_proteins", false, true, 3,
          P{127, 8.7, 22.8, 0.5, 6.4, 1, 0.1, 0, 405, 35, 2.2, 0, 1, 0, 1.2, 0.1, 0, 0.24, 0.06, 0.6, 130}, 130, 1.8),
        T("vegetables", "vegetables", "vegetables", false, true, 8,
          P{35, 2, 7, 0.3, 2.5, 30, 0.05, 0, 300, 40, 0.8, 0, 0.4, 300, 30, 0.15, 0, 0.06, 0.08, 0.7, 60}, 100, 2.0),
        T("fruits", "fruits", "fruits", false, true, 6,
          P{60, 0.8, 15, 0.2, 2.4, 1, 0.03, 0, 200, 10, 0.2, 0, 0.1, 30, 30, 0.1, 0, 0.03, 0.03, 0.4, 15}, 120, 1.5),
        T("cheese", "milk_dairy", "cheese", false, true, 2,
          P{400, 25, 1.3, 33, 0, 620, 21, 0, 98, 720, 0.7, 0.6, 3.1, 265, 0, 0.07, 1.1, 0.03, 0.4, 0.06, 18}, 30, 1.5),
        T("yogurt", "milk_dairy", "yogurt", false, true, 2,
          P{61, 3.5, 4.7, 3.3, 0, 46, 2.1, 0, 155, 121, 0.05, 1.3, 0.6, 27, 0.5, 0.03, 0.4, 0.03, 0.14, 0.08, 7}, 170, 1.8),
        T("milk", "milk", "milk", true, true, 2,
          P{61, 3.2, 4.8, 3.3, 0, 43, 1.9, 0, 150, 113, 0.03, 1.3, 0.4, 46, 0, 0.04, 0.45, 0.05, 0.17, 0.09, 5}, 240, 1.0),
        T("pizza", "mixed_dishes", "pizza", false, true, 2,
          P{266, 11, 33, 10, 2.3, 600, 4.5, 3, 170, 190, 2.5, 0.2, 1.3, 70, 1, 0.1, 0.4, 0.4, 0.3, 4, 70}, 110, 3.5),
        T("sandwiches", "mixed_dishes", "sandwiches", false, true, 3,
          P{250, 13, 27, 10, 2, 650, 3.5, 3, 220, 90, 2.5, 0.2, 1.6, 30, 2, 0.2, 0.7, 0.3, 0.2, 4.5, 60}, 200, 6.0),
        T("soups", "mixed_dishes", "soups", false, true, 2,
          P{50, 3, 6, 1.5, 1, 350, 0.5, 0.5, 150, 15, 0.6, 0, 0.3, 100, 3, 0.05, 0.1, 0.03, 0.04, 0.8, 10}, 350, 4.0),
        T("meat_dishes", "mixed_dishes", "mixed_meat_dishes", false, true, 3,
          P{150, 10, 12, 7, 1.5, 400, 2.5, 1, 250, 30, 1.5, 0.1, 2, 80, 5, 0.2, 0.8, 0.1, 0.1, 3, 20}, 250, 7.0),
        T("bakery", "snacks_sweets", "sweet_bakery", false, true, 2,
          P{420, 5, 58, 19, 1.5, 350, 8, 30, 120, 40, 1.8, 0.1, 0.4, 50, 0, 0.05, 0.1, 0.2, 0.2, 2, 40}, 60, 2.0),
        T("candy", "snacks_sweets", "candy", false, true, 1,
          P{520, 6, 60, 29, 3, 60, 17, 48, 360, 100, 2, 0, 1.5, 20, 0, 0.03, 0.2, 0.1, 0.2, 0.5, 10}, 40, 1.5),
        T("crackers", "snacks_sweets", "crackers", false, true, 2,
          P{480, 8, 62, 22, 3, 800, 4, 3, 200, 30, 3, 0, 0.8, 0, 0, 0.1, 0, 0.4, 0.3, 4.5, 60}, 30, 1.0),
        T("fats", "fats_oils", "fats_oils", false, true, 2,
          P{720, 0.5, 0.5, 80, 0, 600, 20, 0, 20, 20, 0, 0, 0, 700, 0, 0, 0.1, 0, 0, 0, 3}, 14, 0.3),
        T("condiments", "condiments_sauces", "condiments_sauces", false, true, 2,
          P{100, 1, 20, 1, 0.5, 900, 0.2, 15, 250, 15, 0.4, 0, 0.2, 40, 5, 0.1, 0, 0.02, 0.05, 1, 10}, 20, 0.3),
        T("sugars", "sugars", "sugars", false, true, 2,
          P{270, 0.3, 70, 0, 0.5, 10, 0, 60, 50, 10, 0.3, 0, 0, 0, 3, 0, 0, 0, 0, 0, 10}, 20, 0.3),
        T("juice", "beverages", "juice", true, false, 2,
          P{45, 0.7, 10.4, 0.2, 0.2, 1, 0, 0, 200, 11, 0.2, 0, 0.05, 10, 50, 0.04, 0, 0.09, 0.03, 0.4, 30}, 240, 1.5),
        T("coffee_tea", "beverages", "coffee_tea", true, false, 1,
          P{2, 0.1, 0, 0, 0, 2, 0, 0, 49, 2, 0, 0, 0, 0, 0, 0, 0, 0, 0.08, 0.2, 2}, 240, 1.5),
        T("soda", "sweetened_beverages", "sweetened_beverages", true, false, 1,
          P{42, 0, 10.6, 0, 0, 4, 0, 10.6, 2, 2, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}, 350, 1.5),
        T("water", "water", "plain_water", true, false, 1, P{}, 500, 0.0),
    };
    return t;
}

FoodRecord random_food(const FoodTemplate& tpl, const std::string& code, Rng& rng, double spread) {
    FoodRecord f;
    f.food_code = code;
    f.name = tpl.key + " " + code;
    f.main_category = tpl.main_category;
    f.sub_category = tpl.sub_category;
    f.is_beverage = tpl.is_beverage;
    f.is_solid = tpl.is_solid;
    for (std::size_t k = 0; k < kNutrientCount; ++k) {
        f.nutrients_per_100g[k] = tpl.per_100g[k] * std::exp(spread * rng.normal());
    }
    auto& n = f.nutrients_per_100g;
    n[idx(Nutrient::saturated_fat)] = std::min(n[idx(Nutrient::saturated_fat)], n[idx(Nutrient::total_fat)]);
    n[idx(Nutrient::added_sugars)] = std::min(n[idx(Nutrient::added_sugars)], n[idx(Nutrient::carbohydrate)]);
    if (tpl.per_100g[idx(Nutrient::energy)] > 0.0) {
        n[idx(Nutrient::energy)] = 4.0 * n[idx(Nutrient::protein)] + 4.0 * n[idx(Nutrient::carbohydrate)] +
                                   9.0 * n[idx(Nutrient::total_fat)];
    }
    return f;
}

std::vector<FoodRecord> make_foods(std::uint64_t seed) {
    std::vector<FoodRecord> out;
    const auto& tpls = food_templates();
    for (std::size_t t = 0; t < tpls.size(); ++t) {
        for (std::size_t v = 0; v < tpls[t].variants; ++v) {
            Rng rng(derive_seed(seed, "food", t * 100 + v));
            const std::string code = std::to_string(51000000 + 1000 * (t + 1) + 10 * (v + 1));
            out.push_back(random_food(tpls[t], code, rng));
        }
    }
    return out;
}

namespace {

struct Slot {
    std::vector<std::string> keys;  // template keys; one is drawn uniformly
    double prob;
    double g_lo, g_hi;
};

struct Archetype {
    MealType type;
    int cluster;
    std::vector<Slot> slots;
};

const std::vector<Archetype>& archetypes() {
    using M = MealType;
    static const std::vector<Archetype> a = {
        {M::breakfast, 0,
         {{{"cereals"}, 0.95, 35, 80},
          {{"milk"}, 0.85, 150, 260},
          {{"fruits"}, 0.6, 80, 160},
          {{"yogurt"}, 0.25, 100, 180},
          {{"sugars"}, 0.25, 5, 15},
          {{"coffee_tea", "juice"}, 0.45, 200, 320}}},
        {M::breakfast, 1,
         {{{"eggs"}, 0.9, 50, 130},
          {{"breads"}, 0.85, 40, 100},
          {{"meats"}, 0.45, 30, 90},
          {{"fats"}, 0.55, 5, 15},
          {{"cheese"}, 0.3, 15, 40},
          {{"vegetables"}, 0.3, 30, 90},
          {{"coffee_tea", "juice"}, 0.65, 200, 330}}},
        {M::lunch, 2,
         {{{"sandwiches"}, 0.95, 150, 280},
          {{"crackers"}, 0.45, 20, 45},
          {{"fruits"}, 0.45, 80, 150},
          {{"vegetables"}, 0.35, 40, 120},
          {{"bakery"}, 0.25, 30, 70},
          {{"soda", "juice", "water"}, 0.7, 250, 350}}},
        {M::lunch, 3,
         {{{"pizza"}, 0.95, 120, 320},
          {{"bakery", "candy"}, 0.4, 30, 80},
          {{"vegetables"}, 0.3, 40, 100},
          {{"cheese"}, 0.2, 15, 40},
          {{"soda"}, 0.75, 300, 360}}},
        {M::lunch, 4,
         {{{"soups"}, 0.9, 220, 400},
          {{"breads", "crackers"}, 0.7, 25, 70},
          {{"vegetables"}, 0.75, 60, 150},
          {{"condiments"}, 0.4, 10, 25},
          {{"cheese"}, 0.3, 15, 40},
          {{"water", "coffee_tea"}, 0.5, 200, 350}}},
        {M::dinner, 5,
         {{{"poultry", "meats"}, 0.95, 100, 220},
          {{"rice"}, 0.8, 120, 260},
          {{"vegetables"}, 0.85, 70, 180},
          {{"fats"}, 0.45, 5, 20},
          {{"condiments"}, 0.45, 10, 30},
          {{"water", "soda"}, 0.45, 250, 350}}},
        {M::dinner, 6,
         {{{"meat_dishes"}, 0.95, 200, 400},
          {{"breads"}, 0.5, 40, 90},
          {{"vegetables"}, 0.5, 60, 140},
          {{"cheese"}, 0.3, 15, 40},
          {{"bakery"}, 0.4, 40, 90},
          {{"juice", "soda"}, 0.4, 250, 350}}},
        {M::dinner, 7,
         {{{"seafood", "beans"}, 0.95, 100, 220},
          {{"rice", "breads"}, 0.75, 80, 220},
          {{"vegetables"}, 0.9, 80, 200},
          {{"fats"}, 0.35, 5, 15},
          {{"fruits"}, 0.3, 80, 150},
          {{"water", "juice"}, 0.5, 200, 350}}},
    };
    return a;
}

}  // namespace

SyntheticCorpus make_corpus(const CorpusConfig& cfg) {
    SyntheticCorpus c;
    c.foods = make_foods(cfg.seed);
    std::map<std::string, std::vector<std::size_t>> by_key;
    {
        std::size_t i = 0;
        for (const auto& t : food_templates()) {
            for (std::size_t v = 0; v < t.variants; ++v) by_key[t.key].push_back(i++);
        }
    }
    // Some foods appear in meals under a retired code.
    std::map<std::string, std::string> retired;
    {
        Rng rng(derive_seed(cfg.seed, "codemap"));
        std::set<std::size_t> chosen;
        while (chosen.size() < std::min(cfg.renamed_codes, c.foods.size())) chosen.insert(rng.below(c.foods.size()));
        for (auto i : chosen) {
            const std::string old = std::to_string(std::stoll(c.foods[i].food_code) + 8000000);
            retired[c.foods[i].food_code] = old;
            c.codemap_rows.push_back(old + "," + c.foods[i].food_code + ",renumbered");
        }
    }

    std::size_t serial = 0;
    auto next_id = [&] {
        ++serial;
        std::string s = std::to_string(serial);
        return "M" + std::string(6 - std::min<std::size_t>(6, s.size()), '0') + s;
    };

    for (const auto& arch : archetypes()) {
        for (std::size_t m = 0; m < cfg.meals_per_cluster; ++m) {
            Rng rng(derive_seed(cfg.seed, "meal", static_cast<std::uint64_t>(arch.cluster) * 100000 + m));
            // Appetite: one multiplicative factor per meal on every portion.
            Rng size_rng(derive_seed(cfg.seed, "meal-size", static_cast<std::uint64_t>(arch.cluster) * 100000 + m));
            const double size = std::exp(cfg.meal_size_sd * size_rng.normal());
            Meal meal;
            meal.meal_id = next_id();
            meal.meal_type = arch.type;
            meal.cluster_label = arch.cluster;
            for (const auto& slot : arch.slots) {
                const bool take = rng.uniform() < slot.prob;
                const auto& key = slot.keys[rng.below(slot.keys.size())];
                const auto& pool = by_key.at(key);
                const auto& food = c.foods[pool[rng.below(pool.size())]];
                const double grams = std::max(1.0, std::round(rng.uniform(slot.g_lo, slot.g_hi) * size));
                if (!take) continue;
                if (meal.contains(food.food_code)) continue;
                meal.items.push_back({food.food_code, grams});
            }
            if (meal.items.size() < 2) {
                // Guarantee a two-item meal: take the first two slots.
                meal.items.clear();
                for (std::size_t s = 0; s < 2; ++s) {
                    const auto& slot = arch.slots[s];
                    const auto& food = c.foods[by_key.at(slot.keys.front()).front()];
                    meal.items.push_back({food.food_code, std::round((slot.g_lo + slot.g_hi) / 2.0)});
                }
            }
            c.meals.push_back(std::move(meal));
        }
    }
    for (std::size_t o = 0; o < cfg.outlier_meals; ++o) {
        Rng rng(derive_seed(cfg.seed, "outlier", o));
        Meal meal;
        meal.meal_id = next_id();
        meal.meal_type = kMealTypes[o % 3];
        meal.cluster_label = -1;
        std::set<std::size_t> picked;
        while (picked.size() < 7) picked.insert(rng.below(c.foods.size()));
        for (auto i : picked) meal.items.push_back({c.foods[i].food_code, std::round(rng.uniform(20, 120))});
        c.meals.push_back(std::move(meal));
    }
    // Rewrite a share of references to renamed foods with the retired code.
    {
        Rng rng(derive_seed(cfg.seed, "retired-refs"));
        for (auto& meal : c.meals) {
            for (auto& it : meal.items) {
                auto r = retired.find(it.food_code);
                if (r != retired.end() && rng.uniform() < 0.5) it.food_code = r->second;
            }
        }
    }

    // Price book: restaurant portions for most foods, per-100 g grocery
    // prices for condiments, sugars and water.
    nlohmann::ordered_json book;
    nlohmann::ordered_json portions = nlohmann::ordered_json::array();
    nlohmann::ordered_json fallback = nlohmann::ordered_json::array();
    {
        Rng rng(derive_seed(cfg.seed, "prices"));
        std::size_t i = 0;
        for (const auto& t : food_templates()) {
            for (std::size_t v = 0; v < t.variants; ++v, ++i) {
                const double factor = std::exp(0.2 * rng.normal());
                const double price = std::round(t.portion_price * factor * 100.0) / 100.0;
                const auto& code = c.foods[i].food_code;
                if (t.key == "condiments" || t.key == "sugars" || t.key == "water") {
                    const double per100 = std::round(price / t.portion_grams * 100.0 * 100.0) / 100.0;
                    fallback.push_back({{"food_code", code}, {"price", per100}});
                } else {
                    portions.push_back({{"food_code", code}, {"grams_per_portion", t.portion_grams}, {"price", price}});
                }
            }
        }
    }
    book["portions"] = portions;
    book["fallback_per_100g"] = fallback;
    book["category_caps"] = {{"soups", 1.0},     {"fruit_salad", 1.0}, {"sides", 2.0},
                             {"mixed_dishes", 1.5}, {"protein_foods", 1.5}, {"default", 3.0}};
    book["cross_item"] = {{"soups", 1.0}, {"fruit_salad", 1.0}};
    book["overhead"] = 2.0;
    c.pricebook_json = book.dump(1) + "\n";
    return c;
}

void write_corpus(const SyntheticCorpus& corpus, const std::string& dir) {
    const std::filesystem::path d(dir);
    io::write_file_atomic(d / "foods.csv", io::foods_to_csv(corpus.foods));
    io::write_file_atomic(d / "meals.csv", io::meals_to_csv(corpus.meals));
    io::write_file_atomic(d / "labels.csv", io::labels_to_csv(corpus.meals));
    std::string cm = "old_code,new_code,reason\n";
    for (const auto& r : corpus.codemap_rows) cm += r + "\n";
    io::write_file_atomic(d / "codemap.csv", cm);
    io::write_file_atomic(d / "pricebook.json", corpus.pricebook_json);
}

std::vector<FoodRecord> random_instance(std::size_t n_foods, std::size_t min_solids, std::uint64_t seed) {
    const auto& tpls = food_templates();
    if (n_foods < min_solids) throw ValidationError("random_instance: n_foods < min_solids");
    Rng rng(seed);
    std::vector<FoodRecord> out;
    std::set<std::size_t> used;
    bool have_bev = false;
    std::size_t solids = 0;
    while (out.size() < n_foods) {
        const std::size_t t = rng.below(tpls.size());
        const auto& tpl = tpls[t];
        if (tpl.key == "water") continue;
        const bool bev = tpl.is_beverage;
        if (bev && have_bev) continue;
        const std::size_t remaining = n_foods - out.size();
        if (bev && remaining <= min_solids - std::min(min_solids, solids)) continue;
        if (!used.insert(t).second) continue;
        const std::string code = "X" + std::to_string(out.size() + 1);
        out.push_back(random_food(tpl, code, rng, 0.25));
        if (bev) {
            have_bev = true;
        } else {
            ++solids;
        }
    }
    return out;
}

}  // namespace mealeng::synthetic
