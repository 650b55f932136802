#include "mealeng/pricing.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <json.hpp>

#include "mealeng/errors.hpp"
#include "mealeng/io.hpp"

namespace mealeng::pricing {

namespace {

const double* lookup_category(const std::map<std::string, double>& m, const FoodRecord& f) {
    if (auto it = m.find(f.sub_category); it != m.end()) return &it->second;
    if (auto it = m.find(f.main_category); it != m.end()) return &it->second;
    return nullptr;
}

std::map<std::string, double> read_scalar_map(const nlohmann::json& j, const std::string& key) {
    std::map<std::string, double> out;
    for (const auto& [k, v] : j.at(key).items()) out[k] = v.get<double>();
    return out;
}

}  // namespace

void PriceBook::validate() const {
    for (const auto& [code, e] : portions) {
        if (!(e.grams_per_portion > 0.0)) throw ValidationError("price book: " + code + ": grams_per_portion must be > 0");
        if (!(e.price >= 0.0)) throw ValidationError("price book: " + code + ": price must be >= 0");
        if (e.cap && !(*e.cap > 0.0)) throw ValidationError("price book: " + code + ": cap must be > 0");
    }
    for (const auto& [code, p] : fallback_per_100g) {
        if (!(p >= 0.0)) throw ValidationError("price book: " + code + ": fallback price must be >= 0");
    }
    for (const auto* m : {&category_caps, &cross_item, &category_multipliers}) {
        for (const auto& [k, v] : *m) {
            if (!(v > 0.0)) throw ValidationError("price book: " + k + ": caps and multipliers must be > 0");
        }
    }
    if (!category_caps.count("default")) throw ValidationError("price book: category_caps needs a default");
    if (!(overhead >= 0.0)) throw ValidationError("price book: overhead must be >= 0");
}

double PriceBook::cap_for(const FoodRecord& food) const {
    if (auto it = portions.find(food.food_code); it != portions.end() && it->second.cap) return *it->second.cap;
    if (const double* c = lookup_category(category_caps, food)) return *c;
    return category_caps.at("default");
}

double PriceBook::multiplier_for(const FoodRecord& food) const {
    const double* m = lookup_category(category_multipliers, food);
    return m ? *m : 1.0;
}

PriceBook parse_price_book(std::string_view json_text, std::string_view source) {
    const std::string src(source);
    PriceBook b;
    try {
        const auto j = nlohmann::json::parse(json_text);
        if (j.contains("portions")) {
            for (const auto& p : j.at("portions")) {
                PortionEntry e;
                e.grams_per_portion = p.at("grams_per_portion").get<double>();
                e.price = p.at("price").get<double>();
                if (p.contains("cap") && !p.at("cap").is_null()) e.cap = p.at("cap").get<double>();
                const auto code = p.at("food_code").get<std::string>();
                if (!b.portions.emplace(code, e).second) throw ValidationError(src + ": duplicate portion entry " + code);
            }
        }
        if (j.contains("fallback_per_100g")) {
            for (const auto& p : j.at("fallback_per_100g")) {
                const auto code = p.at("food_code").get<std::string>();
                if (!b.fallback_per_100g.emplace(code, p.at("price").get<double>()).second) {
                    throw ValidationError(src + ": duplicate fallback entry " + code);
                }
            }
        }
        if (j.contains("category_caps")) {
            b.category_caps = read_scalar_map(j, "category_caps");
            b.category_caps.emplace("default", 3.0);
        }
        if (j.contains("cross_item")) b.cross_item = read_scalar_map(j, "cross_item");
        if (j.contains("category_multipliers")) b.category_multipliers = read_scalar_map(j, "category_multipliers");
        if (j.contains("overhead")) b.overhead = j.at("overhead").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(src + ": " + e.what());
    }
    b.validate();
    return b;
}

PriceBook load_price_book(const std::filesystem::path& path) {
    return parse_price_book(io::read_file(path), path.string());
}

double portion_multiplier(double grams, double grams_per_portion, double cap) {
    return std::min(grams / grams_per_portion, cap);
}

double meal_cost(const Meal& meal, const FoodTable& foods, const PriceBook& book) {
    struct Charge {
        double portions;
        double unit_price;
    };
    std::map<std::string, std::vector<Charge>> grouped;
    double cost = book.overhead;
    for (const auto& it : meal.items) {
        const FoodRecord& f = foods.at(it.food_code);
        const double mult = book.multiplier_for(f);
        if (auto p = book.portions.find(it.food_code); p != book.portions.end()) {
            const double m = portion_multiplier(it.grams, p->second.grams_per_portion, book.cap_for(f));
            const double unit = p->second.price * mult;
            std::string group;
            if (book.cross_item.count(f.sub_category)) group = f.sub_category;
            else if (book.cross_item.count(f.main_category)) group = f.main_category;
            if (group.empty()) cost += m * unit;
            else grouped[group].push_back({m, unit});
        } else if (auto fb = book.fallback_per_100g.find(it.food_code); fb != book.fallback_per_100g.end()) {
            cost += it.grams / 100.0 * fb->second * mult;
        } else {
            throw PricingError("no price for food " + it.food_code);
        }
    }
    // Cross-item caps bound the portions charged across a group; the most
    // expensive portions are charged first.
    for (auto& [group, charges] : grouped) {
        std::sort(charges.begin(), charges.end(),
                  [](const Charge& a, const Charge& b) { return a.unit_price > b.unit_price; });
        double left = book.cross_item.at(group);
        for (const auto& c : charges) {
            const double take = std::min(left, c.portions);
            cost += take * c.unit_price;
            left -= take;
            if (left <= 0.0) break;
        }
    }
    return cost;
}

CostDelta cost_delta(double cost_real, double cost_sub) {
    if (!(cost_real > 0.0)) throw PricingError("cost_delta: real meal cost must be > 0");
    const double rel = (cost_real - cost_sub) / cost_real * 100.0;
    return {std::max(0.0, rel), std::max(0.0, -rel)};
}

CostDelta cost_delta(const Meal& real, const Meal& substitute, const FoodTable& foods, const PriceBook& book) {
    return cost_delta(meal_cost(real, foods, book), meal_cost(substitute, foods, book));
}

}  // namespace mealeng::pricing
