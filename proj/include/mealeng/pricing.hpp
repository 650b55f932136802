#pragma once
// Portion-based restaurant pricing with capped portion multipliers.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "mealeng/food.hpp"

namespace mealeng::pricing {

struct PortionEntry {
    double grams_per_portion = 100.0;
    double price = 0.0;
    std::optional<double> cap;  // falls back to the category cap
};

class PriceBook {
public:
    std::map<std::string, PortionEntry> portions;
    std::map<std::string, double> fallback_per_100g;
    // Keyed by sub or main category; "default" applies to the rest.
    std::map<std::string, double> category_caps = {{"soups", 1.0},        {"fruit_salad", 1.0},
                                                   {"sides", 2.0},        {"mixed_dishes", 1.5},
                                                   {"default", 3.0}};
    // Total portions charged per meal across every item of the category.
    std::map<std::string, double> cross_item = {{"soups", 1.0}, {"fruit_salad", 1.0}};
    // Optional price scalars by sub or main category (sub wins).
    std::map<std::string, double> category_multipliers;
    double overhead = 2.0;

    void validate() const;  // throws ValidationError

    // Cap for a food: its own entry, then sub category, main category, default.
    double cap_for(const FoodRecord& food) const;
    double multiplier_for(const FoodRecord& food) const;
};

PriceBook parse_price_book(std::string_view json_text, std::string_view source = "<memory>");
PriceBook load_price_book(const std::filesystem::path& path);

// min(w / g, cap).
double portion_multiplier(double grams, double grams_per_portion, double cap);

// Sum of capped portion costs, cross-item caps, uncapped fallback
// grams/100 x price, plus overhead. Throws PricingError naming the code of
// an item with neither a portion entry nor a fallback price.
double meal_cost(const Meal& meal, const FoodTable& foods, const PriceBook& book);

struct CostDelta {
    double saving = 0.0;    // S, percent
    double increase = 0.0;  // CI, percent
};

// Relative to the real meal's cost; throws PricingError when it is 0.
CostDelta cost_delta(double cost_real, double cost_sub);
CostDelta cost_delta(const Meal& real, const Meal& substitute, const FoodTable& foods, const PriceBook& book);

}  // namespace mealeng::pricing
