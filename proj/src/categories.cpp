#include "mealeng/categories.hpp"

#include <algorithm>

namespace mealeng::categories {

namespace {

template <std::size_t N>
std::optional<std::size_t> find_in(const std::array<std::string_view, N>& list, std::string_view s) {
    auto it = std::find(list.begin(), list.end(), s);
    if (it == list.end()) return std::nullopt;
    return static_cast<std::size_t>(it - list.begin());
}

bool either_is(const FoodRecord& f, std::string_view slug) {
    return f.main_category == slug || f.sub_category == slug;
}

}  // namespace

std::size_t main_feature_index(std::string_view main_category) {
    if (auto i = find_in(kMain, main_category)) return *i;
    return *find_in(kMain, "other");
}

std::optional<std::size_t> sub_feature_index(std::string_view sub_category) {
    return find_in(kSub, sub_category);
}

bool is_grain(const FoodRecord& f) {
    return f.main_category == "grains" || f.main_category == "cooked_grains";
}

bool is_vegetable(const FoodRecord& f) { return f.main_category == "vegetables"; }

bool is_fruit(const FoodRecord& f) { return f.main_category == "fruits"; }

bool is_dairy(const FoodRecord& f) {
    return f.main_category == "milk_dairy" || f.main_category == "milk" ||
           f.main_category == "flavored_milk" || f.main_category == "dairy_drinks";
}

bool is_mixed_dish(const FoodRecord& f) { return f.main_category == "mixed_dishes"; }

std::optional<CapGroup> cap_group(const FoodRecord& f) {
    if (either_is(f, "sugars")) return CapGroup::sugars;
    if (either_is(f, "fats_oils")) return CapGroup::fats_oils;
    if (either_is(f, "condiments_sauces")) return CapGroup::condiments_sauces;
    if (either_is(f, "snacks_sweets")) return CapGroup::snacks_sweets;
    return std::nullopt;
}

std::string_view to_string(CapGroup g) {
    switch (g) {
        case CapGroup::sugars: return "sugars";
        case CapGroup::fats_oils: return "fats_oils";
        case CapGroup::condiments_sauces: return "condiments_sauces";
        case CapGroup::snacks_sweets: return "snacks_sweets";
    }
    return "sugars";
}

}  // namespace mealeng::categories
