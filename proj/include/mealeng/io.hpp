#pragma once
// Corpus file formats and artifact writing.
//
//   foods.csv   food_code,name,main_category,sub_category,is_beverage,is_solid,
//               <one column per nutrient, panel order, e.g. energy_kcal_100g>
//   meals.csv   meal_id,meal_type,food_code,grams   (long format)
//   codemap.csv old_code,new_code,reason
//   labels.csv  meal_id,cluster_id

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mealeng/food.hpp"

namespace mealeng::io {

// Minimal RFC-4180 reader: header row required, quoted fields allowed.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(std::string_view name) const;  // throws ValidationError
    bool has_column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(std::string_view text, std::string_view source = "<memory>");

std::string csv_escape(std::string_view field);
std::string csv_row(const std::vector<std::string>& fields);

// Shortest round-trip decimal for doubles; used for every numeric artifact
// column so that reruns are byte-identical.
std::string fmt_double(double v);

std::string read_file(const std::filesystem::path& path);

// Write to a temporary sibling and rename into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::vector<FoodRecord> load_foods(const std::filesystem::path& path);
std::string foods_to_csv(const std::vector<FoodRecord>& foods);

// Meals keep the order of first appearance in the file.
std::vector<Meal> load_meals(const std::filesystem::path& path);
std::string meals_to_csv(const std::vector<Meal>& meals);

std::map<std::string, int> load_labels(const std::filesystem::path& path);
void attach_labels(std::vector<Meal>& meals, const std::map<std::string, int>& labels);
std::string labels_to_csv(const std::vector<Meal>& meals);

bool parse_bool(std::string_view s);
double parse_double(std::string_view s, std::string_view context);
long long parse_int(std::string_view s, std::string_view context);

}  // namespace mealeng::io
