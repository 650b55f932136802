#include "mealeng/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "mealeng/errors.hpp"

namespace mealeng::io {

namespace fs = std::filesystem;

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw ValidationError("missing CSV column '" + std::string(name) + "'");
}

bool CsvTable::has_column(std::string_view name) const {
    for (const auto& h : header) {
        if (h == name) return true;
    }
    return false;
}

CsvTable parse_csv(std::string_view text, std::string_view source) {
    CsvTable table;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool row_has_content = false;
    std::size_t line = 1;

    auto end_row = [&] {
        row.push_back(std::move(field));
        field.clear();
        if (row_has_content || row.size() > 1 || !row.front().empty()) {
            if (table.header.empty()) {
                table.header = std::move(row);
            } else {
                if (row.size() != table.header.size()) {
                    throw ValidationError(std::string(source) + ": line " + std::to_string(line) +
                                          " has " + std::to_string(row.size()) +
                                          " fields, expected " +
                                          std::to_string(table.header.size()));
                }
                table.rows.push_back(std::move(row));
            }
        }
        row.clear();
        row_has_content = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                row_has_content = true;
                break;
            case ',':
                row.push_back(std::move(field));
                field.clear();
                row_has_content = true;
                break;
            case '\r':
                break;
            case '\n':
                end_row();
                ++line;
                break;
            default:
                field.push_back(c);
                row_has_content = true;
        }
    }
    if (in_quotes) throw ValidationError(std::string(source) + ": unterminated quoted field");
    if (!field.empty() || !row.empty()) end_row();
    if (table.header.empty()) throw ValidationError(std::string(source) + ": empty CSV");
    return table;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CsvTable read_csv(const fs::path& path) { return parse_csv(read_file(path), path.string()); }

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string csv_row(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        out += csv_escape(fields[i]);
    }
    out.push_back('\n');
    return out;
}

std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_file_atomic(const fs::path& path, std::string_view content) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " -> " + path.string());
}

bool parse_bool(std::string_view s) {
    if (s == "1" || s == "true" || s == "TRUE" || s == "True") return true;
    if (s == "0" || s == "false" || s == "FALSE" || s == "False" || s.empty()) return false;
    throw ValidationError("invalid boolean '" + std::string(s) + "'");
}

double parse_double(std::string_view s, std::string_view context) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ValidationError(std::string(context) + ": invalid number '" + std::string(s) + "'");
    }
    return v;
}

long long parse_int(std::string_view s, std::string_view context) {
    long long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ValidationError(std::string(context) + ": invalid integer '" + std::string(s) + "'");
    }
    return v;
}

std::vector<FoodRecord> load_foods(const fs::path& path) {
    const CsvTable t = read_csv(path);
    const auto c_code = t.column("food_code");
    const auto c_name = t.column("name");
    const auto c_main = t.column("main_category");
    const auto c_sub = t.column("sub_category");
    const auto c_bev = t.column("is_beverage");
    const auto c_solid = t.column("is_solid");
    std::array<std::size_t, kNutrientCount> c_nut{};
    for (std::size_t k = 0; k < kNutrientCount; ++k) {
        c_nut[k] = t.column(nutrient_table()[k].csv_column);
    }
    std::vector<FoodRecord> foods;
    foods.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string ctx = path.filename().string() + " row " + std::to_string(r + 1);
        FoodRecord f;
        f.food_code = row[c_code];
        f.name = row[c_name];
        f.main_category = row[c_main];
        f.sub_category = row[c_sub];
        f.is_beverage = parse_bool(row[c_bev]);
        f.is_solid = parse_bool(row[c_solid]);
        for (std::size_t k = 0; k < kNutrientCount; ++k) {
            f.nutrients_per_100g[k] = parse_double(row[c_nut[k]], ctx);
        }
        validate_food(f);
        foods.push_back(std::move(f));
    }
    return foods;
}

std::string foods_to_csv(const std::vector<FoodRecord>& foods) {
    std::vector<std::string> header = {"food_code", "name",        "main_category",
                                       "sub_category", "is_beverage", "is_solid"};
    for (const auto& n : nutrient_table()) header.emplace_back(n.csv_column);
    std::string out = csv_row(header);
    for (const auto& f : foods) {
        std::vector<std::string> row = {f.food_code,    f.name,
                                        f.main_category, f.sub_category,
                                        f.is_beverage ? "1" : "0", f.is_solid ? "1" : "0"};
        for (double v : f.nutrients_per_100g) row.push_back(fmt_double(v));
        out += csv_row(row);
    }
    return out;
}

std::vector<Meal> load_meals(const fs::path& path) {
    const CsvTable t = read_csv(path);
    const auto c_id = t.column("meal_id");
    const auto c_type = t.column("meal_type");
    const auto c_code = t.column("food_code");
    const auto c_grams = t.column("grams");
    std::vector<Meal> meals;
    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string ctx = path.filename().string() + " row " + std::to_string(r + 1);
        const MealType type = meal_type_from_string(row[c_type]);
        auto [it, inserted] = pos.try_emplace(row[c_id], meals.size());
        if (inserted) {
            Meal m;
            m.meal_id = row[c_id];
            m.meal_type = type;
            meals.push_back(std::move(m));
        } else if (meals[it->second].meal_type != type) {
            throw ValidationError(ctx + ": meal " + row[c_id] + " has conflicting meal types");
        }
        meals[it->second].items.push_back({row[c_code], parse_double(row[c_grams], ctx)});
    }
    for (const auto& m : meals) validate_meal(m);
    return meals;
}

std::string meals_to_csv(const std::vector<Meal>& meals) {
    std::string out = csv_row({"meal_id", "meal_type", "food_code", "grams"});
    for (const auto& m : meals) {
        for (const auto& it : m.items) {
            out += csv_row({m.meal_id, std::string(to_string(m.meal_type)), it.food_code,
                            fmt_double(it.grams)});
        }
    }
    return out;
}

std::map<std::string, int> load_labels(const fs::path& path) {
    const CsvTable t = read_csv(path);
    const auto c_id = t.column("meal_id");
    const auto c_cluster = t.column("cluster_id");
    std::map<std::string, int> labels;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string ctx = path.filename().string() + " row " + std::to_string(r + 1);
        labels[t.rows[r][c_id]] = static_cast<int>(parse_int(t.rows[r][c_cluster], ctx));
    }
    return labels;
}

void attach_labels(std::vector<Meal>& meals, const std::map<std::string, int>& labels) {
    for (auto& m : meals) {
        auto it = labels.find(m.meal_id);
        if (it != labels.end()) m.cluster_label = it->second;
    }
}

std::string labels_to_csv(const std::vector<Meal>& meals) {
    std::string out = csv_row({"meal_id", "cluster_id"});
    for (const auto& m : meals) {
        if (m.cluster_label) out += csv_row({m.meal_id, std::to_string(*m.cluster_label)});
    }
    return out;
}

}  // namespace mealeng::io
