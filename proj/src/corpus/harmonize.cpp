#include <set>

#include "mealeng/corpus.hpp"
#include "mealeng/errors.hpp"
#include "mealeng/io.hpp"

namespace mealeng::corpus {

std::string_view to_string(CodeChange c) {
    switch (c) {
        case CodeChange::dropped: return "dropped";
        case CodeChange::expanded: return "expanded";
        case CodeChange::consolidated: return "consolidated";
        case CodeChange::renumbered: return "renumbered";
        case CodeChange::revised: return "revised";
    }
    return "dropped";
}

CodeChange code_change_from_string(std::string_view s) {
    if (s == "dropped") return CodeChange::dropped;
    if (s == "expanded") return CodeChange::expanded;
    if (s == "consolidated") return CodeChange::consolidated;
    if (s == "renumbered") return CodeChange::renumbered;
    if (s == "revised") return CodeChange::revised;
    throw ValidationError("unknown code-map reason '" + std::string(s) + "'");
}

void CodeMap::add(std::string old_code, std::string new_code, CodeChange reason) {
    CodeMapEntry e{std::move(new_code), reason};
    if (e.replaces() && e.new_code.empty()) {
        throw ConfigError("code map entry " + old_code + " (" + std::string(to_string(reason)) +
                          ") has no target code");
    }
    entries_[std::move(old_code)] = std::move(e);
}

std::string CodeMap::resolve(const std::string& code) const {
    std::string current = code;
    std::set<std::string> seen{current};
    for (;;) {
        auto it = entries_.find(current);
        if (it == entries_.end() || !it->second.replaces()) return current;
        current = it->second.new_code;
        if (!seen.insert(current).second) {
            throw ConfigError("code map is cyclic at " + current + " (reached from " + code + ")");
        }
    }
}

void CodeMap::check_acyclic() const {
    for (const auto& [code, entry] : entries_) (void)resolve(code);
}

CodeMap CodeMap::load_csv(const std::string& path) {
    const auto t = io::read_csv(path);
    const auto c_old = t.column("old_code");
    const auto c_new = t.column("new_code");
    const auto c_reason = t.column("reason");
    CodeMap map;
    for (const auto& row : t.rows) {
        map.add(row[c_old], row[c_new], code_change_from_string(row[c_reason]));
    }
    map.check_acyclic();
    return map;
}

std::vector<Meal> apply_code_harmonization(const std::vector<Meal>& meals, const CodeMap& map) {
    map.check_acyclic();
    std::vector<Meal> out;
    out.reserve(meals.size());
    for (const auto& m : meals) {
        Meal h = m;
        for (auto& it : h.items) it.food_code = map.resolve(it.food_code);
        h.items = merge_duplicate_items(h.items);
        out.push_back(std::move(h));
    }
    return out;
}

}  // namespace mealeng::corpus
