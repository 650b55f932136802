#include "mealeng/generator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <json.hpp>

#include "mealeng/errors.hpp"
#include "mealeng/io.hpp"
#include "mealeng/random.hpp"

namespace mealeng::generator {

namespace {

using json = nlohmann::json;

constexpr double kLogitClip = 1e-6;

double logit(double p) {
    p = std::clamp(p, kLogitClip, 1.0 - kLogitClip);
    return std::log(p / (1.0 - p));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

double PresenceModel::effective(std::size_t i) const {
    if (!allowed_mask[i]) return 0.0;
    if (pair_prior[i] == 0.0) return background_prob[i];
    return sigmoid(logit(background_prob[i]) + pair_prior[i]);
}

void PresenceModel::validate() const {
    const std::size_t n = food_codes.size();
    if (base_prob.size() != n || background_prob.size() != n || pair_prior.size() != n ||
        allowed_mask.size() != n) {
        throw ValidationError("presence model arrays are not aligned");
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (double p : {base_prob[i], background_prob[i]}) {
            if (!(p >= 0.0 && p <= 1.0)) {
                throw ValidationError("presence probability for " + food_codes[i] + " outside [0,1]");
            }
        }
        if (!std::isfinite(pair_prior[i])) {
            throw ValidationError("pair prior for " + food_codes[i] + " is not finite");
        }
    }
}

void CombinationConstraints::validate() const {
    if (!(prob_threshold > 0.0 && prob_threshold <= 1.0)) {
        throw ConfigError("probability threshold must be in (0,1]");
    }
    for (auto s : min_solids) {
        if (max_items < s + max_beverages) {
            throw ConfigError("max_items must be >= min_solids + max_beverages");
        }
    }
}

PresenceModel fit_empirical_presence(const std::vector<Meal>& meal_type_meals, int cluster_id,
                                     const FoodTable& foods) {
    const auto& records = foods.foods();
    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < records.size(); ++i) pos[records[i].food_code] = i;

    std::vector<double> in_cluster(records.size(), 0.0), overall(records.size(), 0.0);
    std::size_t n_cluster = 0;
    std::optional<MealType> type;
    for (const auto& m : meal_type_meals) {
        if (type && *type != m.meal_type) {
            throw ValidationError("fit_empirical_presence: meals span several meal types");
        }
        type = m.meal_type;
        const bool member = m.cluster_label && *m.cluster_label == cluster_id;
        if (member) ++n_cluster;
        for (const auto& it : m.items) {
            auto p = pos.find(it.food_code);
            if (p == pos.end()) throw LookupError("unknown food code " + it.food_code);
            overall[p->second] += 1.0;
            if (member) in_cluster[p->second] += 1.0;
        }
    }
    if (n_cluster == 0) {
        throw ValidationError("empty cluster " + std::to_string(cluster_id));
    }

    PresenceModel model;
    model.meal_type = *type;
    model.cluster_id = cluster_id;
    const double nc = static_cast<double>(n_cluster);
    const double nt = static_cast<double>(meal_type_meals.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const double base = in_cluster[i] / nc;
        const double bg = overall[i] / nt;
        model.food_codes.push_back(records[i].food_code);
        model.base_prob.push_back(base);
        model.background_prob.push_back(bg);
        model.allowed_mask.push_back(in_cluster[i] > 0.0);
        double prior = 0.0;
        if (in_cluster[i] > 0.0 && base != bg) {
            prior = std::clamp(logit(base) - logit(bg), -kPairPriorClamp, kPairPriorClamp);
        }
        model.pair_prior.push_back(prior);
    }
    return model;
}

std::vector<PresenceModel> fit_all_presence(const std::vector<Meal>& meals, const FoodTable& foods) {
    std::vector<PresenceModel> out;
    for (MealType t : kMealTypes) {
        std::vector<Meal> typed;
        std::set<int> clusters;
        for (const auto& m : meals) {
            if (m.meal_type != t) continue;
            typed.push_back(m);
            if (m.cluster_label && *m.cluster_label >= 0) clusters.insert(*m.cluster_label);
        }
        for (int c : clusters) out.push_back(fit_empirical_presence(typed, c, foods));
    }
    return out;
}

namespace {

PresenceModel parse_record(const json& rec, std::size_t record_no, const FoodTable& foods,
                           std::string_view source) {
    const std::string where = std::string(source) + ": record " + std::to_string(record_no);
    auto fail = [&](const std::string& msg) -> void { throw ValidationError(where + ": " + msg); };
    if (!rec.is_object()) fail("not an object");
    for (const char* key :
         {"schema_version", "meal_type", "cluster_id", "food_codes", "probabilities", "allowed_mask"}) {
        if (!rec.contains(key)) fail(std::string("missing field '") + key + "'");
    }
    const auto& ver = rec["schema_version"];
    const bool version_ok = (ver.is_number_integer() && ver.get<long long>() == 1) ||
                            (ver.is_string() && ver.get<std::string>().rfind("1", 0) == 0);
    if (!version_ok) fail("unsupported schema_version " + ver.dump());
    if (!rec["meal_type"].is_string()) fail("meal_type must be a string");
    if (!rec["cluster_id"].is_number_integer()) fail("cluster_id must be an integer");
    const auto& codes = rec["food_codes"];
    const auto& probs = rec["probabilities"];
    const auto& mask = rec["allowed_mask"];
    if (!codes.is_array() || !probs.is_array() || !mask.is_array()) {
        fail("food_codes, probabilities and allowed_mask must be arrays");
    }
    if (codes.size() != probs.size() || codes.size() != mask.size()) {
        fail("arrays are not aligned (" + std::to_string(codes.size()) + " codes, " +
             std::to_string(probs.size()) + " probabilities, " + std::to_string(mask.size()) +
             " mask entries)");
    }

    PresenceModel m;
    try {
        m.meal_type = meal_type_from_string(rec["meal_type"].get<std::string>());
    } catch (const ValidationError& e) {
        fail(e.what());
    }
    m.cluster_id = rec["cluster_id"].get<int>();
    m.source = "export";
    if (rec.contains("metadata") && rec["metadata"].is_object() && rec["metadata"].contains("source") &&
        rec["metadata"]["source"].is_string()) {
        m.source = rec["metadata"]["source"].get<std::string>();
    }
    std::set<std::string> seen;
    for (std::size_t i = 0; i < codes.size(); ++i) {
        const std::string row = "row " + std::to_string(i + 1);
        if (!codes[i].is_string()) fail(row + ": food code must be a string");
        const std::string code = codes[i].get<std::string>();
        if (!foods.contains(code)) fail(row + ": unknown food code " + code);
        if (!seen.insert(code).second) fail(row + ": duplicate food code " + code);
        if (!probs[i].is_number()) fail(row + ": probability must be a number");
        const double p = probs[i].get<double>();
        if (!(p >= 0.0 && p <= 1.0)) fail(row + ": probability " + io::fmt_double(p) + " outside [0,1]");
        if (!mask[i].is_boolean()) fail(row + ": allowed_mask entry must be a boolean");
        const bool allowed = mask[i].get<bool>();
        if (!allowed && p != 0.0) fail(row + ": masked food " + code + " has nonzero probability");
        m.food_codes.push_back(code);
        m.base_prob.push_back(p);
        m.background_prob.push_back(p);
        m.pair_prior.push_back(0.0);
        m.allowed_mask.push_back(allowed);
    }
    return m;
}

}  // namespace

std::vector<PresenceModel> parse_probability_export(std::string_view json_text, const FoodTable& foods,
                                                    std::string_view source) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string(source) + ": malformed JSON: " + e.what());
    }
    std::vector<json> records;
    if (doc.is_array()) {
        records.assign(doc.begin(), doc.end());
    } else if (doc.is_object() && doc.contains("records")) {
        if (!doc["records"].is_array()) throw ValidationError(std::string(source) + ": records must be an array");
        records.assign(doc["records"].begin(), doc["records"].end());
    } else {
        records.push_back(doc);
    }
    std::vector<PresenceModel> out;
    std::set<std::pair<int, int>> keys;
    for (std::size_t r = 0; r < records.size(); ++r) {
        auto m = parse_record(records[r], r + 1, foods, source);
        if (!keys.insert({static_cast<int>(m.meal_type), m.cluster_id}).second) {
            throw ValidationError(std::string(source) + ": record " + std::to_string(r + 1) +
                                  ": duplicate (meal_type, cluster_id)");
        }
        out.push_back(std::move(m));
    }
    return out;
}

std::vector<PresenceModel> load_probability_export(const std::filesystem::path& path,
                                                   const FoodTable& foods) {
    return parse_probability_export(io::read_file(path), foods, path.string());
}

std::string models_to_export_json(const std::vector<PresenceModel>& models) {
    json arr = json::array();
    for (const auto& m : models) {
        json rec;
        rec["schema_version"] = 1;
        rec["meal_type"] = std::string(to_string(m.meal_type));
        rec["cluster_id"] = m.cluster_id;
        json codes = json::array(), probs = json::array(), mask = json::array();
        for (std::size_t i = 0; i < m.size(); ++i) {
            codes.push_back(m.food_codes[i]);
            probs.push_back(m.effective(i));
            mask.push_back(static_cast<bool>(m.allowed_mask[i]));
        }
        rec["food_codes"] = std::move(codes);
        rec["probabilities"] = std::move(probs);
        rec["allowed_mask"] = std::move(mask);
        rec["metadata"] = {{"source", m.source}, {"training_run_id", ""}};
        arr.push_back(std::move(rec));
    }
    return arr.dump(1) + "\n";
}

std::vector<std::string> sample_combination(const PresenceModel& model, const FoodTable& foods,
                                            const CombinationConstraints& constraints,
                                            std::uint64_t seed) {
    constraints.validate();
    const std::size_t min_solids = constraints.min_solid(model.meal_type);

    struct Cand {
        std::size_t index;
        double p;
        bool beverage;
        bool solid;
    };
    std::vector<Cand> cands;
    std::size_t solid_cands = 0;
    for (std::size_t i = 0; i < model.size(); ++i) {
        const double p = model.effective(i);
        if (!(p >= constraints.prob_threshold)) continue;
        const FoodRecord& f = foods.at(model.food_codes[i]);
        cands.push_back({i, p, f.counts_as_beverage(), f.counts_as_solid()});
        if (f.counts_as_solid()) ++solid_cands;
    }
    if (solid_cands < min_solids) {
        throw InfeasibleError("infeasible cluster " + std::to_string(model.cluster_id) + " (" +
                              std::string(to_string(model.meal_type)) + "): " +
                              std::to_string(solid_cands) + " solid foods pass the threshold, " +
                              std::to_string(min_solids) + " required");
    }

    Rng rng(seed);
    std::vector<bool> picked(cands.size(), false);
    for (std::size_t c = 0; c < cands.size(); ++c) picked[c] = rng.uniform() < cands[c].p;

    // Highest probability first, model order on ties.
    std::vector<std::size_t> by_prob(cands.size());
    for (std::size_t c = 0; c < cands.size(); ++c) by_prob[c] = c;
    std::stable_sort(by_prob.begin(), by_prob.end(),
                     [&](std::size_t a, std::size_t b) { return cands[a].p > cands[b].p; });

    std::size_t kept = 0;
    for (auto c : by_prob) {
        if (!picked[c]) continue;
        if (kept < constraints.max_items) {
            ++kept;
        } else {
            picked[c] = false;
        }
    }
    std::size_t beverages = 0;
    for (auto c : by_prob) {
        if (!picked[c] || !cands[c].beverage) continue;
        if (beverages < constraints.max_beverages) {
            ++beverages;
        } else {
            picked[c] = false;
        }
    }
    std::size_t solids = 0;
    for (std::size_t c = 0; c < cands.size(); ++c) {
        if (picked[c] && cands[c].solid) ++solids;
    }
    for (auto c : by_prob) {
        if (solids >= min_solids) break;
        if (!picked[c] && cands[c].solid) {
            picked[c] = true;
            ++solids;
        }
    }

    std::vector<std::string> out;
    for (std::size_t c = 0; c < cands.size(); ++c) {
        if (picked[c]) out.push_back(model.food_codes[cands[c].index]);
    }
    return out;
}

}  // namespace mealeng::generator
