#include "mealeng/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mealeng/errors.hpp"
#include "mealeng/features.hpp"
#include "mealeng/io.hpp"
#include "mealeng/metrics.hpp"
#include "mealeng/pricing.hpp"
#include "mealeng/random.hpp"
#include "mealeng/stats.hpp"

namespace mealeng::pipeline {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// ------------------------------------------------------------------ config

namespace {

void check_keys(const ojson& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
    if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
    for (const auto& [k, _] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
            throw ConfigError(std::string(where) + ": unknown key '" + k + "'");
        }
    }
}

template <class T>
void get_to(const ojson& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

std::string lof_input_name(corpus::LofInput in) { return in == corpus::LofInput::presence ? "presence" : "grams"; }

corpus::LofInput lof_input_from(const std::string& s) {
    if (s == "presence") return corpus::LofInput::presence;
    if (s == "grams") return corpus::LofInput::grams;
    throw ConfigError("ingest.lof_input: expected presence or grams, got '" + s + "'");
}

categories::CapGroup cap_group_from(const std::string& s) {
    for (auto g : categories::kCapGroups) {
        if (categories::to_string(g) == s) return g;
    }
    throw ConfigError("portion.category_caps: unknown group '" + s + "'");
}

ojson per_type(const std::array<std::size_t, 3>& v) {
    return {{"breakfast", v[0]}, {"lunch", v[1]}, {"dinner", v[2]}};
}
ojson per_type(const std::array<double, 3>& v) {
    return {{"breakfast", v[0]}, {"lunch", v[1]}, {"dinner", v[2]}};
}
template <class T>
void per_type_from(const ojson& j, const char* key, std::array<T, 3>& out) {
    if (!j.contains(key)) return;
    const auto& o = j.at(key);
    check_keys(o, {"breakfast", "lunch", "dinner"}, key);
    get_to(o, "breakfast", out[0]);
    get_to(o, "lunch", out[1]);
    get_to(o, "dinner", out[2]);
}

std::string resolve(const std::string& p, const fs::path& base) {
    if (p.empty() || base.empty() || fs::path(p).is_absolute()) return p;
    return (base / p).lexically_normal().string();
}

ojson config_json(const PipelineConfig& c, bool include_output) {
    ojson j;
    j["seed"] = c.seed;
    ojson paths = {{"foods", c.paths.foods},         {"meals", c.paths.meals},
                   {"labels", c.paths.labels},       {"codemap", c.paths.codemap},
                   {"pricebook", c.paths.pricebook}, {"probability_export", c.paths.probability_export}};
    if (include_output) paths["output_dir"] = c.paths.output_dir;
    j["paths"] = paths;
    j["ingest"] = {{"lof_k", c.ingest.lof.neighborhood_k},
                   {"contamination", c.ingest.lof.contamination},
                   {"lof_input", lof_input_name(c.ingest.lof.input)},
                   {"presence_resamples", c.ingest.presence_resamples},
                   {"presence_level", c.ingest.presence_level}};
    const auto& pc = c.prototype.config;
    j["prototype"] = {{"apply", c.prototype.apply},
                      {"aggregation_alpha", pc.aggregation_alpha},
                      {"k_max", pc.k_max},
                      {"min_subcategory_size", pc.min_subcategory_size},
                      {"mass_coverage_min", pc.mass_coverage_min},
                      {"wmare_max", pc.wmare_max},
                      {"cosine_floor", pc.cosine_floor}};
    ojson clusterer = ojson::object();
    for (auto t : kMealTypes) {
        const auto& p = c.cluster.params(t);
        clusterer[std::string(to_string(t))] = {{"min_cluster_size", p.min_cluster_size},
                                                {"min_samples", p.min_samples},
                                                {"alpha", p.alpha},
                                                {"cluster_selection_epsilon", p.cluster_selection_epsilon}};
    }
    j["cluster"] = {{"clusterer", clusterer},
                    {"merge_cosine", c.cluster.merge_cosine},
                    {"fdr_q", c.cluster.fdr_q},
                    {"sig_delta_min", c.cluster.sig_delta_min},
                    {"distinctive_delta", c.cluster.distinctive_delta}};
    const auto& gc = c.generate.constraints;
    j["generate"] = {{"meals_per_cluster", c.generate.meals_per_cluster},
                     {"prob_threshold", gc.prob_threshold},
                     {"max_items", gc.max_items},
                     {"min_solids", per_type(gc.min_solids)},
                     {"max_beverages", gc.max_beverages}};
    ojson caps = ojson::object();
    for (const auto& [g, v] : c.portion.category_caps) caps[std::string(categories::to_string(g))] = v;
    j["portion"] = {{"total_grams_max", c.portion.total_grams_max},
                    {"beverage_kcal_frac_max", c.portion.beverage_kcal_frac_max},
                    {"beverage_gram_cap", per_type(c.portion.beverage_gram_cap)},
                    {"category_caps", caps},
                    {"per_solid_item_max", c.portion.per_solid_item_max},
                    {"min_solid_items", per_type(c.portion.min_solid_items)},
                    {"energy_tolerance", c.portion.energy_tolerance},
                    {"min_item_grams", c.portion.min_item_grams}};
    j["solver"] = {
        {"orientation", c.solver.orientation == portioner::Orientation::labels ? "labels" : "formula_literal"},
        {"include_neutral", c.solver.include_neutral},
        {"log_floor_frac", c.solver.log_floor_frac},
        {"starts", c.solver.starts},
        {"max_iterations", c.solver.max_iterations},
        {"tolerance", c.solver.tolerance}};
    j["evaluate"] = {
        {"resamples", c.evaluate.resamples}, {"level", c.evaluate.level}, {"fdr_q", c.evaluate.fdr_q}};
    j["retrieval"] = {{"k_neighbors", c.retrieval.k_neighbors},
                      {"energy_tolerance", c.retrieval.energy_tolerance},
                      {"item_count_tolerance", c.retrieval.item_count_tolerance},
                      {"single_item_swaps", c.retrieval.single_item_swaps},
                      {"exclude_beverage_edits", c.retrieval.exclude_beverage_edits},
                      {"max_k_sub", c.retrieval.max_k_sub}};
    const auto& t = c.tradeoff;
    j["tradeoff"] = {{"theta", t.theta},
                     {"effort_alpha", t.effort_alpha},
                     {"cross_margin_alpha", t.cross_margin_alpha},
                     {"cross_buffer_beta", t.cross_buffer_beta},
                     {"cross_uplift", t.cross_uplift},
                     {"alt_score_lambda", t.alt_score_lambda ? ojson(*t.alt_score_lambda) : ojson(nullptr)},
                     {"budget_cap", t.budget_cap ? ojson(*t.budget_cap) : ojson(nullptr)},
                     {"no_cost_increase", t.no_cost_increase}};
    j["sweep"] = {{"theta_grid", c.sweep.theta_grid},
                  {"k_subs", c.sweep.k_subs},
                  {"resamples", c.sweep.resamples},
                  {"level", c.sweep.level}};
    return j;
}

}  // namespace

void PipelineConfig::validate() const {
    if (paths.foods.empty() || paths.meals.empty()) throw ConfigError("paths.foods and paths.meals are required");
    if (paths.output_dir.empty()) throw ConfigError("paths.output_dir is required");
    if (ingest.lof.neighborhood_k < 1) throw ConfigError("ingest.lof_k must be >= 1");
    if (ingest.lof.contamination < 0.0 || ingest.lof.contamination >= 1.0) {
        throw ConfigError("ingest.contamination must be in [0,1)");
    }
    if (ingest.presence_resamples < 100) throw ConfigError("ingest.presence_resamples must be >= 100");
    if (ingest.presence_level <= 0.0 || ingest.presence_level >= 1.0) {
        throw ConfigError("ingest.presence_level must be in (0,1)");
    }
    prototype.config.validate();
    cluster.validate();
    generate.constraints.validate();
    if (generate.meals_per_cluster < 1) throw ConfigError("generate.meals_per_cluster must be >= 1");
    portion.validate();
    if (evaluate.resamples < 1 || evaluate.level <= 0.0 || evaluate.level >= 1.0) {
        throw ConfigError("evaluate: resamples >= 1 and level in (0,1) required");
    }
    if (evaluate.fdr_q <= 0.0 || evaluate.fdr_q > 1.0) throw ConfigError("evaluate.fdr_q must be in (0,1]");
    if (retrieval.energy_tolerance < 0.0 || retrieval.item_count_tolerance < 0) {
        throw ConfigError("retrieval tolerances must be >= 0");
    }
    try {
        tradeoff.validate();
    } catch (const ValidationError& e) {
        throw ConfigError(std::string("tradeoff: ") + e.what());
    }
    if (sweep.theta_grid.empty()) throw ConfigError("sweep.theta_grid must not be empty");
    if (!std::is_sorted(sweep.theta_grid.begin(), sweep.theta_grid.end()) || sweep.theta_grid.front() < 0.0) {
        throw ConfigError("sweep.theta_grid must be ascending and >= 0");
    }
    for (int k : sweep.k_subs) {
        if (k < 1) throw ConfigError("sweep.k_subs must be >= 1");
    }
    if (sweep.resamples < 1 || sweep.level <= 0.0 || sweep.level >= 1.0) {
        throw ConfigError("sweep: resamples >= 1 and level in (0,1) required");
    }
}

std::string config_to_json(const PipelineConfig& cfg) { return config_json(cfg, true).dump(2) + "\n"; }

PipelineConfig config_from_json(std::string_view text, const fs::path& base_dir) {
    PipelineConfig c;
    try {
        const auto j = ojson::parse(text);
        check_keys(j, {"seed", "paths", "ingest", "prototype", "cluster", "generate", "portion", "solver", "evaluate",
                       "retrieval", "tradeoff", "sweep"},
                   "config");
        get_to(j, "seed", c.seed);
        if (j.contains("paths")) {
            const auto& p = j.at("paths");
            check_keys(p, {"foods", "meals", "labels", "codemap", "pricebook", "probability_export", "output_dir"},
                       "paths");
            get_to(p, "foods", c.paths.foods);
            get_to(p, "meals", c.paths.meals);
            get_to(p, "labels", c.paths.labels);
            get_to(p, "codemap", c.paths.codemap);
            get_to(p, "pricebook", c.paths.pricebook);
            get_to(p, "probability_export", c.paths.probability_export);
            get_to(p, "output_dir", c.paths.output_dir);
        }
        if (j.contains("ingest")) {
            const auto& o = j.at("ingest");
            check_keys(o, {"lof_k", "contamination", "lof_input", "presence_resamples", "presence_level"}, "ingest");
            get_to(o, "lof_k", c.ingest.lof.neighborhood_k);
            get_to(o, "contamination", c.ingest.lof.contamination);
            if (o.contains("lof_input")) c.ingest.lof.input = lof_input_from(o.at("lof_input").get<std::string>());
            get_to(o, "presence_resamples", c.ingest.presence_resamples);
            get_to(o, "presence_level", c.ingest.presence_level);
        }
        if (j.contains("prototype")) {
            const auto& o = j.at("prototype");
            check_keys(o, {"apply", "aggregation_alpha", "k_max", "min_subcategory_size", "mass_coverage_min",
                           "wmare_max", "cosine_floor"},
                       "prototype");
            auto& pc = c.prototype.config;
            get_to(o, "apply", c.prototype.apply);
            get_to(o, "aggregation_alpha", pc.aggregation_alpha);
            get_to(o, "k_max", pc.k_max);
            get_to(o, "min_subcategory_size", pc.min_subcategory_size);
            get_to(o, "mass_coverage_min", pc.mass_coverage_min);
            get_to(o, "wmare_max", pc.wmare_max);
            get_to(o, "cosine_floor", pc.cosine_floor);
        }
        if (j.contains("cluster")) {
            const auto& o = j.at("cluster");
            check_keys(o, {"clusterer", "merge_cosine", "fdr_q", "sig_delta_min", "distinctive_delta"}, "cluster");
            if (o.contains("clusterer")) {
                const auto& cl = o.at("clusterer");
                check_keys(cl, {"breakfast", "lunch", "dinner"}, "cluster.clusterer");
                for (auto t : kMealTypes) {
                    const std::string name(to_string(t));
                    if (!cl.contains(name)) continue;
                    const auto& q = cl.at(name);
                    check_keys(q, {"min_cluster_size", "min_samples", "alpha", "cluster_selection_epsilon"}, name);
                    auto& p = c.cluster.clusterer[static_cast<std::size_t>(t)];
                    get_to(q, "min_cluster_size", p.min_cluster_size);
                    get_to(q, "min_samples", p.min_samples);
                    get_to(q, "alpha", p.alpha);
                    get_to(q, "cluster_selection_epsilon", p.cluster_selection_epsilon);
                }
            }
            get_to(o, "merge_cosine", c.cluster.merge_cosine);
            get_to(o, "fdr_q", c.cluster.fdr_q);
            get_to(o, "sig_delta_min", c.cluster.sig_delta_min);
            get_to(o, "distinctive_delta", c.cluster.distinctive_delta);
        }
        if (j.contains("generate")) {
            const auto& o = j.at("generate");
            check_keys(o, {"meals_per_cluster", "prob_threshold", "max_items", "min_solids", "max_beverages"},
                       "generate");
            auto& gc = c.generate.constraints;
            get_to(o, "meals_per_cluster", c.generate.meals_per_cluster);
            get_to(o, "prob_threshold", gc.prob_threshold);
            get_to(o, "max_items", gc.max_items);
            per_type_from(o, "min_solids", gc.min_solids);
            get_to(o, "max_beverages", gc.max_beverages);
        }
        if (j.contains("portion")) {
            const auto& o = j.at("portion");
            check_keys(o, {"total_grams_max", "beverage_kcal_frac_max", "beverage_gram_cap", "category_caps",
                           "per_solid_item_max", "min_solid_items", "energy_tolerance", "min_item_grams"},
                       "portion");
            auto& p = c.portion;
            get_to(o, "total_grams_max", p.total_grams_max);
            get_to(o, "beverage_kcal_frac_max", p.beverage_kcal_frac_max);
            per_type_from(o, "beverage_gram_cap", p.beverage_gram_cap);
            if (o.contains("category_caps")) {
                for (const auto& [k, v] : o.at("category_caps").items()) p.category_caps[cap_group_from(k)] = v.get<double>();
            }
            get_to(o, "per_solid_item_max", p.per_solid_item_max);
            per_type_from(o, "min_solid_items", p.min_solid_items);
            get_to(o, "energy_tolerance", p.energy_tolerance);
            get_to(o, "min_item_grams", p.min_item_grams);
        }
        if (j.contains("solver")) {
            const auto& o = j.at("solver");
            check_keys(o, {"orientation", "include_neutral", "log_floor_frac", "starts", "max_iterations", "tolerance"},
                       "solver");
            if (o.contains("orientation")) {
                const auto s = o.at("orientation").get<std::string>();
                if (s == "labels") c.solver.orientation = portioner::Orientation::labels;
                else if (s == "formula_literal") c.solver.orientation = portioner::Orientation::formula_literal;
                else throw ConfigError("solver.orientation: expected labels or formula_literal");
            }
            get_to(o, "include_neutral", c.solver.include_neutral);
            get_to(o, "log_floor_frac", c.solver.log_floor_frac);
            get_to(o, "starts", c.solver.starts);
            get_to(o, "max_iterations", c.solver.max_iterations);
            get_to(o, "tolerance", c.solver.tolerance);
        }
        if (j.contains("evaluate")) {
            const auto& o = j.at("evaluate");
            check_keys(o, {"resamples", "level", "fdr_q"}, "evaluate");
            get_to(o, "resamples", c.evaluate.resamples);
            get_to(o, "level", c.evaluate.level);
            get_to(o, "fdr_q", c.evaluate.fdr_q);
        }
        if (j.contains("retrieval")) {
            const auto& o = j.at("retrieval");
            check_keys(o, {"k_neighbors", "energy_tolerance", "item_count_tolerance", "single_item_swaps",
                           "exclude_beverage_edits", "max_k_sub"},
                       "retrieval");
            get_to(o, "k_neighbors", c.retrieval.k_neighbors);
            get_to(o, "energy_tolerance", c.retrieval.energy_tolerance);
            get_to(o, "item_count_tolerance", c.retrieval.item_count_tolerance);
            get_to(o, "single_item_swaps", c.retrieval.single_item_swaps);
            get_to(o, "exclude_beverage_edits", c.retrieval.exclude_beverage_edits);
            get_to(o, "max_k_sub", c.retrieval.max_k_sub);
        }
        if (j.contains("tradeoff")) {
            const auto& o = j.at("tradeoff");
            check_keys(o, {"theta", "effort_alpha", "cross_margin_alpha", "cross_buffer_beta", "cross_uplift",
                           "alt_score_lambda", "budget_cap", "no_cost_increase"},
                       "tradeoff");
            auto& t = c.tradeoff;
            get_to(o, "theta", t.theta);
            get_to(o, "effort_alpha", t.effort_alpha);
            get_to(o, "cross_margin_alpha", t.cross_margin_alpha);
            get_to(o, "cross_buffer_beta", t.cross_buffer_beta);
            get_to(o, "cross_uplift", t.cross_uplift);
            if (o.contains("alt_score_lambda") && !o.at("alt_score_lambda").is_null()) {
                t.alt_score_lambda = o.at("alt_score_lambda").get<double>();
            }
            if (o.contains("budget_cap") && !o.at("budget_cap").is_null()) t.budget_cap = o.at("budget_cap").get<double>();
            get_to(o, "no_cost_increase", t.no_cost_increase);
        }
        if (j.contains("sweep")) {
            const auto& o = j.at("sweep");
            check_keys(o, {"theta_grid", "k_subs", "resamples", "level"}, "sweep");
            get_to(o, "theta_grid", c.sweep.theta_grid);
            get_to(o, "k_subs", c.sweep.k_subs);
            get_to(o, "resamples", c.sweep.resamples);
            get_to(o, "level", c.sweep.level);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    for (auto* p : {&c.paths.foods, &c.paths.meals, &c.paths.labels, &c.paths.codemap, &c.paths.pricebook,
                    &c.paths.probability_export, &c.paths.output_dir}) {
        *p = resolve(*p, base_dir);
    }
    c.validate();
    return c;
}

PipelineConfig load_config(const fs::path& path) {
    return config_from_json(io::read_file(path), path.parent_path());
}

// ------------------------------------------------------------------ stages

std::string_view to_string(Stage s) {
    switch (s) {
        case Stage::ingest: return "ingest";
        case Stage::prototype: return "prototype";
        case Stage::cluster_profile: return "cluster-profile";
        case Stage::fit_sampler: return "fit-sampler";
        case Stage::generate: return "generate";
        case Stage::portion: return "portion";
        case Stage::evaluate: return "evaluate";
        case Stage::price: return "price";
        case Stage::substitute: return "substitute";
        case Stage::sweep: return "sweep";
        case Stage::report: return "report";
    }
    return "?";
}

Stage stage_from_string(std::string_view s) {
    for (Stage st : kAllStages) {
        if (to_string(st) == s) return st;
    }
    throw ValidationError("unknown stage '" + std::string(s) + "'");
}

std::vector<std::string> stage_outputs(Stage s) {
    switch (s) {
        case Stage::ingest:
            return {"foods_clean.csv", "meals_clean.csv", "labels_clean.csv", "lof_scores.csv", "presence_filter.csv"};
        case Stage::prototype: return {"prototype_map.csv", "prototype_foods.csv", "prototype_report.json"};
        case Stage::cluster_profile: return {"features.csv", "labels_merged.csv", "cluster_profile.csv"};
        case Stage::fit_sampler: return {"sampler_export.json"};
        case Stage::generate: return {"generated_combinations.csv", "generation_failures.csv"};
        case Stage::portion: return {"portioned_meals.json", "portion_failures.csv"};
        case Stage::evaluate:
            return {"meal_metrics.csv", "evaluation_report.csv", "evaluation_summary.csv", "evaluation_gate.json"};
        case Stage::price: return {"meal_costs.csv"};
        case Stage::substitute: return {"candidates.csv"};
        case Stage::sweep: return {"substitutions.csv", "frontier.csv", "frontier_all.csv", "transitions.csv"};
        case Stage::report: return {"report.json"};
    }
    return {};
}

std::string fnv1a_hex(std::string_view bytes) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(bytes);
    return os.str();
}

namespace {

// Tracks the files a stage read and wrote for the manifest.
class StageRun {
public:
    StageRun(Stage s, const PipelineConfig& cfg) : stage_(s), cfg_(cfg), out_(cfg.paths.output_dir) {}

    fs::path out(const std::string& name) const { return out_ / name; }

    // Upstream artifact in the output directory.
    fs::path need(const std::string& name) {
        const auto p = out(name);
        require(p);
        return p;
    }

    void require(const fs::path& p) {
        if (!fs::exists(p)) throw IoError("missing upstream artifact: " + p.string());
        inputs_[p.filename().string()] = fnv1a_hex(io::read_file(p));
    }

    void write(const std::string& name, const std::string& content) {
        io::write_file_atomic(out(name), content);
        outputs_[name] = fnv1a_hex(content);
    }

    void finish() {
        const auto mpath = out("manifest.json");
        ojson m;
        if (fs::exists(mpath)) {
            try {
                m = ojson::parse(io::read_file(mpath));
            } catch (const nlohmann::json::exception&) {
                m = ojson();
            }
        }
        m["tool"] = "mealeng";
        m["version"] = kVersion;
        m["seed"] = cfg_.seed;
        m["config"] = config_json(cfg_, false);
        if (!m.contains("stages")) m["stages"] = ojson::object();
        ojson st;
        st["inputs"] = inputs_;
        st["outputs"] = outputs_;
        m["stages"][std::string(to_string(stage_))] = st;
        ojson ordered;
        for (const char* k : {"tool", "version", "seed", "config"}) ordered[k] = m[k];
        ojson stages = ojson::object();
        for (Stage s : kAllStages) {
            const std::string name(to_string(s));
            if (m["stages"].contains(name)) stages[name] = m["stages"][name];
        }
        ordered["stages"] = stages;
        io::write_file_atomic(mpath, ordered.dump(2) + "\n");
    }

private:
    Stage stage_;
    const PipelineConfig& cfg_;
    fs::path out_;
    std::map<std::string, std::string> inputs_;
    std::map<std::string, std::string> outputs_;
};

std::string meal_type_name(MealType t) { return std::string(to_string(t)); }

// Working foods and meals after ingest, optionally mapped to prototypes.
struct Working {
    std::vector<FoodRecord> food_list;
    FoodTable foods;
    std::vector<Meal> meals;
};

Working load_working(StageRun& run, const PipelineConfig& cfg, const std::string& labels_file) {
    Working w;
    w.food_list = io::load_foods(run.need("foods_clean.csv"));
    w.meals = io::load_meals(run.need("meals_clean.csv"));
    if (!labels_file.empty()) io::attach_labels(w.meals, io::load_labels(run.need(labels_file)));
    if (cfg.prototype.apply) {
        const auto table = io::read_csv(run.need("prototype_map.csv"));
        std::map<std::string, std::string> mapping;
        const auto c_food = table.column("food_code");
        const auto c_proto = table.column("prototype_code");
        for (const auto& r : table.rows) mapping[r[c_food]] = r[c_proto];
        auto protos = io::load_foods(run.need("prototype_foods.csv"));
        std::vector<FoodRecord> foods;
        for (auto& f : w.food_list) {
            if (!mapping.count(f.food_code)) foods.push_back(std::move(f));
        }
        for (auto& p : protos) foods.push_back(std::move(p));
        std::sort(foods.begin(), foods.end(),
                  [](const FoodRecord& a, const FoodRecord& b) { return a.food_code < b.food_code; });
        w.food_list = std::move(foods);
        w.meals = corpus::apply_prototypes(w.meals, mapping);
    }
    w.foods = FoodTable(w.food_list);
    return w;
}

// ingest: harmonize codes, LOF per meal type, bootstrap presence filter.
void stage_ingest(const PipelineConfig& cfg) {
    StageRun run(Stage::ingest, cfg);
    run.require(cfg.paths.foods);
    run.require(cfg.paths.meals);
    auto foods = io::load_foods(cfg.paths.foods);
    for (const auto& f : foods) validate_food(f);
    const FoodTable table(foods);
    auto meals = io::load_meals(cfg.paths.meals);
    if (!cfg.paths.codemap.empty() && fs::exists(cfg.paths.codemap)) {
        run.require(cfg.paths.codemap);
        meals = corpus::apply_code_harmonization(meals, corpus::CodeMap::load_csv(cfg.paths.codemap));
    }
    for (const auto& m : meals) {
        validate_meal(m);
        for (const auto& it : m.items) {
            if (!table.contains(it.food_code)) {
                throw LookupError("meal " + m.meal_id + ": unknown food code " + it.food_code);
            }
        }
    }
    if (!cfg.paths.labels.empty() && fs::exists(cfg.paths.labels)) {
        run.require(cfg.paths.labels);
        io::attach_labels(meals, io::load_labels(cfg.paths.labels));
    }

    std::string lof_csv = io::csv_row({"meal_id", "meal_type", "lof_score", "removed"});
    std::vector<Meal> kept;
    for (auto t : kMealTypes) {
        std::vector<Meal> of_type;
        for (const auto& m : meals) {
            if (m.meal_type == t) of_type.push_back(m);
        }
        if (of_type.empty()) continue;
        const auto res = corpus::lof_filter(of_type, cfg.ingest.lof);
        const std::set<std::string> removed(res.removed_ids.begin(), res.removed_ids.end());
        for (std::size_t i = 0; i < of_type.size(); ++i) {
            lof_csv += io::csv_row({of_type[i].meal_id, meal_type_name(t), io::fmt_double(res.scores[i]),
                                    removed.count(of_type[i].meal_id) ? "1" : "0"});
        }
        kept.insert(kept.end(), res.kept.begin(), res.kept.end());
    }
    // Back to input order.
    std::map<std::string, std::size_t> order;
    for (std::size_t i = 0; i < meals.size(); ++i) order[meals[i].meal_id] = i;
    std::sort(kept.begin(), kept.end(),
              [&](const Meal& a, const Meal& b) { return order.at(a.meal_id) < order.at(b.meal_id); });

    const auto pf = corpus::bootstrap_presence_filter(kept, cfg.ingest.presence_resamples, cfg.ingest.presence_level,
                                                      derive_seed(cfg.seed, "presence-filter"));
    const std::set<std::string> retained(pf.retained.begin(), pf.retained.end());
    std::vector<FoodRecord> clean_foods;
    for (const auto& f : foods) {
        if (retained.count(f.food_code)) clean_foods.push_back(f);
    }
    std::string pf_csv = io::csv_row({"food_code", "lower_bound", "retained"});
    for (const auto& [code, lb] : pf.lower_bounds) {
        pf_csv += io::csv_row({code, io::fmt_double(lb), retained.count(code) ? "1" : "0"});
    }

    run.write("foods_clean.csv", io::foods_to_csv(clean_foods));
    run.write("meals_clean.csv", io::meals_to_csv(pf.meals));
    run.write("labels_clean.csv", io::labels_to_csv(pf.meals));
    run.write("lof_scores.csv", lof_csv);
    run.write("presence_filter.csv", pf_csv);
    run.finish();
}

void stage_prototype(const PipelineConfig& cfg) {
    StageRun run(Stage::prototype, cfg);
    const auto foods = io::load_foods(run.need("foods_clean.csv"));
    const auto meals = io::load_meals(run.need("meals_clean.csv"));
    const auto res = corpus::aggregate_prototypes(foods, corpus::food_usage(meals), cfg.prototype.config);
    std::string map_csv = io::csv_row({"food_code", "prototype_code", "usage", "relative_error", "cosine"});
    for (const auto& a : res.report.assignments) {
        map_csv += io::csv_row({a.food_code, a.prototype_code, io::fmt_double(a.usage), io::fmt_double(a.relative_error),
                                io::fmt_double(a.cosine)});
    }
    ojson rep;
    rep["mass_coverage"] = res.report.mass_coverage;
    rep["wmare"] = res.report.wmare;
    rep["min_cosine"] = res.report.min_cosine;
    rep["foods"] = foods.size();
    rep["prototypes"] = res.prototypes.size();
    rep["prototypes_per_subcategory"] = res.report.prototypes_per_subcategory;
    run.write("prototype_map.csv", map_csv);
    run.write("prototype_foods.csv", io::foods_to_csv(res.prototypes));
    run.write("prototype_report.json", rep.dump(2) + "\n");
    run.finish();
}

void stage_cluster_profile(const PipelineConfig& cfg) {
    StageRun run(Stage::cluster_profile, cfg);
    auto w = load_working(run, cfg, "labels_clean.csv");
    const Matrix fm = features::feature_matrix(w.meals, w.foods);
    std::vector<MealType> types;
    for (const auto& m : w.meals) types.push_back(m.meal_type);
    const auto blocks = features::standardize(fm, types);

    std::vector<clusters::ClusterProfile> profiles;
    for (const auto& b : blocks) {
        std::vector<int> labels;
        for (std::size_t r : b.rows) labels.push_back(w.meals[r].cluster_label.value_or(clusters::kNoise));
        const bool any = std::any_of(labels.begin(), labels.end(), [](int l) { return l != clusters::kNoise; });
        if (!any) continue;
        const auto merged = clusters::merge_small_clusters(labels, b.z, cfg.cluster.params(b.meal_type).min_cluster_size,
                                                           cfg.cluster.merge_cosine);
        for (std::size_t i = 0; i < b.rows.size(); ++i) {
            auto& m = w.meals[b.rows[i]];
            if (merged[i] == clusters::kNoise) m.cluster_label.reset();
            else m.cluster_label = merged[i];
        }
        auto p = clusters::profile_clusters(merged, b, cfg.cluster);
        profiles.insert(profiles.end(), p.begin(), p.end());
    }
    run.write("features.csv", features::features_to_csv(w.meals, fm));
    run.write("labels_merged.csv", io::labels_to_csv(w.meals));
    run.write("cluster_profile.csv", clusters::profiles_to_csv(profiles));
    run.finish();
}

void stage_fit_sampler(const PipelineConfig& cfg) {
    StageRun run(Stage::fit_sampler, cfg);
    const auto w = load_working(run, cfg, "labels_merged.csv");
    const auto models = generator::fit_all_presence(w.meals, w.foods);
    if (models.empty()) throw ValidationError("fit-sampler: no labelled clusters to fit");
    run.write("sampler_export.json", generator::models_to_export_json(models));
    run.finish();
}

std::string generated_id(MealType t, int cluster, std::size_t i) {
    std::ostringstream os;
    os << "G-" << to_string(t) << "-c" << cluster << "-" << std::setw(4) << std::setfill('0') << i;
    return os.str();
}

void stage_generate(const PipelineConfig& cfg) {
    StageRun run(Stage::generate, cfg);
    const auto w = load_working(run, cfg, "");
    fs::path src;
    if (!cfg.paths.probability_export.empty()) {
        src = cfg.paths.probability_export;
        run.require(src);
    } else {
        src = run.need("sampler_export.json");
    }
    const auto models = generator::load_probability_export(src, w.foods);
    std::string out = io::csv_row({"meal_id", "meal_type", "cluster_id", "food_code"});
    std::string failures = io::csv_row({"meal_type", "cluster_id", "error"});
    for (const auto& m : models) {
        const std::string tag = "generate:" + meal_type_name(m.meal_type) + ":" + std::to_string(m.cluster_id);
        try {
            for (std::size_t i = 0; i < cfg.generate.meals_per_cluster; ++i) {
                const auto codes =
                    generator::sample_combination(m, w.foods, cfg.generate.constraints, derive_seed(cfg.seed, tag, i));
                const auto id = generated_id(m.meal_type, m.cluster_id, i);
                for (const auto& c : codes) {
                    out += io::csv_row({id, meal_type_name(m.meal_type), std::to_string(m.cluster_id), c});
                }
            }
        } catch (const InfeasibleError& e) {
            failures += io::csv_row({meal_type_name(m.meal_type), std::to_string(m.cluster_id), e.what()});
        }
    }
    run.write("generated_combinations.csv", out);
    run.write("generation_failures.csv", failures);
    run.finish();
}

struct Combination {
    std::string meal_id;
    MealType meal_type = MealType::breakfast;
    int cluster_id = 0;
    std::vector<std::string> codes;
};

std::vector<Combination> load_combinations(const fs::path& p) {
    const auto t = io::read_csv(p);
    const auto ci = t.column("meal_id"), ct = t.column("meal_type"), cc = t.column("cluster_id"),
               cf = t.column("food_code");
    std::vector<Combination> out;
    for (const auto& r : t.rows) {
        if (out.empty() || out.back().meal_id != r[ci]) {
            out.push_back({r[ci], meal_type_from_string(r[ct]), static_cast<int>(io::parse_int(r[cc], "cluster_id")), {}});
        }
        out.back().codes.push_back(r[cf]);
    }
    return out;
}

void stage_portion(const PipelineConfig& cfg) {
    StageRun run(Stage::portion, cfg);
    const auto w = load_working(run, cfg, "");
    const auto combos = load_combinations(run.need("generated_combinations.csv"));
    const auto profile = RdiProfile::standard();
    std::vector<portioner::PortionedMeal> out;
    std::string failures = io::csv_row({"meal_id", "error"});
    for (const auto& c : combos) {
        std::vector<FoodRecord> foods;
        for (const auto& code : c.codes) foods.push_back(w.foods.at(code));
        try {
            auto sol = portioner::solve_portions(foods, profile, c.meal_type, cfg.portion,
                                                 derive_seed(cfg.seed, "portion:" + c.meal_id), {}, cfg.solver);
            sol = portioner::reproject(sol, foods, c.meal_type, cfg.portion, profile, {}, cfg.solver);
            out.push_back({c.meal_id, c.meal_type, c.cluster_id, std::move(sol)});
        } catch (const InfeasibleError& e) {
            failures += io::csv_row({c.meal_id, e.what()});
        }
    }
    run.write("portioned_meals.json", portioner::portioned_meals_to_json(out));
    run.write("portion_failures.csv", failures);
    run.finish();
}

std::vector<Meal> portioned_as_meals(const std::vector<portioner::PortionedMeal>& pm) {
    std::vector<Meal> out;
    for (const auto& p : pm) {
        Meal m;
        m.meal_id = p.meal_id;
        m.meal_type = p.meal_type;
        m.cluster_label = p.cluster_id;
        for (std::size_t i = 0; i < p.solution.food_codes.size(); ++i) {
            m.items.push_back({p.solution.food_codes[i], p.solution.grams[i]});
        }
        out.push_back(std::move(m));
    }
    return out;
}

std::vector<Meal> load_generated(StageRun& run) {
    return portioned_as_meals(portioner::portioned_meals_from_json(io::read_file(run.need("portioned_meals.json"))));
}

void stage_evaluate(const PipelineConfig& cfg) {
    StageRun run(Stage::evaluate, cfg);
    const auto w = load_working(run, cfg, "labels_merged.csv");
    const auto generated = load_generated(run);
    const auto profile = RdiProfile::standard();
    const auto specs = metrics::default_metric_specs(profile);

    std::map<std::pair<MealType, int>, metrics::CohortValues> cohorts;
    std::string per_meal = "meal_id,cohort,meal_type,cluster_id";
    for (const auto& s : specs) per_meal += "," + s.name;
    per_meal += "\n";
    const auto add = [&](const Meal& m, bool is_gen) {
        if (!m.cluster_label) return;
        const auto mm = metrics::meal_metrics(m, w.foods, profile);
        const auto vals = metrics::metric_values(mm, meal_targets(profile, m.meal_type), profile);
        auto& c = cohorts[{m.meal_type, *m.cluster_label}];
        c.cluster_id = *m.cluster_label;
        auto& dst = is_gen ? c.generated : c.real;
        if (dst.empty()) dst.resize(specs.size());
        std::vector<std::string> row = {m.meal_id, is_gen ? "generated" : "real", meal_type_name(m.meal_type),
                                        std::to_string(*m.cluster_label)};
        for (std::size_t j = 0; j < vals.size(); ++j) {
            dst[j].push_back(vals[j]);
            row.push_back(io::fmt_double(vals[j]));
        }
        per_meal += io::csv_row(row);
    };
    for (const auto& m : w.meals) add(m, false);
    for (const auto& m : generated) add(m, true);

    std::vector<metrics::CohortValues> list;
    for (auto& [_, c] : cohorts) {
        if (c.generated.empty()) c.generated.resize(specs.size());
        if (c.real.empty()) c.real.resize(specs.size());
        list.push_back(std::move(c));
    }
    metrics::CompareConfig cc;
    cc.resamples = cfg.evaluate.resamples;
    cc.level = cfg.evaluate.level;
    cc.fdr_q = cfg.evaluate.fdr_q;
    cc.seed = derive_seed(cfg.seed, "evaluate");
    const auto rows = metrics::compare_cohorts(list, specs, cc);

    // Median rdi_deviation reduction per cluster and pooled.
    ojson gate;
    ojson per_cluster = ojson::array();
    std::vector<double> reductions, all_gen, all_real;
    for (const auto& c : list) {
        const auto& g = c.generated[0];
        const auto& r = c.real[0];
        if (g.empty() || r.empty()) continue;
        const double red = metrics::median_reduction(g, r);
        reductions.push_back(red);
        all_gen.insert(all_gen.end(), g.begin(), g.end());
        all_real.insert(all_real.end(), r.begin(), r.end());
        per_cluster.push_back({{"cluster_id", c.cluster_id},
                               {"n_generated", g.size()},
                               {"n_real", r.size()},
                               {"median_generated", stats::median(g)},
                               {"median_real", stats::median(r)},
                               {"reduction", red}});
    }
    gate["metric"] = "rdi_deviation";
    gate["clusters"] = per_cluster;
    gate["median_cluster_reduction"] = reductions.empty() ? 0.0 : stats::median(reductions);
    gate["pooled_reduction"] = all_gen.empty() ? 0.0 : metrics::median_reduction(all_gen, all_real);
    std::size_t improved = 0, compared = 0;
    for (const auto& r : rows) {
        if (r.skipped) continue;
        ++compared;
        if (r.improved) ++improved;
    }
    gate["comparisons"] = compared;
    gate["improved"] = improved;

    run.write("meal_metrics.csv", per_meal);
    run.write("evaluation_report.csv", metrics::report_to_csv(rows));
    run.write("evaluation_summary.csv", metrics::summary_to_csv(rows));
    run.write("evaluation_gate.json", gate.dump(2) + "\n");
    run.finish();
}

void stage_price(const PipelineConfig& cfg) {
    StageRun run(Stage::price, cfg);
    const auto w = load_working(run, cfg, "labels_merged.csv");
    const auto generated = load_generated(run);
    run.require(cfg.paths.pricebook);
    const auto book = pricing::load_price_book(cfg.paths.pricebook);
    std::string out = io::csv_row({"meal_id", "cohort", "meal_type", "cluster_id", "cost"});
    const auto add = [&](const Meal& m, const char* cohort) {
        out += io::csv_row({m.meal_id, cohort, meal_type_name(m.meal_type),
                            m.cluster_label ? std::to_string(*m.cluster_label) : "",
                            io::fmt_double(pricing::meal_cost(m, w.foods, book))});
    };
    for (const auto& m : w.meals) add(m, "real");
    for (const auto& m : generated) add(m, "generated");
    run.write("meal_costs.csv", out);
    run.finish();
}

std::string join_codes(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& c : v) s += (s.empty() ? "" : ";") + c;
    return s;
}

std::vector<std::string> split_codes(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start < s.size()) {
        const auto end = s.find(';', start);
        out.push_back(s.substr(start, end == std::string::npos ? std::string::npos : end - start));
        if (end == std::string::npos) break;
        start = end + 1;
    }
    return out;
}

// Source meals are labelled real meals; the pool holds the generated meals.
void stage_substitute(const PipelineConfig& cfg) {
    StageRun run(Stage::substitute, cfg);
    const auto w = load_working(run, cfg, "labels_merged.csv");
    auto generated = load_generated(run);
    run.require(cfg.paths.pricebook);
    const auto book = pricing::load_price_book(cfg.paths.pricebook);
    substitution::Context ctx;
    ctx.foods = &w.foods;
    ctx.book = &book;
    const substitution::CandidateIndex index(ctx, std::move(generated), w.meals);

    std::string out = io::csv_row({"meal_id", "candidate_id", "is_swap", "k_sub", "added", "removed", "H", "S", "CI",
                                   "cost_sub", "E", "portion_shift_pct", "similarity", "within_category",
                                   "adds_mixed_dish"});
    for (const auto& m : w.meals) {
        if (!m.cluster_label) continue;
        for (const auto& c : substitution::retrieve_candidates(m, index, cfg.retrieval)) {
            out += io::csv_row({m.meal_id, c.candidate_id, c.is_swap ? "1" : "0", std::to_string(c.k_sub),
                                join_codes(c.added), join_codes(c.removed), io::fmt_double(c.health),
                                io::fmt_double(c.saving), io::fmt_double(c.increase), io::fmt_double(c.cost_sub),
                                io::fmt_double(c.effort), io::fmt_double(c.portion_shift_pct),
                                io::fmt_double(c.similarity), c.within_category ? "1" : "0",
                                c.adds_mixed_dish ? "1" : "0"});
        }
    }
    run.write("candidates.csv", out);
    run.finish();
}

void stage_sweep(const PipelineConfig& cfg) {
    StageRun run(Stage::sweep, cfg);
    const auto w = load_working(run, cfg, "labels_merged.csv");
    const auto t = io::read_csv(run.need("candidates.csv"));
    std::map<std::string, std::vector<substitution::Candidate>> by_meal;
    const auto col = [&](const char* n) { return t.column(n); };
    const auto c_id = col("meal_id"), c_cand = col("candidate_id"), c_swap = col("is_swap"), c_k = col("k_sub"),
               c_add = col("added"), c_rem = col("removed"), c_h = col("H"), c_s = col("S"), c_ci = col("CI"),
               c_cost = col("cost_sub"), c_e = col("E"), c_ps = col("portion_shift_pct"), c_sim = col("similarity"),
               c_w = col("within_category"), c_mix = col("adds_mixed_dish");
    for (const auto& r : t.rows) {
        substitution::Candidate c;
        c.source_meal_id = r[c_id];
        c.candidate_id = r[c_cand];
        c.is_swap = io::parse_bool(r[c_swap]);
        c.k_sub = static_cast<int>(io::parse_int(r[c_k], "k_sub"));
        c.added = split_codes(r[c_add]);
        c.removed = split_codes(r[c_rem]);
        c.health = io::parse_double(r[c_h], "H");
        c.saving = io::parse_double(r[c_s], "S");
        c.increase = io::parse_double(r[c_ci], "CI");
        c.cost_sub = io::parse_double(r[c_cost], "cost_sub");
        c.effort = io::parse_double(r[c_e], "E");
        c.portion_shift_pct = io::parse_double(r[c_ps], "portion_shift_pct");
        c.similarity = io::parse_double(r[c_sim], "similarity");
        c.within_category = io::parse_bool(r[c_w]);
        c.adds_mixed_dish = io::parse_bool(r[c_mix]);
        by_meal[c.source_meal_id].push_back(std::move(c));
    }
    std::vector<Meal> sources;
    std::vector<std::vector<substitution::Candidate>> cands;
    for (const auto& m : w.meals) {
        if (!m.cluster_label) continue;
        sources.push_back(m);
        auto it = by_meal.find(m.meal_id);
        cands.push_back(it == by_meal.end() ? std::vector<substitution::Candidate>{} : std::move(it->second));
    }
    substitution::SweepConfig sc;
    sc.theta_grid = cfg.sweep.theta_grid;
    sc.k_subs = cfg.sweep.k_subs;
    sc.resamples = cfg.sweep.resamples;
    sc.level = cfg.sweep.level;
    sc.seed = derive_seed(cfg.seed, "sweep");
    sc.params = cfg.tradeoff;
    const auto res = substitution::sweep_theta(sources, cands, sc);
    if (res.empty) std::fprintf(stderr, "sweep: no winners at any theta; frontier is empty\n");
    run.write("substitutions.csv", substitution::substitutions_to_csv(res.winners));
    run.write("frontier.csv", substitution::frontier_to_csv(res.frontier));
    run.write("frontier_all.csv", substitution::frontier_to_csv(res.frontier_all));
    run.write("transitions.csv", substitution::transitions_to_csv(res.winners, w.foods));
    run.finish();
}

void stage_report(const PipelineConfig& cfg) {
    StageRun run(Stage::report, cfg);
    ojson rep;
    rep["gate"] = ojson::parse(io::read_file(run.need("evaluation_gate.json")));
    run.need("evaluation_report.csv");
    run.need("substitutions.csv");
    const auto frontier = io::read_csv(run.need("frontier.csv"));
    ojson knees = ojson::array();
    const auto c_t = frontier.column("theta"), c_k = frontier.column("k_sub"), c_h = frontier.column("median_H"),
               c_s = frontier.column("median_S"), c_knee = frontier.column("knee_flag");
    for (const auto& r : frontier.rows) {
        if (!io::parse_bool(r[c_knee])) continue;
        knees.push_back({{"k_sub", io::parse_int(r[c_k], "k_sub")},
                         {"theta", io::parse_double(r[c_t], "theta")},
                         {"median_H", io::parse_double(r[c_h], "median_H")},
                         {"median_S", io::parse_double(r[c_s], "median_S")}});
    }
    rep["knees"] = knees;
    ojson artifacts = ojson::object();
    for (Stage s : kAllStages) {
        if (s == Stage::report || (s == Stage::prototype && !fs::exists(run.out("prototype_map.csv")))) continue;
        for (const auto& name : stage_outputs(s)) {
            const auto p = run.out(name);
            artifacts[name] = fs::exists(p) ? ojson(fnv1a_hex(io::read_file(p))) : ojson(nullptr);
        }
    }
    rep["artifacts"] = artifacts;
    run.write("report.json", rep.dump(2) + "\n");
    run.finish();
}

}  // namespace

void run_stage(Stage s, const PipelineConfig& cfg) {
    cfg.validate();
    switch (s) {
        case Stage::ingest: return stage_ingest(cfg);
        case Stage::prototype: return stage_prototype(cfg);
        case Stage::cluster_profile: return stage_cluster_profile(cfg);
        case Stage::fit_sampler: return stage_fit_sampler(cfg);
        case Stage::generate: return stage_generate(cfg);
        case Stage::portion: return stage_portion(cfg);
        case Stage::evaluate: return stage_evaluate(cfg);
        case Stage::price: return stage_price(cfg);
        case Stage::substitute: return stage_substitute(cfg);
        case Stage::sweep: return stage_sweep(cfg);
        case Stage::report: return stage_report(cfg);
    }
}

void run_all(const PipelineConfig& cfg) {
    for (Stage s : kAllStages) {
        if (s == Stage::prototype && !cfg.prototype.apply) continue;
        run_stage(s, cfg);
    }
}

}  // namespace mealeng::pipeline
