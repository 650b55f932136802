#pragma once
// Corpus preprocessing: code harmonization, LOF outlier removal, nutrient
// prototype aggregation and bootstrap presence filtering.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mealeng/food.hpp"
#include "mealeng/matrix.hpp"

namespace mealeng::corpus {

// ---------------------------------------------------------------- harmonize

enum class CodeChange { dropped, expanded, consolidated, renumbered, revised };

std::string_view to_string(CodeChange c);
CodeChange code_change_from_string(std::string_view s);  // throws ValidationError

// Dropped and revised entries are retained unchanged; the other reasons
// replace the old code by new_code.
struct CodeMapEntry {
    std::string new_code;
    CodeChange reason = CodeChange::renumbered;

    bool replaces() const {
        return reason != CodeChange::dropped && reason != CodeChange::revised;
    }
};

class CodeMap {
public:
    CodeMap() = default;
    void add(std::string old_code, std::string new_code, CodeChange reason);

    // Terminal code after following replacement edges; throws ConfigError on
    // a cycle.
    std::string resolve(const std::string& code) const;
    void check_acyclic() const;

    const std::map<std::string, CodeMapEntry>& entries() const { return entries_; }

    static CodeMap load_csv(const std::string& path);

private:
    std::map<std::string, CodeMapEntry> entries_;
};

// Every mapped code is replaced by its terminal code and duplicate codes
// within a meal are merged with grams summed.
std::vector<Meal> apply_code_harmonization(const std::vector<Meal>& meals, const CodeMap& map);

// ---------------------------------------------------------------------- LOF

enum class LofInput { presence, grams };

struct LofConfig {
    std::size_t neighborhood_k = 20;
    double contamination = 0.003;
    LofInput input = LofInput::presence;
};

struct LofResult {
    std::vector<Meal> kept;
    std::vector<std::string> removed_ids;
    std::vector<double> scores;  // aligned with the input meals
};

// Local outlier factor (reachability distance / local reachability density,
// k-distance neighbourhoods including ties) on Euclidean distance between
// rows of `points`. Mean reachability distances are clamped to 1e-12 so
// duplicate points score 1.
std::vector<double> local_outlier_factor(const Matrix& points, std::size_t k);

// Meals are encoded over the union of their food codes (sorted). Removes the
// ceil(contamination * n) highest scores among meals whose score exceeds 1;
// ties broken by meal id. Throws ValidationError("insufficient meals") when
// n <= k.
LofResult lof_filter(const std::vector<Meal>& meals, const LofConfig& cfg);

Matrix encode_meals(const std::vector<Meal>& meals, LofInput input);

// --------------------------------------------------------------- prototypes

struct PrototypeConfig {
    double aggregation_alpha = 0.10;  // per-food relative error within which a food counts as covered
    std::size_t k_max = 8;
    std::size_t min_subcategory_size = 6;
    double mass_coverage_min = 0.90;
    double wmare_max = 0.07;
    double cosine_floor = 0.70;

    void validate() const;  // throws ConfigError
};

struct PrototypeAssignment {
    std::string food_code;
    std::string prototype_code;
    double usage = 0.0;
    double relative_error = 0.0;  // L1 error / L1 norm in RDI-scaled units
    double cosine = 1.0;
};

struct PrototypeReport {
    double mass_coverage = 1.0;
    double wmare = 0.0;
    double min_cosine = 1.0;
    std::vector<PrototypeAssignment> assignments;  // in input food order
    std::map<std::string, std::size_t> prototypes_per_subcategory;
};

struct PrototypeResult {
    std::map<std::string, std::string> mapping;  // food_code -> prototype_code
    std::vector<FoodRecord> prototypes;          // usage-weighted centroid records
    PrototypeReport report;
};

// Nutrient vector expressed in daily-RDI units; the space used for
// clustering, cosine and relative error.
NutrientVector rdi_scaled(const NutrientVector& v);

// Recomputes coverage / WMARE / cosines for a given mapping and prototype set.
PrototypeReport evaluate_prototypes(const std::vector<FoodRecord>& foods,
                                    const std::map<std::string, double>& usage,
                                    const std::map<std::string, std::string>& mapping,
                                    const std::vector<FoodRecord>& prototypes,
                                    const PrototypeConfig& cfg);

// Per subcategory, usage-weighted centroid clustering with K swept from 1 to
// k_max; the smallest K meeting coverage, WMARE and cosine criteria wins.
// Subcategories below min_subcategory_size get one prototype. The prototype
// code is the code of the highest-usage member. Throws InfeasibleError naming
// the subcategory and criterion when no K works, or when the pooled report
// misses a criterion.
PrototypeResult aggregate_prototypes(const std::vector<FoodRecord>& foods,
                                     const std::map<std::string, double>& usage,
                                     const PrototypeConfig& cfg);

std::map<std::string, double> food_usage(const std::vector<Meal>& meals);

// Rewrites meal codes through the prototype mapping (duplicates merged).
std::vector<Meal> apply_prototypes(const std::vector<Meal>& meals,
                                   const std::map<std::string, std::string>& mapping);

// ---------------------------------------------------------- presence filter

struct PresenceFilterResult {
    std::vector<std::string> retained;  // sorted
    std::vector<std::string> removed;   // sorted
    std::map<std::string, double> lower_bounds;
    std::vector<Meal> meals;            // meals restricted to retained foods; empty meals dropped
};

// Per food, percentile-bootstrap the mean presence over meals; a food is
// retained iff the lower (1 - level) / 2 quantile of resampled means is > 0.
PresenceFilterResult bootstrap_presence_filter(const std::vector<Meal>& meals,
                                               std::size_t resamples, double level,
                                               std::uint64_t seed);

}  // namespace mealeng::corpus
