#pragma once
// Minimal-change meal substitution: retrieval, edit accounting, scoring,
// two-stage winner selection and the theta sweep.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mealeng/food.hpp"
#include "mealeng/pricing.hpp"
#include "mealeng/rdi.hpp"

namespace mealeng::substitution {

// 0.7 * presence Jaccard + 0.3 * cosine of gram vectors over the union.
// Two empty meals give 0 and set *degenerate.
double meal_similarity(const Meal& a, const Meal& b, bool* degenerate = nullptr);

struct Candidate {
    std::string source_meal_id;
    std::string candidate_id;  // pool meal id, or "swap:<removed>><added>"
    bool is_swap = false;
    Meal meal;                 // the substitute
    std::vector<std::string> added;
    std::vector<std::string> removed;
    int k_sub = 0;
    double similarity = 0.0;
    double health = 0.0;    // H, percentage points
    double saving = 0.0;    // S, percent
    double increase = 0.0;  // CI, percent
    double cost_sub = 0.0;
    double effort = 0.0;    // E at k_allowed = k_sub
    double portion_shift_pct = 0.0;
    bool within_category = false;
    bool adds_mixed_dish = false;
};

struct TradeoffParams {
    double theta = 1.0;
    double effort_alpha = 0.5;
    double cross_margin_alpha = 0.25;
    double cross_buffer_beta = 1.5;
    double cross_uplift = 0.20;
    std::optional<double> alt_score_lambda;  // V = l*H + (1-l)*S - alpha*E when set
    std::optional<double> budget_cap;        // maximum substitute cost
    bool no_cost_increase = false;

    double weight() const { return theta / (1.0 + theta); }
    void validate() const;
};

struct RetrievalConfig {
    std::size_t k_neighbors = 20;
    double energy_tolerance = 0.05;
    int item_count_tolerance = 1;
    bool single_item_swaps = true;
    bool exclude_beverage_edits = true;
    std::size_t max_k_sub = 3;
};

// Foods, prices and targets shared by every substitution computation.
struct Context {
    const FoodTable* foods = nullptr;
    const pricing::PriceBook* book = nullptr;
    RdiProfile profile = RdiProfile::standard();
    MealEnergyPlan plan{};

    double deviation(const Meal& m) const;
    double energy(const Meal& m) const;
    double cost(const Meal& m) const;
};

// Pool meals grouped by type, with energies precomputed, plus the per-type
// vocabulary used for single-item swaps (foods seen in pool or extra meals).
class CandidateIndex {
public:
    CandidateIndex(const Context& ctx, std::vector<Meal> pool, const std::vector<Meal>& vocabulary_meals = {});

    const std::vector<Meal>& pool(MealType t) const { return pool_[static_cast<std::size_t>(t)]; }
    const std::vector<double>& energies(MealType t) const { return energy_[static_cast<std::size_t>(t)]; }
    const std::vector<std::string>& vocabulary(MealType t) const { return vocab_[static_cast<std::size_t>(t)]; }
    const Context& context() const { return ctx_; }

private:
    Context ctx_;
    std::array<std::vector<Meal>, 3> pool_;
    std::array<std::vector<double>, 3> energy_;
    std::array<std::vector<std::string>, 3> vocab_;
};

// L1 gram change between two meals over the union of their foods.
double gram_l1(const Meal& a, const Meal& b);

// 0.5 * E_portion + 0.5 * E_composition with baseline_p(k) = k / item count.
double swap_effort(const Meal& original, const Meal& candidate, int k_allowed, double alpha = 0.5);

// Fills edit sets, k_sub, H, S, CI, effort and category flags.
Candidate score_candidate(const Meal& source, const Meal& substitute, std::string candidate_id, bool is_swap,
                          const Context& ctx, double source_deviation, double source_cost);

// Neighbors within the energy and item-count bands (top k by similarity),
// then single-item same-main-category swaps with the grams reassigned.
// Candidates editing beverages (when excluded), with negative health change,
// or with k_sub outside [1, max_k_sub] (portion-only: 0 allowed) are dropped.
std::vector<Candidate> retrieve_candidates(const Meal& meal, const CandidateIndex& index,
                                           const RetrievalConfig& cfg = {});

// Candidates with exactly k_sub edits.
std::vector<Candidate> with_k_sub(const std::vector<Candidate>& cands, int k_sub);
// Candidates with k_sub <= k_max; portion-only edits (k_sub 0) included.
std::vector<Candidate> up_to_k_sub(const std::vector<Candidate>& cands, int k_max);

double value_score(const Candidate& c, const TradeoffParams& p);

// Drops V < 0 and candidates breaking the budget or no-cost-increase rules.
std::vector<Candidate> admissible(const std::vector<Candidate>& cands, const TradeoffParams& p);

// True when a ranks ahead of b: higher V, then smaller portion shift, larger
// H, smaller S, then candidate id.
bool ranks_before(const Candidate& a, double va, const Candidate& b, double vb);

// Two-stage selection over admissible candidates.
std::optional<Candidate> select_winner(const std::vector<Candidate>& cands, const TradeoffParams& p);

// Best V over admissible candidates with no category stages.
std::optional<Candidate> pooled_argmax(const std::vector<Candidate>& cands, const TradeoffParams& p);

inline const std::vector<double> kDefaultThetaGrid = {0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 10.0};

struct SweepConfig {
    std::vector<double> theta_grid = kDefaultThetaGrid;
    std::vector<int> k_subs = {1, 2, 3};
    std::size_t resamples = 1000;
    double level = 0.95;
    std::uint64_t seed = 0;
    TradeoffParams params{};  // theta overwritten per grid point
};

struct WinnerRow {
    std::string meal_id;
    double theta = 0.0;
    int k_sub = 0;
    Candidate winner;
    double value = 0.0;
};

struct FrontierPoint {
    double theta = 0.0;
    int k_sub = 0;
    std::size_t n_meals = 0;    // meals contributing
    std::size_t n_winners = 0;
    double median_h = 0.0;
    double h_lo = 0.0, h_hi = 0.0;
    double median_s = 0.0;
    double s_lo = 0.0, s_hi = 0.0;
    bool knee = false;
};

struct SweepResult {
    std::vector<WinnerRow> winners;
    std::vector<FrontierPoint> frontier;      // medians over meals with winners
    std::vector<FrontierPoint> frontier_all;  // meals without a winner count as 0
    bool empty = true;                        // no winner anywhere
};

// Index of the point farthest from the chord between the first and last
// (S, H) points; 0 for a degenerate chord, first index on ties.
std::size_t knee_index(const std::vector<double>& s, const std::vector<double>& h);

// `candidates[i]` belong to `meals[i]`.
SweepResult sweep_theta(const std::vector<Meal>& meals, const std::vector<std::vector<Candidate>>& candidates,
                        const SweepConfig& cfg);

std::string substitutions_to_csv(const std::vector<WinnerRow>& rows);
std::string frontier_to_csv(const std::vector<FrontierPoint>& points);
// theta,k_sub,from_main,to_main,count over removed -> added pairs of winners.
std::string transitions_to_csv(const std::vector<WinnerRow>& rows, const FoodTable& foods);

}  // namespace mealeng::substitution
