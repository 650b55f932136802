#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mealeng/errors.hpp"
#include "mealeng/random.hpp"
#include "mealeng/substitution.hpp"

using namespace mealeng;
namespace sb = mealeng::substitution;

namespace {

sb::Candidate cand(std::string id, double h, double s, double ci = 0.0, bool within = true, bool mixed = false,
                   double shift = 0.0) {
    sb::Candidate c;
    c.candidate_id = std::move(id);
    c.health = h;
    c.saving = s;
    c.increase = ci;
    c.within_category = within;
    c.adds_mixed_dish = mixed;
    c.portion_shift_pct = shift;
    c.k_sub = 1;
    return c;
}

sb::TradeoffParams at(double theta) {
    sb::TradeoffParams p;
    p.theta = theta;
    return p;
}

FoodRecord food(std::string code, std::string main, double kcal, bool beverage = false) {
    FoodRecord f;
    f.food_code = std::move(code);
    f.name = f.food_code;
    f.main_category = std::move(main);
    f.sub_category = f.main_category;
    f.is_beverage = beverage;
    f.is_solid = !beverage;
    f.nutrients_per_100g[idx(Nutrient::energy)] = kcal;
    f.nutrients_per_100g[idx(Nutrient::protein)] = kcal / 40.0;
    f.nutrients_per_100g[idx(Nutrient::carbohydrate)] = kcal / 8.0;
    return f;
}

}  // namespace

TEST_CASE("meal similarity") {
    const Meal a{"a", MealType::lunch, {{"A", 100}, {"B", 100}}, {}};
    const Meal b{"b", MealType::lunch, {{"B", 100}, {"C", 100}}, {}};
    const Meal c{"c", MealType::lunch, {{"D", 50}}, {}};
    CHECK(sb::meal_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sb::meal_similarity(a, c) == 0.0);
    CHECK(sb::meal_similarity(a, b) == doctest::Approx(0.7 / 3.0 + 0.15).epsilon(1e-12));
    bool degenerate = false;
    const Meal e{"e", MealType::lunch, {}, {}};
    CHECK(sb::meal_similarity(e, e, &degenerate) == 0.0);
    CHECK(degenerate);
}

TEST_CASE("swap effort") {
    const Meal m{"m", MealType::lunch, {{"A", 100}, {"B", 100}, {"C", 100}, {"D", 100}}, {}};
    CHECK(sb::swap_effort(m, m, 1) == 0.0);
    const Meal all{"x", MealType::lunch, {{"E", 100}, {"F", 100}, {"G", 100}, {"H", 100}}, {}};
    CHECK(sb::swap_effort(m, all, 4) == doctest::Approx(1.0));
    Meal one = m;
    one.items[0].food_code = "Z";
    CHECK(sb::swap_effort(m, one, 1) == doctest::Approx(1.0));
    // half-step portion change with two allowed edits
    Meal shift = m;
    shift.items[0].grams = 150;
    CHECK(sb::swap_effort(m, shift, 2) == doctest::Approx(0.5 * std::min(1.0, (50.0 / 400.0) / 0.5)));
    CHECK_THROWS_AS(sb::swap_effort(m, m, 0), ValidationError);
}

TEST_CASE("value score") {
    CHECK(sb::value_score(cand("x", 10, 5), at(1.0)) == doctest::Approx(7.5));
    CHECK(sb::value_score(cand("x", 10, 5), at(0.0)) == doctest::Approx(5.0));
    CHECK(sb::value_score(cand("x", 10, 0, 4), at(1.0)) == doctest::Approx(3.0));
    auto p = at(1.0);
    p.alt_score_lambda = 0.5;
    auto c = cand("x", 10, 4);
    c.effort = 1.0;
    CHECK(sb::value_score(c, p) == doctest::Approx(5.0 + 2.0 - 0.5));
}

TEST_CASE("select winner: the three rules") {
    const auto p = at(1.0);  // V = (H + S) / 2
    // mixed-dish challenger needs >= 11.25 and >= 10.5
    auto w = sb::select_winner({cand("within", 18, 0), cand("cross", 22, 0, 0, false, true)}, p);
    REQUIRE(w);
    CHECK(w->candidate_id == "within");
    w = sb::select_winner({cand("within", 18, 0), cand("cross", 22.5, 0, 0, false, true)}, p);
    CHECK(w->candidate_id == "cross");
    // other cross candidates need a 20% uplift: 11 >= 10.8
    w = sb::select_winner({cand("within", 18, 0), cand("cross", 22, 0, 0, false, false)}, p);
    CHECK(w->candidate_id == "cross");
    w = sb::select_winner({cand("within", 18, 0), cand("cross", 21.5, 0, 0, false, false)}, p);
    CHECK(w->candidate_id == "within");
    // equal V: smaller portion shift
    w = sb::select_winner({cand("b", 10, 0, 0, true, false, 8), cand("a", 10, 0, 0, true, false, 5)}, p);
    CHECK(w->candidate_id == "a");
    // no within candidates: pooled best
    w = sb::select_winner({cand("c1", 4, 0, 0, false), cand("c2", 6, 0, 0, false)}, p);
    CHECK(w->candidate_id == "c2");
    CHECK_FALSE(sb::select_winner({}, p));
}

TEST_CASE("admissibility filters") {
    auto p = at(1.0);
    CHECK(sb::admissible({cand("neg", -1, 0)}, p).empty());
    CHECK(sb::admissible({cand("v<0", 0, 0, 5)}, p).empty());
    p.no_cost_increase = true;
    CHECK(sb::admissible({cand("ci", 10, 0, 1)}, p).empty());
    p.no_cost_increase = false;
    auto c = cand("cost", 10, 0);
    c.cost_sub = 9.0;
    p.budget_cap = 8.0;
    CHECK(sb::admissible({c}, p).empty());
    p.budget_cap = 9.0;
    CHECK(sb::admissible({c}, p).size() == 1);
}

TEST_CASE("winner crosses from savings to health at theta 1") {
    const std::vector<sb::Candidate> pool = {cand("health", 10, 0), cand("saving", 0, 10)};
    for (double th : sb::kDefaultThetaGrid) {
        const auto w = sb::pooled_argmax(pool, at(th));
        REQUIRE(w);
        if (th < 1.0) CHECK(w->candidate_id == "saving");
        else CHECK(w->candidate_id == "health");  // tie at 1 goes to larger H
    }
}

TEST_CASE("pooled argmax is monotone in theta") {
    Rng rng(17);
    for (int pool_i = 0; pool_i < 100; ++pool_i) {
        std::vector<sb::Candidate> pool;
        for (int i = 0; i < 12; ++i) {
            const bool dearer = rng.below(3) == 0;
            pool.push_back(cand("c" + std::to_string(i), rng.uniform(0, 20), dearer ? 0 : rng.uniform(0, 30),
                                dearer ? rng.uniform(0, 10) : 0, rng.below(2), false, rng.uniform(0, 50)));
        }
        double prev_hc = -1e300, prev_s = 1e300;
        for (double th : sb::kDefaultThetaGrid) {
            const auto w = sb::pooled_argmax(pool, at(th));
            if (!w) continue;
            CHECK(w->health - w->increase >= prev_hc - 1e-12);
            CHECK(w->saving <= prev_s + 1e-12);
            prev_hc = w->health - w->increase;
            prev_s = w->saving;
        }
    }
}

TEST_CASE("knee index") {
    CHECK(sb::knee_index({0, 1}, {0, 1}) == 0);
    CHECK(sb::knee_index({0, 0, 0}, {1, 1, 1}) == 0);
    CHECK(sb::knee_index({0, 1, 2, 3}, {0, 3, 3.5, 4}) == 1);
}

TEST_CASE("sweep: single candidate gives a flat frontier") {
    const Meal m{"m", MealType::lunch, {{"A", 100}}, {}};
    sb::SweepConfig cfg;
    cfg.k_subs = {1};
    cfg.resamples = 200;
    const auto r = sb::sweep_theta({m}, {{cand("only", 5, 5)}}, cfg);
    CHECK_FALSE(r.empty);
    REQUIRE(r.frontier.size() == sb::kDefaultThetaGrid.size());
    for (const auto& fp : r.frontier) {
        CHECK(fp.median_h == 5.0);
        CHECK(fp.median_s == 5.0);
        CHECK(fp.knee == (fp.theta == 0.0));
    }
    const auto again = sb::sweep_theta({m}, {{cand("only", 5, 5)}}, cfg);
    CHECK(sb::frontier_to_csv(r.frontier) == sb::frontier_to_csv(again.frontier));
    CHECK(sb::sweep_theta({m}, {{}}, cfg).empty);
}

TEST_CASE("sweep at theta 0 picks the best saving") {
    const Meal m{"m", MealType::lunch, {{"A", 100}}, {}};
    sb::SweepConfig cfg;
    cfg.theta_grid = {0.0};
    cfg.k_subs = {1};
    cfg.resamples = 100;
    const auto r = sb::sweep_theta({m}, {{cand("h", 30, 1), cand("s", 1, 12), cand("mid", 10, 8)}}, cfg);
    REQUIRE(r.winners.size() == 1);
    CHECK(r.winners[0].winner.candidate_id == "s");
}

TEST_CASE("retrieval: energy band, k_sub accounting and swaps") {
    const FoodTable foods({food("A", "grains", 200), food("A2", "grains", 200), food("B", "vegetables", 30),
                           food("C", "vegetables", 40), food("D", "fruits", 50), food("W", "beverages", 40, true)});
    pricing::PriceBook book;
    for (const auto& f : foods.foods()) book.fallback_per_100g[f.food_code] = 1.0;
    sb::Context ctx;
    ctx.foods = &foods;
    ctx.book = &book;
    const Meal src{"src", MealType::lunch, {{"A", 100}, {"B", 100}}, {}};  // 230 kcal
    const Meal far{"far", MealType::lunch, {{"A", 100}, {"C", 109.5}}, {}};  // +6%
    const Meal near{"near", MealType::lunch, {{"A", 100}, {"C", 80}, {"D", 2}}, {}};  // +1.3%
    const Meal drink{"drink", MealType::lunch, {{"A", 100}, {"W", 75}}, {}};
    const sb::CandidateIndex index(ctx, {far, near, drink}, {Meal{"v", MealType::lunch, {{"A2", 10}}, {}}});
    const auto cands = sb::retrieve_candidates(src, index);
    const auto find = [&](const std::string& id) {
        return std::find_if(cands.begin(), cands.end(), [&](const auto& c) { return c.candidate_id == id; });
    };
    CHECK(find("far") == cands.end());
    CHECK(find("drink") == cands.end());
    const bool near_ok = ctx.deviation(src) - ctx.deviation(near) >= 0.0;
    CHECK((find("near") != cands.end()) == near_ok);
    if (near_ok) {
        const auto& c = *find("near");
        CHECK(c.k_sub == 2);
        CHECK(c.added == std::vector<std::string>{"C", "D"});
        CHECK(c.removed == std::vector<std::string>{"B"});
        CHECK_FALSE(c.within_category);
        const auto k1 = sb::with_k_sub(cands, 1);
        CHECK(std::none_of(k1.begin(), k1.end(), [](const auto& x) { return x.candidate_id == "near"; }));
    }
    const auto swap = find("swap:A>A2");
    REQUIRE(swap != cands.end());
    CHECK(swap->within_category);
    CHECK(swap->k_sub == 1);
    CHECK(swap->health == doctest::Approx(0.0));
    CHECK(swap->portion_shift_pct == doctest::Approx(100.0));
    for (const auto& c : cands) {
        CHECK(c.k_sub == static_cast<int>(std::max(c.added.size(), c.removed.size())));
        CHECK(c.health >= 0.0);
        CHECK((c.saving == 0.0 || c.increase == 0.0));
    }
}
