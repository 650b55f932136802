#include "mealeng/substitution.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mealeng/categories.hpp"
#include "mealeng/errors.hpp"
#include "mealeng/io.hpp"
#include "mealeng/metrics.hpp"
#include "mealeng/random.hpp"
#include "mealeng/stats.hpp"

namespace mealeng::substitution {

namespace {

std::map<std::string, double> gram_map(const Meal& m) {
    std::map<std::string, double> g;
    for (const auto& it : m.items) g[it.food_code] += it.grams;
    return g;
}

std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
        if (!out.empty()) out += ';';
        out += s;
    }
    return out;
}

}  // namespace

double meal_similarity(const Meal& a, const Meal& b, bool* degenerate) {
    const auto ga = gram_map(a);
    const auto gb = gram_map(b);
    if (degenerate) *degenerate = ga.empty() && gb.empty();
    if (ga.empty() && gb.empty()) return 0.0;
    std::set<std::string> uni;
    for (const auto& [c, _] : ga) uni.insert(c);
    for (const auto& [c, _] : gb) uni.insert(c);
    std::size_t inter = 0;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& c : uni) {
        auto ia = ga.find(c);
        auto ib = gb.find(c);
        const double xa = ia == ga.end() ? 0.0 : ia->second;
        const double xb = ib == gb.end() ? 0.0 : ib->second;
        if (ia != ga.end() && ib != gb.end()) ++inter;
        dot += xa * xb;
        na += xa * xa;
        nb += xb * xb;
    }
    const double jaccard = static_cast<double>(inter) / static_cast<double>(uni.size());
    const double cosine = na > 0.0 && nb > 0.0 ? dot / std::sqrt(na * nb) : 0.0;
    return 0.7 * jaccard + 0.3 * cosine;
}

void TradeoffParams::validate() const {
    if (!(theta >= 0.0)) throw ValidationError("theta must be >= 0");
    if (effort_alpha < 0.0 || effort_alpha > 1.0) throw ValidationError("effort_alpha must be in [0,1]");
    if (cross_margin_alpha < 0.0 || cross_buffer_beta < 0.0 || cross_uplift < 0.0) {
        throw ValidationError("cross-category margins must be >= 0");
    }
    if (alt_score_lambda && (*alt_score_lambda < 0.0 || *alt_score_lambda > 1.0)) {
        throw ValidationError("alt_score_lambda must be in [0,1]");
    }
}

double Context::deviation(const Meal& m) const {
    return metrics::rdi_deviation(meal_nutrients(m, *foods), meal_targets(profile, m.meal_type, plan), profile);
}

double Context::energy(const Meal& m) const { return meal_nutrients(m, *foods)[idx(Nutrient::energy)]; }

double Context::cost(const Meal& m) const { return pricing::meal_cost(m, *foods, *book); }

CandidateIndex::CandidateIndex(const Context& ctx, std::vector<Meal> pool, const std::vector<Meal>& vocabulary_meals)
    : ctx_(ctx) {
    if (!ctx.foods || !ctx.book) throw ValidationError("substitution context needs foods and a price book");
    std::array<std::set<std::string>, 3> vocab;
    for (auto& m : pool) {
        const auto t = static_cast<std::size_t>(m.meal_type);
        for (const auto& it : m.items) vocab[t].insert(it.food_code);
        energy_[t].push_back(ctx.energy(m));
        pool_[t].push_back(std::move(m));
    }
    for (const auto& m : vocabulary_meals) {
        for (const auto& it : m.items) vocab[static_cast<std::size_t>(m.meal_type)].insert(it.food_code);
    }
    for (std::size_t t = 0; t < 3; ++t) vocab_[t].assign(vocab[t].begin(), vocab[t].end());
}

double gram_l1(const Meal& a, const Meal& b) {
    auto ga = gram_map(a);
    const auto gb = gram_map(b);
    double l1 = 0.0;
    for (const auto& [c, g] : gb) {
        auto it = ga.find(c);
        l1 += std::abs(g - (it == ga.end() ? 0.0 : it->second));
        if (it != ga.end()) ga.erase(it);
    }
    for (const auto& [_, g] : ga) l1 += g;
    return l1;
}

double swap_effort(const Meal& original, const Meal& candidate, int k_allowed, double alpha) {
    if (k_allowed < 1) throw ValidationError("swap_effort: k_allowed must be >= 1");
    const auto go = gram_map(original);
    const auto gc = gram_map(candidate);
    std::size_t added = 0, removed = 0;
    for (const auto& [c, _] : gc) added += go.count(c) ? 0 : 1;
    for (const auto& [c, _] : go) removed += gc.count(c) ? 0 : 1;
    const double total = original.total_grams();
    const double n = static_cast<double>(go.size());
    double e_portion = 0.0;
    if (total > 0.0 && n > 0.0) {
        const double baseline = static_cast<double>(k_allowed) / n;
        e_portion = std::min(1.0, gram_l1(original, candidate) / total / baseline);
    }
    const double e_comp = std::min(1.0, static_cast<double>(std::max(added, removed)) / k_allowed);
    return alpha * e_portion + (1.0 - alpha) * e_comp;
}

Candidate score_candidate(const Meal& source, const Meal& substitute, std::string candidate_id, bool is_swap,
                          const Context& ctx, double source_deviation, double source_cost) {
    Candidate c;
    c.source_meal_id = source.meal_id;
    c.candidate_id = std::move(candidate_id);
    c.is_swap = is_swap;
    c.meal = substitute;
    const auto gs = gram_map(source);
    const auto gc = gram_map(substitute);
    for (const auto& [code, _] : gc) {
        if (!gs.count(code)) c.added.push_back(code);
    }
    for (const auto& [code, _] : gs) {
        if (!gc.count(code)) c.removed.push_back(code);
    }
    c.k_sub = static_cast<int>(std::max(c.added.size(), c.removed.size()));
    c.similarity = meal_similarity(source, substitute);
    c.health = source_deviation - ctx.deviation(substitute);
    c.cost_sub = ctx.cost(substitute);
    const auto d = pricing::cost_delta(source_cost, c.cost_sub);
    c.saving = d.saving;
    c.increase = d.increase;
    c.effort = swap_effort(source, substitute, std::max(1, c.k_sub));
    const double total = source.total_grams();
    c.portion_shift_pct = total > 0.0 ? gram_l1(source, substitute) / total * 100.0 : 0.0;

    std::multiset<std::string> add_main, rem_main;
    for (const auto& code : c.added) {
        const auto& f = ctx.foods->at(code);
        add_main.insert(f.main_category);
        if (categories::is_mixed_dish(f)) c.adds_mixed_dish = true;
    }
    for (const auto& code : c.removed) rem_main.insert(ctx.foods->at(code).main_category);
    c.within_category = add_main == rem_main;
    return c;
}

std::vector<Candidate> retrieve_candidates(const Meal& meal, const CandidateIndex& index, const RetrievalConfig& cfg) {
    const Context& ctx = index.context();
    const double dev = ctx.deviation(meal);
    const double cost = ctx.cost(meal);
    const double energy = ctx.energy(meal);
    const auto n_items = static_cast<long>(meal.items.size());

    const auto touches_beverage = [&](const Candidate& c) {
        for (const auto* set : {&c.added, &c.removed}) {
            for (const auto& code : *set) {
                if (ctx.foods->at(code).counts_as_beverage()) return true;
            }
        }
        return false;
    };
    const auto keep = [&](const Candidate& c) {
        if (c.health < 0.0) return false;
        if (static_cast<std::size_t>(c.k_sub) > cfg.max_k_sub) return false;
        if (cfg.exclude_beverage_edits && touches_beverage(c)) return false;
        return true;
    };

    std::vector<Candidate> out;
    const auto& pool = index.pool(meal.meal_type);
    const auto& energies = index.energies(meal.meal_type);
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (pool[i].meal_id == meal.meal_id) continue;
        if (std::abs(energies[i] - energy) > cfg.energy_tolerance * energy) continue;
        if (std::abs(static_cast<long>(pool[i].items.size()) - n_items) > cfg.item_count_tolerance) continue;
        ranked.emplace_back(meal_similarity(meal, pool[i]), i);
    }
    std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return pool[a.second].meal_id < pool[b.second].meal_id;
    });
    if (ranked.size() > cfg.k_neighbors) ranked.resize(cfg.k_neighbors);
    for (const auto& [_, i] : ranked) {
        auto c = score_candidate(meal, pool[i], pool[i].meal_id, false, ctx, dev, cost);
        if (keep(c)) out.push_back(std::move(c));
    }

    if (cfg.single_item_swaps) {
        for (std::size_t j = 0; j < meal.items.size(); ++j) {
            const auto& old_food = ctx.foods->at(meal.items[j].food_code);
            if (old_food.counts_as_beverage()) continue;
            for (const auto& code : index.vocabulary(meal.meal_type)) {
                if (meal.contains(code)) continue;
                const auto& f = ctx.foods->at(code);
                if (f.counts_as_beverage() || f.main_category != old_food.main_category) continue;
                Meal sub = meal;
                sub.items[j].food_code = code;
                auto c = score_candidate(meal, sub, "swap:" + old_food.food_code + ">" + code, true, ctx, dev, cost);
                if (keep(c)) out.push_back(std::move(c));
            }
        }
    }
    return out;
}

std::vector<Candidate> with_k_sub(const std::vector<Candidate>& cands, int k_sub) {
    std::vector<Candidate> out;
    for (const auto& c : cands) {
        if (c.k_sub == k_sub) out.push_back(c);
    }
    return out;
}

std::vector<Candidate> up_to_k_sub(const std::vector<Candidate>& cands, int k_max) {
    std::vector<Candidate> out;
    for (const auto& c : cands) {
        if (c.k_sub <= k_max) out.push_back(c);
    }
    return out;
}

double value_score(const Candidate& c, const TradeoffParams& p) {
    if (p.alt_score_lambda) {
        const double l = *p.alt_score_lambda;
        return l * c.health + (1.0 - l) * c.saving - p.effort_alpha * c.effort;
    }
    const double w = p.weight();
    return w * c.health + (1.0 - w) * c.saving - w * c.increase;
}

std::vector<Candidate> admissible(const std::vector<Candidate>& cands, const TradeoffParams& p) {
    std::vector<Candidate> out;
    for (const auto& c : cands) {
        if (c.health < 0.0 || value_score(c, p) < 0.0) continue;
        if (p.no_cost_increase && c.increase > 0.0) continue;
        if (p.budget_cap && c.cost_sub > *p.budget_cap) continue;
        out.push_back(c);
    }
    return out;
}

bool ranks_before(const Candidate& a, double va, const Candidate& b, double vb) {
    if (va != vb) return va > vb;
    if (a.portion_shift_pct != b.portion_shift_pct) return a.portion_shift_pct < b.portion_shift_pct;
    if (a.health != b.health) return a.health > b.health;
    if (a.saving != b.saving) return a.saving < b.saving;
    return a.candidate_id < b.candidate_id;
}

namespace {

const Candidate* best_of(const std::vector<const Candidate*>& v, const TradeoffParams& p) {
    const Candidate* best = nullptr;
    double bv = 0.0;
    for (const auto* c : v) {
        const double cv = value_score(*c, p);
        if (!best || ranks_before(*c, cv, *best, bv)) {
            best = c;
            bv = cv;
        }
    }
    return best;
}

}  // namespace

std::optional<Candidate> select_winner(const std::vector<Candidate>& cands, const TradeoffParams& p) {
    const auto pool = admissible(cands, p);
    std::vector<const Candidate*> within, cross;
    for (const auto& c : pool) (c.within_category ? within : cross).push_back(&c);
    if (within.empty()) {
        const Candidate* b = best_of(cross, p);
        return b ? std::optional<Candidate>(*b) : std::nullopt;
    }
    const Candidate* w = best_of(within, p);
    const double vw = value_score(*w, p);
    std::vector<const Candidate*> challengers;
    for (const auto* c : cross) {
        const double vc = value_score(*c, p);
        const bool clears = c->adds_mixed_dish
                                ? vc >= vw * (1.0 + p.cross_margin_alpha) && vc >= vw + p.cross_buffer_beta
                                : vc >= vw * (1.0 + p.cross_uplift);
        if (clears) challengers.push_back(c);
    }
    const Candidate* b = best_of(challengers, p);
    return b ? *b : *w;
}

std::optional<Candidate> pooled_argmax(const std::vector<Candidate>& cands, const TradeoffParams& p) {
    const auto pool = admissible(cands, p);
    std::vector<const Candidate*> all;
    for (const auto& c : pool) all.push_back(&c);
    const Candidate* b = best_of(all, p);
    return b ? std::optional<Candidate>(*b) : std::nullopt;
}

std::size_t knee_index(const std::vector<double>& s, const std::vector<double>& h) {
    if (s.size() != h.size()) throw ValidationError("knee_index: size mismatch");
    if (s.size() < 3) return 0;
    const double dx = s.back() - s.front();
    const double dy = h.back() - h.front();
    const double len = std::hypot(dx, dy);
    if (len == 0.0) return 0;
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double d = std::abs(dy * (s[i] - s.front()) - dx * (h[i] - h.front())) / len;
        if (d > best_d + 1e-12) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

SweepResult sweep_theta(const std::vector<Meal>& meals, const std::vector<std::vector<Candidate>>& candidates,
                        const SweepConfig& cfg) {
    if (meals.size() != candidates.size()) throw ValidationError("sweep_theta: meals and candidates differ in size");
    if (cfg.theta_grid.empty()) throw ValidationError("sweep_theta: empty theta grid");
    if (!std::is_sorted(cfg.theta_grid.begin(), cfg.theta_grid.end())) {
        throw ValidationError("sweep_theta: theta grid must be sorted ascending");
    }
    const auto median_fn = [](std::span<const double> x) { return stats::median(x); };
    SweepResult res;
    for (int k : cfg.k_subs) {
        std::vector<std::vector<Candidate>> exact;
        exact.reserve(candidates.size());
        for (const auto& cs : candidates) exact.push_back(with_k_sub(cs, k));

        std::vector<FrontierPoint> pts, pts_all;
        for (std::size_t ti = 0; ti < cfg.theta_grid.size(); ++ti) {
            TradeoffParams p = cfg.params;
            p.theta = cfg.theta_grid[ti];
            std::vector<double> h, s, h_all, s_all;
            for (std::size_t i = 0; i < meals.size(); ++i) {
                auto win = select_winner(exact[i], p);
                if (win) {
                    h.push_back(win->health);
                    s.push_back(win->saving);
                    const double v = value_score(*win, p);
                    res.winners.push_back({meals[i].meal_id, p.theta, k, std::move(*win), v});
                }
                h_all.push_back(h.empty() || !win ? 0.0 : h.back());
                s_all.push_back(s.empty() || !win ? 0.0 : s.back());
            }
            const auto point = [&](const std::vector<double>& hv, const std::vector<double>& sv, const char* tag) {
                FrontierPoint fp;
                fp.theta = p.theta;
                fp.k_sub = k;
                fp.n_meals = hv.size();
                fp.n_winners = h.size();
                if (hv.empty()) return fp;
                fp.median_h = stats::median(hv);
                fp.median_s = stats::median(sv);
                const auto idx = static_cast<std::uint64_t>(k) * 1000 + ti;
                const auto hi = stats::bootstrap_ci(hv, median_fn, cfg.resamples, cfg.level,
                                                    derive_seed(cfg.seed, std::string(tag) + "H", idx));
                const auto si = stats::bootstrap_ci(sv, median_fn, cfg.resamples, cfg.level,
                                                    derive_seed(cfg.seed, std::string(tag) + "S", idx));
                fp.h_lo = hi.lo;
                fp.h_hi = hi.hi;
                fp.s_lo = si.lo;
                fp.s_hi = si.hi;
                return fp;
            };
            pts.push_back(point(h, s, "frontier:"));
            pts_all.push_back(point(h_all, s_all, "frontier-all:"));
            if (!h.empty()) res.empty = false;
        }
        for (auto* v : {&pts, &pts_all}) {
            std::vector<double> sv, hv;
            bool any = false;
            for (const auto& fp : *v) {
                sv.push_back(fp.median_s);
                hv.push_back(fp.median_h);
                any = any || fp.n_winners > 0;
            }
            if (any) (*v)[knee_index(sv, hv)].knee = true;
        }
        res.frontier.insert(res.frontier.end(), pts.begin(), pts.end());
        res.frontier_all.insert(res.frontier_all.end(), pts_all.begin(), pts_all.end());
    }
    return res;
}

std::string substitutions_to_csv(const std::vector<WinnerRow>& rows) {
    std::string out = io::csv_row(
        {"meal_id", "theta", "k_sub", "winner_id", "added", "removed", "H", "S", "CI", "E", "V", "within_category"});
    for (const auto& r : rows) {
        const auto& c = r.winner;
        out += io::csv_row({r.meal_id, io::fmt_double(r.theta), std::to_string(r.k_sub), c.candidate_id, join(c.added),
                            join(c.removed), io::fmt_double(c.health), io::fmt_double(c.saving),
                            io::fmt_double(c.increase), io::fmt_double(c.effort), io::fmt_double(r.value),
                            c.within_category ? "1" : "0"});
    }
    return out;
}

std::string frontier_to_csv(const std::vector<FrontierPoint>& points) {
    std::string out = io::csv_row({"theta", "k_sub", "median_H", "H_ci_lo", "H_ci_hi", "median_S", "S_ci_lo",
                                   "S_ci_hi", "knee_flag", "n_meals", "n_winners"});
    for (const auto& p : points) {
        out += io::csv_row({io::fmt_double(p.theta), std::to_string(p.k_sub), io::fmt_double(p.median_h),
                            io::fmt_double(p.h_lo), io::fmt_double(p.h_hi), io::fmt_double(p.median_s),
                            io::fmt_double(p.s_lo), io::fmt_double(p.s_hi), p.knee ? "1" : "0",
                            std::to_string(p.n_meals), std::to_string(p.n_winners)});
    }
    return out;
}

std::string transitions_to_csv(const std::vector<WinnerRow>& rows, const FoodTable& foods) {
    std::map<std::tuple<double, int, std::string, std::string>, std::size_t> counts;
    for (const auto& r : rows) {
        std::vector<std::string> rem, add;
        for (const auto& c : r.winner.removed) rem.push_back(foods.at(c).main_category);
        for (const auto& c : r.winner.added) add.push_back(foods.at(c).main_category);
        std::sort(rem.begin(), rem.end());
        std::sort(add.begin(), add.end());
        const std::size_t n = std::max(rem.size(), add.size());
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[{r.theta, r.k_sub, i < rem.size() ? rem[i] : "none", i < add.size() ? add[i] : "none"}];
        }
    }
    std::string out = io::csv_row({"theta", "k_sub", "from_main", "to_main", "count"});
    for (const auto& [key, n] : counts) {
        out += io::csv_row({io::fmt_double(std::get<0>(key)), std::to_string(std::get<1>(key)), std::get<2>(key),
                            std::get<3>(key), std::to_string(n)});
    }
    return out;
}

}  // namespace mealeng::substitution
