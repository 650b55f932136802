#include "mealeng/portioner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mealeng/errors.hpp"
#include "mealeng/random.hpp"

namespace mealeng::portioner {

namespace {

using Vec = std::vector<double>;

constexpr double kInf = std::numeric_limits<double>::infinity();

double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

// a . x <= b
struct Row {
    Vec a;
    double b = 0.0;
    std::string name;
};

struct Problem {
    std::size_t n = 0;
    std::vector<Row> rows;
    Vec energy;  // kcal per gram
    std::size_t energy_min = 0;
    std::size_t bev_kcal = SIZE_MAX;
};

double slack(const Row& r, const Vec& x) { return r.b - dot(r.a, x); }

double active_tol(const Row& r) { return 1e-9 * std::max(1.0, std::abs(r.b)); }

Problem build_problem(const std::vector<FoodRecord>& foods, MealType type, double target,
                      const PortionConstraints& c) {
    Problem p;
    p.n = foods.size();
    const std::size_t n = p.n;
    p.energy.resize(n);
    for (std::size_t i = 0; i < n; ++i) p.energy[i] = foods[i].energy_density();

    auto unit = [&](std::size_t i, double s) {
        Vec a(n, 0.0);
        a[i] = s;
        return a;
    };
    for (std::size_t i = 0; i < n; ++i) {
        p.rows.push_back({unit(i, -1.0), -c.min_item_grams, "min_item_grams:" + foods[i].food_code});
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (foods[i].counts_as_solid()) {
            p.rows.push_back({unit(i, 1.0), c.per_solid_item_max, "per_solid_item_max:" + foods[i].food_code});
        }
    }
    Vec bev_grams(n, 0.0), bev_kcal(n, 0.0);
    bool any_bev = false;
    for (std::size_t i = 0; i < n; ++i) {
        if (foods[i].counts_as_beverage()) {
            any_bev = true;
            bev_grams[i] = 1.0;
            bev_kcal[i] = (1.0 - c.beverage_kcal_frac_max) * p.energy[i];
        } else {
            bev_kcal[i] = -c.beverage_kcal_frac_max * p.energy[i];
        }
    }
    if (any_bev) {
        p.rows.push_back({bev_grams, c.beverage_cap(type), "beverage_gram_cap"});
        p.bev_kcal = p.rows.size();
        p.rows.push_back({bev_kcal, 0.0, "beverage_kcal_frac_max"});
    }
    p.rows.push_back({Vec(n, 1.0), c.total_grams_max, "total_grams_max"});
    for (const auto& [group, cap] : c.category_caps) {
        Vec a(n, 0.0);
        bool any = false;
        for (std::size_t i = 0; i < n; ++i) {
            auto g = categories::cap_group(foods[i]);
            if (g && *g == group) {
                a[i] = 1.0;
                any = true;
            }
        }
        if (any) p.rows.push_back({a, cap, "category_cap:" + std::string(categories::to_string(group))});
    }
    p.rows.push_back({p.energy, target * (1.0 + c.energy_tolerance), "energy_max"});
    Vec neg(n);
    for (std::size_t i = 0; i < n; ++i) neg[i] = -p.energy[i];
    p.energy_min = p.rows.size();
    p.rows.push_back({neg, -target * (1.0 - c.energy_tolerance), "energy_min"});
    // Keep iterates a hair inside every bound so rounding never reports a
    // violation.
    for (auto& r : p.rows) r.b -= 1e-9 * std::max(1.0, std::abs(r.b));
    return p;
}

// Objective in gram space.
struct Objective {
    std::vector<std::array<double, kNutrientCount>> density;  // per gram
    NutrientVector targets{};
    NutrientVector floor{};
    NutrientVector w_short{};
    NutrientVector w_excess{};

    NutrientVector totals(const Vec& x) const {
        NutrientVector y{};
        for (std::size_t i = 0; i < x.size(); ++i) {
            for (std::size_t k = 0; k < kNutrientCount; ++k) y[k] += density[i][k] * x[i];
        }
        return y;
    }

    double value_from_totals(const NutrientVector& y) const {
        double f = 0.0;
        for (std::size_t k = 0; k < kNutrientCount; ++k) {
            if (w_short[k] == 0.0 && w_excess[k] == 0.0) continue;
            const double z = std::log2(std::max(y[k], floor[k]) / targets[k]);
            f += z < 0.0 ? w_short[k] * z * z : w_excess[k] * z * z;
        }
        return f;
    }

    double value(const Vec& x) const { return value_from_totals(totals(x)); }

    Vec gradient(const Vec& x) const {
        const NutrientVector y = totals(x);
        NutrientVector dy{};
        for (std::size_t k = 0; k < kNutrientCount; ++k) {
            if (y[k] <= floor[k]) continue;
            const double z = std::log2(y[k] / targets[k]);
            const double w = z < 0.0 ? w_short[k] : w_excess[k];
            dy[k] = 2.0 * w * z / (y[k] * std::log(2.0));
        }
        Vec g(x.size(), 0.0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            for (std::size_t k = 0; k < kNutrientCount; ++k) g[i] += dy[k] * density[i][k];
        }
        return g;
    }
};

void fill_weights(const RdiProfile& profile, const SolverOptions& options, NutrientVector& w_short,
                  NutrientVector& w_excess) {
    for (std::size_t k = 0; k < kNutrientCount; ++k) {
        const auto& t = profile.nutrients[k];
        double under = t.weight_under, over = t.weight_over;
        if (options.orientation == Orientation::formula_literal) std::swap(under, over);
        switch (t.type) {
            case ConstraintType::upper_bound:
                w_short[k] = 0.0;
                w_excess[k] = over;
                break;
            case ConstraintType::neutral:
                w_short[k] = options.include_neutral ? under : 0.0;
                w_excess[k] = options.include_neutral ? over : 0.0;
                break;
            default:
                w_short[k] = under;
                w_excess[k] = over;
        }
    }
}

Objective make_objective(const std::vector<FoodRecord>& foods, const NutrientVector& targets,
                         const RdiProfile& profile, const SolverOptions& options) {
    Objective o;
    o.targets = targets;
    for (std::size_t k = 0; k < kNutrientCount; ++k) o.floor[k] = options.log_floor_frac * targets[k];
    fill_weights(profile, options, o.w_short, o.w_excess);
    for (const auto& f : foods) {
        std::array<double, kNutrientCount> d{};
        for (std::size_t k = 0; k < kNutrientCount; ++k) d[k] = f.nutrients_per_100g[k] / 100.0;
        o.density.push_back(d);
    }
    return o;
}

// Orthonormal basis of the active normals (modified Gram-Schmidt); `used`
// receives the rows that contributed a basis vector.
std::vector<Vec> active_basis(const Problem& p, const std::vector<std::size_t>& active,
                              std::vector<std::size_t>& used) {
    std::vector<Vec> q;
    used.clear();
    for (auto j : active) {
        Vec v = p.rows[j].a;
        const double n0 = norm(v);
        for (const auto& b : q) {
            const double c = dot(v, b);
            for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * b[i];
        }
        const double nv = norm(v);
        if (nv > 1e-10 * n0) {
            for (auto& e : v) e /= nv;
            q.push_back(std::move(v));
            used.push_back(j);
        }
    }
    return q;
}

// Solve the small dense system M y = r in place (partial pivoting).
Vec solve_dense(std::vector<Vec> m, Vec r) {
    const std::size_t n = r.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t i = c + 1; i < n; ++i) {
            if (std::abs(m[i][c]) > std::abs(m[piv][c])) piv = i;
        }
        std::swap(m[c], m[piv]);
        std::swap(r[c], r[piv]);
        if (std::abs(m[c][c]) < 1e-300) continue;
        for (std::size_t i = c + 1; i < n; ++i) {
            const double f = m[i][c] / m[c][c];
            for (std::size_t k = c; k < n; ++k) m[i][k] -= f * m[c][k];
            r[i] -= f * r[c];
        }
    }
    Vec y(n, 0.0);
    for (std::size_t c = n; c-- > 0;) {
        double s = r[c];
        for (std::size_t k = c + 1; k < n; ++k) s -= m[c][k] * y[k];
        y[c] = std::abs(m[c][c]) < 1e-300 ? 0.0 : s / m[c][c];
    }
    return y;
}

struct Descent {
    Vec x;
    double value = 0.0;
    std::size_t iterations = 0;
    std::vector<std::size_t> active;
};

// Active-set gradient projection for min f(x) over {rows[j] for j in use}.
// `x` must be feasible for those rows. `stop` may end the search early.
template <class F, class G, class Stop>
Descent gradient_projection(const Problem& p, const std::vector<std::size_t>& use, Vec x, F&& f, G&& grad,
                            Stop&& stop, std::size_t max_iter, double tol) {
    Descent out;
    std::vector<std::size_t> active;
    for (auto j : use) {
        if (slack(p.rows[j], x) <= active_tol(p.rows[j])) active.push_back(j);
    }
    double fx = f(x);
    std::size_t it = 0;
    std::size_t stalls = 0;
    bool check_multipliers = false;
    for (; it < max_iter; ++it) {
        if (stop(x)) break;
        const Vec g = grad(x);
        std::vector<std::size_t> used;
        const auto q = active_basis(p, active, used);
        Vec d(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) d[i] = -g[i];
        for (const auto& b : q) {
            const double c = dot(d, b);
            for (std::size_t i = 0; i < d.size(); ++i) d[i] -= c * b[i];
        }
        const double gnorm = norm(g);
        // Stationary on the current face (or no longer making progress):
        // release the constraint with the most negative multiplier, if any.
        if (check_multipliers || norm(d) <= 1e-10 * (1.0 + gnorm)) {
            check_multipliers = false;
            if (used.empty()) break;
            // Multipliers of g + sum lambda_j a_j = 0.
            std::vector<Vec> m(used.size(), Vec(used.size()));
            Vec r(used.size());
            for (std::size_t a = 0; a < used.size(); ++a) {
                for (std::size_t b = 0; b < used.size(); ++b) m[a][b] = dot(p.rows[used[a]].a, p.rows[used[b]].a);
                r[a] = -dot(p.rows[used[a]].a, g);
            }
            const Vec lambda = solve_dense(m, r);
            std::size_t worst = SIZE_MAX;
            double most_negative = -1e-10 * (1.0 + gnorm);
            for (std::size_t a = 0; a < used.size(); ++a) {
                if (lambda[a] < most_negative) {
                    most_negative = lambda[a];
                    worst = a;
                }
            }
            if (worst == SIZE_MAX) break;
            active.erase(std::find(active.begin(), active.end(), used[worst]));
            continue;
        }
        // Largest step keeping every inactive row feasible.
        double tmax = kInf;
        std::size_t blocking = SIZE_MAX;
        for (auto j : use) {
            if (std::find(active.begin(), active.end(), j) != active.end()) continue;
            const double ad = dot(p.rows[j].a, d);
            if (ad <= 1e-14 * norm(p.rows[j].a) * norm(d)) continue;
            const double t = std::max(0.0, slack(p.rows[j], x)) / ad;
            if (t < tmax) {
                tmax = t;
                blocking = j;
            }
        }
        const double slope = dot(g, d);
        double t = std::isfinite(tmax) ? tmax : 1.0;
        Vec xn(x.size());
        double fn = fx;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            for (std::size_t i = 0; i < x.size(); ++i) xn[i] = x[i] + t * d[i];
            fn = f(xn);
            if (fn <= fx + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            if (blocking != SIZE_MAX && tmax == 0.0) {
                active.push_back(blocking);
                continue;
            }
            break;
        }
        const bool hit = std::isfinite(tmax) && t == tmax && blocking != SIZE_MAX;
        const double improvement = fx - fn;
        x = xn;
        fx = fn;
        if (hit) active.push_back(blocking);
        if (improvement <= tol * (1.0 + std::abs(fx))) {
            if (!hit && ++stalls >= 3) {
                check_multipliers = true;
                stalls = 0;
            }
        } else {
            stalls = 0;
        }
    }
    out.x = std::move(x);
    out.value = fx;
    out.iterations = it;
    out.active = std::move(active);
    return out;
}

// Largest t in [0, 1] with from + t (to - from) feasible.
double feasible_fraction(const Problem& p, const Vec& from, const Vec& to) {
    Vec d(from.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = to[i] - from[i];
    double t = 1.0;
    for (const auto& r : p.rows) {
        const double ad = dot(r.a, d);
        if (ad <= 0.0) continue;
        t = std::min(t, std::max(0.0, slack(r, from)) / ad);
    }
    return std::max(0.0, t * (1.0 - 1e-12));
}

Vec blend(const Problem& p, const Vec& feasible, const Vec& wanted) {
    const double t = feasible_fraction(p, feasible, wanted);
    Vec x(feasible.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = feasible[i] + t * (wanted[i] - feasible[i]);
    return x;
}

std::vector<std::string> active_names(const Problem& p, const Vec& x) {
    std::vector<std::string> out;
    for (const auto& r : p.rows) {
        if (slack(r, x) <= 1e-7 * std::max(1.0, std::abs(r.b))) out.push_back(r.name);
    }
    return out;
}

// Pulls a desired portion vector toward the caps: item bounds, group caps,
// beverage grams and energy share, total grams, then solids rescaled to the
// energy target. Not guaranteed feasible; the caller blends toward a
// feasible point.
Vec repair_start(Vec x, const std::vector<FoodRecord>& foods, const Vec& energy, MealType type, double target,
                 const PortionConstraints& c) {
    const std::size_t n = x.size();
    std::vector<std::optional<categories::CapGroup>> group(n);
    for (std::size_t i = 0; i < n; ++i) group[i] = categories::cap_group(foods[i]);
    const double shrink = 1.0 - 1e-6;
    for (int round = 0; round < 20; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = std::max(x[i], c.min_item_grams);
            if (foods[i].counts_as_solid()) x[i] = std::min(x[i], c.per_solid_item_max * shrink);
        }
        for (const auto& [g, cap] : c.category_caps) {
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) sum += group[i] == g ? x[i] : 0.0;
            if (sum > cap * shrink) {
                for (std::size_t i = 0; i < n; ++i) {
                    if (group[i] == g) x[i] = std::max(c.min_item_grams, x[i] * cap * shrink / sum);
                }
            }
        }
        double bev_g = 0.0, bev_e = 0.0, solid_e = 0.0, free_e = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (foods[i].counts_as_beverage()) {
                bev_g += x[i];
                bev_e += energy[i] * x[i];
            } else {
                solid_e += energy[i] * x[i];
                if (!group[i]) free_e += energy[i] * x[i];
            }
        }
        double bev_scale = 1.0;
        if (bev_g > c.beverage_cap(type) * shrink) bev_scale = c.beverage_cap(type) * shrink / bev_g;
        const double bev_e_max = c.beverage_kcal_frac_max * target * shrink;
        if (bev_e * bev_scale > bev_e_max) bev_scale = bev_e_max / bev_e;
        if (bev_scale < 1.0) {
            for (std::size_t i = 0; i < n; ++i) {
                if (foods[i].counts_as_beverage()) x[i] = std::max(c.min_item_grams, x[i] * bev_scale);
            }
            bev_e *= bev_scale;
        }
        const double need = target - bev_e - (solid_e - free_e);
        if (free_e > 0.0 && need > 0.0) {
            for (std::size_t i = 0; i < n; ++i) {
                if (!foods[i].counts_as_beverage() && !group[i]) x[i] *= need / free_e;
            }
        }
        const double total = std::accumulate(x.begin(), x.end(), 0.0);
        if (total > c.total_grams_max * shrink) {
            for (auto& v : x) v = std::max(c.min_item_grams, v * c.total_grams_max * shrink / total);
        }
    }
    return x;
}

// Feasible starting point: raise energy from the minimal portions.
Vec phase_one(const Problem& p, const std::vector<FoodRecord>& foods, double target,
              const PortionConstraints& c) {
    const std::size_t n = p.n;
    Vec x(n, c.min_item_grams + 1e-8 * std::max(1.0, c.min_item_grams));
    std::vector<std::size_t> base;
    for (std::size_t j = 0; j < p.rows.size(); ++j) {
        if (j != p.energy_min && j != p.bev_kcal) base.push_back(j);
    }
    std::vector<std::string> blocked;
    for (auto j : base) {
        if (slack(p.rows[j], x) < -active_tol(p.rows[j])) blocked.push_back(p.rows[j].name);
    }
    if (!blocked.empty()) {
        std::ostringstream msg;
        msg << "portion infeasible: minimal portions already violate";
        for (const auto& b : blocked) msg << ' ' << b;
        throw InfeasibleError(msg.str());
    }
    auto linear = [](const Vec& cvec) {
        return std::make_pair([cvec](const Vec& v) { return -dot(cvec, v); },
                              [cvec](const Vec&) {
                                  Vec g(cvec.size());
                                  for (std::size_t i = 0; i < g.size(); ++i) g[i] = -cvec[i];
                                  return g;
                              });
    };
    if (p.bev_kcal != SIZE_MAX && slack(p.rows[p.bev_kcal], x) < 0.0) {
        Vec solid_e(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (!foods[i].counts_as_beverage()) solid_e[i] = p.energy[i];
        }
        auto [f, g] = linear(solid_e);
        const auto& row = p.rows[p.bev_kcal];
        x = gradient_projection(
                p, base, x, f, g, [&](const Vec& v) { return slack(row, v) >= 0.0; }, 10000, 0.0)
                .x;
        if (slack(row, x) < 0.0) {
            std::ostringstream msg;
            msg << "portion infeasible: beverage energy share cannot be met; blocking:";
            for (const auto& a : active_names(p, x)) msg << ' ' << a;
            throw InfeasibleError(msg.str());
        }
    }
    if (p.bev_kcal != SIZE_MAX) base.push_back(p.bev_kcal);
    auto [f, g] = linear(p.energy);
    const auto& emin = p.rows[p.energy_min];
    const Descent d = gradient_projection(
        p, base, x, f, g, [&](const Vec& v) { return slack(emin, v) >= 0.0; }, 10000, 0.0);
    x = d.x;
    if (slack(emin, x) < 0.0) {
        std::ostringstream msg;
        msg << "portion infeasible: energy target " << target << " kcal unreachable (max "
            << dot(p.energy, x) << " kcal); blocking:";
        for (const auto& a : active_names(p, x)) {
            if (a != "energy_min") msg << ' ' << a;
        }
        throw InfeasibleError(msg.str());
    }
    return x;
}

void check_preconditions(const std::vector<FoodRecord>& foods, MealType type, const PortionConstraints& c) {
    if (foods.empty()) throw ValidationError("solve_portions: no foods");
    std::set<std::string> codes;
    std::size_t solids = 0;
    for (const auto& f : foods) {
        if (!codes.insert(f.food_code).second) throw ValidationError("duplicate food " + f.food_code);
        const double e = f.energy_density();
        if (f.counts_as_solid()) {
            ++solids;
            if (!(e > 0.0)) throw ValidationError("solid food " + f.food_code + " has no energy");
        } else if (!(e >= 0.0)) {
            throw ValidationError("food " + f.food_code + " has negative energy");
        }
    }
    if (solids < c.min_solids(type)) {
        throw ValidationError("solve_portions: " + std::to_string(solids) + " solid foods, " +
                              std::to_string(c.min_solids(type)) + " required for " +
                              std::string(to_string(type)));
    }
}

PortionSolution finish(const std::vector<FoodRecord>& foods, const Vec& x, const Objective& obj,
                       double target) {
    PortionSolution s;
    for (const auto& f : foods) s.food_codes.push_back(f.food_code);
    s.grams = x;
    s.nutrient_totals = nutrient_totals(x, foods);
    s.objective = obj.value_from_totals(s.nutrient_totals);
    s.target_kcal = target;
    return s;
}

}  // namespace

void PortionConstraints::validate() const {
    if (!(total_grams_max > 0) || !(beverage_kcal_frac_max > 0 && beverage_kcal_frac_max < 1) ||
        !(per_solid_item_max > 0) || !(energy_tolerance > 0) || !(min_item_grams >= 0)) {
        throw ConfigError("portion caps must be positive");
    }
    for (double b : beverage_gram_cap) {
        if (!(b > 0)) throw ConfigError("beverage gram caps must be positive");
    }
    for (const auto& [g, v] : category_caps) {
        if (!(v > 0)) throw ConfigError("category cap " + std::string(categories::to_string(g)) + " must be positive");
    }
}

double PortionSolution::total_grams() const { return std::accumulate(grams.begin(), grams.end(), 0.0); }

double portion_objective(const NutrientVector& totals, const NutrientVector& targets,
                         const RdiProfile& profile, const SolverOptions& options) {
    Objective o;
    o.targets = targets;
    for (std::size_t k = 0; k < kNutrientCount; ++k) o.floor[k] = options.log_floor_frac * targets[k];
    fill_weights(profile, options, o.w_short, o.w_excess);
    return o.value_from_totals(totals);
}

NutrientVector nutrient_totals(const std::vector<double>& grams, const std::vector<FoodRecord>& foods) {
    if (grams.size() != foods.size()) throw ValidationError("portion vector does not match foods");
    NutrientVector y{};
    for (std::size_t i = 0; i < grams.size(); ++i) {
        for (std::size_t k = 0; k < kNutrientCount; ++k) y[k] += grams[i] / 100.0 * foods[i].nutrients_per_100g[k];
    }
    return y;
}

std::vector<std::string> violations(const std::vector<double>& grams, const std::vector<FoodRecord>& foods,
                                    MealType type, double target_kcal, const PortionConstraints& c,
                                    double slack_tol) {
    std::vector<std::string> out;
    double total = 0.0, bev_g = 0.0, bev_e = 0.0, energy = 0.0;
    std::map<categories::CapGroup, double> groups;
    for (std::size_t i = 0; i < grams.size(); ++i) {
        const double x = grams[i];
        if (!(x >= 0.0)) out.push_back("nonnegative:" + foods[i].food_code);
        total += x;
        const double e = foods[i].energy_density() * x;
        energy += e;
        if (foods[i].counts_as_beverage()) {
            bev_g += x;
            bev_e += e;
        } else if (x > c.per_solid_item_max + slack_tol) {
            out.push_back("per_solid_item_max:" + foods[i].food_code);
        }
        if (auto g = categories::cap_group(foods[i])) groups[*g] += x;
    }
    if (total > c.total_grams_max + slack_tol) out.push_back("total_grams_max");
    if (bev_g > c.beverage_cap(type) + slack_tol) out.push_back("beverage_gram_cap");
    if (bev_e > c.beverage_kcal_frac_max * energy + slack_tol) out.push_back("beverage_kcal_frac_max");
    for (const auto& [g, v] : groups) {
        auto it = c.category_caps.find(g);
        if (it != c.category_caps.end() && v > it->second + slack_tol) {
            out.push_back("category_cap:" + std::string(categories::to_string(g)));
        }
    }
    if (std::abs(energy - target_kcal) > c.energy_tolerance * target_kcal + slack_tol) out.push_back("energy");
    return out;
}

PortionSolution solve_portions(const std::vector<FoodRecord>& foods, const RdiProfile& profile,
                               MealType type, const PortionConstraints& constraints, std::uint64_t seed,
                               const MealEnergyPlan& plan, const SolverOptions& options) {
    constraints.validate();
    check_preconditions(foods, type, constraints);
    const NutrientVector targets = meal_targets(profile, type, plan);
    const double target = targets[idx(Nutrient::energy)];
    const Problem p = build_problem(foods, type, target, constraints);
    const Objective obj = make_objective(foods, targets, profile, options);
    const std::size_t n = foods.size();

    const Vec feasible = phase_one(p, foods, target, constraints);

    std::vector<std::size_t> all(p.rows.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    auto f = [&](const Vec& x) { return obj.value(x); };
    auto g = [&](const Vec& x) { return obj.gradient(x); };
    auto never = [](const Vec&) { return false; };

    std::size_t n_bev = 0;
    for (const auto& fd : foods) n_bev += fd.counts_as_beverage() ? 1 : 0;

    // Desired start: beverage grams and solid energy shares, clipped to the
    // item bounds and pulled toward the feasible point until feasible.
    auto start_from = [&](const Vec& bev_frac, const Vec& solid_share) {
        Vec want(n, 0.0);
        double bev_kcal = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (foods[i].counts_as_beverage()) {
                want[i] = bev_frac[i] * constraints.beverage_cap(type) / static_cast<double>(n_bev);
                bev_kcal += want[i] * p.energy[i];
            }
        }
        const double solid_kcal = std::max(0.0, target - bev_kcal);
        double share_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!foods[i].counts_as_beverage()) share_sum += solid_share[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (foods[i].counts_as_beverage()) continue;
            want[i] = solid_kcal * solid_share[i] / share_sum / p.energy[i];
            want[i] = std::min(want[i], constraints.per_solid_item_max);
        }
        return blend(p, feasible, repair_start(want, foods, p.energy, type, target, constraints));
    };

    std::vector<Vec> starts;
    starts.push_back(start_from(Vec(n, 0.5), Vec(n, 1.0)));
    Rng rng(derive_seed(seed, "portion-start"));
    for (std::size_t s = 1; s < std::max<std::size_t>(1, options.starts); ++s) {
        Vec bev(n), share(n);
        for (std::size_t i = 0; i < n; ++i) {
            bev[i] = rng.uniform();
            share[i] = -std::log(1.0 - rng.uniform());
        }
        starts.push_back(start_from(bev, share));
    }
    starts.push_back(feasible);

    Descent best;
    best.value = kInf;
    std::size_t total_iter = 0;
    for (const auto& x0 : starts) {
        Descent d = gradient_projection(p, all, x0, f, g, never, options.max_iterations, options.tolerance);
        total_iter += d.iterations;
        if (d.value < best.value) best = std::move(d);
    }

    PortionSolution sol = finish(foods, best.x, obj, target);
    sol.iterations = total_iter;
    sol.binding_constraints = active_names(p, best.x);
    if (!violations(sol.grams, foods, type, target, constraints).empty()) sol.flags.push_back("numerical_slack");
    return sol;
}

PortionSolution reproject(const PortionSolution& solution, const std::vector<FoodRecord>& foods,
                          MealType type, const PortionConstraints& c, const RdiProfile& profile,
                          const MealEnergyPlan& plan, const SolverOptions& options) {
    if (solution.grams.size() != foods.size()) throw ValidationError("reproject: portions do not match foods");
    const NutrientVector targets = meal_targets(profile, type, plan);
    const double target = targets[idx(Nutrient::energy)];
    if (violations(solution.grams, foods, type, target, c).empty()) return solution;

    const std::size_t n = foods.size();
    Vec x = solution.grams;
    std::vector<bool> fixed(n, false);
    auto energy_of = [&](std::size_t i) { return foods[i].energy_density() * x[i]; };

    for (int round = 0; round < 50; ++round) {
        bool changed = false;
        std::map<categories::CapGroup, std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < n; ++i) {
            if (auto g = categories::cap_group(foods[i])) groups[*g].push_back(i);
        }
        for (const auto& [g, members] : groups) {
            auto it = c.category_caps.find(g);
            if (it == c.category_caps.end()) continue;
            double sum = 0.0;
            for (auto i : members) sum += x[i];
            if (sum > it->second * (1.0 + 1e-12)) {
                for (auto i : members) {
                    x[i] *= it->second / sum;
                    fixed[i] = true;
                }
                changed = true;
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (foods[i].counts_as_solid() && x[i] > c.per_solid_item_max) {
                x[i] = c.per_solid_item_max;
                fixed[i] = true;
                changed = true;
            }
        }
        double bev_g = 0.0, bev_e = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (foods[i].counts_as_beverage()) {
                bev_g += x[i];
                bev_e += energy_of(i);
            }
        }
        double bev_scale = 1.0;
        if (bev_g > c.beverage_cap(type)) bev_scale = std::min(bev_scale, c.beverage_cap(type) / bev_g);
        if (bev_e > c.beverage_kcal_frac_max * target) {
            bev_scale = std::min(bev_scale, c.beverage_kcal_frac_max * target / bev_e);
        }
        if (bev_scale < 1.0 - 1e-12) {
            for (std::size_t i = 0; i < n; ++i) {
                if (foods[i].counts_as_beverage()) {
                    x[i] *= bev_scale;
                    fixed[i] = true;
                }
            }
            changed = true;
        }
        // Restore energy with the free items.
        double fixed_e = 0.0, free_e = 0.0;
        for (std::size_t i = 0; i < n; ++i) (fixed[i] ? fixed_e : free_e) += energy_of(i);
        const double need = target - fixed_e;
        if (free_e > 0.0 && need > 0.0) {
            const double s = need / free_e;
            if (std::abs(s - 1.0) > 1e-12) {
                for (std::size_t i = 0; i < n; ++i) {
                    if (!fixed[i]) x[i] *= s;
                }
                changed = true;
            }
        }
        const double total = std::accumulate(x.begin(), x.end(), 0.0);
        if (total > c.total_grams_max) {
            for (auto& v : x) v *= c.total_grams_max / total;
            changed = true;
        }
        if (!changed) break;
        if (total > c.total_grams_max) break;
    }

    PortionSolution out = finish(foods, x, make_objective(foods, targets, profile, options), target);
    out.iterations = solution.iterations;
    out.flags = solution.flags;
    out.flags.push_back("reprojected");
    if (!violations(x, foods, type, target, c).empty()) out.flags.push_back("best_effort");
    const Problem p = build_problem(foods, type, target, c);
    out.binding_constraints = active_names(p, x);
    return out;
}

std::string portioned_meals_to_json(const std::vector<PortionedMeal>& meals) {
    using json = nlohmann::ordered_json;
    json arr = json::array();
    for (const auto& m : meals) {
        json rec;
        rec["meal_id"] = m.meal_id;
        rec["meal_type"] = std::string(to_string(m.meal_type));
        rec["cluster_id"] = m.cluster_id;
        json items = json::array();
        for (std::size_t i = 0; i < m.solution.food_codes.size(); ++i) {
            items.push_back({{"food_code", m.solution.food_codes[i]}, {"grams", m.solution.grams[i]}});
        }
        rec["items"] = std::move(items);
        json totals = json::object();
        for (std::size_t k = 0; k < kNutrientCount; ++k) {
            totals[std::string(nutrient_table()[k].name)] = m.solution.nutrient_totals[k];
        }
        rec["nutrient_totals"] = std::move(totals);
        rec["objective"] = m.solution.objective;
        rec["target_kcal"] = m.solution.target_kcal;
        rec["binding_constraints"] = m.solution.binding_constraints;
        rec["iterations"] = m.solution.iterations;
        rec["flags"] = m.solution.flags;
        arr.push_back(std::move(rec));
    }
    return arr.dump(1) + "\n";
}

std::vector<PortionedMeal> portioned_meals_from_json(std::string_view text) {
    using json = nlohmann::json;
    std::vector<PortionedMeal> out;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("portioned meals: malformed JSON: ") + e.what());
    }
    if (!doc.is_array()) throw ValidationError("portioned meals: expected an array");
    try {
        for (const auto& rec : doc) {
            PortionedMeal m;
            m.meal_id = rec.at("meal_id").get<std::string>();
            m.meal_type = meal_type_from_string(rec.at("meal_type").get<std::string>());
            m.cluster_id = rec.at("cluster_id").get<int>();
            for (const auto& it : rec.at("items")) {
                m.solution.food_codes.push_back(it.at("food_code").get<std::string>());
                m.solution.grams.push_back(it.at("grams").get<double>());
            }
            const auto& totals = rec.at("nutrient_totals");
            for (std::size_t k = 0; k < kNutrientCount; ++k) {
                m.solution.nutrient_totals[k] = totals.at(std::string(nutrient_table()[k].name)).get<double>();
            }
            m.solution.objective = rec.at("objective").get<double>();
            m.solution.target_kcal = rec.value("target_kcal", 0.0);
            m.solution.binding_constraints = rec.value("binding_constraints", std::vector<std::string>{});
            m.solution.iterations = rec.value("iterations", std::size_t{0});
            m.solution.flags = rec.value("flags", std::vector<std::string>{});
            out.push_back(std::move(m));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("portioned meals: ") + e.what());
    }
    return out;
}

}  // namespace mealeng::portioner
