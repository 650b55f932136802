#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "mealeng/corpus.hpp"
#include "mealeng/errors.hpp"
#include "mealeng/rdi.hpp"

namespace mealeng::corpus {

namespace {

constexpr double kMinWeight = 1e-9;

double l1(const NutrientVector& v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
}

double relative_error(const NutrientVector& food, const NutrientVector& proto) {
    double err = 0.0;
    for (std::size_t k = 0; k < kNutrientCount; ++k) err += std::abs(proto[k] - food[k]);
    const double norm = l1(food);
    if (norm == 0.0) return err == 0.0 ? 0.0 : 1.0;
    return err / norm;
}

double cosine(const NutrientVector& a, const NutrientVector& b) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t k = 0; k < kNutrientCount; ++k) {
        ab += a[k] * b[k];
        aa += a[k] * a[k];
        bb += b[k] * b[k];
    }
    if (aa == 0.0 && bb == 0.0) return 1.0;
    if (aa == 0.0 || bb == 0.0) return 0.0;
    return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

double sq_distance(const NutrientVector& a, const NutrientVector& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < kNutrientCount; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return s;
}

struct GroupMember {
    std::size_t food;  // index into the input foods
    NutrientVector scaled;
    double weight;
};

struct Partition {
    std::vector<std::size_t> assignment;  // member -> cluster
    std::vector<NutrientVector> centers;  // scaled space
};

NutrientVector weighted_centroid(const std::vector<GroupMember>& members,
                                 const std::vector<std::size_t>& assignment, std::size_t cluster) {
    NutrientVector c{};
    double w = 0.0;
    for (std::size_t i = 0; i < members.size(); ++i) {
        if (assignment[i] != cluster) continue;
        w += members[i].weight;
        for (std::size_t k = 0; k < kNutrientCount; ++k) c[k] += members[i].weight * members[i].scaled[k];
    }
    if (w > 0.0) {
        for (auto& v : c) v /= w;
    }
    return c;
}

// Weighted Lloyd iterations from a farthest-first start seeded at the
// heaviest member.
Partition weighted_kmeans(const std::vector<GroupMember>& members, std::size_t k) {
    const std::size_t n = members.size();
    Partition part;
    std::size_t first = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (members[i].weight > members[first].weight) first = i;
    }
    part.centers.push_back(members[first].scaled);
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    while (part.centers.size() < k) {
        std::size_t best = 0;
        double best_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], sq_distance(members[i].scaled, part.centers.back()));
            if (nearest[i] > best_d) {
                best_d = nearest[i];
                best = i;
            }
        }
        part.centers.push_back(members[best].scaled);
    }
    part.assignment.assign(n, 0);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t arg = 0;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < part.centers.size(); ++c) {
                const double d = sq_distance(members[i].scaled, part.centers[c]);
                if (d < best) {
                    best = d;
                    arg = c;
                }
            }
            changed = changed || part.assignment[i] != arg;
            part.assignment[i] = arg;
        }
        for (std::size_t c = 0; c < part.centers.size(); ++c) {
            const bool empty = std::none_of(part.assignment.begin(), part.assignment.end(),
                                            [&](std::size_t a) { return a == c; });
            if (!empty) part.centers[c] = weighted_centroid(members, part.assignment, c);
        }
        if (!changed && iter > 0) break;
    }
    return part;
}

struct GroupScore {
    double coverage = 1.0;
    double wmare = 0.0;
    double min_cosine = 1.0;
};

GroupScore score_partition(const std::vector<GroupMember>& members, const Partition& part,
                           const PrototypeConfig& cfg) {
    double total = 0.0, covered = 0.0, err = 0.0;
    GroupScore s;
    for (std::size_t i = 0; i < members.size(); ++i) {
        const auto& center = part.centers[part.assignment[i]];
        const double e = relative_error(members[i].scaled, center);
        total += members[i].weight;
        err += members[i].weight * e;
        if (e <= cfg.aggregation_alpha) covered += members[i].weight;
        s.min_cosine = std::min(s.min_cosine, cosine(members[i].scaled, center));
    }
    s.coverage = total > 0.0 ? covered / total : 1.0;
    s.wmare = total > 0.0 ? err / total : 0.0;
    return s;
}

std::string first_failing(const GroupScore& s, const PrototypeConfig& cfg) {
    if (s.coverage < cfg.mass_coverage_min) return "mass_coverage";
    if (s.wmare > cfg.wmare_max) return "wmare";
    if (s.min_cosine < cfg.cosine_floor) return "cosine_floor";
    return {};
}

}  // namespace

void PrototypeConfig::validate() const {
    auto frac = [](double v) { return v > 0.0 && v <= 1.0; };
    if (!frac(aggregation_alpha) || !frac(mass_coverage_min) || !frac(wmare_max) ||
        !frac(cosine_floor)) {
        throw ConfigError("prototype fractions must lie in (0, 1]");
    }
    if (k_max < 1) throw ConfigError("prototype k_max must be >= 1");
}

NutrientVector rdi_scaled(const NutrientVector& v) {
    static const RdiProfile profile = RdiProfile::standard();
    NutrientVector out{};
    for (std::size_t k = 0; k < kNutrientCount; ++k) out[k] = v[k] / profile.nutrients[k].daily_rdi;
    return out;
}

std::map<std::string, double> food_usage(const std::vector<Meal>& meals) {
    std::map<std::string, double> usage;
    for (const auto& m : meals) {
        for (const auto& it : m.items) usage[it.food_code] += it.grams;
    }
    return usage;
}

PrototypeReport evaluate_prototypes(const std::vector<FoodRecord>& foods,
                                    const std::map<std::string, double>& usage,
                                    const std::map<std::string, std::string>& mapping,
                                    const std::vector<FoodRecord>& prototypes,
                                    const PrototypeConfig& cfg) {
    std::map<std::string, const FoodRecord*> proto_by_code;
    for (const auto& p : prototypes) proto_by_code[p.food_code] = &p;
    PrototypeReport rep;
    double total = 0.0, covered = 0.0, err = 0.0;
    for (const auto& f : foods) {
        const auto m = mapping.find(f.food_code);
        if (m == mapping.end()) throw LookupError("food " + f.food_code + " has no prototype");
        const auto p = proto_by_code.find(m->second);
        if (p == proto_by_code.end()) throw LookupError("unknown prototype " + m->second);
        const auto u = usage.find(f.food_code);
        if (u == usage.end()) throw ValidationError("no usage recorded for food " + f.food_code);
        const NutrientVector a = rdi_scaled(f.nutrients_per_100g);
        const NutrientVector b = rdi_scaled(p->second->nutrients_per_100g);
        PrototypeAssignment as{f.food_code, m->second, u->second, relative_error(a, b), cosine(a, b)};
        total += as.usage;
        err += as.usage * as.relative_error;
        if (as.relative_error <= cfg.aggregation_alpha) covered += as.usage;
        rep.min_cosine = std::min(rep.min_cosine, as.cosine);
        rep.assignments.push_back(std::move(as));
    }
    rep.mass_coverage = total > 0.0 ? covered / total : 1.0;
    rep.wmare = total > 0.0 ? err / total : 0.0;
    for (const auto& p : prototypes) ++rep.prototypes_per_subcategory[p.sub_category];
    return rep;
}

PrototypeResult aggregate_prototypes(const std::vector<FoodRecord>& foods,
                                     const std::map<std::string, double>& usage,
                                     const PrototypeConfig& cfg) {
    cfg.validate();
    std::map<std::string, std::vector<GroupMember>> groups;
    for (std::size_t i = 0; i < foods.size(); ++i) {
        const auto u = usage.find(foods[i].food_code);
        if (u == usage.end()) {
            throw ValidationError("no usage recorded for food " + foods[i].food_code);
        }
        groups[foods[i].sub_category].push_back(
            {i, rdi_scaled(foods[i].nutrients_per_100g), std::max(u->second, kMinWeight)});
    }

    PrototypeResult result;
    for (const auto& [sub, members] : groups) {
        Partition chosen;
        if (members.size() < cfg.min_subcategory_size) {
            chosen = weighted_kmeans(members, 1);
        } else {
            const std::size_t k_hi = std::min(cfg.k_max, members.size());
            std::string failing;
            bool found = false;
            for (std::size_t k = 1; k <= k_hi; ++k) {
                Partition part = weighted_kmeans(members, k);
                failing = first_failing(score_partition(members, part, cfg), cfg);
                if (failing.empty()) {
                    chosen = std::move(part);
                    found = true;
                    break;
                }
            }
            if (!found) {
                throw InfeasibleError("prototype aggregation: subcategory '" + sub +
                                      "' fails criterion " + failing + " at k_max=" +
                                      std::to_string(k_hi));
            }
        }
        // One prototype record per non-empty cluster, coded by its heaviest member.
        for (std::size_t c = 0; c < chosen.centers.size(); ++c) {
            const GroupMember* rep = nullptr;
            double mass = 0.0;
            NutrientVector centroid{};
            for (std::size_t i = 0; i < members.size(); ++i) {
                if (chosen.assignment[i] != c) continue;
                const auto& m = members[i];
                if (rep == nullptr || m.weight > rep->weight ||
                    (m.weight == rep->weight && foods[m.food].food_code < foods[rep->food].food_code)) {
                    rep = &m;
                }
                mass += m.weight;
                for (std::size_t k = 0; k < kNutrientCount; ++k) {
                    centroid[k] += m.weight * foods[m.food].nutrients_per_100g[k];
                }
            }
            if (rep == nullptr) continue;
            for (auto& v : centroid) v /= mass;
            FoodRecord proto = foods[rep->food];
            proto.nutrients_per_100g = centroid;
            for (std::size_t i = 0; i < members.size(); ++i) {
                if (chosen.assignment[i] == c) {
                    result.mapping[foods[members[i].food].food_code] = proto.food_code;
                }
            }
            result.prototypes.push_back(std::move(proto));
        }
    }

    result.report = evaluate_prototypes(foods, usage, result.mapping, result.prototypes, cfg);
    const auto& r = result.report;
    std::string failing;
    if (r.mass_coverage < cfg.mass_coverage_min) failing = "mass_coverage";
    else if (r.wmare > cfg.wmare_max) failing = "wmare";
    if (!failing.empty()) {
        throw InfeasibleError("prototype aggregation: pooled report fails criterion " + failing);
    }
    for (const auto& a : r.assignments) {
        if (a.cosine < cfg.cosine_floor) {
            const auto& sub = std::find_if(foods.begin(), foods.end(), [&](const FoodRecord& f) {
                                  return f.food_code == a.food_code;
                              })->sub_category;
            throw InfeasibleError("prototype aggregation: subcategory '" + sub +
                                  "' fails criterion cosine_floor for food " + a.food_code);
        }
    }
    return result;
}

std::vector<Meal> apply_prototypes(const std::vector<Meal>& meals,
                                   const std::map<std::string, std::string>& mapping) {
    std::vector<Meal> out;
    out.reserve(meals.size());
    for (const auto& m : meals) {
        Meal p = m;
        for (auto& it : p.items) {
            auto f = mapping.find(it.food_code);
            if (f == mapping.end()) throw LookupError("food " + it.food_code + " has no prototype");
            it.food_code = f->second;
        }
        p.items = merge_duplicate_items(p.items);
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace mealeng::corpus
