#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>

#include "mealeng/corpus.hpp"
#include "mealeng/errors.hpp"

namespace mealeng::corpus {

namespace {

constexpr double kMinReach = 1e-12;

struct Neighborhood {
    double k_distance = 0.0;
    std::vector<std::size_t> members;
    std::vector<double> distances;
};

std::vector<double> lof_scores(std::size_t n, std::size_t k,
                               const std::function<double(std::size_t, std::size_t)>& dist) {
    if (n <= k) throw ValidationError("insufficient meals: LOF needs more than k points");
    std::vector<Neighborhood> hood(n);
    std::vector<double> d(n);
    std::vector<double> scratch;
    for (std::size_t p = 0; p < n; ++p) {
        scratch.clear();
        for (std::size_t o = 0; o < n; ++o) {
            d[o] = o == p ? 0.0 : dist(p, o);
            if (o != p) scratch.push_back(d[o]);
        }
        std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k - 1),
                         scratch.end());
        auto& h = hood[p];
        h.k_distance = scratch[k - 1];
        for (std::size_t o = 0; o < n; ++o) {
            if (o != p && d[o] <= h.k_distance) {
                h.members.push_back(o);
                h.distances.push_back(d[o]);
            }
        }
    }
    std::vector<double> lrd(n);
    for (std::size_t p = 0; p < n; ++p) {
        const auto& h = hood[p];
        double reach = 0.0;
        for (std::size_t i = 0; i < h.members.size(); ++i) {
            reach += std::max(hood[h.members[i]].k_distance, h.distances[i]);
        }
        reach /= static_cast<double>(h.members.size());
        lrd[p] = 1.0 / std::max(reach, kMinReach);
    }
    std::vector<double> lof(n);
    for (std::size_t p = 0; p < n; ++p) {
        double s = 0.0;
        for (auto o : hood[p].members) s += lrd[o] / lrd[p];
        lof[p] = s / static_cast<double>(hood[p].members.size());
    }
    return lof;
}

// Sparse rows: (column, value) pairs sorted by column.
using SparseRow = std::vector<std::pair<std::size_t, double>>;

double sparse_distance(const SparseRow& a, const SparseRow& b) {
    double s = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        if (j == b.size() || (i < a.size() && a[i].first < b[j].first)) {
            s += a[i].second * a[i].second;
            ++i;
        } else if (i == a.size() || b[j].first < a[i].first) {
            s += b[j].second * b[j].second;
            ++j;
        } else {
            const double diff = a[i].second - b[j].second;
            s += diff * diff;
            ++i;
            ++j;
        }
    }
    return std::sqrt(s);
}

std::vector<std::string> code_universe(const std::vector<Meal>& meals) {
    std::set<std::string> codes;
    for (const auto& m : meals) {
        for (const auto& it : m.items) codes.insert(it.food_code);
    }
    return {codes.begin(), codes.end()};
}

std::vector<SparseRow> sparse_encode(const std::vector<Meal>& meals, LofInput input) {
    const auto codes = code_universe(meals);
    std::vector<SparseRow> rows;
    rows.reserve(meals.size());
    for (const auto& m : meals) {
        SparseRow r;
        for (const auto& it : m.items) {
            const auto col = static_cast<std::size_t>(
                std::lower_bound(codes.begin(), codes.end(), it.food_code) - codes.begin());
            r.emplace_back(col, input == LofInput::presence ? 1.0 : it.grams);
        }
        std::sort(r.begin(), r.end());
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace

std::vector<double> local_outlier_factor(const Matrix& points, std::size_t k) {
    if (k == 0) throw ConfigError("LOF neighborhood size must be >= 1");
    return lof_scores(points.rows(), k, [&](std::size_t a, std::size_t b) {
        double s = 0.0;
        const auto ra = points.row(a), rb = points.row(b);
        for (std::size_t c = 0; c < ra.size(); ++c) {
            const double diff = ra[c] - rb[c];
            s += diff * diff;
        }
        return std::sqrt(s);
    });
}

Matrix encode_meals(const std::vector<Meal>& meals, LofInput input) {
    const auto codes = code_universe(meals);
    Matrix x(meals.size(), codes.size());
    for (std::size_t r = 0; r < meals.size(); ++r) {
        for (const auto& it : meals[r].items) {
            const auto col = static_cast<std::size_t>(
                std::lower_bound(codes.begin(), codes.end(), it.food_code) - codes.begin());
            x(r, col) = input == LofInput::presence ? 1.0 : it.grams;
        }
    }
    return x;
}

LofResult lof_filter(const std::vector<Meal>& meals, const LofConfig& cfg) {
    if (cfg.neighborhood_k == 0) throw ConfigError("LOF neighborhood size must be >= 1");
    if (!(cfg.contamination >= 0.0 && cfg.contamination < 1.0)) {
        throw ConfigError("LOF contamination must be in [0, 1)");
    }
    if (meals.size() <= cfg.neighborhood_k) {
        throw ValidationError("insufficient meals: " + std::to_string(meals.size()) +
                              " meals for LOF neighborhood k=" +
                              std::to_string(cfg.neighborhood_k));
    }
    const auto rows = sparse_encode(meals, cfg.input);
    LofResult out;
    out.scores = lof_scores(meals.size(), cfg.neighborhood_k, [&](std::size_t a, std::size_t b) {
        return sparse_distance(rows[a], rows[b]);
    });

    const auto budget =
        static_cast<std::size_t>(std::ceil(cfg.contamination * static_cast<double>(meals.size()) - 1e-9));
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < meals.size(); ++i) {
        if (out.scores[i] > 1.0) candidates.push_back(i);
    }
    std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
        if (out.scores[a] != out.scores[b]) return out.scores[a] > out.scores[b];
        return meals[a].meal_id < meals[b].meal_id;
    });
    if (candidates.size() > budget) candidates.resize(budget);
    std::vector<bool> removed(meals.size(), false);
    for (auto i : candidates) removed[i] = true;
    for (std::size_t i = 0; i < meals.size(); ++i) {
        if (removed[i]) {
            out.removed_ids.push_back(meals[i].meal_id);
        } else {
            out.kept.push_back(meals[i]);
        }
    }
    std::sort(out.removed_ids.begin(), out.removed_ids.end());
    return out;
}

}  // namespace mealeng::corpus
