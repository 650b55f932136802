// One PASS/FAIL line per acceptance criterion. Criteria named with
// --known-failure are still run and reported, but do not fail the exit code.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mealeng/cluster_validation.hpp"
#include "mealeng/corpus.hpp"
#include "mealeng/errors.hpp"
#include "mealeng/io.hpp"
#include "mealeng/metrics.hpp"
#include "mealeng/pipeline.hpp"
#include "mealeng/portioner.hpp"
#include "mealeng/random.hpp"
#include "mealeng/stats.hpp"
#include "mealeng/substitution.hpp"
#include "mealeng/synthetic.hpp"
#include "oracles/lof_oracle.hpp"
#include "oracles/portion_oracle.hpp"
#include "oracles/stats_oracle.hpp"

using namespace mealeng;
namespace fs = std::filesystem;
namespace mt = mealeng::metrics;
namespace po = mealeng::portioner;
namespace sb = mealeng::substitution;
namespace pl = mealeng::pipeline;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool near(double a, double b, double tol = 1e-9) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

// ------------------------------------------------------------ metrics

Outcome metric_fixtures() {
    const auto t0 = Clock::now();
    std::vector<std::string> bad;
    auto expect = [&](bool ok, const char* what) {
        if (!ok) bad.push_back(what);
    };
    const std::vector<double> lim = {2300, 20, 50};
    expect(near(mt::mer(lim, lim), 1.0), "mer at limits");
    expect(near(mt::mer(std::vector<double>{4600, 20, 50}, lim), 4.0 / 3.0), "mer sodium 2x");
    expect(mt::mer(std::vector<double>{0, 0, 0}, lim) == 0.0, "mer zero");

    std::vector<double> rdi(11, 10.0);
    expect(mt::mar(std::vector<double>(11, 20.0), rdi) == 1.0, "mar above rdi");
    auto in = rdi;
    rdi[1] = 18.0;
    in[1] = 9.0;
    expect(near(mt::mar(in, rdi), 10.5 / 11.0), "mar iron half");
    expect(mt::mar(std::vector<double>(11, 0.0), rdi) == 0.0, "mar zero");

    expect(mt::amdr_composite({20, 30, 50}) == 1.0, "amdr inside");
    expect(near(mt::amdr_composite({5, 50, 45}), 1.0 / 3.0), "amdr carb only");
    expect(mt::amdr_composite({10, 20, 45}) == 1.0, "amdr boundary");

    expect(near(mt::hill_diversity(std::vector<double>{1.0}), 1.0), "hill single");
    expect(near(mt::hill_diversity(std::vector<double>{.25, .25, .25, .25}), 4.0), "hill uniform");
    expect(near(mt::hill_diversity(std::vector<double>{.5, .5}), 2.0), "hill halves");

    expect(near(mt::energy_density(500, 250), 2.0), "ed 500/250");
    expect(mt::energy_density(0, 100) == 0.0, "ed zero");
    expect(near(mt::energy_density(800, 800), 1.0), "ed 800/800");

    const std::vector<double> t(10, 3.0);
    expect(mt::rdi_deviation(t, t) == 0.0, "dev exact");
    auto one = t;
    one[4] = 6.0;
    expect(near(mt::rdi_deviation(one, t), 10.0), "dev one doubled");
    expect(near(mt::rdi_deviation(std::vector<double>(10, 4.5), t), 50.0), "dev all 1.5x");

    auto cohort = [](std::vector<double> g, std::vector<double> r) {
        mt::CohortValues c;
        c.cluster_id = 0;
        c.generated = {std::move(g)};
        c.real = {std::move(r)};
        return c;
    };
    const std::vector<mt::MetricSpec> dev = {{"rdi_deviation", mt::Direction::lower_is_better}};
    mt::CompareConfig cfg;
    cfg.seed = 3;
    std::vector<double> v(40);
    Rng rng(2);
    for (auto& x : v) x = 20 + rng.normal();
    auto rows = mt::compare_cohorts({cohort(v, v)}, dev, cfg);
    expect(rows[0].ci_lo <= 0.0 && rows[0].ci_hi >= 0.0 && !rows[0].improved, "identical cohorts");
    rows = mt::compare_cohorts({cohort(std::vector<double>(10, 10.0), std::vector<double>(10, 20.0))}, dev, cfg);
    expect(near(rows[0].ci_lo, -10.0) && near(rows[0].ci_hi, -10.0) && rows[0].improved, "constant cohorts");
    int excluded = 0;
    const int runs = 40;
    for (int r = 0; r < runs; ++r) {
        Rng g(derive_seed(100, "cal", r));
        std::vector<double> gen(200), real(200);
        for (auto& x : real) x = 20 + g.normal();
        for (auto& x : gen) x = 15 + g.normal();
        mt::CompareConfig c;
        c.seed = static_cast<std::uint64_t>(r);
        c.resamples = 1000;
        excluded += mt::compare_cohorts({cohort(gen, real)}, dev, c)[0].ci_hi < 0.0;
    }
    expect(excluded >= 0.95 * runs, "shift calibration");

    const double secs = seconds_since(t0);
    std::string detail = bad.empty() ? "all examples reproduced" : "mismatch:";
    for (const auto& b : bad) detail += " [" + b + "]";
    detail += ", " + fmt(secs, 3) + " s";
    return {bad.empty() && secs < 1.0, detail};
}

// ------------------------------------------------------------ portioner

struct PortionRun {
    std::size_t instances = 0, skipped = 0, beaten = 0, infeasible_solutions = 0;
    double total_solve_s = 0.0;
    double worst_gap = -1e300;  // solver objective minus random-search best
};

PortionRun run_portion_instances() {
    const auto profile = RdiProfile::standard();
    const po::PortionConstraints c;
    PortionRun r;
    for (std::uint64_t seed = 0; r.instances < 100; ++seed) {
        const auto type = static_cast<MealType>(seed % 3);
        const auto foods = synthetic::random_instance(4 + seed % 5, c.min_solids(type), seed);
        po::PortionSolution s;
        const auto t0 = Clock::now();
        try {
            s = po::solve_portions(foods, profile, type, c, seed);
        } catch (const InfeasibleError&) {
            ++r.skipped;
            continue;
        }
        r.total_solve_s += seconds_since(t0);
        ++r.instances;
        if (!oracle::feasible(s.grams, foods, type)) ++r.infeasible_solutions;
        const auto rs = oracle::random_search(foods, profile, type, 10000, derive_seed(seed, "oracle"));
        const double own = oracle::objective(s.grams, foods, profile, type);
        if (rs.accepted == 0 || own <= rs.best + 1e-9) ++r.beaten;
        if (rs.accepted > 0) r.worst_gap = std::max(r.worst_gap, own - rs.best);
    }
    return r;
}

Outcome portioner_oracle(const PortionRun& r) {
    const double mean_s = r.total_solve_s / static_cast<double>(r.instances);
    return {r.beaten == r.instances && mean_s < 1.0,
            std::to_string(r.beaten) + "/" + std::to_string(r.instances) +
                " at or below the best of 10000 random portionings (worst gap " + fmt(r.worst_gap) +
                "), mean solve " + fmt(mean_s * 1000, 3) + " ms, " + std::to_string(r.skipped) +
                " infeasible seeds skipped"};
}

// ------------------------------------------------------------ pipeline runs

struct PipelineRuns {
    fs::path a, b;
    double seconds_a = 0.0;
    std::string error;
};

PipelineRuns run_pipeline(const fs::path& data_dir) {
    PipelineRuns r;
    const fs::path root = fs::temp_directory_path() / "mealeng_acceptance";
    fs::remove_all(root);
    r.a = root / "run_a";
    r.b = root / "run_b";
    try {
        auto cfg = pl::load_config(data_dir / "config.json");
        cfg.paths.output_dir = r.a.string();
        const auto t0 = Clock::now();
        pl::run_all(cfg);
        r.seconds_a = seconds_since(t0);
        cfg.paths.output_dir = r.b.string();
        pl::run_all(cfg);
    } catch (const std::exception& e) {
        r.error = e.what();
    }
    return r;
}

Outcome portioner_feasibility(const PortionRun& r, const PipelineRuns& runs, const fs::path& data_dir) {
    std::size_t checked = r.instances, bad = r.infeasible_solutions;
    std::string note;
    if (runs.error.empty()) {
        const auto cfg = pl::load_config(data_dir / "config.json");
        const FoodTable foods(io::load_foods(cfg.paths.foods));
        for (const auto& m : po::portioned_meals_from_json(io::read_file(runs.a / "portioned_meals.json"))) {
            std::vector<FoodRecord> recs;
            for (const auto& code : m.solution.food_codes) recs.push_back(foods.at(code));
            ++checked;
            if (!oracle::feasible(m.solution.grams, recs, m.meal_type)) ++bad;
        }
    } else {
        note = " (pipeline meals unavailable: " + runs.error + ")";
    }
    return {bad == 0 && runs.error.empty(),
            std::to_string(checked - bad) + "/" + std::to_string(checked) +
                " solutions within every cap and +-1% of the energy target" + note};
}

Outcome end_to_end_gate(const PipelineRuns& runs) {
    if (!runs.error.empty()) return {false, "pipeline failed: " + runs.error};
    const auto j = nlohmann::json::parse(io::read_file(runs.a / "evaluation_gate.json"));
    const double median = j.at("median_cluster_reduction").get<double>();
    const double pooled = j.at("pooled_reduction").get<double>();
    const bool fast = runs.seconds_a < 300.0;
    return {median >= 0.30 && fast, "median cluster reduction " + fmt(median * 100, 3) + "% (pooled " +
                                        fmt(pooled * 100, 3) + "%), gate 30%, runtime " +
                                        fmt(runs.seconds_a, 3) + " s"};
}

Outcome determinism(const PipelineRuns& runs) {
    if (!runs.error.empty()) return {false, "pipeline failed: " + runs.error};
    std::set<std::string> names;
    for (const auto& dir : {runs.a, runs.b}) {
        for (const auto& e : fs::recursive_directory_iterator(dir)) {
            if (e.is_regular_file()) names.insert(fs::relative(e.path(), dir).string());
        }
    }
    std::size_t differ = 0;
    std::string first;
    for (const auto& n : names) {
        const bool both = fs::exists(runs.a / n) && fs::exists(runs.b / n);
        if (!both || io::read_file(runs.a / n) != io::read_file(runs.b / n)) {
            if (differ++ == 0) first = n;
        }
    }
    return {differ == 0 && !names.empty(), std::to_string(names.size() - differ) + "/" + std::to_string(names.size()) +
                                               " artifacts byte-identical" +
                                               (differ ? ", first difference in " + first : "")};
}

// Best pooled V per theta must not drop as the allowed edit count grows.
Outcome frontier_nesting(const PipelineRuns& runs, const fs::path& data_dir) {
    if (!runs.error.empty()) return {false, "pipeline failed: " + runs.error};
    const auto table = io::read_csv(runs.a / "candidates.csv");
    auto col = [&](const char* n) { return table.column(n); };
    const auto c_meal = col("meal_id"), c_id = col("candidate_id"), c_k = col("k_sub"), c_h = col("H"),
               c_s = col("S"), c_ci = col("CI"), c_cost = col("cost_sub"), c_e = col("E"),
               c_shift = col("portion_shift_pct"), c_within = col("within_category"),
               c_mixed = col("adds_mixed_dish");
    std::map<std::string, std::vector<sb::Candidate>> by_meal;
    for (const auto& row : table.rows) {
        sb::Candidate c;
        c.source_meal_id = row[c_meal];
        c.candidate_id = row[c_id];
        c.k_sub = static_cast<int>(io::parse_int(row[c_k], "k_sub"));
        c.health = io::parse_double(row[c_h], "H");
        c.saving = io::parse_double(row[c_s], "S");
        c.increase = io::parse_double(row[c_ci], "CI");
        c.cost_sub = io::parse_double(row[c_cost], "cost_sub");
        c.effort = io::parse_double(row[c_e], "E");
        c.portion_shift_pct = io::parse_double(row[c_shift], "portion_shift_pct");
        c.within_category = io::parse_bool(row[c_within]);
        c.adds_mixed_dish = io::parse_bool(row[c_mixed]);
        by_meal[c.source_meal_id].push_back(std::move(c));
    }
    const auto cfg = pl::load_config(data_dir / "config.json");
    std::size_t checks = 0, violations = 0;
    for (const auto& [meal, cands] : by_meal) {
        for (double theta : cfg.sweep.theta_grid) {
            auto p = cfg.tradeoff;
            p.theta = theta;
            double prev = -1e300;
            for (int k = 1; k <= 3; ++k) {
                const auto w = sb::pooled_argmax(sb::up_to_k_sub(cands, k), p);
                const double v = w ? sb::value_score(*w, p) : -1e300;
                if (k > 1) {
                    ++checks;
                    if (v < prev - 1e-12) ++violations;
                }
                prev = v;
            }
        }
    }
    return {violations == 0 && checks > 0, std::to_string(violations) + " violations over " + std::to_string(checks) +
                                               " (meal, theta, K) steps on " + std::to_string(by_meal.size()) +
                                               " meals"};
}

// ------------------------------------------------------------ LOF and tests

Outcome lof_equivalence() {
    std::size_t mismatches = 0, scores = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(derive_seed(seed, "lof"));
        const std::size_t n = 20 + rng.below(181);
        const std::size_t dim = 1 + rng.below(6);
        const std::size_t k = 1 + rng.below(std::min<std::size_t>(n - 1, 25));
        oracle::Points pts(n, std::vector<double>(dim));
        for (auto& p : pts)
            for (auto& v : p) v = rng.below(4) == 0 ? static_cast<double>(rng.below(3)) : rng.normal();
        Matrix m;
        for (const auto& p : pts) m.push_row(p);
        const auto got = corpus::local_outlier_factor(m, k);
        const auto want = oracle::lof(pts, k);
        for (std::size_t i = 0; i < n; ++i) {
            ++scores;
            const double err = std::abs(got[i] - want[i]) / std::max(1.0, std::abs(want[i]));
            worst = std::max(worst, err);
            if (err > 1e-9) ++mismatches;
        }
    }
    return {mismatches == 0, std::to_string(scores - mismatches) + "/" + std::to_string(scores) +
                                 " scores within 1e-9 over 20 seeds (worst relative error " + fmt(worst, 3) + ")"};
}

Outcome bh_and_hurdle() {
    std::size_t bh_bad = 0, fisher_bad = 0, mw_bad = 0, hurdle_bad = 0, mono_bad = 0, cases = 0;
    Rng rng(2024);
    // BH over every family size up to 12, with ties
    for (std::size_t m = 1; m <= 12; ++m) {
        for (int rep = 0; rep < 50; ++rep) {
            std::vector<double> p(m);
            for (auto& v : p) v = rng.below(4) == 0 ? 0.01 * static_cast<double>(rng.below(5)) : rng.uniform() * 0.2;
            const double q = rng.uniform(0.001, 0.2);
            const auto got = stats::bh_fdr(p, q);
            const auto want = oracle::bh(p, q);
            ++cases;
            bool ok = got.reject == want.reject;
            for (std::size_t i = 0; i < m; ++i) ok = ok && near(got.q_values[i], want.q_values[i], 1e-12);
            bh_bad += !ok;
        }
    }
    // Fisher over every table with group sizes up to 12
    for (unsigned n1 = 1; n1 <= 12; ++n1)
        for (unsigned n2 = 1; n2 <= 12; ++n2)
            for (unsigned a = 0; a <= n1; ++a)
                for (unsigned c = 0; c <= n2; ++c) {
                    ++cases;
                    fisher_bad += !near(stats::fisher_exact_two_sided(a, n1 - a, c, n2 - c),
                                        oracle::fisher(a, n1 - a, c, n2 - c), 1e-9);
                }
    // Mann-Whitney and the hurdle for every pair of group sizes up to 12
    for (std::size_t n1 = 1; n1 <= 12; ++n1) {
        for (std::size_t n2 = 1; n2 <= 12; ++n2) {
            std::vector<double> a(n1), b(n2);
            for (auto& v : a) v = static_cast<double>(1 + rng.below(8));
            for (auto& v : b) v = static_cast<double>(2 + rng.below(8));
            ++cases;
            mw_bad += !near(stats::mann_whitney(a, b).p, oracle::mann_whitney_exact(a, b), 1e-9);

            for (auto& v : a) v = rng.below(3) == 0 ? 0.0 : static_cast<double>(1 + rng.below(6));
            for (auto& v : b) v = rng.below(2) == 0 ? 0.0 : static_cast<double>(2 + rng.below(6));
            std::vector<double> za, zb;
            for (double v : a)
                if (v != 0) za.push_back(v);
            for (double v : b)
                if (v != 0) zb.push_back(v);
            const auto got = clusters::hurdle_test(a, b);
            double want = 1.0;
            if (!za.empty() || !zb.empty()) {
                const double pf = oracle::fisher(za.size(), n1 - za.size(), zb.size(), n2 - zb.size());
                const double pm = za.empty() || zb.empty() ? 1.0 : oracle::mann_whitney_exact(za, zb);
                want = std::min(1.0, 2 * std::min(pf, pm));
            }
            ++cases;
            hurdle_bad += !near(got.p, want, 1e-9);
        }
    }
    // rejections grow with q over a 20-point grid
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> p(30);
        for (auto& v : p) v = std::pow(rng.uniform(), 3.0);
        std::vector<bool> prev(p.size(), false);
        for (int g = 1; g <= 20; ++g) {
            const auto r = stats::bh_fdr(p, 0.01 * g);
            for (std::size_t i = 0; i < p.size(); ++i) mono_bad += prev[i] && !r.reject[i];
            prev = r.reject;
        }
    }
    const std::size_t bad = bh_bad + fisher_bad + mw_bad + hurdle_bad + mono_bad;
    return {bad == 0, std::to_string(cases) + " oracle cases; mismatches: bh " + std::to_string(bh_bad) + ", fisher " +
                          std::to_string(fisher_bad) + ", mann-whitney " + std::to_string(mw_bad) + ", hurdle " +
                          std::to_string(hurdle_bad) + "; q-grid monotonicity violations " +
                          std::to_string(mono_bad)};
}

// ------------------------------------------------------------ substitution

sb::Candidate cand(std::string id, double h, double s, double ci, bool within, bool mixed, double shift) {
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

Outcome substitution_monotonicity() {
    Rng rng(99);
    std::size_t violations = 0, steps = 0;
    for (int pool_i = 0; pool_i < 50; ++pool_i) {
        std::vector<sb::Candidate> pool;
        const std::size_t n = 2 + rng.below(20);
        for (std::size_t i = 0; i < n; ++i) {
            const bool dearer = rng.below(3) == 0;
            pool.push_back(cand("c" + std::to_string(i), rng.uniform(0, 20), dearer ? 0 : rng.uniform(0, 30),
                                dearer ? rng.uniform(0, 10) : 0, rng.below(2), rng.below(4) == 0,
                                rng.uniform(0, 50)));
        }
        bool first = true;
        double prev_hc = 0, prev_s = 0;
        for (double th : sb::kDefaultThetaGrid) {
            sb::TradeoffParams p;
            p.theta = th;
            const auto w = sb::pooled_argmax(pool, p);
            if (!w) continue;
            if (!first) {
                ++steps;
                if (w->health - w->increase < prev_hc - 1e-12 || w->saving > prev_s + 1e-12) ++violations;
            }
            first = false;
            prev_hc = w->health - w->increase;
            prev_s = w->saving;
        }
    }
    return {violations == 0, std::to_string(violations) + " violations over " + std::to_string(steps) +
                                 " theta steps on 50 pools"};
}

Outcome winner_examples() {
    sb::TradeoffParams p;
    p.theta = 1.0;  // V = (H + S) / 2
    std::vector<std::string> bad;
    auto w = sb::select_winner({cand("within", 18, 0, 0, true, false, 0), cand("cross", 22, 0, 0, false, true, 0)}, p);
    if (!w || w->candidate_id != "within") bad.push_back("mixed-dish margin");
    w = sb::select_winner({cand("within", 18, 0, 0, true, false, 0), cand("cross", 22, 0, 0, false, false, 0)}, p);
    if (!w || w->candidate_id != "cross") bad.push_back("20% uplift");
    w = sb::select_winner({cand("b", 10, 0, 0, true, false, 8), cand("a", 10, 0, 0, true, false, 5)}, p);
    if (!w || w->candidate_id != "a") bad.push_back("portion-shift tie");
    std::string detail = bad.empty() ? "3/3 examples reproduced" : "failed:";
    for (const auto& b : bad) detail += " [" + b + "]";
    return {bad.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::vector<std::string> known;
    std::string data_dir = MEALENG_DATA_DIR;
    app.add_option("--known-failure", known, "criterion reported but not counted against the exit code");
    app.add_option("--data-dir", data_dir, "directory holding config.json and the synthetic corpus");
    CLI11_PARSE(app, argc, argv);
    const std::set<std::string> known_set(known.begin(), known.end());

    int unexpected = 0;
    auto report = [&](const std::string& name, const Outcome& o) {
        const bool expected_fail = !o.pass && known_set.count(name);
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail
                  << (expected_fail ? " (known failure)" : "") << std::endl;
        if (!o.pass && !expected_fail) ++unexpected;
    };

    report("metric_fixtures", metric_fixtures());
    const auto portion = run_portion_instances();
    report("portioner_oracle", portioner_oracle(portion));
    const auto runs = run_pipeline(data_dir);
    report("portioner_feasibility", portioner_feasibility(portion, runs, data_dir));
    report("end_to_end_gate", end_to_end_gate(runs));
    report("lof_equivalence", lof_equivalence());
    report("bh_fdr_and_hurdle", bh_and_hurdle());
    report("substitution_monotonicity", substitution_monotonicity());
    report("frontier_nesting", frontier_nesting(runs, data_dir));
    report("determinism", determinism(runs));
    report("winner_rule_examples", winner_examples());
    return unexpected == 0 ? 0 : 1;
}
