#include "mealeng/cluster_validation.hpp"

#include <cmath>
#include <limits>

#include "mealeng/errors.hpp"
#include "mealeng/io.hpp"
#include "mealeng/stats.hpp"

namespace mealeng::clusters {

void ClusterConfig::validate() const {
    if (!(merge_cosine > 0.0) || !(fdr_q > 0.0) || !(sig_delta_min > 0.0) ||
        !(distinctive_delta > 0.0)) {
        throw ConfigError("cluster thresholds must be positive");
    }
}

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) return aa == bb ? 1.0 : 0.0;
    return ab / std::sqrt(aa * bb);
}

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

}  // namespace

std::map<int, int> merge_plan(const std::map<int, Centroid>& centroids, std::size_t size_floor,
                              double merge_cosine) {
    std::vector<int> large;
    for (const auto& [id, c] : centroids) {
        if (c.size >= size_floor) large.push_back(id);
    }
    if (large.empty()) {
        throw ValidationError("merge_small_clusters: no cluster reaches size " +
                              std::to_string(size_floor));
    }
    std::map<int, int> plan;
    for (const auto& [id, c] : centroids) {
        if (c.size >= size_floor) continue;
        int best_cos_id = large.front();
        double best_cos = -std::numeric_limits<double>::infinity();
        int nearest_id = large.front();
        double nearest = std::numeric_limits<double>::infinity();
        for (int l : large) {
            const auto& lc = centroids.at(l).values;
            const double cs = cosine(c.values, lc);
            if (cs > best_cos) {
                best_cos = cs;
                best_cos_id = l;
            }
            const double d = euclidean(c.values, lc);
            if (d < nearest) {
                nearest = d;
                nearest_id = l;
            }
        }
        plan[id] = best_cos > merge_cosine ? best_cos_id : nearest_id;
    }
    return plan;
}

std::map<int, Centroid> cluster_centroids(std::span<const int> labels, const Matrix& z) {
    if (labels.size() != z.rows()) throw ValidationError("labels do not match feature rows");
    std::map<int, Centroid> out;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels[r] == kNoise) continue;
        auto& c = out[labels[r]];
        if (c.values.empty()) c.values.assign(z.cols(), 0.0);
        for (std::size_t j = 0; j < z.cols(); ++j) c.values[j] += z(r, j);
        ++c.size;
    }
    for (auto& [_, c] : out) {
        for (auto& v : c.values) v /= static_cast<double>(c.size);
    }
    return out;
}

std::vector<int> merge_small_clusters(std::span<const int> labels, const Matrix& z,
                                      std::size_t size_floor, double merge_cosine) {
    const auto plan = merge_plan(cluster_centroids(labels, z), size_floor, merge_cosine);
    std::vector<int> out(labels.begin(), labels.end());
    for (auto& l : out) {
        auto it = plan.find(l);
        if (it != plan.end()) l = it->second;
    }
    return out;
}

HurdleResult hurdle_test(std::span<const double> in_cluster, std::span<const double> complement) {
    HurdleResult r;
    std::vector<double> nz_in, nz_out;
    for (double v : in_cluster) {
        if (v != 0.0) nz_in.push_back(v);
    }
    for (double v : complement) {
        if (v != 0.0) nz_out.push_back(v);
    }
    if (nz_in.empty() && nz_out.empty()) return r;
    r.tested = true;
    r.p_prevalence = stats::fisher_exact_two_sided(nz_in.size(), in_cluster.size() - nz_in.size(),
                                                   nz_out.size(), complement.size() - nz_out.size());
    if (!nz_in.empty() && !nz_out.empty()) r.p_intensity = stats::mann_whitney(nz_in, nz_out).p;
    r.p = std::min(1.0, 2.0 * std::min(r.p_prevalence, r.p_intensity));
    return r;
}

FeatureFlags classify(double delta, double q, const ClusterConfig& cfg) {
    FeatureFlags f;
    f.significant = q <= cfg.fdr_q && std::abs(delta) >= cfg.sig_delta_min;
    f.distinctive = f.significant && std::abs(delta) >= cfg.distinctive_delta;
    return f;
}

std::vector<ClusterProfile> profile_clusters(std::span<const int> labels,
                                             const features::StandardizedBlock& block,
                                             const ClusterConfig& cfg) {
    cfg.validate();
    if (labels.size() != block.rows.size()) {
        throw ValidationError("profile_clusters: labels do not match block rows");
    }
    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != kNoise) members[labels[i]].push_back(i);
    }
    std::vector<ClusterProfile> profiles;
    std::vector<double> p_all;
    for (const auto& [id, rows] : members) {
        ClusterProfile prof;
        prof.cluster_id = id;
        prof.size = rows.size();
        std::vector<bool> in(labels.size(), false);
        for (auto r : rows) in[r] = true;
        for (std::size_t j = 0; j < block.kept.size(); ++j) {
            std::vector<double> raw_in, raw_out, z_in, z_out;
            for (std::size_t r = 0; r < labels.size(); ++r) {
                (in[r] ? raw_in : raw_out).push_back(block.raw(r, j));
                (in[r] ? z_in : z_out).push_back(block.z(r, j));
            }
            FeatureProfile fp;
            fp.feature = block.kept_names[j];
            if (!z_out.empty()) {
                fp.mean_in = stats::mean(z_in);
                fp.mean_out = stats::mean(z_out);
                fp.delta = fp.mean_in - fp.mean_out;
                fp.p_value = hurdle_test(raw_in, raw_out).p;
                if (z_in.size() >= 2 && z_out.size() >= 2) {
                    fp.cohens_d = stats::cohens_d(z_in, z_out);
                    fp.d_degenerate = std::isinf(fp.cohens_d);
                }
            }
            p_all.push_back(fp.p_value);
            prof.features.push_back(std::move(fp));
        }
        profiles.push_back(std::move(prof));
    }
    const auto fdr = stats::bh_fdr(p_all, cfg.fdr_q);
    std::size_t k = 0;
    for (auto& prof : profiles) {
        for (auto& fp : prof.features) {
            fp.q_value = fdr.q_values[k++];
            const auto flags = classify(fp.delta, fp.q_value, cfg);
            fp.significant = flags.significant;
            fp.distinctive = flags.distinctive;
        }
    }
    return profiles;
}

std::string profiles_to_csv(const std::vector<ClusterProfile>& profiles) {
    std::string out =
        io::csv_row({"cluster_id", "feature", "delta", "p", "q", "cohens_d", "significant", "distinctive"});
    for (const auto& prof : profiles) {
        for (const auto& f : prof.features) {
            out += io::csv_row({std::to_string(prof.cluster_id), f.feature, io::fmt_double(f.delta),
                                io::fmt_double(f.p_value), io::fmt_double(f.q_value),
                                io::fmt_double(f.cohens_d), f.significant ? "1" : "0",
                                f.distinctive ? "1" : "0"});
        }
    }
    return out;
}

}  // namespace mealeng::clusters
