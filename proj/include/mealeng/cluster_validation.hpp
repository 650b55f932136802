#pragma once
// Post-processing of externally produced cluster labels: small-cluster
// merging and statistical profiling of each cluster against its complement.

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mealeng/features.hpp"
#include "mealeng/food.hpp"
#include "mealeng/matrix.hpp"

namespace mealeng::clusters {

inline constexpr int kNoise = -1;

// Parameters of the external density clusterer. Carried through config and
// the run manifest; this library does not cluster.
struct ClustererParams {
    std::size_t min_cluster_size = 50;
    std::size_t min_samples = 25;
    double alpha = 1.0;
    double cluster_selection_epsilon = 0.1;
};

struct ClusterConfig {
    std::array<ClustererParams, 3> clusterer = {{
        {50, 25, 1.0, 0.1},   // breakfast
        {40, 20, 1.0, 0.08},  // lunch
        {35, 18, 1.0, 0.06},  // dinner
    }};
    double merge_cosine = 0.7;
    double fdr_q = 0.01;
    double sig_delta_min = 0.15;
    double distinctive_delta = 0.20;

    const ClustererParams& params(MealType t) const { return clusterer[static_cast<std::size_t>(t)]; }
    void validate() const;  // throws ConfigError
};

struct Centroid {
    std::vector<double> values;
    std::size_t size = 0;
};

// Target cluster for every cluster below size_floor: the most
// cosine-similar large cluster when that similarity exceeds merge_cosine,
// otherwise the Euclidean-nearest large cluster. Throws ValidationError when
// no cluster reaches size_floor.
std::map<int, int> merge_plan(const std::map<int, Centroid>& centroids, std::size_t size_floor,
                              double merge_cosine = 0.7);

std::map<int, Centroid> cluster_centroids(std::span<const int> labels, const Matrix& z);

// Noise labels (-1) are left as they are.
std::vector<int> merge_small_clusters(std::span<const int> labels, const Matrix& z,
                                      std::size_t size_floor, double merge_cosine = 0.7);

struct HurdleResult {
    double p_prevalence = 1.0;  // Fisher exact on the zero / non-zero table
    double p_intensity = 1.0;   // Mann-Whitney on the non-zero values
    double p = 1.0;             // min(1, 2 * min(p_prevalence, p_intensity))
    bool tested = false;        // false when both groups are all zero
};

HurdleResult hurdle_test(std::span<const double> in_cluster, std::span<const double> complement);

struct FeatureProfile {
    std::string feature;
    double mean_in = 0.0;
    double mean_out = 0.0;
    double delta = 0.0;  // on standardized values
    double p_value = 1.0;
    double q_value = 1.0;
    double cohens_d = 0.0;
    bool d_degenerate = false;  // zero pooled sd with unequal means (d is +-inf)
    bool significant = false;
    bool distinctive = false;
};

struct ClusterProfile {
    int cluster_id = 0;
    std::size_t size = 0;
    std::vector<FeatureProfile> features;
};

struct FeatureFlags {
    bool significant = false;
    bool distinctive = false;
};

// significant iff q <= fdr_q and |delta| >= sig_delta_min; distinctive iff
// significant and |delta| >= distinctive_delta.
FeatureFlags classify(double delta, double q, const ClusterConfig& cfg);

// Hurdle tests run on the raw columns, mean differences and Cohen's d on the
// z-scored columns. BH is applied once over every (cluster, feature) pair.
std::vector<ClusterProfile> profile_clusters(std::span<const int> labels,
                                             const features::StandardizedBlock& block,
                                             const ClusterConfig& cfg);

std::string profiles_to_csv(const std::vector<ClusterProfile>& profiles);

}  // namespace mealeng::clusters
