#pragma once
// Pipeline stages over a corpus directory and an output directory. Each stage
// reads the artifacts of earlier stages from the output directory, writes its
// own atomically, and records input/output hashes in manifest.json.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mealeng/cluster_validation.hpp"
#include "mealeng/corpus.hpp"
#include "mealeng/generator.hpp"
#include "mealeng/portioner.hpp"
#include "mealeng/substitution.hpp"

namespace mealeng::pipeline {

inline constexpr std::string_view kVersion = "0.1.0";

struct Paths {
    std::string foods = "foods.csv";
    std::string meals = "meals.csv";
    std::string labels = "labels.csv";      // optional
    std::string codemap = "codemap.csv";    // optional
    std::string pricebook = "pricebook.json";
    std::string probability_export;          // optional; overrides the fitted sampler
    std::string output_dir = "out";
};

struct IngestParams {
    corpus::LofConfig lof{};
    std::size_t presence_resamples = 1000;
    double presence_level = 0.95;
};

struct PrototypeParams {
    corpus::PrototypeConfig config{};
    bool apply = false;  // rewrite foods and meals through the prototype map downstream
};

struct GenerateParams {
    generator::CombinationConstraints constraints{};
    std::size_t meals_per_cluster = 100;
};

struct EvaluateParams {
    std::size_t resamples = 1000;
    double level = 0.95;
    double fdr_q = 0.05;
};

struct SweepParams {
    std::vector<double> theta_grid = substitution::kDefaultThetaGrid;
    std::vector<int> k_subs = {1, 2, 3};
    std::size_t resamples = 1000;
    double level = 0.95;
};

struct PipelineConfig {
    std::uint64_t seed = 42;
    Paths paths{};
    IngestParams ingest{};
    PrototypeParams prototype{};
    clusters::ClusterConfig cluster{};
    GenerateParams generate{};
    portioner::PortionConstraints portion{};
    portioner::SolverOptions solver{};
    EvaluateParams evaluate{};
    substitution::RetrievalConfig retrieval{};
    substitution::TradeoffParams tradeoff{};
    SweepParams sweep{};

    void validate() const;  // throws ConfigError
};

// Full config as JSON text (every parameter serialized).
std::string config_to_json(const PipelineConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected. Relative
// paths are resolved against `base_dir` when given.
PipelineConfig config_from_json(std::string_view text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

enum class Stage {
    ingest,
    prototype,
    cluster_profile,
    fit_sampler,
    generate,
    portion,
    evaluate,
    price,
    substitute,
    sweep,
    report,
};

inline constexpr Stage kAllStages[] = {Stage::ingest,     Stage::prototype, Stage::cluster_profile,
                                       Stage::fit_sampler, Stage::generate,  Stage::portion,
                                       Stage::evaluate,   Stage::price,     Stage::substitute,
                                       Stage::sweep,      Stage::report};

std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view s);  // throws ValidationError

// Output file names of a stage, relative to the output directory.
std::vector<std::string> stage_outputs(Stage s);

void run_stage(Stage s, const PipelineConfig& cfg);
void run_all(const PipelineConfig& cfg);

// 64-bit FNV-1a of a byte string, as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace mealeng::pipeline
