// mealeng command line: one subcommand per pipeline stage, plus `run` for the
// whole pipeline, `synth` for the bundled synthetic corpus and
// `default-config`.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mealeng/errors.hpp"
#include "mealeng/io.hpp"
#include "mealeng/pipeline.hpp"
#include "mealeng/synthetic.hpp"

namespace pl = mealeng::pipeline;

namespace {

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string export_path;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("-c,--config", o.config, "pipeline config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "override the global seed");
    cmd->add_option("-o,--out", o.out, "override the output directory");
    cmd->add_option("--export", o.export_path, "probability export to sample from");
}

// File values, then MEALENG_OUTPUT_ROOT for the output directory, then flags.
pl::PipelineConfig resolve_config(const CommonOptions& o) {
    auto cfg = pl::load_config(o.config);
    if (const char* root = std::getenv("MEALENG_OUTPUT_ROOT"); root && *root) cfg.paths.output_dir = root;
    if (o.seed) cfg.seed = *o.seed;
    if (!o.out.empty()) cfg.paths.output_dir = o.out;
    if (!o.export_path.empty()) cfg.paths.probability_export = o.export_path;
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mealeng: standard-aligned meal generation, portioning and substitution"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(pl::kVersion));

    CommonOptions common;
    std::optional<pl::Stage> stage;
    bool run_all = false;
    for (pl::Stage s : pl::kAllStages) {
        auto* cmd = app.add_subcommand(std::string(pl::to_string(s)), "run the " + std::string(pl::to_string(s)) + " stage");
        add_common(cmd, common);
        cmd->callback([&stage, s] { stage = s; });
    }
    auto* run = app.add_subcommand("run", "run every stage in order");
    add_common(run, common);
    run->callback([&run_all] { run_all = true; });

    std::string synth_dir;
    mealeng::synthetic::CorpusConfig synth_cfg;
    auto* synth = app.add_subcommand("synth", "write the seeded synthetic corpus");
    synth->add_option("-o,--out", synth_dir, "corpus directory")->required();
    synth->add_option("--seed", synth_cfg.seed, "corpus seed");
    synth->add_option("--meals-per-cluster", synth_cfg.meals_per_cluster, "meals per planted archetype");
    synth->add_option("--meal-size-sd", synth_cfg.meal_size_sd, "log-normal sd of the per-meal portion factor");

    auto* defaults = app.add_subcommand("default-config", "print the default config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) {
            mealeng::synthetic::write_corpus(mealeng::synthetic::make_corpus(synth_cfg), synth_dir);
            return 0;
        }
        if (defaults->parsed()) {
            std::cout << pl::config_to_json(pl::PipelineConfig{});
            return 0;
        }
        const auto cfg = resolve_config(common);
        if (run_all) pl::run_all(cfg);
        else if (stage) pl::run_stage(*stage, cfg);
        return 0;
    } catch (const mealeng::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
