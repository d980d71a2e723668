#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "metasel/pipeline.hpp"

namespace {

std::size_t thread_override() {
    const char* env = std::getenv("METASEL_THREADS");
    if (!env || !*env) return 1;
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (!end || *end != '\0' || v < 1)
        throw std::runtime_error(std::string("METASEL_THREADS must be a positive integer, got: ") + env);
    return std::size_t(v);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"meta-sample selection laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::int64_t seed_override = -1;
    std::string out_override;

    const std::map<std::string, std::string> stages = {
        {"gen-data", "generate the base dataset"},
        {"corrupt", "apply label noise / imbalance to the dataset"},
        {"warmup", "warm-up training on a random meta set"},
        {"featurize", "build gradient features from warm-up checkpoints"},
        {"select", "cluster features and pick meta samples"},
        {"reweight", "full re-weighted training with the selected meta set"},
        {"eval", "accuracy / weight-quality report"},
        {"verify", "overlap-bound and dominance diagnostics on the features"},
        {"experiment", "end-to-end grid over seeds and methods"},
    };
    for (const auto& [name, help] : stages) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "experiment config file")->required();
        sub->add_option("--seed", seed_override, "override the config's seed list with one seed");
        sub->add_option("--out", out_override, "override the config's output directory");
    }

    CLI11_PARSE(app, argc, argv);

    try {
        metasel::ExperimentConfig cfg = metasel::load_config(config_path);
        if (!out_override.empty()) cfg.out_dir = out_override;
        if (seed_override >= 0) cfg.seeds = {std::uint64_t(seed_override)};

        const std::string stage = app.get_subcommands().front()->get_name();
        if (stage == "experiment") {
            metasel::cmd_experiment(cfg, thread_override());
        } else {
            for (std::uint64_t seed : cfg.seeds) {
                if (stage == "gen-data")
                    metasel::cmd_gen_data(cfg, seed);
                else if (stage == "corrupt")
                    metasel::cmd_corrupt(cfg, seed);
                else if (stage == "warmup")
                    metasel::cmd_warmup(cfg, seed);
                else if (stage == "featurize")
                    metasel::cmd_featurize(cfg, seed);
                else if (stage == "select")
                    metasel::cmd_select(cfg, seed);
                else if (stage == "reweight")
                    metasel::cmd_reweight(cfg, seed);
                else if (stage == "eval")
                    metasel::cmd_eval(cfg, seed);
                else if (stage == "verify")
                    metasel::cmd_verify(cfg, seed);
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "metasel: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
