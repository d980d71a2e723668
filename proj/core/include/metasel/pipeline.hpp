#pragma once

#include <optional>
#include <string>

#include "metasel/analysis.hpp"
#include "metasel/config.hpp"
#include "metasel/io.hpp"

namespace metasel {

// File layout of one (out_dir, seed) pipeline instance.
struct StagePaths {
    std::string root;

    explicit StagePaths(const std::string& out_dir, std::uint64_t seed);
    std::string dataset() const { return root + "/dataset.txt"; }
    std::string corrupted() const { return root + "/corrupted.txt"; }
    std::string warmup_dir() const { return root + "/warmup_checkpoints"; }
    std::string warmup_meta() const { return root + "/warmup_meta.txt"; }
    std::string warmup_metrics() const { return root + "/warmup_metrics.txt"; }
    std::string features() const { return root + "/features.bin"; }
    std::string meta_features() const { return root + "/meta_features.bin"; }
    std::string meta() const { return root + "/meta.txt"; }
    std::string selection() const { return root + "/selection.txt"; }
    std::string final_net() const { return root + "/final.net"; }
    std::string final_dir() const { return root + "/final_checkpoints"; }
    std::string weights() const { return root + "/weights.txt"; }
    std::string metrics() const { return root + "/metrics.txt"; }
    std::string eval_report() const { return root + "/eval.txt"; }
    std::string verify_report() const { return root + "/verify.txt"; }
    std::string manifest() const { return root + "/manifest.txt"; }
    std::string config_snapshot() const { return root + "/config.txt"; }
};

Dataset build_dataset(const ExperimentConfig& cfg, std::uint64_t seed);
CorruptionReport corrupt_dataset(const ExperimentConfig& cfg, Dataset& ds, std::uint64_t seed);
std::vector<bool> clean_flags_for(const Dataset& ds);

void cmd_gen_data(const ExperimentConfig& cfg, std::uint64_t seed);
void cmd_corrupt(const ExperimentConfig& cfg, std::uint64_t seed);
void cmd_warmup(const ExperimentConfig& cfg, std::uint64_t seed);
void cmd_featurize(const ExperimentConfig& cfg, std::uint64_t seed);
void cmd_select(const ExperimentConfig& cfg, std::uint64_t seed);
void cmd_reweight(const ExperimentConfig& cfg, std::uint64_t seed);
void cmd_eval(const ExperimentConfig& cfg, std::uint64_t seed);
void cmd_verify(const ExperimentConfig& cfg, std::uint64_t seed);

struct MethodRunResult {
    std::vector<std::size_t> meta_indices;
    RunArtifacts artifacts;
    double test_acc = 0.0;              // at the best-validation checkpoint
    std::optional<double> weight_auc;   // over non-meta train samples, when both classes exist
};

// In-memory end-to-end run of one selection method on a prepared dataset.
MethodRunResult run_method(const ExperimentConfig& cfg, const Dataset& ds, SelectionMethod method,
                           std::uint64_t seed);

struct ExperimentCell {
    SelectionMethod method;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double test_acc = 0.0;
    std::optional<double> weight_auc;
};

struct ExperimentReport {
    std::vector<ExperimentCell> cells;

    std::vector<double> accuracies(SelectionMethod m) const;
    SummaryStat summary(SelectionMethod m) const;
};

// (seed, method) cells are independent jobs; results are deterministic for any
// thread count.
ExperimentReport cmd_experiment(const ExperimentConfig& cfg, std::size_t threads = 1);
void write_experiment_report(const ExperimentReport& rep, const ExperimentConfig& cfg,
                             const std::string& path);

}  // namespace metasel
