#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metasel/cluster.hpp"
#include "metasel/data.hpp"
#include "metasel/reweight.hpp"

namespace metasel {

enum class DatasetKind { Toy, Idx };
enum class SelectionMethod { Rbc, Gbc, Random, Certain, Uncertain, PlainKmeans, Finetune };

SelectionMethod selection_method_from_name(const std::string& name);
std::string selection_method_name(SelectionMethod m);

struct ExperimentConfig {
    DatasetKind dataset_kind = DatasetKind::Toy;
    std::size_t toy_n = 1000;
    double toy_sigma = 0.2;
    std::string idx_images;
    std::string idx_labels;
    std::size_t idx_limit = 0;  // 0: keep everything
    SplitFractions fractions;

    std::string noise_kind = "none";  // none | uniform | adversarial
    double noise_percent = 0.0;
    double imbalance_factor = 1.0;

    ArchConfig arch;
    TrainConfig train;

    std::vector<SelectionMethod> methods{SelectionMethod::Rbc, SelectionMethod::Random};
    std::size_t budget = 6;
    std::size_t warmup_size = 2;
    std::size_t checkpoints = 2;
    std::size_t layer_draws = 5;
    double keep_fraction = 0.5;
    std::string label_mode = "auto";  // auto | full | label_free

    std::vector<std::uint64_t> seeds{1};
    std::string out_dir = "out";

    void validate() const;
    GradMode feature_mode() const;  // resolves "auto" from the corruption kind
};

// Strict key=value config file; unknown keys are errors.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

}  // namespace metasel
