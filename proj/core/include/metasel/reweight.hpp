#pragma once

#include <cstdint>
#include <vector>

#include "metasel/data.hpp"
#include "metasel/nn.hpp"

namespace metasel {

enum class WeightRule { Shu, Ren };

struct ArchConfig {
    std::vector<std::size_t> hidden{16, 16};
    Activation act = Activation::Relu;
};

struct TrainConfig {
    double lr = 0.1;           // alpha
    double weight_lr = 10.0;   // eta, constant schedule
    double momentum = 0.8;
    double weight_decay = 0.0;
    std::size_t batch_size = 128;
    int epochs = 50;
    WeightRule rule = WeightRule::Shu;
    double weight_init = 0.5;
    std::uint64_t seed = 0;
    bool full_batch = false;     // theorem-verification mode
    bool finetune_only = false;  // train on the meta set alone, no re-weighting
    double divergence_limit = 1e6;

    void check() const;
};

struct EpochMetrics {
    int epoch = 0;
    double train_acc = 0.0;
    double val_acc = 0.0;
    double test_acc = 0.0;
    double mean_loss = 0.0;
};

struct RunArtifacts {
    NetworkParams final_params;
    CheckpointStore checkpoints;
    std::vector<std::vector<double>> weight_history;  // per-epoch snapshot, indexed by sample id
    std::vector<EpochMetrics> metrics;
};

// One-step lookahead of Eq-style virtual parameters; params is left untouched.
NetworkParams virtual_update(const NetworkParams& params, const std::vector<LayeredGradient>& batch_grads,
                             const std::vector<double>& weights, double alpha);

// Additive weight updates: delta_j = (eta*alpha)/(n*M) * sum_i <grad_meta_i(virtual), grad_j(params)>.
std::vector<double> meta_weight_gradient(const std::vector<LayeredGradient>& meta_grads,
                                         const std::vector<LayeredGradient>& batch_grads,
                                         double eta, double alpha);

void apply_weight_update_shu(std::vector<double>& weights, const std::vector<double>& delta);
std::vector<double> apply_weight_update_ren(const std::vector<double>& delta);

void weighted_step(NetworkParams& params, const std::vector<LayeredGradient>& batch_grads,
                   const std::vector<double>& weights, double alpha, double momentum,
                   double weight_decay, SgdState& state);

RunArtifacts run_meta_reweighting(const ArchConfig& arch, const TrainConfig& cfg, const Dataset& ds,
                                  const std::vector<std::size_t>& meta_indices);

struct WarmupResult {
    RunArtifacts artifacts;
    std::vector<std::size_t> meta_indices;
};

WarmupResult warmup(const ArchConfig& arch, const TrainConfig& cfg, const Dataset& ds, std::size_t m0,
                    std::uint64_t seed);

double accuracy_on(const NetworkParams& params, const Dataset& ds, Split split);

}  // namespace metasel
