#pragma once

#include <cstdint>
#include <vector>

#include "metasel/features.hpp"
#include "metasel/reweight.hpp"

namespace metasel {

// ||C|| * |cosine(g, C)|; zero-norm g scores 0 by convention.
double weighted_similarity(const Vec& g, const Vec& c);

std::vector<std::size_t> kmeans_assign(const FeatureSet& features, const std::vector<Vec>& centroids);

// Per nonempty cluster, sum(G_j) / sum(||G_j||). Empty clusters keep their
// previous centroid and are reported through `empty`.
std::vector<Vec> kmeans_update(const FeatureSet& features, const std::vector<std::size_t>& assignment,
                               const std::vector<Vec>& previous, std::vector<bool>& empty);

struct ClusterModel {
    std::vector<Vec> centroids;
    std::vector<std::size_t> assignment;  // position in FeatureSet -> cluster
    std::size_t iterations = 0;
    double objective = 0.0;  // sum_j ||G_j|| * weighted_similarity(G_j, C_assigned)
    std::vector<double> objective_trace;
};

double clustering_objective(const FeatureSet& features, const std::vector<Vec>& centroids,
                            const std::vector<std::size_t>& assignment);

ClusterModel weighted_kmeans(const FeatureSet& features, std::size_t m, std::uint64_t seed,
                             std::size_t max_iters = 200, double tol = 1e-10);

// Restarts with M - M_empty clusters until no cluster is empty.
ClusterModel kmeans_with_restart(const FeatureSet& features, std::size_t m, std::uint64_t seed,
                                 std::size_t max_iters = 200, double tol = 1e-10);

// Per cluster, the member maximizing weighted_similarity to its centroid; returns sample ids.
std::vector<std::size_t> extract_meta_samples(const ClusterModel& model, const FeatureSet& features);

// Drops the most-similar (1 - keep_fraction) candidates; returns surviving positions.
std::vector<std::size_t> prune_near_existing(const FeatureSet& candidates, const FeatureSet& existing_meta,
                                             double keep_fraction);

enum class BaselineKind { Random, Certain, Uncertain, PlainKmeans };

std::vector<std::size_t> baseline_select(BaselineKind kind, const Dataset& ds,
                                         const NetworkParams* model, const FeatureSet* features,
                                         const std::vector<std::size_t>& candidates, std::size_t budget,
                                         std::uint64_t seed);

struct SelectionConfig {
    FeatureConfig feature;
    std::size_t budget = 20;
    std::size_t warmup_size = 10;  // M0
    std::size_t checkpoints = 2;   // K
    CheckpointSampling checkpoint_mode = CheckpointSampling::Strided;
    double keep_fraction = 0.5;
    std::size_t clusters_per_round = 0;  // 0: take the whole remaining budget in one round
    std::uint64_t seed = 0;
};

struct SelectionRound {
    std::vector<std::size_t> surviving;  // candidate sample ids after pruning
    std::vector<std::size_t> chosen;     // meta sample ids added this round
    std::vector<std::size_t> cumulative;
};

struct SelectionResult {
    std::vector<std::size_t> meta_indices;
    std::vector<SelectionRound> rounds;
    RunArtifacts warmup_artifacts;
    RunArtifacts final_artifacts;
};

SelectionResult run_selection_pipeline(const ArchConfig& arch, const TrainConfig& train_cfg,
                                       const Dataset& ds, const SelectionConfig& sel);

}  // namespace metasel
