#pragma once

#include <cstdint>
#include <vector>

#include "metasel/data.hpp"
#include "metasel/nn.hpp"

namespace metasel {

enum class FeatureMethod { Rbc, Gbc };

enum class CheckpointSampling { Uniform, Strided };

// Epochs drawn from (t*, T], returned in increasing order.
std::vector<int> sample_checkpoints(const CheckpointStore& store, std::size_t k,
                                    CheckpointSampling mode, std::uint64_t seed);

// flatten(delta * last_input^T); forward passes only, biases excluded.
Vec rbc_feature(const NetworkParams& params, const Vec& x, int label, GradMode mode);

struct LayerImportance {
    std::vector<double> masses;  // A^(l), squared Frobenius norm of the mean layer gradient
    double total = 0.0;          // A
};

LayerImportance layer_importance(const NetworkParams& params, const Dataset& ds,
                                 const std::vector<std::size_t>& indices, GradMode mode);

struct LayerSamplingPlan {
    std::vector<std::size_t> draws;  // layer index per draw, with replacement
    std::vector<double> scales;      // per-draw multiplier applied to the drawn layer gradient
    LayerImportance importance;
};

// Shared by all samples at one checkpoint. scaled=false reproduces the raw
// concatenation without the unbiasedness correction.
LayerSamplingPlan build_sampling_plan(const LayerImportance& imp, std::size_t r, std::uint64_t seed,
                                      bool scaled = true);

// Concatenation of the drawn layers' gradients (weights and biases), scaled per plan.
Vec gbc_feature(const NetworkParams& params, const LayerSamplingPlan& plan, const Vec& x, int label,
                GradMode mode);

struct FeatureLayout {
    FeatureMethod method = FeatureMethod::Rbc;
    GradMode mode = GradMode::Full;
    std::vector<int> checkpoint_epochs;
    std::vector<std::size_t> block_dims;  // one per checkpoint

    std::size_t dim() const;
    bool operator==(const FeatureLayout&) const = default;
};

struct FeatureSet {
    FeatureLayout layout;
    std::vector<std::size_t> sample_ids;
    std::vector<double> values;  // row-major, one row per sample

    std::size_t size() const { return sample_ids.size(); }
    std::size_t dim() const { return layout.dim(); }
    const double* row(std::size_t i) const { return &values[i * dim()]; }
    Vec row_vec(std::size_t i) const { return Vec(row(i), row(i) + dim()); }
    double row_norm(std::size_t i) const;
};

struct FeatureConfig {
    FeatureMethod method = FeatureMethod::Rbc;
    GradMode mode = GradMode::Full;
    std::size_t layer_draws = 5;  // R, GBC only
    bool scaled = true;           // GBC unbiasedness scaling
    std::uint64_t seed = 0;
};

FeatureSet assemble_features(const Dataset& ds, const std::vector<std::size_t>& indices,
                             const CheckpointStore& store, const std::vector<int>& epochs,
                             const FeatureConfig& cfg);

// One GBC sampling plan per checkpoint, importance-weighted over `indices`.
std::vector<LayerSamplingPlan> build_feature_plans(const Dataset& ds,
                                                   const std::vector<std::size_t>& indices,
                                                   const CheckpointStore& store,
                                                   const std::vector<int>& epochs,
                                                   const FeatureConfig& cfg);

// Plan-sharing overload: candidate and meta sets must use identical plans so
// their blocks line up dimension-for-dimension.
FeatureSet assemble_features(const Dataset& ds, const std::vector<std::size_t>& indices,
                             const CheckpointStore& store, const std::vector<int>& epochs,
                             const FeatureConfig& cfg,
                             const std::vector<LayerSamplingPlan>& plans);

double feature_dot(const FeatureSet& a, std::size_t i, const FeatureSet& b, std::size_t j);

}  // namespace metasel
