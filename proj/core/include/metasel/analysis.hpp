#pragma once

#include <vector>

#include "metasel/cluster.hpp"
#include "metasel/features.hpp"

namespace metasel {

// sum_j | sum_i <G_j, G_meta_i> |
double msso_value(const FeatureSet& features, const FeatureSet& meta_features);

// sum_j sum_i |<G_j, C_i>|, absolute-inner-product form.
double mco_value(const FeatureSet& features, const std::vector<Vec>& centroids);
// Equivalent weighted-cosine form, sum_j ||G_j|| sum_i ||C_i|| |cos|.
double mco_value_weighted_form(const FeatureSet& features, const std::vector<Vec>& centroids);

struct DStatistics {
    std::vector<double> per_sample;  // D_j, +inf when one sign is absent
    double min_finite = 0.0;
    double quantile_5pct = 0.0;  // nearest-rank over finite values
    std::size_t infinite_count = 0;
    std::size_t finite_count = 0;
};

DStatistics d_statistics(const FeatureSet& features, const std::vector<Vec>& centroids);

struct Theorem1Report {
    double msso = 0.0;
    double mco = 0.0;
    double ratio = 0.0;
    double d = 0.0;  // min D_j, +inf allowed
    double lower_bound = 0.0;
    bool holds = false;
};

Theorem1Report verify_theorem1(const FeatureSet& features, const std::vector<Vec>& centroids);

struct StableSampleReport {
    std::size_t stable_count = 0;
    std::vector<std::size_t> label_free_assignment;
    std::vector<std::size_t> label_aware_assignment;
    std::vector<double> alpha;  // similarity to the assigned centroid (label-free)
    std::vector<double> beta;   // best similarity among the other centroids (label-free)
    std::vector<double> ratio_lower;  // realized L_j over centroids
    std::vector<double> ratio_upper;  // realized U_j
};

StableSampleReport stable_sample_count(const FeatureSet& label_free, const FeatureSet& label_aware,
                                       const std::vector<Vec>& centroids_from_label_free);

// Probability a uniformly drawn clean sample outranks a noisy one; ties count 1/2.
double auc_weights_vs_clean(const std::vector<double>& weights, const std::vector<bool>& clean_flags);

// k samples minimizing the first-order margin (top1 - top2) / ||grad_x(top1 - top2)||.
std::vector<std::size_t> boundary_subset(const NetworkParams& model, const Dataset& ds,
                                         const std::vector<std::size_t>& indices, std::size_t k);

struct SummaryStat {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation
    std::size_t n = 0;
};

SummaryStat summarize(const std::vector<double>& values);

}  // namespace metasel
