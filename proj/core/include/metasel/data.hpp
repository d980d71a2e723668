#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metasel/linalg.hpp"

namespace metasel {

enum class Split { Train, MetaCandidate, Validation, Test };

struct Dataset {
    std::size_t dim = 0;
    int class_count = 0;
    std::vector<double> features;   // N x dim, row-major
    std::vector<int> observed_labels;
    std::vector<int> clean_labels;  // simulation ground truth, hidden from training
    std::vector<Split> splits;

    std::size_t size() const { return observed_labels.size(); }
    const double* sample(std::size_t i) const { return &features[i * dim]; }
    Vec sample_vec(std::size_t i) const {
        return Vec(sample(i), sample(i) + dim);
    }
    std::vector<std::size_t> indices_of(Split s) const;
    void check() const;
};

struct SplitFractions {
    double train = 0.6;
    double validation = 0.16;
    double test = 0.24;
};

enum class NoiseKind { Uniform, Adversarial };

struct CorruptionReport {
    std::vector<bool> clean_flag;  // per sample, true when observed == clean
    double realized_fraction = 0.0;
    NoiseKind kind = NoiseKind::Uniform;
    std::vector<int> mapping;  // adversarial only
};

struct GaussianMixtureConfig {
    std::size_t n = 1000;
    double sigma = 0.2;
    double base_flip = 0.01;
    SplitFractions fractions;
    std::uint64_t seed = 0;
};

// 2-d mixture of four Gaussians at the unit-square vertices; upper two components
// one class, lower two the other, with a small fraction of ground-truth flips.
Dataset gen_gaussian_mixture(const GaussianMixtureConfig& cfg);

// IDX (big-endian) image/label pair; pixels scaled to [0,1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
void save_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path);

CorruptionReport inject_uniform_noise(Dataset& ds, double percent, std::uint64_t seed);
CorruptionReport inject_adversarial_noise(Dataset& ds, double percent, const std::vector<int>& mapping,
                                          std::uint64_t seed);
std::vector<int> cyclic_mapping(int class_count);

// Subsample per-class training counts onto a geometric long-tail profile.
Dataset build_imbalanced(const Dataset& ds, double imbalance_factor, std::uint64_t seed);

void assign_splits(Dataset& ds, const SplitFractions& fractions, std::uint64_t seed);

}  // namespace metasel
