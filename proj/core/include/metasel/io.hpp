#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metasel/data.hpp"
#include "metasel/features.hpp"
#include "metasel/nn.hpp"
#include "metasel/reweight.hpp"

namespace metasel {

// Network checkpoints: versioned binary, bit-exact 64-bit round trip.
void save_network(const NetworkParams& params, const std::string& path);
NetworkParams load_network(const std::string& path);

void save_checkpoint_store(const CheckpointStore& store, const std::string& dir);
CheckpointStore load_checkpoint_store(const std::string& dir);

// Columnar text snapshot: header (class_count, dim, N), then one record per sample.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// Binary feature dump: header (N, dim, method, mode, checkpoint ids), then row-major doubles.
void save_features(const FeatureSet& fs, const std::string& path);
FeatureSet load_features(const std::string& path);

void save_weight_history(const std::vector<std::vector<double>>& history, const std::string& path);
void save_metrics(const std::vector<EpochMetrics>& metrics, const std::string& path);
void save_indices(const std::vector<std::size_t>& indices, const std::string& path);
std::vector<std::size_t> load_indices(const std::string& path);

std::uint64_t fnv1a_file(const std::string& path);
std::uint64_t fnv1a_bytes(const void* data, std::size_t len);

struct Manifest {
    std::vector<std::pair<std::string, std::uint64_t>> files;  // display name, content hash

    // `name` is what gets written to the manifest; defaults to the file name.
    void record(const std::string& path, const std::string& name = "");
    void save(const std::string& path) const;
};

}  // namespace metasel
