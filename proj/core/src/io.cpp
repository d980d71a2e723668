#include "metasel/io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace metasel {

namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kNetMagic = 0x4d534e50;  // "MSNP"
constexpr std::uint32_t kNetVersion = 1;
constexpr std::uint32_t kFeatMagic = 0x4d534654;  // "MSFT"
constexpr std::uint32_t kFeatVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("binary read failed (truncated file?)");
}

void write_doubles(std::ostream& out, const double* data, std::size_t n) {
    out.write(reinterpret_cast<const char*>(data), std::streamsize(n * sizeof(double)));
}

void read_doubles(std::istream& in, double* data, std::size_t n) {
    in.read(reinterpret_cast<char*>(data), std::streamsize(n * sizeof(double)));
    if (!in) throw std::runtime_error("binary read failed (truncated file?)");
}

const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::MetaCandidate: return "meta_candidate";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    return "?";
}

Split split_from_name(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "meta_candidate") return Split::MetaCandidate;
    if (s == "validation") return Split::Validation;
    if (s == "test") return Split::Test;
    throw std::runtime_error("unknown split tag: " + s);
}

}  // namespace

void save_network(const NetworkParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    write_pod(out, kNetMagic);
    write_pod(out, kNetVersion);
    write_pod(out, std::uint32_t(params.act));
    write_pod(out, std::uint32_t(params.layers.size()));
    for (const auto& l : params.layers) {
        write_pod(out, std::uint64_t(l.w.rows));
        write_pod(out, std::uint64_t(l.w.cols));
        write_doubles(out, l.w.a.data(), l.w.a.size());
        write_doubles(out, l.b.data(), l.b.size());
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

NetworkParams load_network(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::uint32_t magic, version, act, n_layers;
    read_pod(in, magic);
    if (magic != kNetMagic) throw std::runtime_error("bad network file magic: " + path);
    read_pod(in, version);
    if (version != kNetVersion) throw std::runtime_error("unsupported network format version");
    read_pod(in, act);
    read_pod(in, n_layers);
    NetworkParams params;
    params.act = Activation(act);
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        std::uint64_t rows, cols;
        read_pod(in, rows);
        read_pod(in, cols);
        Layer layer;
        layer.w = Mat(std::size_t(rows), std::size_t(cols));
        layer.b = Vec(std::size_t(rows));
        read_doubles(in, layer.w.a.data(), layer.w.a.size());
        read_doubles(in, layer.b.data(), layer.b.size());
        params.layers.push_back(std::move(layer));
    }
    params.check();
    return params;
}

void save_checkpoint_store(const CheckpointStore& store, const std::string& dir) {
    fs::create_directories(dir);
    std::ofstream idx(fs::path(dir) / "index.txt");
    if (!idx) throw std::runtime_error("cannot open checkpoint index in " + dir);
    idx << "best_epoch " << store.best_epoch << "\n";
    for (const auto& e : store.entries) {
        std::string name = "epoch_" + std::to_string(e.epoch) + ".net";
        save_network(e.params, (fs::path(dir) / name).string());
        idx << e.epoch << " " << std::setprecision(17) << e.val_acc << " " << name << "\n";
    }
}

CheckpointStore load_checkpoint_store(const std::string& dir) {
    std::ifstream idx(fs::path(dir) / "index.txt");
    if (!idx) throw std::runtime_error("cannot open checkpoint index in " + dir);
    std::string key;
    int best;
    idx >> key >> best;
    if (key != "best_epoch") throw std::runtime_error("malformed checkpoint index");
    CheckpointStore store;
    int epoch;
    double val_acc;
    std::string name;
    while (idx >> epoch >> val_acc >> name)
        store.add(epoch, load_network((fs::path(dir) / name).string()), val_acc);
    if (store.best_epoch != best) throw std::runtime_error("checkpoint index best-epoch mismatch");
    return store;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "dataset v1\n";
    out << "class_count " << ds.class_count << "\n";
    out << "dim " << ds.dim << "\n";
    out << "n " << ds.size() << "\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out << split_name(ds.splits[i]) << " " << ds.observed_labels[i] << " " << ds.clean_labels[i];
        for (std::size_t k = 0; k < ds.dim; ++k) out << " " << ds.features[i * ds.dim + k];
        out << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string word, version;
    in >> word >> version;
    if (word != "dataset" || version != "v1") throw std::runtime_error("bad dataset header: " + path);
    Dataset ds;
    std::size_t n = 0;
    in >> word >> ds.class_count;
    if (word != "class_count") throw std::runtime_error("bad dataset header");
    in >> word >> ds.dim;
    if (word != "dim") throw std::runtime_error("bad dataset header");
    in >> word >> n;
    if (word != "n") throw std::runtime_error("bad dataset header");
    ds.features.resize(n * ds.dim);
    ds.observed_labels.resize(n);
    ds.clean_labels.resize(n);
    ds.splits.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::string tag;
        in >> tag >> ds.observed_labels[i] >> ds.clean_labels[i];
        ds.splits[i] = split_from_name(tag);
        for (std::size_t k = 0; k < ds.dim; ++k) in >> ds.features[i * ds.dim + k];
    }
    if (!in) throw std::runtime_error("truncated dataset file: " + path);
    ds.check();
    return ds;
}

void save_features(const FeatureSet& fs_in, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    write_pod(out, kFeatMagic);
    write_pod(out, kFeatVersion);
    write_pod(out, std::uint64_t(fs_in.size()));
    write_pod(out, std::uint64_t(fs_in.dim()));
    write_pod(out, std::uint32_t(fs_in.layout.method));
    write_pod(out, std::uint32_t(fs_in.layout.mode));
    write_pod(out, std::uint64_t(fs_in.layout.checkpoint_epochs.size()));
    for (std::size_t k = 0; k < fs_in.layout.checkpoint_epochs.size(); ++k) {
        write_pod(out, std::int32_t(fs_in.layout.checkpoint_epochs[k]));
        write_pod(out, std::uint64_t(fs_in.layout.block_dims[k]));
    }
    for (std::size_t i = 0; i < fs_in.size(); ++i) write_pod(out, std::uint64_t(fs_in.sample_ids[i]));
    write_doubles(out, fs_in.values.data(), fs_in.values.size());
    if (!out) throw std::runtime_error("write failed: " + path);
}

FeatureSet load_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::uint32_t magic, version, method, mode;
    std::uint64_t n, dim, k;
    read_pod(in, magic);
    if (magic != kFeatMagic) throw std::runtime_error("bad feature file magic: " + path);
    read_pod(in, version);
    if (version != kFeatVersion) throw std::runtime_error("unsupported feature format version");
    read_pod(in, n);
    read_pod(in, dim);
    read_pod(in, method);
    read_pod(in, mode);
    read_pod(in, k);
    FeatureSet fs_out;
    fs_out.layout.method = FeatureMethod(method);
    fs_out.layout.mode = GradMode(mode);
    for (std::uint64_t i = 0; i < k; ++i) {
        std::int32_t epoch;
        std::uint64_t bdim;
        read_pod(in, epoch);
        read_pod(in, bdim);
        fs_out.layout.checkpoint_epochs.push_back(epoch);
        fs_out.layout.block_dims.push_back(std::size_t(bdim));
    }
    if (fs_out.layout.dim() != dim) throw std::runtime_error("feature file: block dims disagree with dim");
    for (std::uint64_t i = 0; i < n; ++i) {
        std::uint64_t id;
        read_pod(in, id);
        fs_out.sample_ids.push_back(std::size_t(id));
    }
    fs_out.values.resize(std::size_t(n * dim));
    read_doubles(in, fs_out.values.data(), fs_out.values.size());
    return fs_out;
}

void save_weight_history(const std::vector<std::vector<double>>& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "epoch sample_id weight\n" << std::setprecision(17);
    for (std::size_t e = 0; e < history.size(); ++e)
        for (std::size_t j = 0; j < history[e].size(); ++j)
            out << e + 1 << " " << j << " " << history[e][j] << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

void save_metrics(const std::vector<EpochMetrics>& metrics, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "epoch split accuracy\n" << std::setprecision(17);
    for (const auto& m : metrics) {
        out << m.epoch << " train " << m.train_acc << "\n";
        out << m.epoch << " validation " << m.val_acc << "\n";
        out << m.epoch << " test " << m.test_acc << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

void save_indices(const std::vector<std::size_t>& indices, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    for (std::size_t i : indices) out << i << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<std::size_t> load_indices(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::size_t> out;
    std::size_t v;
    while (in >> v) out.push_back(v);
    return out;
}

std::uint64_t fnv1a_bytes(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 14695981039346656037ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::uint64_t h = 14695981039346656037ULL;
    char buf[65536];
    while (in) {
        in.read(buf, sizeof(buf));
        std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    return h;
}

void Manifest::record(const std::string& path, const std::string& name) {
    files.emplace_back(name.empty() ? fs::path(path).filename().string() : name, fnv1a_file(path));
}

void Manifest::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    for (const auto& [file, hash] : files)
        out << file << " " << std::hex << std::setw(16) << std::setfill('0') << hash << std::dec
            << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace metasel
