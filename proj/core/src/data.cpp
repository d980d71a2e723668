#include "metasel/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace metasel {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& what) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) throw std::runtime_error("idx: truncated file while reading " + what);
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

}  // namespace

std::vector<std::size_t> Dataset::indices_of(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < splits.size(); ++i)
        if (splits[i] == s) out.push_back(i);
    return out;
}

void Dataset::check() const {
    std::size_t n = size();
    if (clean_labels.size() != n || splits.size() != n || features.size() != n * dim)
        throw std::invalid_argument("dataset: inconsistent field sizes");
    for (std::size_t i = 0; i < n; ++i) {
        if (observed_labels[i] < 0 || observed_labels[i] >= class_count ||
            clean_labels[i] < 0 || clean_labels[i] >= class_count)
            throw std::invalid_argument("dataset: label out of range");
    }
}

void assign_splits(Dataset& ds, const SplitFractions& f, std::uint64_t seed) {
    double sum = f.train + f.validation + f.test;
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("split: fractions must sum to 1");
    std::size_t n = ds.size();
    std::size_t n_train = std::size_t(std::llround(f.train * double(n)));
    std::size_t n_val = std::size_t(std::llround(f.validation * double(n)));
    if (n_train + n_val > n) throw std::invalid_argument("split: rounding overflow");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    ds.splits.assign(n, Split::Test);
    for (std::size_t i = 0; i < n_train; ++i) ds.splits[order[i]] = Split::Train;
    for (std::size_t i = n_train; i < n_train + n_val; ++i) ds.splits[order[i]] = Split::Validation;
    if (f.train > 0 && n_train == 0) throw std::invalid_argument("split: empty train split");
}

Dataset gen_gaussian_mixture(const GaussianMixtureConfig& cfg) {
    if (cfg.n < 8) throw std::invalid_argument("gen_gaussian_mixture: need n >= 8");
    if (cfg.sigma <= 0.0) throw std::invalid_argument("gen_gaussian_mixture: sigma must be positive");

    // Unit-square vertices; the two with second coordinate 1 are the "upper" components.
    const double centers[4][2] = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}};

    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<int> comp(0, 3);
    std::normal_distribution<double> noise(0.0, cfg.sigma);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Dataset ds;
    ds.dim = 2;
    ds.class_count = 2;
    ds.features.reserve(cfg.n * 2);
    for (std::size_t i = 0; i < cfg.n; ++i) {
        int c = comp(rng);
        ds.features.push_back(centers[c][0] + noise(rng));
        ds.features.push_back(centers[c][1] + noise(rng));
        int label = centers[c][1] > 0.5 ? 1 : 0;
        if (unit(rng) < cfg.base_flip) label = 1 - label;
        ds.clean_labels.push_back(label);
        ds.observed_labels.push_back(label);
    }
    assign_splits(ds, cfg.fractions, cfg.seed + 1);
    return ds;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("idx: cannot open " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("idx: cannot open " + labels_path);

    std::uint32_t img_magic = read_be32(img, "image magic");
    if (img_magic != kImageMagic)
        throw std::runtime_error("idx: bad image magic in " + images_path);
    std::uint32_t lab_magic = read_be32(lab, "label magic");
    if (lab_magic != kLabelMagic)
        throw std::runtime_error("idx: bad label magic in " + labels_path);

    std::uint32_t n_img = read_be32(img, "image count");
    std::uint32_t rows = read_be32(img, "rows");
    std::uint32_t cols = read_be32(img, "cols");
    std::uint32_t n_lab = read_be32(lab, "label count");
    if (n_img != n_lab) throw std::runtime_error("idx: image/label count mismatch");

    Dataset ds;
    ds.dim = std::size_t(rows) * cols;
    ds.features.resize(std::size_t(n_img) * ds.dim);
    ds.observed_labels.resize(n_img);
    ds.clean_labels.resize(n_img);
    ds.splits.assign(n_img, Split::Train);

    std::vector<unsigned char> buf(ds.dim);
    int max_label = 0;
    for (std::uint32_t i = 0; i < n_img; ++i) {
        img.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
        if (!img) throw std::runtime_error("idx: truncated image data");
        for (std::size_t p = 0; p < ds.dim; ++p)
            ds.features[std::size_t(i) * ds.dim + p] = double(buf[p]) / 255.0;
        char lb;
        lab.read(&lb, 1);
        if (!lab) throw std::runtime_error("idx: truncated label data");
        int label = int(static_cast<unsigned char>(lb));
        ds.observed_labels[i] = label;
        ds.clean_labels[i] = label;
        max_label = std::max(max_label, label);
    }
    ds.class_count = max_label + 1;
    return ds;
}

void save_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path) {
    // Square images only; dim must be a perfect square for the IDX header.
    std::uint32_t side = std::uint32_t(std::lround(std::sqrt(double(ds.dim))));
    if (std::size_t(side) * side != ds.dim)
        throw std::invalid_argument("save_idx: feature dim is not a perfect square");
    std::ofstream img(images_path, std::ios::binary);
    std::ofstream lab(labels_path, std::ios::binary);
    if (!img || !lab) throw std::runtime_error("save_idx: cannot open output files");
    write_be32(img, kImageMagic);
    write_be32(img, std::uint32_t(ds.size()));
    write_be32(img, side);
    write_be32(img, side);
    write_be32(lab, kLabelMagic);
    write_be32(lab, std::uint32_t(ds.size()));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t p = 0; p < ds.dim; ++p) {
            double v = std::clamp(ds.features[i * ds.dim + p], 0.0, 1.0);
            char byte = char(static_cast<unsigned char>(std::lround(v * 255.0)));
            img.write(&byte, 1);
        }
        char lb = char(static_cast<unsigned char>(ds.observed_labels[i]));
        lab.write(&lb, 1);
    }
}

CorruptionReport inject_uniform_noise(Dataset& ds, double percent, std::uint64_t seed) {
    if (percent < 0.0 || percent > 100.0)
        throw std::invalid_argument("inject_uniform_noise: percent out of range");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> pick(0, ds.class_count - 2);

    CorruptionReport rep;
    rep.kind = NoiseKind::Uniform;
    rep.clean_flag.assign(ds.size(), true);
    std::size_t train_count = 0, corrupted = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.splits[i] != Split::Train) continue;
        ++train_count;
        if (unit(rng) < percent / 100.0) {
            int other = pick(rng);
            if (other >= ds.clean_labels[i]) ++other;  // uniform over the other labels
            ds.observed_labels[i] = other;
        } else {
            ds.observed_labels[i] = ds.clean_labels[i];
        }
        if (ds.observed_labels[i] != ds.clean_labels[i]) {
            rep.clean_flag[i] = false;
            ++corrupted;
        }
    }
    rep.realized_fraction = train_count == 0 ? 0.0 : double(corrupted) / double(train_count);
    return rep;
}

std::vector<int> cyclic_mapping(int class_count) {
    std::vector<int> m(class_count);
    for (int c = 0; c < class_count; ++c) m[c] = (c + 1) % class_count;
    return m;
}

CorruptionReport inject_adversarial_noise(Dataset& ds, double percent, const std::vector<int>& mapping,
                                          std::uint64_t seed) {
    if (percent < 0.0 || percent > 100.0)
        throw std::invalid_argument("inject_adversarial_noise: percent out of range");
    if (mapping.size() != std::size_t(ds.class_count))
        throw std::invalid_argument("inject_adversarial_noise: mapping size mismatch");
    for (int c = 0; c < ds.class_count; ++c)
        if (mapping[c] == c) throw std::invalid_argument("inject_adversarial_noise: mapping has a fixed point");

    auto train = ds.indices_of(Split::Train);
    std::mt19937_64 rng(seed);
    std::shuffle(train.begin(), train.end(), rng);
    std::size_t n_flip = std::size_t(std::llround(percent / 100.0 * double(train.size())));

    CorruptionReport rep;
    rep.kind = NoiseKind::Adversarial;
    rep.mapping = mapping;
    rep.clean_flag.assign(ds.size(), true);
    for (std::size_t k = 0; k < train.size(); ++k) {
        std::size_t i = train[k];
        if (k < n_flip) {
            ds.observed_labels[i] = mapping[std::size_t(ds.clean_labels[i])];
            rep.clean_flag[i] = false;
        } else {
            ds.observed_labels[i] = ds.clean_labels[i];
        }
    }
    rep.realized_fraction = train.empty() ? 0.0 : double(n_flip) / double(train.size());
    return rep;
}

Dataset build_imbalanced(const Dataset& ds, double imbalance_factor, std::uint64_t seed) {
    if (imbalance_factor < 1.0) throw std::invalid_argument("build_imbalanced: factor must be >= 1");
    int C = ds.class_count;
    std::vector<std::vector<std::size_t>> per_class;
    per_class.resize(std::size_t(C));
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.splits[i] == Split::Train) per_class[std::size_t(ds.clean_labels[i])].push_back(i);

    std::size_t n_max = 0;
    for (const auto& v : per_class) n_max = std::max(n_max, v.size());
    double mu = 1.0 / imbalance_factor;

    std::mt19937_64 rng(seed);
    std::vector<bool> keep(ds.size(), true);
    for (int c = 0; c < C; ++c) {
        double target = double(n_max) * std::pow(mu, C > 1 ? double(c) / double(C - 1) : 0.0);
        std::size_t n_c = std::size_t(std::llround(target));
        if (n_c == 0) throw std::invalid_argument("build_imbalanced: smallest class rounds to 0");
        auto& members = per_class[std::size_t(c)];
        if (members.size() <= n_c) continue;
        std::shuffle(members.begin(), members.end(), rng);
        for (std::size_t k = n_c; k < members.size(); ++k) keep[members[k]] = false;
    }

    Dataset out;
    out.dim = ds.dim;
    out.class_count = ds.class_count;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (!keep[i]) continue;
        out.features.insert(out.features.end(), ds.sample(i), ds.sample(i) + ds.dim);
        out.observed_labels.push_back(ds.observed_labels[i]);
        out.clean_labels.push_back(ds.clean_labels[i]);
        out.splits.push_back(ds.splits[i]);
    }
    return out;
}

}  // namespace metasel
