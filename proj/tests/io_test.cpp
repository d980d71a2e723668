#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "metasel/io.hpp"

using namespace metasel;
namespace fs = std::filesystem;

namespace {

std::string temp_dir() {
    std::string d = (fs::temp_directory_path() / "metasel_io_test").string();
    fs::create_directories(d);
    return d;
}

Dataset small_toy(std::uint64_t seed) {
    GaussianMixtureConfig cfg;
    cfg.n = 40;
    cfg.seed = seed;
    return gen_gaussian_mixture(cfg);
}

}  // namespace

TEST_CASE("network round trip is bit exact") {
    std::string path = temp_dir() + "/net.bin";
    NetworkParams p = make_network({3, 7, 4}, Activation::Tanh, 12345);
    p.layers[0].w.a[0] = 1.0 / 3.0;  // a value with a non-terminating binary-print decimal
    save_network(p, path);
    NetworkParams q = load_network(path);
    CHECK(q.act == p.act);
    REQUIRE(q.layers.size() == p.layers.size());
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        CHECK(q.layers[l].w.a == p.layers[l].w.a);
        CHECK(q.layers[l].b == p.layers[l].b);
    }
    std::remove(path.c_str());
}

TEST_CASE("network loader rejects foreign files") {
    std::string path = temp_dir() + "/junk.bin";
    std::ofstream out(path, std::ios::binary);
    out << "definitely not a network";
    out.close();
    CHECK_THROWS(load_network(path));
    CHECK_THROWS(load_network(temp_dir() + "/does_not_exist.bin"));
    std::remove(path.c_str());
}

TEST_CASE("checkpoint store round trip preserves epochs, params, best") {
    std::string dir = temp_dir() + "/ckpt";
    CheckpointStore store;
    store.add(1, make_network({2, 3, 2}, Activation::Relu, 1), 0.5);
    store.add(3, make_network({2, 3, 2}, Activation::Relu, 2), 0.9);
    store.add(5, make_network({2, 3, 2}, Activation::Relu, 3), 0.7);
    save_checkpoint_store(store, dir);
    CheckpointStore back = load_checkpoint_store(dir);
    CHECK(back.best_epoch == 3);
    REQUIRE(back.entries.size() == 3);
    CHECK(back.entries[1].epoch == 3);
    CHECK(back.entries[1].val_acc == 0.9);
    CHECK(back.at_epoch(5).params.layers[0].w.a == store.at_epoch(5).params.layers[0].w.a);
    fs::remove_all(dir);
}

TEST_CASE("dataset text snapshot round trips exactly") {
    std::string path = temp_dir() + "/ds.txt";
    Dataset ds = small_toy(8);
    inject_uniform_noise(ds, 30.0, 3);
    save_dataset(ds, path);
    Dataset back = load_dataset(path);
    CHECK(back.dim == ds.dim);
    CHECK(back.class_count == ds.class_count);
    CHECK(back.observed_labels == ds.observed_labels);
    CHECK(back.clean_labels == ds.clean_labels);
    CHECK(back.splits == ds.splits);
    // precision-17 text keeps doubles exactly
    CHECK(back.features == ds.features);
    std::remove(path.c_str());
}

TEST_CASE("feature dump round trips layout, ids, values") {
    std::string path = temp_dir() + "/feat.bin";
    FeatureSet fsrc;
    fsrc.layout.method = FeatureMethod::Gbc;
    fsrc.layout.mode = GradMode::LabelFree;
    fsrc.layout.checkpoint_epochs = {4, 9};
    fsrc.layout.block_dims = {3, 2};
    fsrc.sample_ids = {10, 20, 30};
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd;
    for (int k = 0; k < 15; ++k) fsrc.values.push_back(nd(rng));
    save_features(fsrc, path);
    FeatureSet back = load_features(path);
    CHECK(back.layout == fsrc.layout);
    CHECK(back.sample_ids == fsrc.sample_ids);
    CHECK(back.values == fsrc.values);
    std::remove(path.c_str());
}

TEST_CASE("indices round trip") {
    std::string path = temp_dir() + "/idx.txt";
    std::vector<std::size_t> idx{5, 1, 99, 3};
    save_indices(idx, path);
    CHECK(load_indices(path) == idx);
    std::remove(path.c_str());
}

TEST_CASE("fnv1a: reference value and file agreement") {
    // FNV-1a 64-bit of empty input is the offset basis
    CHECK(fnv1a_bytes("", 0) == 14695981039346656037ULL);
    const char* s = "hello";
    std::uint64_t h = fnv1a_bytes(s, 5);

    std::string path = temp_dir() + "/hash.txt";
    std::ofstream out(path, std::ios::binary);
    out << "hello";
    out.close();
    CHECK(fnv1a_file(path) == h);
    std::remove(path.c_str());
}

TEST_CASE("manifest lists every recorded file with its current hash") {
    std::string dir = temp_dir();
    std::string f1 = dir + "/m1.txt", f2 = dir + "/m2.txt";
    std::ofstream(f1) << "alpha";
    std::ofstream(f2) << "beta";
    Manifest m;
    m.record(f1);
    m.record(f2, "sub/m2.txt");
    std::string mpath = dir + "/manifest.txt";
    m.save(mpath);

    std::ifstream in(mpath);
    std::string name, hash;
    in >> name >> hash;
    CHECK(name == "m1.txt");
    char* end = nullptr;
    CHECK(std::strtoull(hash.c_str(), &end, 16) == fnv1a_file(f1));
    in >> name >> hash;
    CHECK(name == "sub/m2.txt");
    CHECK(std::strtoull(hash.c_str(), &end, 16) == fnv1a_file(f2));
    std::remove(f1.c_str());
    std::remove(f2.c_str());
    std::remove(mpath.c_str());
}
