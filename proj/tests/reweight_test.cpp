#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "metasel/reweight.hpp"

using namespace metasel;

namespace {

Dataset small_toy(std::size_t n, std::uint64_t seed) {
    GaussianMixtureConfig cfg;
    cfg.n = n;
    cfg.seed = seed;
    return gen_gaussian_mixture(cfg);
}

double meta_mean_loss(const NetworkParams& p, const Dataset& ds, const std::vector<std::size_t>& meta) {
    double s = 0.0;
    for (std::size_t m : meta)
        s += cross_entropy(forward(p, ds.sample_vec(m)).logits(), ds.clean_labels[m]);
    return s / double(meta.size());
}

}  // namespace

TEST_CASE("virtual update subtracts the weighted mean gradient, params untouched") {
    Dataset ds = small_toy(60, 2);
    NetworkParams params = make_network({2, 5, 2}, Activation::Tanh, 4);
    NetworkParams before = params;

    std::vector<std::size_t> batch{0, 1, 2, 3};
    std::vector<LayeredGradient> grads;
    for (std::size_t j : batch)
        grads.push_back(per_sample_gradient(params, ds.sample_vec(j), ds.observed_labels[j], GradMode::Full));
    std::vector<double> w{0.5, 0.0, 1.0, 0.25};
    double alpha = 0.05;

    NetworkParams virt = virtual_update(params, grads, w, alpha);
    CHECK(params.layers[0].w.a == before.layers[0].w.a);

    for (std::size_t l = 0; l < params.layers.size(); ++l)
        for (std::size_t k = 0; k < params.layers[l].w.a.size(); ++k) {
            double expect = params.layers[l].w.a[k];
            for (std::size_t j = 0; j < batch.size(); ++j)
                expect -= alpha / 4.0 * w[j] * grads[j].layers[l].w.a[k];
            CHECK(virt.layers[l].w.a[k] == doctest::Approx(expect).epsilon(1e-13));
        }
}

TEST_CASE("meta weight gradient equals the scaled inner-product sum and the FD oracle") {
    Dataset ds = small_toy(80, 5);
    NetworkParams params = make_network({2, 6, 2}, Activation::Tanh, 7);

    std::vector<std::size_t> batch{3, 4, 5, 6, 7};
    std::vector<std::size_t> meta{0, 1};
    double alpha = 0.05, eta = 2.0;
    std::size_t n = batch.size();

    std::vector<LayeredGradient> grads;
    for (std::size_t j : batch)
        grads.push_back(per_sample_gradient(params, ds.sample_vec(j), ds.observed_labels[j], GradMode::Full));
    std::vector<double> w(n, 0.5);
    NetworkParams virt = virtual_update(params, grads, w, alpha);
    std::vector<LayeredGradient> meta_grads;
    for (std::size_t m : meta)
        meta_grads.push_back(per_sample_gradient(virt, ds.sample_vec(m), ds.clean_labels[m], GradMode::Full));

    std::vector<double> delta = meta_weight_gradient(meta_grads, grads, eta, alpha);

    // direct-summation oracle
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (const auto& mg : meta_grads) s += layered_dot(mg, grads[j]);
        CHECK(delta[j] == doctest::Approx(eta * alpha / (double(n) * 2.0) * s).epsilon(1e-13));
    }

    // finite-difference oracle: delta_j = -eta * d/dw_j meanLoss_meta(virtual(w))
    double eps = 1e-6;
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<double> wp = w, wm = w;
        wp[j] += eps;
        wm[j] -= eps;
        double up = meta_mean_loss(virtual_update(params, grads, wp, alpha), ds, meta);
        double dn = meta_mean_loss(virtual_update(params, grads, wm, alpha), ds, meta);
        double fd = (up - dn) / (2 * eps);
        double scale = std::max(std::fabs(delta[j]), 1e-8);
        CHECK(std::fabs(delta[j] - (-eta * fd)) / scale < 1e-4);
    }
}

TEST_CASE("shu rule clamps into [0,1]") {
    std::vector<double> w{0.1, 0.9, 0.5, 0.0};
    apply_weight_update_shu(w, {-0.5, 0.5, 0.2, -0.1});
    CHECK(w[0] == 0.0);
    CHECK(w[1] == 1.0);
    CHECK(w[2] == doctest::Approx(0.7));
    CHECK(w[3] == 0.0);
    std::vector<double> bad{0.5};
    CHECK_THROWS(apply_weight_update_shu(bad, {0.1, 0.2}));
}

TEST_CASE("ren rule normalizes positives and falls back to uniform") {
    std::vector<double> w = apply_weight_update_ren({0.2, -1.0, 0.6, 0.0});
    CHECK(w[0] == doctest::Approx(0.25));
    CHECK(w[1] == 0.0);
    CHECK(w[2] == doctest::Approx(0.75));
    CHECK(w[3] == 0.0);

    std::vector<double> uniform = apply_weight_update_ren({-1.0, -2.0, 0.0});
    for (double v : uniform) CHECK(v == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("weighted step equals an sgd step on the weighted mean gradient") {
    Dataset ds = small_toy(40, 8);
    NetworkParams a = make_network({2, 4, 2}, Activation::Relu, 3);
    NetworkParams b = a;

    std::vector<LayeredGradient> grads;
    for (std::size_t j : {0, 1, 2})
        grads.push_back(per_sample_gradient(a, ds.sample_vec(j), ds.observed_labels[j], GradMode::Full));
    std::vector<double> w{0.2, 1.0, 0.0};

    SgdState sa;
    weighted_step(a, grads, w, 0.1, 0.9, 0.0, sa);

    LayeredGradient mean = grads[0];
    for (std::size_t l = 0; l < mean.layers.size(); ++l) {
        for (std::size_t k = 0; k < mean.layers[l].w.a.size(); ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j < 3; ++j) s += w[j] * grads[j].layers[l].w.a[k] / 3.0;
            mean.layers[l].w.a[k] = s;
        }
        for (std::size_t k = 0; k < mean.layers[l].b.size(); ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j < 3; ++j) s += w[j] * grads[j].layers[l].b[k] / 3.0;
            mean.layers[l].b[k] = s;
        }
    }
    SgdState sb;
    sgd_step(b, mean, 0.1, 0.9, 0.0, sb);
    for (std::size_t l = 0; l < a.layers.size(); ++l)
        for (std::size_t k = 0; k < a.layers[l].w.a.size(); ++k)
            CHECK(a.layers[l].w.a[k] == doctest::Approx(b.layers[l].w.a[k]).epsilon(1e-14));
}

TEST_CASE("run_meta_reweighting: shape, determinism, weight bounds") {
    Dataset ds = small_toy(120, 12);
    inject_uniform_noise(ds, 30.0, 5);
    ArchConfig arch;
    arch.hidden = {8};
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 16;
    cfg.seed = 9;

    std::vector<std::size_t> meta;
    auto train = ds.indices_of(Split::Train);
    meta.assign(train.begin(), train.begin() + 3);

    RunArtifacts a = run_meta_reweighting(arch, cfg, ds, meta);
    RunArtifacts b = run_meta_reweighting(arch, cfg, ds, meta);
    CHECK(a.metrics.size() == 4);
    CHECK(a.weight_history.size() == 4);
    CHECK(a.checkpoints.entries.size() == 4);
    CHECK(a.final_params.layers[0].w.a == b.final_params.layers[0].w.a);
    CHECK(a.weight_history.back() == b.weight_history.back());

    for (const auto& snap : a.weight_history)
        for (double w : snap) {
            CHECK(w >= 0.0);
            CHECK(w <= 1.0);
        }
    // meta samples carry no pool weight
    for (std::size_t m : meta) CHECK(a.weight_history.back()[m] == 0.0);

    cfg.seed = 10;
    RunArtifacts c = run_meta_reweighting(arch, cfg, ds, meta);
    CHECK(a.final_params.layers[0].w.a != c.final_params.layers[0].w.a);
}

TEST_CASE("learning actually reduces loss on the clean toy problem") {
    Dataset ds = small_toy(300, 33);
    ArchConfig arch;
    arch.hidden = {8};
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.batch_size = 32;
    cfg.weight_lr = 0.0;  // plain uniform-weight training
    cfg.weight_init = 1.0;
    cfg.seed = 2;
    RunArtifacts art = run_meta_reweighting(arch, cfg, ds, {});
    CHECK(art.metrics.back().mean_loss < art.metrics.front().mean_loss);
    CHECK(art.metrics.back().test_acc > 0.9);
}

TEST_CASE("meta samples must come from the train split") {
    Dataset ds = small_toy(60, 3);
    ArchConfig arch;
    TrainConfig cfg;
    cfg.epochs = 1;
    std::size_t test_idx = ds.indices_of(Split::Test).front();
    CHECK_THROWS(run_meta_reweighting(arch, cfg, ds, {test_idx}));
}

TEST_CASE("divergence guard throws instead of producing garbage") {
    Dataset ds = small_toy(80, 4);
    ArchConfig arch;
    arch.hidden = {8};
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.lr = 1e6;  // absurd step size
    cfg.weight_lr = 0.0;
    cfg.weight_init = 1.0;
    cfg.divergence_limit = 1e4;
    CHECK_THROWS(run_meta_reweighting(arch, cfg, ds, {}));
}

TEST_CASE("finetune mode trains on the meta set alone") {
    Dataset ds = small_toy(100, 6);
    ArchConfig arch;
    arch.hidden = {6};
    TrainConfig cfg;
    cfg.epochs = 40;
    cfg.finetune_only = true;
    auto train = ds.indices_of(Split::Train);
    std::vector<std::size_t> meta(train.begin(), train.begin() + 10);
    RunArtifacts art = run_meta_reweighting(arch, cfg, ds, meta);
    CHECK(art.metrics.back().mean_loss < art.metrics.front().mean_loss);
    CHECK_THROWS(run_meta_reweighting(arch, cfg, ds, {}));
}

TEST_CASE("warmup picks a sorted random meta subset of the train split") {
    Dataset ds = small_toy(150, 7);
    ArchConfig arch;
    arch.hidden = {4};
    TrainConfig cfg;
    cfg.epochs = 2;
    WarmupResult wr = warmup(arch, cfg, ds, 5, 77);
    CHECK(wr.meta_indices.size() == 5);
    CHECK(std::is_sorted(wr.meta_indices.begin(), wr.meta_indices.end()));
    for (std::size_t m : wr.meta_indices) CHECK(ds.splits[m] == Split::Train);
    WarmupResult again = warmup(arch, cfg, ds, 5, 77);
    CHECK(wr.meta_indices == again.meta_indices);
    CHECK_THROWS(warmup(arch, cfg, ds, ds.indices_of(Split::Train).size(), 1));
}

TEST_CASE("accuracy_on rejects empty splits") {
    Dataset ds = small_toy(50, 9);
    NetworkParams p = make_network({2, 2}, Activation::Relu, 1);
    CHECK_THROWS(accuracy_on(p, ds, Split::MetaCandidate));
}
